from typing import Optional


class PoseError(Exception):
    """Root of every error raised by consensus_pose."""

    def info(self):
        return {"type": type(self).__name__, "message": str(self)}


class ConfigError(PoseError, ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key

    def info(self):
        return {**super().info(), "key": self.key}


class GridError(PoseError, ValueError):
    pass


class ShapeError(PoseError, ValueError):
    pass


class NoEvidenceError(PoseError):
    pass


class InstanceTooLargeError(PoseError):
    pass


class StageError(PoseError):
    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage

    def info(self):
        return {**super().info(), "stage": self.stage}


class FormatError(PoseError):
    """
    Raised while parsing one of the binary or JSON formats. `offset` is the byte
    offset (or line number for JSON lines files) where parsing stopped.
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
        self.offset = offset

    def info(self):
        return {**super().info(), "offset": self.offset}
