import logging.handlers
import os


class Logger:
    Logger = None

    def __init__(self, logging_service="consensus_pose", log_dir="logs", console=True):
        # Logger setup
        self.Logger = logging.getLogger(f"{logging_service}_logger")
        self.Logger.setLevel(logging.DEBUG)
        self.Logger.propagate = False
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

        # repeated construction must not stack handlers on the shared named logger
        for handler in list(self.Logger.handlers):
            self.Logger.removeHandler(handler)
            handler.close()

        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            # default is "logs/consensus_pose.log"
            fh = logging.FileHandler(os.path.join(log_dir, f"{logging_service}.log"))
            fh.setLevel(logging.DEBUG)
            fh.setFormatter(formatter)
            self.Logger.addHandler(fh)

        if console:
            # logging to console (stderr keeps stdout for command output)
            ch = logging.StreamHandler()
            ch.setLevel(logging.INFO)
            ch.setFormatter(formatter)
            self.Logger.addHandler(ch)

        if not self.Logger.handlers:
            self.Logger.addHandler(logging.NullHandler())

    def log(self, message, level="info"):
        if level == "info":
            self.Logger.info(message)
        elif level == "warning":
            self.Logger.warning(message)
        elif level == "error":
            self.Logger.error(message)
        elif level == "debug":
            self.Logger.debug(message)

    def info(self, message):
        self.log(message, "info")

    def warning(self, message):
        self.log(message, "warning")

    def error(self, message):
        self.log(message, "error")

    def debug(self, message):
        self.log(message, "debug")
