"""
File formats.

Voter-field file (little-endian):
    magic "VFLD", u16 version (1), u16 reserved,
    u32 image height, u32 image width, u32 stride, u32 num_classes,
    u32 num_keypoints, u32 num_rings, u32 angular_bins, f64 angular_offset,
    f64 x (num_rings + 1) ring boundaries, i32 x num_keypoints keypoint ids,
    then per keypoint the row-major float32 cells x classes payload.
    Values are stored as float32 and accumulated in float64 by every reader.

Float-grid container (little-endian):
    magic "FGRD", u16 version (1), u32 record count, then per record:
    u8 dtype code (1 = float32, 2 = float64), u8 ndim, u32 x ndim shape,
    u32 metadata length, UTF-8 JSON metadata, row-major payload.

Poses and annotations are JSON lines with (row, col) pixel coordinates.
"""
import json
import struct
from typing import Dict, IO, Iterable, List, Tuple

import numpy as np

from .exceptions import FormatError, GridError
from .models import (
    Annotation,
    EnergyModel,
    Heatmap,
    JointTable,
    LogPolarGrid,
    PoseEstimate,
    PriorTable,
    Skeleton,
    VoterField,
    VoterFieldFile,
)
from .skeleton import ANNOTATED_NAMES

FIELD_MAGIC = b"VFLD"
GRID_MAGIC = b"FGRD"
VERSION = 1

_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise FormatError(f"truncated {what}: need {size} bytes, {len(self.data) - self.offset} left", self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype: np.dtype, shape: Tuple[int, ...], what: str) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * dtype.itemsize, what)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    def magic(self, expected: bytes):
        found = self.take(len(expected), "magic")
        if found != expected:
            raise FormatError(f"bad magic {found!r}, expected {expected!r}", 0)

    def version(self):
        start = self.offset
        (version,) = self.unpack("<H", "version")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", start)


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


# Voter fields


def encode_fields(fields: VoterFieldFile) -> bytes:
    grid = fields.grid
    height, width = fields.image_size
    out = [
        FIELD_MAGIC,
        struct.pack(
            "<HHIIIIIIId",
            VERSION,
            0,
            height,
            width,
            fields.stride,
            grid.num_classes,
            len(fields.fields),
            grid.num_rings,
            grid.angular_bins,
            grid.angular_offset,
        ),
        struct.pack(f"<{grid.num_rings + 1}d", *grid.ring_boundaries),
        struct.pack(f"<{len(fields.fields)}i", *fields.keypoint_ids),
    ]
    for voter_field in fields.fields:
        out.append(np.ascontiguousarray(voter_field.values, dtype="<f4").tobytes())
    return b"".join(out)


def decode_fields(data: bytes) -> VoterFieldFile:
    reader = _Reader(data)
    reader.magic(FIELD_MAGIC)
    reader.version()
    header_at = reader.offset
    (_, height, width, stride, num_classes, count, num_rings, angular_bins, angular_offset) = reader.unpack(
        "<HIIIIIIId", "header"
    )
    boundaries = reader.unpack(f"<{num_rings + 1}d", "ring boundaries")
    try:
        grid = LogPolarGrid(num_rings, angular_bins, boundaries, angular_offset)
    except GridError as e:
        raise FormatError(f"invalid grid in header: {e}", header_at) from e
    if grid.num_classes != num_classes:
        raise FormatError(f"header declares {num_classes} classes, grid has {grid.num_classes}", header_at)
    if stride == 0:
        raise FormatError("stride must be positive", header_at)
    ids = reader.unpack(f"<{count}i", "keypoint ids")

    shape = (-(-height // stride), -(-width // stride), num_classes)
    fields = []
    for kid in ids:
        values = reader.array(_DTYPES[1], shape, f"payload of keypoint {kid}")
        fields.append(VoterField(keypoint_id=kid, values=values, stride=stride, grid=grid, image_size=(height, width)))
    if reader.offset != len(data):
        raise FormatError(f"{len(data) - reader.offset} trailing bytes", reader.offset)
    return VoterFieldFile(image_size=(height, width), stride=stride, grid=grid, fields=fields)


def save_fields(path, fields: VoterFieldFile):
    with open(path, "wb") as fh:
        fh.write(encode_fields(fields))


def load_fields(path) -> VoterFieldFile:
    return decode_fields(_read(path))


# Float-grid container


def encode_grids(records: Iterable[Tuple[Dict, np.ndarray]]) -> bytes:
    records = list(records)
    out = [GRID_MAGIC, struct.pack("<HI", VERSION, len(records))]
    for metadata, array in records:
        array = np.asarray(array)
        dtype = np.dtype("<f4") if array.dtype == np.float32 else np.dtype("<f8")
        meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
        out.append(struct.pack(f"<BB{array.ndim}I", _CODES[dtype], array.ndim, *array.shape))
        out.append(struct.pack("<I", len(meta)))
        out.append(meta)
        out.append(np.ascontiguousarray(array, dtype=dtype).tobytes())
    return b"".join(out)


def decode_grids(data: bytes) -> List[Tuple[Dict, np.ndarray]]:
    reader = _Reader(data)
    reader.magic(GRID_MAGIC)
    reader.version()
    (count,) = reader.unpack("<I", "record count")
    records = []
    for n in range(count):
        start = reader.offset
        code, ndim = reader.unpack("<BB", f"record {n} header")
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}", start)
        shape = reader.unpack(f"<{ndim}I", f"record {n} shape")
        (length,) = reader.unpack("<I", f"record {n} metadata length")
        meta_at = reader.offset
        try:
            metadata = json.loads(reader.take(length, f"record {n} metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"record {n} metadata is not JSON: {e}", meta_at) from e
        records.append((metadata, reader.array(_DTYPES[code], tuple(shape), f"record {n} payload")))
    if reader.offset != len(data):
        raise FormatError(f"{len(data) - reader.offset} trailing bytes", reader.offset)
    return records


def save_grids(path, records: Iterable[Tuple[Dict, np.ndarray]]):
    with open(path, "wb") as fh:
        fh.write(encode_grids(records))


def load_grids(path) -> List[Tuple[Dict, np.ndarray]]:
    return decode_grids(_read(path))


def heatmap_record(heatmap: Heatmap, name: str = None):
    metadata = {
        "kind": "heatmap",
        "keypoint_id": heatmap.keypoint_id,
        "offset": list(heatmap.offset),
        "stride": heatmap.stride,
    }
    if name:
        metadata["name"] = name
    return metadata, np.asarray(heatmap.values, dtype=np.float64)


def joint_record(joint: JointTable):
    metadata = {
        "kind": "joint",
        "pair": list(joint.pair),
        "reach": joint.reach,
        "factor": joint.factor,
        "normalization": joint.normalization,
    }
    return metadata, joint.values


def prior_record(prior: PriorTable):
    metadata = {"kind": "prior", **prior.info()}
    return metadata, prior.values


def _expect(metadata: Dict, kind: str):
    if metadata.get("kind") != kind:
        raise FormatError(f"expected a {kind} record, found {metadata.get('kind')!r}")


def heatmap_from_record(metadata: Dict, values: np.ndarray) -> Heatmap:
    _expect(metadata, "heatmap")
    return Heatmap(
        keypoint_id=metadata["keypoint_id"],
        values=values,
        offset=tuple(metadata["offset"]),
        stride=metadata["stride"],
    )


def joint_from_record(metadata: Dict, values: np.ndarray) -> JointTable:
    _expect(metadata, "joint")
    return JointTable(
        pair=tuple(metadata["pair"]),
        values=values,
        reach=metadata["reach"],
        factor=metadata["factor"],
        normalization=metadata["normalization"],
    )


def prior_from_record(metadata: Dict, values: np.ndarray) -> PriorTable:
    _expect(metadata, "prior")
    return PriorTable(
        pair=tuple(metadata["pair"]),
        values=values,
        radius=metadata["radius"],
        factor=metadata["factor"],
        sigma=metadata["sigma"],
        floor=metadata["floor"],
        samples=metadata.get("samples", 0),
        clamped=metadata.get("clamped", 0),
    )


def save_heatmaps(path, heatmaps: Iterable[Heatmap], skeleton: Skeleton = None):
    save_grids(
        path,
        (heatmap_record(h, skeleton[h.keypoint_id].name if skeleton is not None else None) for h in heatmaps),
    )


def load_heatmaps(path) -> List[Heatmap]:
    return [heatmap_from_record(metadata, values) for metadata, values in load_grids(path)]


def save_priors(path, priors: Dict[Tuple[int, int], PriorTable]):
    save_grids(path, (prior_record(priors[pair]) for pair in sorted(priors)))


def load_priors(path) -> Dict[Tuple[int, int], PriorTable]:
    priors = {}
    for metadata, values in load_grids(path):
        prior = prior_from_record(metadata, values)
        priors[prior.pair] = prior
    return priors


# JSON lines


def _lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield number, json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"line {number} is not JSON: {e.msg}", number) from e


def _point(value, number: int, name: str):
    if value is None:
        return [np.nan, np.nan]
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise FormatError(f"line {number}: {name} must be [row, col] or null", number)
    return [float(value[0]), float(value[1])]


def annotation_to_json(annotation: Annotation) -> Dict:
    keypoints, visible = {}, {}
    for n, name in enumerate(ANNOTATED_NAMES):
        point = annotation.points[n]
        keypoints[name] = None if np.isnan(point).any() else [float(point[0]), float(point[1])]
        visible[name] = bool(annotation.visible[n])
    head = None
    if annotation.head is not None and not np.isnan(annotation.head).any():
        head = [[float(v) for v in row] for row in annotation.head]
    return {
        "person_id": annotation.person_id,
        "keypoints": keypoints,
        "visible": visible,
        "head": head,
        "scale": annotation.scale,
        "position": list(annotation.position) if annotation.position is not None else None,
    }


def annotation_from_json(record: Dict, number: int = 0) -> Annotation:
    if not isinstance(record, dict) or "keypoints" not in record:
        raise FormatError(f"line {number}: annotation needs a keypoints object", number)
    keypoints = record["keypoints"]
    unknown = set(keypoints) - set(ANNOTATED_NAMES)
    if unknown:
        raise FormatError(f"line {number}: unknown keypoints {sorted(unknown)}", number)
    points = np.array([_point(keypoints.get(name), number, name) for name in ANNOTATED_NAMES])
    labeled = ~np.isnan(points).any(axis=1)
    flags = record.get("visible") or {}
    visible = np.array([bool(flags.get(name, labeled[n])) and labeled[n] for n, name in enumerate(ANNOTATED_NAMES)])
    head = record.get("head")
    if head is not None:
        if len(head) != 2:
            raise FormatError(f"line {number}: head must hold two corner points", number)
        head = np.array([_point(corner, number, "head") for corner in head])
    position = record.get("position")
    return Annotation(
        person_id=str(record.get("person_id", number)),
        points=points,
        visible=visible,
        head=head,
        scale=record.get("scale"),
        position=tuple(_point(position, number, "position")) if position is not None else None,
    )


def save_annotations(path, annotations: Iterable[Annotation]):
    with open(path, "w", encoding="utf-8") as fh:
        for annotation in annotations:
            fh.write(json.dumps(annotation_to_json(annotation)) + "\n")


def load_annotations(path) -> List[Annotation]:
    return [annotation_from_json(record, number) for number, record in _lines(path)]


def save_poses(path, poses: Iterable[PoseEstimate], skeleton: Skeleton):
    with open(path, "w", encoding="utf-8") as fh:
        for pose in poses:
            fh.write(json.dumps(pose.info(skeleton)) + "\n")


def load_poses(path, skeleton: Skeleton) -> List[PoseEstimate]:
    poses = []
    for number, record in _lines(path):
        keypoints = {}
        for name, entry in (record.get("keypoints") or {}).items():
            if name not in skeleton:
                raise FormatError(f"line {number}: unknown keypoint {name!r}", number)
            try:
                keypoints[skeleton[name].id] = (float(entry["row"]), float(entry["col"]), float(entry["confidence"]))
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"line {number}: malformed keypoint {name!r}", number) from e
        poses.append(
            PoseEstimate(keypoints=keypoints, person_id=str(record.get("person_id", "")), metadata=record.get("metadata", {}))
        )
    return poses


# Energy model text dump


def dump_model_text(model: EnergyModel, stream: IO[str]):
    """Nodes with label cells and unaries, then every edge table, as whitespace text."""

    def row(values):
        return " ".join(repr(float(v)) for v in values)

    stream.write(f"model nodes {len(model.nodes)} edges {len(model.binaries)} lambda {model.lam!r} eps {model.eps!r}\n")
    for node in model.nodes:
        stream.write(f"node {node} labels {model.num_labels(node)}\n")
        if node in model.labels:
            cells = np.asarray(model.labels[node]).reshape(-1, 2)
            stream.write("cells " + " ".join(f"{int(r)},{int(c)}" for r, c in cells) + "\n")
        stream.write("unary " + row(model.unaries[node]) + "\n")
    for (i, j), table in model.binaries.items():
        stream.write(f"edge {i} {j} shape {table.shape[0]} {table.shape[1]}\n")
        for values in table:
            stream.write(row(values) + "\n")


def load_model_text(stream: IO[str]) -> EnergyModel:
    """Read a dump written by dump_model_text."""
    lines = [line.split() for line in stream if line.strip()]
    if not lines or lines[0][0] != "model":
        raise FormatError("model dump must start with a model line", 1)
    head = lines[0]
    lam, eps = float(head[6]), float(head[8])
    nodes, labels, unaries, binaries = [], {}, {}, {}
    n = 1
    try:
        while n < len(lines):
            words = lines[n]
            if words[0] == "node":
                node = int(words[1])
                nodes.append(node)
                n += 1
                if lines[n][0] == "cells":
                    labels[node] = np.array([[int(v) for v in cell.split(",")] for cell in lines[n][1:]])
                    n += 1
                unaries[node] = np.array([float(v) for v in lines[n][1:]])
                n += 1
            elif words[0] == "edge":
                i, j, rows = int(words[1]), int(words[2]), int(words[4])
                binaries[(i, j)] = np.array([[float(v) for v in line] for line in lines[n + 1:n + 1 + rows]])
                n += 1 + rows
            else:
                raise FormatError(f"unexpected record {words[0]!r}", n + 1)
        return EnergyModel(nodes=nodes, labels=labels, unaries=unaries, binaries=binaries, lam=lam, eps=eps)
    except (IndexError, ValueError) as e:
        raise FormatError(f"malformed model dump: {e}", n + 1) from e
