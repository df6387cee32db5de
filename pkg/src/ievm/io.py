"""File formats: labelled feature sets (CSV and binary) and the model
container.

CSV layout: header ``label,f0,f1,...,f{dim-1}``, one sample per row.

Binary feature layout (little-endian throughout): magic ``EVMF``, version
byte, u32 dimension, u64 record count, then per record a u32 label byte
length, the UTF-8 label, and ``dimension`` float32 values.

Model container: magic ``EVMM``, version byte, u32 JSON header length, the
header, a raw float64 payload (per EV: anchor, tail, shape, scale, update
radius; then per class its coverage sums), and a trailing CRC32 of
everything before it. Floats survive a save/load round trip bit for bit.
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .core import LabeledSample, WeibullParams
from .errors import DataFormatError
from .model import EVMConfig, EVMModel, ExtremeVector

FEATURE_MAGIC = b"EVMF"
MODEL_MAGIC = b"EVMM"
FORMAT_VERSION = 1

_FORMATS = ("csv", "binary")


def _check_format(fmt: str) -> str:
    if fmt not in _FORMATS:
        raise DataFormatError(f"format must be one of {_FORMATS}, got {fmt!r}")
    return fmt


def sniff_format(path: str | Path) -> str:
    """Detect a feature file's format from its magic bytes."""
    with open(path, "rb") as fh:
        return "binary" if fh.read(4) == FEATURE_MAGIC else "csv"


def load_features(path: str | Path, fmt: str | None = None) -> list[LabeledSample]:
    """Load a labelled feature set; malformed content raises
    :class:`DataFormatError` naming the offending record."""
    fmt = _check_format(fmt) if fmt else sniff_format(path)
    return _load_csv(path) if fmt == "csv" else _load_binary(path)


def save_features(
    samples: list[LabeledSample], path: str | Path, fmt: str = "csv"
) -> None:
    _check_format(fmt)
    if not samples:
        raise DataFormatError("refusing to write an empty feature set")
    dim = samples[0].features.shape[0]
    for i, s in enumerate(samples):
        if s.features.shape[0] != dim:
            raise DataFormatError(f"sample {i} has dimension {s.features.shape[0]}, expected {dim}")
    if fmt == "csv":
        _save_csv(samples, path, dim)
    else:
        _save_binary(samples, path, dim)


def _save_csv(samples: list[LabeledSample], path: str | Path, dim: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(dim)])
        for s in samples:
            writer.writerow([s.label] + [repr(float(v)) for v in s.features])


def _load_csv(path: str | Path) -> list[LabeledSample]:
    samples: list[LabeledSample] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
        except UnicodeDecodeError:
            raise DataFormatError(f"{path}: not a text file") from None
        if not header or header[0] != "label" or len(header) < 2:
            raise DataFormatError(f"{path}: expected header 'label,f0,...', got {header}")
        expected = ["label"] + [f"f{i}" for i in range(len(header) - 1)]
        if header != expected:
            raise DataFormatError(f"{path}: malformed header {header}")
        dim = len(header) - 1
        try:
            rows = enumerate(reader, start=2)
            for row_no, row in rows:
                if not row:
                    continue
                if len(row) != dim + 1:
                    raise DataFormatError(
                        f"{path}: row {row_no} has {len(row)} fields, expected {dim + 1}"
                    )
                try:
                    values = np.array([float(v) for v in row[1:]], dtype=np.float64)
                    samples.append(LabeledSample(values, row[0]))
                except ValueError as exc:
                    raise DataFormatError(f"{path}: row {row_no}: {exc}") from None
        except UnicodeDecodeError:
            raise DataFormatError(f"{path}: not a text file") from None
    if not samples:
        raise DataFormatError(f"{path}: no samples")
    return samples


def _save_binary(samples: list[LabeledSample], path: str | Path, dim: int) -> None:
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<B", FORMAT_VERSION))
        fh.write(struct.pack("<I", dim))
        fh.write(struct.pack("<Q", len(samples)))
        for s in samples:
            encoded = s.label.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(s.features.astype("<f4").tobytes())


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DataFormatError(f"{path}: truncated file while reading {what}")
    return data


def _load_binary(path: str | Path) -> list[LabeledSample]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path, "magic") != FEATURE_MAGIC:
            raise DataFormatError(f"{path}: not a binary feature file (bad magic)")
        (version,) = struct.unpack("<B", _read_exact(fh, 1, path, "version"))
        if version != FORMAT_VERSION:
            raise DataFormatError(f"{path}: unsupported version {version}")
        (dim,) = struct.unpack("<I", _read_exact(fh, 4, path, "dimension"))
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, path, "count"))
        if dim == 0:
            raise DataFormatError(f"{path}: zero dimension")
        samples: list[LabeledSample] = []
        for rec in range(count):
            (label_len,) = struct.unpack("<I", _read_exact(fh, 4, path, f"record {rec}"))
            try:
                label = _read_exact(fh, label_len, path, f"record {rec}").decode("utf-8")
            except UnicodeDecodeError:
                raise DataFormatError(f"{path}: record {rec}: label is not UTF-8") from None
            raw = _read_exact(fh, 4 * dim, path, f"record {rec}")
            values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            try:
                samples.append(LabeledSample(values, label))
            except ValueError as exc:
                raise DataFormatError(f"{path}: record {rec}: {exc}") from None
        if fh.read(1):
            raise DataFormatError(f"{path}: trailing bytes after {count} records")
    if not samples:
        raise DataFormatError(f"{path}: no samples")
    return samples


def convert_features(src: str | Path, dst: str | Path, to_fmt: str | None = None) -> str:
    """Convert between the CSV and binary feature formats. Returns the
    output format chosen (the opposite of the input when unspecified)."""
    src_fmt = sniff_format(src)
    if to_fmt is None:
        to_fmt = "binary" if src_fmt == "csv" else "csv"
    _check_format(to_fmt)
    save_features(load_features(src, src_fmt), dst, to_fmt)
    return to_fmt


def _config_dict(config: EVMConfig) -> dict:
    return {
        "tail_size": config.tail_size,
        "distance_multiplier": config.distance_multiplier,
        "metric": config.metric,
        "budget": config.budget,
        "rejection_threshold": config.rejection_threshold,
        "coverage_threshold": config.coverage_threshold,
        "bisection_tolerance": config.bisection_tolerance,
    }


def save_model(model: EVMModel, path: str | Path) -> None:
    """Serialise a model losslessly (64-bit floats end to end)."""
    dim = model.dimension if model.classes else 0
    header = {
        "version": FORMAT_VERSION,
        "config": _config_dict(model.config),
        "epoch": model.epoch,
        "dimension": dim,
        "classes": [
            {
                "label": label,
                "tail_sizes": [int(ev.tail.shape[0]) for ev in model.classes[label]],
            }
            for label in model.classes
        ],
    }
    payload = bytearray()
    for label in model.classes:
        for ev in model.classes[label]:
            payload += ev.anchor.astype("<f8").tobytes()
            payload += ev.tail.astype("<f8").tobytes()
            payload += struct.pack(
                "<ddd", ev.params.shape, ev.params.scale, ev.params.max_tail_distance
            )
        payload += np.asarray(model.coverage_sums[label], dtype="<f8").tobytes()

    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = (
        MODEL_MAGIC
        + struct.pack("<B", FORMAT_VERSION)
        + struct.pack("<I", len(head))
        + head
        + bytes(payload)
    )
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_model(path: str | Path) -> EVMModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 13 or blob[:4] != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a model file (bad magic)")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise DataFormatError(f"{path}: checksum mismatch (corrupted file)")
    version = blob[4]
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported model version {version}")
    (head_len,) = struct.unpack("<I", blob[5:9])
    try:
        header = json.loads(blob[9 : 9 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: bad header ({exc})") from None

    config = EVMConfig(**header["config"])
    dim = header["dimension"]
    offset = 9 + head_len
    payload = blob[:-4]

    def take(count: int) -> np.ndarray:
        nonlocal offset
        end = offset + 8 * count
        if end > len(payload):
            raise DataFormatError(f"{path}: truncated payload")
        arr = np.frombuffer(payload[offset:end], dtype="<f8").astype(np.float64)
        offset = end
        return arr

    classes: dict[str, list[ExtremeVector]] = {}
    sums: dict[str, np.ndarray] = {}
    for entry in header["classes"]:
        label = entry["label"]
        evs = []
        for tail_len in entry["tail_sizes"]:
            anchor = take(dim)
            tail = take(tail_len)
            shape, scale, radius = take(3)
            evs.append(
                ExtremeVector(
                    anchor=anchor,
                    label=label,
                    params=WeibullParams(
                        shape=float(shape),
                        scale=float(scale),
                        max_tail_distance=float(radius),
                    ),
                    tail=tail,
                )
            )
        classes[label] = evs
        sums[label] = take(len(evs))
    if offset != len(payload):
        raise DataFormatError(f"{path}: {len(payload) - offset} unread payload bytes")
    return EVMModel(classes=classes, coverage_sums=sums, config=config, epoch=header["epoch"])
