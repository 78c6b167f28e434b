"""File formats: PFM float maps, boundary JSON, label PNGs with a palette sidecar."""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from PIL import Image

from .boundary import BoundaryVector
from .labeling import CLASS_NAMES

_MAX_PIXELS = 1 << 28


class FormatError(ValueError):
    """A file exists but its content violates the expected format."""

    def __init__(self, path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def write_pfm(path: Path | str, grid: np.ndarray) -> None:
    """Write a 1- or 3-channel grid as little-endian PFM, rows bottom to top."""
    data = np.asarray(grid)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise FormatError(path, f"PFM holds 1 or 3 channels, got shape {data.shape}")
    h, w = data.shape[:2]
    payload = np.flipud(data.astype("<f4", copy=False))
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(b"%d %d\n" % (w, h))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(payload).tobytes())


_TOKEN = re.compile(rb"\S+")


def read_pfm(path: Path | str) -> np.ndarray:
    """Read a PFM file into a float32 ``(H, W)`` or ``(H, W, 3)`` array, top row first."""
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    # header: magic, width, height, scale, each followed by whitespace
    while len(tokens) < 4:
        m = _TOKEN.search(raw, pos)
        if m is None:
            raise FormatError(path, f"header ends early at byte {len(raw)}")
        tokens.append(m.group())
        pos = m.end()
    if pos >= len(raw) or raw[pos:pos + 1] not in (b"\n", b" ", b"\r", b"\t"):
        raise FormatError(path, f"malformed header near byte {pos}")
    pos += 1
    magic, ws, hs, ss = tokens
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise FormatError(path, f"bad magic {magic!r}, expected b'PF' or b'Pf'")
    try:
        w, h, scale = int(ws), int(hs), float(ss)
    except ValueError:
        raise FormatError(path, f"malformed header fields {ws!r} {hs!r} {ss!r}") from None
    if w <= 0 or h <= 0 or scale == 0 or not math.isfinite(scale):
        raise FormatError(path, f"invalid dimensions/scale {w}x{h}, scale {scale}")
    if w * h * channels > _MAX_PIXELS:
        raise FormatError(path, f"dimensions {w}x{h}x{channels} overflow the size limit")
    dtype = "<f4" if scale < 0 else ">f4"
    need = w * h * channels * 4
    have = len(raw) - pos
    if have < need:
        raise FormatError(path, f"truncated payload: need {need} bytes from byte offset {pos}, found {have}")
    data = np.frombuffer(raw, dtype=dtype, count=w * h * channels, offset=pos)
    shape = (h, w, 3) if channels == 3 else (h, w)
    data = np.flipud(data.reshape(shape)).astype(np.float32)
    return np.ascontiguousarray(data)


def boundary_to_dict(b: BoundaryVector) -> Dict[str, object]:
    return {
        "kind": b.kind,
        "width": b.width,
        "latitudes": [float(x) if ok else None for x, ok in zip(b.latitudes, b.valid)],
        "valid": [bool(v) for v in b.valid],
    }


def write_boundary(path: Path | str, b: BoundaryVector) -> None:
    Path(path).write_text(json.dumps(boundary_to_dict(b), indent=1) + "\n")


def boundary_from_dict(doc: Dict[str, object], source: str = "<boundary>") -> BoundaryVector:
    try:
        kind, width = doc["kind"], int(doc["width"])
        lats, valid = list(doc["latitudes"]), [bool(v) for v in doc["valid"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(source, f"boundary document missing or malformed field: {exc}") from None
    if len(lats) != width or len(valid) != width:
        raise FormatError(source, f"declared width {width} but got {len(lats)} latitudes, {len(valid)} flags")
    arr = np.array([np.nan if x is None else float(x) for x in lats])
    bad = [i for i, ok in enumerate(valid) if ok and not np.isfinite(arr[i])]
    if bad:
        raise FormatError(source, f"non-finite latitude on valid meridians {bad[:5]}")
    if kind not in ("top", "bottom"):
        raise FormatError(source, f"unknown boundary kind {kind!r}")
    return BoundaryVector(arr, np.array(valid, dtype=bool), kind)


def read_boundary(path: Path | str) -> BoundaryVector:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON: {exc}") from None
    return boundary_from_dict(doc, str(path))


def write_labels(path: Path | str, labels: np.ndarray, palette: Optional[Dict[int, str]] = None) -> None:
    """8-bit single channel PNG plus ``<name>.json`` naming each id."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise FormatError(path, "label ids must fit in 8 bits")
    Image.fromarray(labels.astype(np.uint8)).save(path, format="PNG")
    names = CLASS_NAMES if palette is None else palette
    sidecar = Path(path).with_suffix(".json")
    sidecar.write_text(json.dumps({str(k): v for k, v in sorted(names.items())}, indent=1) + "\n")


def read_labels(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "P", "I;16", "I"):
            raise FormatError(path, f"label image must be single channel, got mode {im.mode}")
        return np.asarray(im).astype(np.int64)


def read_color(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).astype(np.float64)


def write_color(path: Path | str, color: np.ndarray) -> None:
    arr = np.clip(np.rint(np.asarray(color, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def read_mask(path: Path | str) -> np.ndarray:
    """Boolean mask from a PFM (non-zero, finite) or PNG (non-zero) file."""
    p = Path(path)
    if p.suffix.lower() == ".pfm":
        m = read_pfm(p)
        if m.ndim == 3:
            m = m[..., 0]
        return np.isfinite(m) & (m != 0)
    with Image.open(p) as im:
        return np.asarray(im.convert("L")) > 0


def read_grid(path: Path | str) -> np.ndarray:
    return read_pfm(path).astype(np.float64)

