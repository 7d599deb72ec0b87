"""Image, depth, scene and CSV serialisation.

Scene directory layout::

    color.png            8-bit sRGB
    depth.pgm            16-bit binary PGM, millimetres, 0 = invalid
    mask_000.png ...     8-bit masks (0 / 255), one per instance
    scene.json           boxes, shapes, mask file names, metadata
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np
from PIL import Image

from .affinity_graph import Box, DepthMap
from .scene import Instance, Scene, srgb_to_lab

DEPTH_SCALE = 1000.0  # PGM units per metre
MAX_DEPTH_M = 65535 / DEPTH_SCALE


class SceneFormatError(ValueError):
    pass


def fmt(value) -> str:
    """Round-trippable text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(dest: str | Path | TextIO, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Header row then one line per row; ``dest`` is a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_rows(dest, header, rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


# -- PGM ----------------------------------------------------------------------


def write_pgm16(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if img.min(initial=0) < 0 or img.max(initial=0) > 65535:
        raise ValueError("values do not fit in 16 bits")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.astype(">u2").tobytes())


def _pgm_tokens(data: bytes):
    """Yield header tokens and finally the offset of the raster."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data)
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    n = w * h * np.dtype(dtype).itemsize
    raster = data[offset : offset + n]
    if len(raster) != n:
        raise ValueError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.uint16)


def read_image16(path: str | Path) -> np.ndarray:
    """16-bit single-channel image from PGM or PNG."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        return read_pgm(path)
    with Image.open(path) as im:
        arr = np.array(im)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image")
    return arr.astype(np.uint16)


# -- depth --------------------------------------------------------------------


def quantize_depth(depth: DepthMap) -> np.ndarray:
    vals = depth.values[depth.valid]
    if vals.size and (vals.min() <= 0.5 / DEPTH_SCALE or vals.max() > MAX_DEPTH_M):
        raise ValueError(f"depth must lie in (0.0005, {MAX_DEPTH_M}] m to be stored as 16-bit mm")
    q = np.zeros(depth.shape, dtype=np.uint16)
    q[depth.valid] = np.rint(vals * DEPTH_SCALE).astype(np.uint16)
    return q


def dequantize_depth(raw: np.ndarray) -> DepthMap:
    raw = np.asarray(raw)
    valid = raw > 0
    return DepthMap(np.where(valid, raw / DEPTH_SCALE, 0.0), valid)


def save_depth(path: str | Path, depth: DepthMap) -> None:
    write_pgm16(path, quantize_depth(depth))


def load_depth(path: str | Path) -> DepthMap:
    return dequantize_depth(read_image16(path))


# -- disparity ----------------------------------------------------------------


@dataclass(frozen=True)
class CameraParams:
    baseline: float  # metres
    focal_length: float  # pixels

    def __post_init__(self):
        if not (self.baseline > 0 and self.focal_length > 0):
            raise ValueError("baseline and focal length must be > 0")


CAMERA_PRESETS = {"cityscapes": CameraParams(0.209313, 2262.52)}


@dataclass(frozen=True)
class DisparityImage:
    """16-bit raw disparity: ``p > 0`` encodes ``(p - 1) / 256`` px, ``p == 0`` is invalid."""

    raw: np.ndarray

    def disparity(self) -> tuple[np.ndarray, np.ndarray]:
        raw = np.asarray(self.raw).astype(np.float64)
        valid = raw > 0
        return np.where(valid, (raw - 1.0) / 256.0, 0.0), valid


def disparity_to_depth(img: DisparityImage, cam: CameraParams) -> DepthMap:
    disp, valid = img.disparity()
    valid = valid & (disp > 0)
    depth = np.divide(cam.baseline * cam.focal_length, disp, out=np.zeros_like(disp), where=valid)
    return DepthMap(depth, valid)


# -- PNG ----------------------------------------------------------------------


def save_png(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(image)).save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im)


def to_gray8(values: np.ndarray) -> np.ndarray:
    """Min-max scale a float array to 8-bit grey; constant arrays map to 0."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.rint((v - lo) / (hi - lo) * 255).astype(np.uint8)


def save_binary_maps(out_dir: str | Path, maps: np.ndarray, stem: str = "affinity_dir", fmt_: str = "png") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(maps):
        img = (np.asarray(m) > 0).astype(np.uint8) * 255
        p = out / f"{stem}{i}.{fmt_}"
        if fmt_ == "pgm":
            h, w = img.shape
            p.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())
        else:
            save_png(p, img)
        paths.append(p)
    return paths


# -- scenes -------------------------------------------------------------------


def save_scene(scene: Scene, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_png(out / "color.png", scene.color)
    save_depth(out / "depth.pgm", scene.depth)
    instances = []
    for i, inst in enumerate(scene.instances):
        name = f"mask_{i:03d}.png"
        save_png(out / name, inst.gt_mask.astype(np.uint8) * 255)
        instances.append({"box": inst.box.to_list(), "shape": inst.shape, "mask": name})
    doc = {
        "height": int(scene.shape[0]),
        "width": int(scene.shape[1]),
        "box_format": "top,left,bottom,right (inclusive)",
        "depth_file": "depth.pgm",
        "depth_unit": "mm",
        "instances": instances,
        "meta": scene.meta,
    }
    (out / "scene.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def _need(path: Path) -> Path:
    if not path.is_file():
        raise SceneFormatError(f"missing scene file: {path}")
    return path


def load_scene(scene_dir: str | Path) -> Scene:
    d = Path(scene_dir)
    meta_path = _need(d / "scene.json")
    try:
        doc = json.loads(meta_path.read_text())
        h, w = int(doc["height"]), int(doc["width"])
        entries = doc["instances"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"corrupt scene file {meta_path}: {exc}") from exc

    def read(path: Path, loader):
        _need(path)
        try:
            return loader(path)
        except (OSError, ValueError) as exc:
            raise SceneFormatError(f"corrupt scene file {path}: {exc}") from exc

    color = read(d / "color.png", load_png)
    if color.shape != (h, w, 3):
        raise SceneFormatError(f"{d / 'color.png'}: expected {h}x{w} RGB, got {color.shape}")
    depth = read(d / doc.get("depth_file", "depth.pgm"), load_depth)
    if depth.shape != (h, w):
        raise SceneFormatError(f"{d / 'depth.pgm'}: expected {h}x{w}, got {depth.shape}")
    instances = []
    for e in entries:
        mpath = d / e["mask"]
        mask = read(mpath, load_png)
        if mask.shape != (h, w):
            raise SceneFormatError(f"{mpath}: expected {h}x{w}, got {mask.shape}")
        try:
            box = Box.from_list(e["box"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"corrupt box in {meta_path}: {exc}") from exc
        instances.append(Instance(mask > 0, box, str(e.get("shape", "unknown"))))
    return Scene(color=color, lab=srgb_to_lab(color), depth=depth, instances=instances, meta=doc.get("meta", {}))


def depth_quantization_error(depth: DepthMap) -> float:
    back = dequantize_depth(quantize_depth(depth))
    err = np.abs(back.values - depth.values)[depth.valid]
    return float(err.max()) if err.size else 0.0

