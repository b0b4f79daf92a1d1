"""Frame loading and saving: PGM (P2/P5) natively, PNG via Pillow, with
natural-order directory listing."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .raster import GrayImage, luma


def natural_key(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]


def list_frames(directory) -> list[Path]:
    d = Path(directory)
    paths = [p for p in d.iterdir() if p.suffix.lower() in (".pgm", ".png")]
    return sorted(paths, key=lambda p: natural_key(p.name))


def read_pgm(path) -> GrayImage:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, skipping comments
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", raw[pos:])
        if m is None:
            raise ValueError(f"truncated PGM header in {path}")
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        # exactly one whitespace byte separates the header from the raster
        data = np.frombuffer(raw, dtype=dtype, count=w * h, offset=pos + 1)
    elif magic == b"P2":
        data = np.array(raw[pos:].split()[: w * h], dtype=np.float64)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r} in {path}")
    arr = data.astype(np.float64).reshape(h, w) / maxval
    return GrayImage(arr)


def write_pgm(img: GrayImage, path) -> None:
    arr = np.round(img.data * 255.0).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + arr.tobytes())


def read_image(path) -> GrayImage:
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    from PIL import Image

    with Image.open(p) as im:
        a = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return GrayImage(np.clip(luma(a), 0.0, 1.0))


def load_sequence(directory) -> list[GrayImage]:
    paths = list_frames(directory)
    if not paths:
        raise FileNotFoundError(f"no PGM/PNG frames in {directory}")
    return [read_image(p) for p in paths]
