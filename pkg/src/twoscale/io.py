"""On-disk formats: raw float grids with JSON sidecars, 16-bit PGM, CSV tables."""

import csv
import json
import math
import os
import re

import numpy as np

from .scene import LatticeImage


def _sidecar(path):
    return str(path) + ".json"


def write_grid(path, values, meta):
    """Little-endian float64 grid at ``path`` plus ``path.json`` holding ``meta`` and the shape."""
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(values.tobytes())
    meta = dict(meta)
    meta["shape"] = list(values.shape)
    meta["dtype"] = "float64-le"
    with open(_sidecar(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)


def read_grid(path):
    with open(_sidecar(path)) as fh:
        meta = json.load(fh)
    data = np.fromfile(path, dtype="<f8")
    return data.reshape(meta["shape"]).astype(float), meta


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _pack_bits(mask):
    return np.packbits(np.asarray(mask, dtype=bool).ravel()).tobytes().hex()


def _unpack_bits(hexstr, shape):
    bits = np.unpackbits(np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8))
    return bits[: int(np.prod(shape))].reshape(shape).astype(bool)


def save_image(path, image):
    """Raw grid + sidecar with level, domain, lattice origin and the mask bits."""
    meta = {
        "kind": "lattice_image",
        "level": image.level,
        "domain": [list(d) for d in image.domain],
        "index0": list(image.index0),
        "mask": _pack_bits(image.mask),
    }
    if image.observed is not None:
        meta["observed"] = _pack_bits(image.observed)
    write_grid(path, image.values, meta)


def load_image(path):
    values, meta = read_grid(path)
    shape = values.shape
    mask = _unpack_bits(meta["mask"], shape)
    observed = _unpack_bits(meta["observed"], shape) if "observed" in meta else None
    domain = tuple(tuple(d) for d in meta["domain"])
    return LatticeImage(int(meta["level"]), values, mask, tuple(meta["index0"]), domain, observed)


def save_field(path, field):
    meta = {"kind": "two_scale_field", **field.params(), "index0": list(field.index0),
            "center": list(field.center), "mask": _pack_bits(field.mask), **field.meta}
    write_grid(path, field.values, meta)


def save_stack(path_prefix, stack):
    """One grid per channel, named ``<prefix>_<a><b>.grid``."""
    paths = []
    for label, grid in stack.channels.items():
        p = f"{path_prefix}_{label[0]}{label[1]}.grid"
        write_grid(p, grid, {"kind": "coefficients", "level": stack.level, "channel": list(label),
                             "weight": stack.weights[label], "index0": list(stack.index0),
                             "mask": _pack_bits(stack.mask)})
        paths.append(p)
    return paths


def write_pgm(path, values, lo=None, hi=None):
    """16-bit binary PGM; ``value = offset + scale * pixel`` is recorded in a comment.

    Array axis 0 (first coordinate) runs left to right, axis 1 bottom to top.
    """
    v = np.asarray(values, dtype=float)
    lo = float(np.min(v)) if lo is None else float(lo)
    hi = float(np.max(v)) if hi is None else float(hi)
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    pix = np.clip(np.rint((v - lo) / scale), 0, 65535).astype(">u2")
    raster = pix.T[::-1]  # rows = decreasing second coordinate
    with open(path, "wb") as fh:
        fh.write(f"P5\n# scale={scale!r} offset={lo!r}\n{raster.shape[1]} {raster.shape[0]}\n65535\n".encode())
        fh.write(np.ascontiguousarray(raster).tobytes())


def read_pgm(path):
    """Inverse of :func:`write_pgm` (returns float values with the recorded affine map)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos, comment = [], 0, ""
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comment += data[pos:end].decode()
            pos = end + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode())
        pos = end
    pos += 1
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    m = re.search(r"scale=(\S+) offset=(\S+)", comment)
    scale, offset = (float(m.group(1)), float(m.group(2))) if m else (1.0, 0.0)
    return offset + scale * raster[::-1].T.astype(float)


def write_csv(path, rows, fields):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in fields})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
