"""Field files: CSV (``x,y,re,im``) and the ``GAF1`` little-endian binary format.

Both writers emit a JSON sidecar next to the data file (``<path>.json``)
holding the weight and, for ω potentials, the anchor node and gauge.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grid import SCALAR, ComplexField, FieldWeight, GridDomain

MAGIC = b"GAF1"
_HEADER = struct.Struct("<4sII4d")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _write_sidecar(path, field: ComplexField, extra: dict | None):
    meta = {"weight": field.weight.as_list(), "anchor": None}
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_sidecar(path) -> dict:
    p = sidecar_path(path)
    if not p.exists():
        return {}
    return json.loads(p.read_text())


def write_csv(path, field: ComplexField, extra: dict | None = None) -> None:
    d = field.domain
    X = np.broadcast_to(d.x[None, :], d.shape).ravel()
    Y = np.broadcast_to(d.y[:, None], d.shape).ravel()
    v = field.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re", "im"])
        for row in zip(X, Y, v.real, v.imag):
            w.writerow([repr(float(c)) for c in row])
    _write_sidecar(path, field, extra)


def read_csv(path) -> ComplexField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs, ys = data[:, 0], data[:, 1]
    nx = int(np.argmax(xs[1:] <= xs[:-1]) + 1) if np.any(xs[1:] <= xs[:-1]) else len(xs)
    ny = len(xs) // nx
    domain = GridDomain(float(xs[0]), float(xs[nx - 1]), float(ys[0]), float(ys[-1]), nx, ny)
    values = (data[:, 2] + 1j * data[:, 3]).reshape(ny, nx)
    meta = read_sidecar(path)
    weight = FieldWeight.from_pair(meta["weight"]) if meta.get("weight") else SCALAR
    return ComplexField(domain, values, weight)


def write_binary(path, field: ComplexField, extra: dict | None = None) -> None:
    d = field.domain
    header = _HEADER.pack(MAGIC, d.nx, d.ny, d.x_min, d.x_max, d.y_min, d.y_max)
    body = np.empty(d.size * 2, dtype="<f8")
    flat = field.values.ravel()
    body[0::2] = flat.real
    body[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())
    _write_sidecar(path, field, extra)


def read_binary(path) -> ComplexField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a GAF1 field file")
    _, nx, ny, x0, x1, y0, y1 = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * nx * ny:
        raise ValueError(f"{path}: expected {2 * nx * ny} floats, found {body.size}")
    domain = GridDomain(x0, x1, y0, y1, nx, ny)
    values = (body[0::2] + 1j * body[1::2]).reshape(ny, nx)
    meta = read_sidecar(path)
    weight = FieldWeight.from_pair(meta["weight"]) if meta.get("weight") else SCALAR
    return ComplexField(domain, values, weight)


def read_field(path) -> ComplexField:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_binary(path) if head == MAGIC else read_csv(path)
