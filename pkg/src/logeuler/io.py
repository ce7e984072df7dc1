"""Binary field snapshots and CSV helpers.

Snapshot layout: a 16-byte little-endian header

    magic  b"LGEU"   4 bytes
    version u16
    N       u16
    kind    u32      payload kind, see ``PAYLOAD_KINDS``
    reserved u32     zero

followed by one or more N x N layers of little-endian float64 in row-major
order. The layer count is implied by the file size.
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, InvalidFieldError
from .field import ScalarField

MAGIC = b"LGEU"
VERSION = 1
HEADER = struct.Struct("<4sHHII")
PAYLOAD_KINDS = {"scalar": 0, "velocity": 1, "ensemble": 2}
_KIND_NAMES = {v: k for k, v in PAYLOAD_KINDS.items()}


def write_snapshot(path, layers, kind="scalar"):
    """Write one field or a stack of layers shaped (n, N, N)."""
    if isinstance(layers, ScalarField):
        layers = layers.values
    arr = np.asarray(layers, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise InvalidFieldError(f"cannot store layers of shape {arr.shape}")
    N = arr.shape[1]
    if N >= 1 << 16:
        raise InvalidFieldError("N does not fit the u16 header slot")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, N, PAYLOAD_KINDS[kind], 0))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_snapshot(path):
    """Return ``(kind, layers)`` with layers shaped (n, N, N)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read snapshot file {path}: {exc.strerror}") from exc
    if len(raw) < HEADER.size:
        raise ConfigurationError(f"{path}: truncated header")
    magic, version, N, kind, _ = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigurationError(f"{path}: unsupported version {version}")
    payload = len(raw) - HEADER.size
    layer_bytes = 8 * N * N
    if N == 0 or payload == 0 or payload % layer_bytes:
        raise ConfigurationError(f"{path}: payload size {payload} is not a whole number of layers")
    layers = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(-1, N, N)
    return _KIND_NAMES.get(kind, str(kind)), layers.astype(np.float64)


def read_field(path):
    kind, layers = read_snapshot(path)
    if kind != "scalar" or layers.shape[0] != 1:
        raise ConfigurationError(f"{path}: expected a single scalar layer, found {kind} x{layers.shape[0]}")
    return ScalarField(layers[0])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
