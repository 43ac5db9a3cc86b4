"""Shared on-disk framing for rank and select structures.

    magic        8 bytes
    variant      u8, then 3 zero bytes
    params       4 x u32 followed by one f64
    n_bits       u64
    ones_total   u64
    n_areas      u32
    area sizes   n_areas x u64
    areas        concatenated raw bytes

All integers little-endian.  The areas are the structure proper; everything
before them is framing and is not counted by ``space_bits``.
"""

import struct

import numpy as np

_FIXED = struct.Struct("<8sB3x4IdQQI")


def pack(magic, variant_code, int_params, ratio, n_bits, ones_total, areas):
    ints = list(int_params) + [0] * (4 - len(int_params))
    blobs = [_as_bytes(a) for a in areas]
    head = _FIXED.pack(magic, variant_code, *ints, ratio, n_bits, ones_total, len(blobs))
    sizes = struct.pack(f"<{len(blobs)}Q", *(len(b) for b in blobs))
    return b"".join([head, sizes, *blobs])


def unpack(data, magic):
    data = bytes(data)
    if len(data) < _FIXED.size:
        raise ValueError("truncated structure stream")
    got, code, p0, p1, p2, p3, ratio, n_bits, ones_total, n_areas = _FIXED.unpack_from(data)
    if got != magic:
        raise ValueError(f"bad magic {got!r}, expected {magic!r}")
    pos = _FIXED.size
    if len(data) < pos + 8 * n_areas:
        raise ValueError("truncated area table")
    sizes = struct.unpack_from(f"<{n_areas}Q", data, pos)
    pos += 8 * n_areas
    if len(data) != pos + sum(sizes):
        raise ValueError(f"area sizes add to {sum(sizes)} but {len(data) - pos} bytes follow")
    areas = []
    for s in sizes:
        areas.append(data[pos : pos + s])
        pos += s
    return code, (p0, p1, p2, p3), ratio, n_bits, ones_total, areas


def peek_magic(data):
    return bytes(data[:8])


def framing_size(n_areas):
    return _FIXED.size + 8 * n_areas


def _as_bytes(a):
    if isinstance(a, np.ndarray):
        return np.ascontiguousarray(a).tobytes()
    return bytes(a)


def put_column(mat, col, values, dtype, per_row=1):
    """Write ``values`` little-endian into byte columns of a ``(rows, width)`` uint8 matrix.

    Returns the column just past the written field.
    """
    dt = np.dtype(dtype)
    width = dt.itemsize * per_row
    if mat.shape[0] and width:
        v = np.ascontiguousarray(np.asarray(values).astype(dt)).reshape(mat.shape[0], per_row)
        mat[:, col : col + width] = v.view(np.uint8).reshape(mat.shape[0], width)
    return col + width


def get_column(mat, col, dtype, per_row=1):
    """Inverse of :func:`put_column`; returns ``(values, next_col)``."""
    dt = np.dtype(dtype)
    width = dt.itemsize * per_row
    raw = np.ascontiguousarray(mat[:, col : col + width])
    vals = raw.view(dt).reshape(mat.shape[0], per_row) if width else np.zeros((mat.shape[0], 0), dt)
    return vals, col + width
