"""Mono-pair elimination: block compression by dropping all-0 / all-1 16-bit chunks.

An encoded block is laid out as::

    [presence field][kind field][stored chunks...]

Both fields hold one bit per chunk, rounded up to a multiple of 16 bits.
The presence field (bit set = chunk stored) exists for every compressed mode;
the kind field (bit set = eliminated chunk was 0xFFFF) only for ``BOTH``.
``VERBATIM`` blocks are the raw chunks with no fields.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Mode(IntEnum):
    VERBATIM = 0
    ZEROS = 1
    ONES = 2
    BOTH = 3


ALL_ONES = 0xFFFF

# variant -> compressed modes it may choose from
ALLOWED_MODES = {
    "mpe1": (Mode.BOTH,),
    "mpe2": (Mode.ZEROS, Mode.ONES, Mode.BOTH),
    "mpe3": (Mode.ZEROS, Mode.ONES, Mode.BOTH),
}


def field_bytes(nchunks):
    """Bytes of one per-chunk bit field, rounded up to 16 bits."""
    return 2 * ((nchunks + 15) // 16)


def encoded_size(mode, nchunks, n_zero, n_one):
    f = field_bytes(nchunks)
    if mode == Mode.VERBATIM:
        return 2 * nchunks
    if mode == Mode.ZEROS:
        return f + 2 * (nchunks - n_zero)
    if mode == Mode.ONES:
        return f + 2 * (nchunks - n_one)
    return 2 * f + 2 * (nchunks - n_zero - n_one)


def worst_case_size(nchunks, variant):
    """Largest encoded size the variant's policy can ever emit for ``nchunks``."""
    if variant == "mpe3":
        return 2 * nchunks
    # mpe1/mpe2 may compress with the fewest allowed mono-pairs
    p = -(-nchunks // 8)
    return max(2 * nchunks, 2 * field_bytes(nchunks) + 2 * (nchunks - p))


@dataclass(frozen=True)
class Policy:
    """Which modes a variant may use and when compression is accepted."""

    variant: str
    ratio: float = 0.5  # mpe3 only: compress iff size <= ratio * verbatim size

    def __post_init__(self):
        if self.variant not in ALLOWED_MODES:
            raise ValueError(f"unknown mpe variant {self.variant!r}")
        if not 0 < self.ratio <= 1:
            raise ValueError("mpe3 ratio must lie in (0, 1]")

    @property
    def allowed(self):
        return ALLOWED_MODES[self.variant]


@dataclass(frozen=True)
class MpeEncodedBlock:
    mode: Mode
    nchunks: int
    presence: int
    kind: int
    body: bytes

    def to_bytes(self):
        if self.mode == Mode.VERBATIM:
            return self.body
        f = field_bytes(self.nchunks)
        out = self.presence.to_bytes(f, "little")
        if self.mode == Mode.BOTH:
            out += self.kind.to_bytes(f, "little")
        return out + self.body

    @property
    def size(self):
        return len(self.to_bytes())

    def decode(self):
        return decode(self.to_bytes(), 0, self.mode, self.nchunks)


def mpe_encode(block, policy):
    """Encode one block (bytes of even length) chunk by chunk.

    This is the straightforward per-chunk encoder; :func:`encode_many` is the
    vectorised one used by the builders, and the two are checked against each
    other.
    """
    block = bytes(block)
    if len(block) % 2:
        raise ValueError("block length must be a whole number of 2-byte chunks")
    n = len(block) // 2
    chunks = [block[2 * c] | (block[2 * c + 1] << 8) for c in range(n)]
    n_zero = sum(1 for v in chunks if v == 0)
    n_one = sum(1 for v in chunks if v == ALL_ONES)

    best = min(policy.allowed, key=lambda m: (encoded_size(m, n, n_zero, n_one), m))
    best_size = encoded_size(best, n, n_zero, n_one)
    if policy.variant == "mpe3":
        accept = best_size <= policy.ratio * 2 * n
    else:
        accept = 8 * (n_zero + n_one) >= n
    if not accept:
        return MpeEncodedBlock(Mode.VERBATIM, n, 0, 0, block)

    presence = kind = 0
    body = bytearray()
    for c, v in enumerate(chunks):
        dropped = (v == 0 and best in (Mode.ZEROS, Mode.BOTH)) or (
            v == ALL_ONES and best in (Mode.ONES, Mode.BOTH)
        )
        if dropped:
            if best == Mode.BOTH and v == ALL_ONES:
                kind |= 1 << c
        else:
            presence |= 1 << c
            body += block[2 * c : 2 * c + 2]
    return MpeEncodedBlock(best, n, presence, kind, bytes(body))


def encode_many(chunks, nchunks, policy):
    """Vectorised encoder.

    ``chunks`` is a ``(B, C)`` uint16 matrix; row ``r`` holds ``nchunks[r]``
    meaningful chunks (the rest are ignored).  Returns ``(modes, sizes, body)``
    where ``body`` is the concatenation of all encoded rows.
    """
    chunks = np.asarray(chunks, dtype=np.uint16)
    nrows, cmax = chunks.shape
    nchunks = np.broadcast_to(np.asarray(nchunks, dtype=np.int64), (nrows,))
    valid = np.arange(cmax)[None, :] < nchunks[:, None]
    zero = (chunks == 0) & valid
    one = (chunks == ALL_ONES) & valid
    nz = zero.sum(axis=1)
    no = one.sum(axis=1)
    fb = 2 * ((nchunks + 15) // 16)

    size_by_mode = np.stack(
        [
            2 * nchunks,
            fb + 2 * (nchunks - nz),
            fb + 2 * (nchunks - no),
            2 * fb + 2 * (nchunks - nz - no),
        ]
    )
    allowed = np.array([int(m) for m in policy.allowed])
    pick = allowed[np.argmin(size_by_mode[allowed], axis=0)]
    best = size_by_mode[pick, np.arange(nrows)]
    if policy.variant == "mpe3":
        accept = best <= policy.ratio * 2 * nchunks
    else:
        accept = 8 * (nz + no) >= nchunks
    modes = np.where(accept, pick, int(Mode.VERBATIM)).astype(np.uint8)
    sizes = size_by_mode[modes, np.arange(nrows)]

    m = modes[:, None]
    drop_zero = zero & ((m == Mode.ZEROS) | (m == Mode.BOTH))
    drop_one = one & ((m == Mode.ONES) | (m == Mode.BOTH))
    stored = valid & ~drop_zero & ~drop_one

    fmax = 2 * ((cmax + 15) // 16)
    width = 8 * fmax
    pres_bits = np.zeros((nrows, width), dtype=bool)
    pres_bits[:, :cmax] = stored
    kind_bits = np.zeros((nrows, width), dtype=bool)
    kind_bits[:, :cmax] = drop_one & (m == Mode.BOTH)
    pres_bytes = np.packbits(pres_bits, axis=1, bitorder="little")
    kind_bytes = np.packbits(kind_bits, axis=1, bitorder="little")
    data_bytes = np.ascontiguousarray(chunks.astype("<u2")).view(np.uint8).reshape(nrows, 2 * cmax)

    col = np.arange(fmax)[None, :]
    keep_pres = (col < fb[:, None]) & (modes != Mode.VERBATIM)[:, None]
    keep_kind = (col < fb[:, None]) & (modes == Mode.BOTH)[:, None]
    keep_data = np.repeat(stored, 2, axis=1)

    mat = np.hstack([pres_bytes, kind_bytes, data_bytes])
    keep = np.hstack([keep_pres, keep_kind, keep_data])
    body = mat[keep]
    return modes, sizes, body


def decode(buf, off, mode, nchunks):
    """Reconstruct the ``2 * nchunks`` original bytes of an encoded block."""
    mode = Mode(mode)
    if mode == Mode.VERBATIM:
        return bytes(buf[off : off + 2 * nchunks])
    f = field_bytes(nchunks)
    presence = int.from_bytes(buf[off : off + f], "little")
    pos = off + f
    kind = 0
    if mode == Mode.BOTH:
        kind = int.from_bytes(buf[pos : pos + f], "little")
        pos += f
    fill = b"\xff\xff" if mode == Mode.ONES else b"\x00\x00"
    out = bytearray()
    for c in range(nchunks):
        if (presence >> c) & 1:
            out += buf[pos : pos + 2]
            pos += 2
        elif (kind >> c) & 1:
            out += b"\xff\xff"
        else:
            out += fill
    return bytes(out)


def prefix_popcount(buf, off, mode, nchunks, prefix_bits):
    """Ones among the first ``prefix_bits`` decoded bits, without decoding.

    Stored chunks before the target are popcounted in one go; eliminated
    chunks contribute 0 or 16 each, counted from the bit fields.
    """
    if not 0 <= prefix_bits <= 16 * nchunks:
        raise ValueError(f"prefix of {prefix_bits} bits overruns a {nchunks}-chunk block")
    if mode == Mode.VERBATIM:
        nbytes = (prefix_bits + 7) >> 3
        x = int.from_bytes(buf[off : off + nbytes], "little")
        return (x & ((1 << prefix_bits) - 1)).bit_count()
    f = field_bytes(nchunks)
    c, rem = divmod(prefix_bits, 16)
    below = (1 << c) - 1
    presence = int.from_bytes(buf[off : off + f], "little")
    stored_before = (presence & below).bit_count()
    if mode == Mode.BOTH:
        kind = int.from_bytes(buf[off + f : off + 2 * f], "little")
        ones_before = (kind & below).bit_count()
        data = off + 2 * f
    else:
        kind = 0
        ones_before = c - stored_before if mode == Mode.ONES else 0
        data = off + f
    end = data + 2 * stored_before
    total = int.from_bytes(buf[data:end], "little").bit_count() + 16 * ones_before
    if rem:
        if (presence >> c) & 1:
            v = buf[end] | (buf[end + 1] << 8)
            total += (v & ((1 << rem) - 1)).bit_count()
        elif mode == Mode.ONES or (kind >> c) & 1:
            total += rem
    return total


def select_in_encoded(buf, off, mode, nchunks, r):
    """Bit position (within the decoded block) of the ``r``-th one, 1-based."""
    if mode == Mode.VERBATIM:
        return select_in_bytes(buf, off, 2 * nchunks, r)
    f = field_bytes(nchunks)
    presence = int.from_bytes(buf[off : off + f], "little")
    pos = off + f
    kind = 0
    if mode == Mode.BOTH:
        kind = int.from_bytes(buf[pos : pos + f], "little")
        pos += f
    ones_fill = mode == Mode.ONES
    seen = 0
    for c in range(nchunks):
        if (presence >> c) & 1:
            v = buf[pos] | (buf[pos + 1] << 8)
            pos += 2
            cnt = v.bit_count()
            if seen + cnt >= r:
                return 16 * c + _select_in_word(v, r - seen)
            seen += cnt
        elif ones_fill or (kind >> c) & 1:
            if seen + 16 >= r:
                return 16 * c + (r - seen - 1)
            seen += 16
    raise ValueError(f"block holds only {seen} ones, asked for the {r}-th")


def select_in_bytes(buf, off, nbytes, r):
    """Scan 64-bit words of ``buf[off:off+nbytes]`` for the ``r``-th one."""
    seen = 0
    end = off + nbytes
    base = 0
    for p in range(off, end, 8):
        w = int.from_bytes(buf[p : min(p + 8, end)], "little")
        cnt = w.bit_count()
        if seen + cnt >= r:
            return base + _select_in_word(w, r - seen)
        seen += cnt
        base += 64
    raise ValueError(f"payload holds only {seen} ones, asked for the {r}-th")


def _build_byte_select():
    table = []
    for b in range(256):
        table.append(tuple(u for u in range(8) if (b >> u) & 1))
    return table


_BYTE_SELECT = _build_byte_select()


def _select_in_word(w, r):
    """Position of the ``r``-th one (1-based) in integer ``w``."""
    base = 0
    while True:
        b = w & 0xFF
        c = b.bit_count()
        if r <= c:
            return base + _BYTE_SELECT[b][r - 1]
        r -= c
        w >>= 8
        base += 8
