"""Compressed select_1 structures: basic, bch, mpe1, mpe2, mpe3.

The answer for every ordinal that is a multiple of ``ell`` is sampled.  The
stretch between two consecutive samples is one block, classified by the gap
between the samples:

* gap == ell: a solid run of ones; nothing is stored, answers are arithmetic.
* gap > thr: sparse; the ``ell - 1`` interior answers are stored as u32.
* otherwise dense; the interior bits are stored (mpe-compressed for mpe*).

Ordinals past the last multiple of ``ell`` form a trailing block that is
always stored sparse.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _container, mpe
from .bitvec import MAX_BITS

MAGIC = b"RSSELE01"
VARIANTS = ("basic", "bch", "mpe1", "mpe2", "mpe3")

_BATCH = 1 << 14


class SelectBlockClass(IntEnum):
    DENSE = 0
    SPARSE = 1
    ONES_RUN = 2


def _offset_bits(variant):
    return {"basic": 32, "bch": 16, "mpe1": 15}.get(variant, 14)


@dataclass(frozen=True)
class SelectParams:
    variant: str
    ell: int = 128
    thr: int = 4096
    h: int = 16
    ratio: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown select variant {self.variant!r}; expected one of {VARIANTS}")
        self.validate()

    def validate(self):
        if self.ell < 2:
            raise ValueError(f"ell={self.ell} must be >= 2")
        if self.thr < self.ell:
            raise ValueError(f"thr={self.thr} must be >= ell={self.ell}")
        if self.h <= 0:
            raise ValueError(f"h={self.h}: blocks per superblock must be positive")
        if self.variant != "basic":
            budget = 1 << _offset_bits(self.variant)
            extent = self.h * self.worst_block_bytes()
            if extent >= budget:
                raise ValueError(
                    f"h * worst block size = {extent} bytes must be < {budget} "
                    f"for {self.variant} differential offsets; lower h, ell or thr"
                )
        if not 0 < self.ratio <= 1:
            raise ValueError("mpe3 ratio must lie in (0, 1]")

    def worst_block_bytes(self):
        sparse = 4 * (self.ell - 1)
        interior = self.thr - 1
        if self.variant.startswith("mpe"):
            dense = mpe.worst_case_size(-(-interior // 16), self.variant)
        else:
            dense = -(-interior // 8)
        return max(sparse, dense)

    def describe(self):
        s = f"ell={self.ell},thr={self.thr},h={self.h}"
        if self.variant == "mpe3" and self.ratio != 0.5:
            s += f",ratio={self.ratio:g}"
        return s


def _gather_chunks(buf, starts, lengths):
    """Extract bit ranges ``[starts[r], starts[r] + lengths[r])`` as zero-padded
    16-bit chunks.  ``buf`` must have at least 3 spare zero bytes at the end."""
    nchunks = (lengths + 15) // 16
    cmax = int(nchunks.max()) if nchunks.size else 0
    c = np.arange(cmax, dtype=np.int64)
    p = starts[:, None] + 16 * c[None, :]
    byte = p >> 3
    byte = np.minimum(byte, buf.size - 3)
    sh = (p & 7).astype(np.uint32)
    word = buf[byte].astype(np.uint32) | (buf[byte + 1].astype(np.uint32) << 8) | (buf[byte + 2].astype(np.uint32) << 16)
    val = (word >> sh) & 0xFFFF
    left = lengths[:, None] - 16 * c[None, :]
    keep_bits = np.clip(left, 0, 16).astype(np.uint32)
    val &= (np.uint32(1) << keep_bits) - np.uint32(1)
    return val.astype(np.uint16), nchunks


class SelectStructure:
    variant = None

    def __init__(self, params, n_bits, ones_total, areas):
        self.params = params
        self.n_bits = n_bits
        self.ones_total = ones_total
        self.areas = [bytes(a) for a in areas]
        self.ell = params.ell
        self.thr = params.thr
        self.nfull = ones_total // params.ell
        self.nblocks = self.nfull + (1 if ones_total % params.ell else 0)
        self._prepare()

    @classmethod
    def build(cls, bv, params):
        if bv.n_bits >= MAX_BITS:
            raise ValueError(f"n_bits={bv.n_bits} must be < 2^32 for 4-byte header fields")
        ell, thr = params.ell, params.thr
        pos = bv.ones_positions()
        n1 = pos.size
        q = n1 // ell
        nb = q + (1 if n1 % ell else 0)

        ends = np.empty(nb, dtype=np.int64)
        ends[:q] = pos[ell - 1 : q * ell : ell]
        if nb > q:
            ends[q] = int(pos[-1]) + 1
        starts = np.empty(nb, dtype=np.int64)
        if nb:
            starts[0] = -1
            starts[1:] = ends[:-1]
        gap = ends - starts
        cls_ = np.full(nb, SelectBlockClass.DENSE, dtype=np.uint8)
        cls_[gap > thr] = SelectBlockClass.SPARSE
        cls_[gap == ell] = SelectBlockClass.ONES_RUN
        if nb > q:
            cls_[q] = SelectBlockClass.SPARSE

        sizes = np.zeros(nb, dtype=np.int64)
        modes = np.zeros(nb, dtype=np.int64)
        sparse = np.flatnonzero(cls_ == SelectBlockClass.SPARSE)
        sparse_full = sparse[sparse < q]
        sizes[sparse_full] = 4 * (ell - 1)
        if nb > q:
            sizes[q] = 4 * (n1 - q * ell)

        dense = np.flatnonzero(cls_ == SelectBlockClass.DENSE)
        buf = np.zeros(len(bv.to_bytes()) + 8, dtype=np.uint8)
        buf[: len(bv.to_bytes())] = np.frombuffer(bv.to_bytes(), dtype=np.uint8)
        dense_parts = []
        policy = mpe.Policy(params.variant, params.ratio) if params.variant.startswith("mpe") else None
        for lo in range(0, dense.size, _BATCH):
            sel = dense[lo : lo + _BATCH]
            lengths = gap[sel] - 1
            chunks, nchunks = _gather_chunks(buf, starts[sel] + 1, lengths)
            if policy is None:
                nbytes = (lengths + 7) // 8
                raw = np.ascontiguousarray(chunks.astype("<u2")).view(np.uint8).reshape(sel.size, -1)
                keep = np.arange(raw.shape[1])[None, :] < nbytes[:, None]
                dense_parts.append(raw[keep])
                sizes[sel] = nbytes
            else:
                m, sz, body = mpe.encode_many(chunks, nchunks, policy)
                modes[sel] = m
                sizes[sel] = sz
                dense_parts.append(body)

        offsets = np.zeros(nb + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        body = np.zeros(int(offsets[-1]), dtype=np.uint8)
        if sparse_full.size:
            vals = pos[(sparse_full * ell)[:, None] + np.arange(ell - 1)[None, :]].astype("<u4")
            dest = offsets[sparse_full][:, None] + np.arange(4 * (ell - 1))[None, :]
            body[dest.ravel()] = vals.view(np.uint8).ravel()
        if nb > q:
            tail = pos[q * ell :].astype("<u4").view(np.uint8)
            body[offsets[q] : offsets[q] + tail.size] = tail
        if dense.size:
            flat = np.concatenate(dense_parts)
            dsz = sizes[dense]
            run_start = np.zeros(dense.size, dtype=np.int64)
            np.cumsum(dsz[:-1], out=run_start[1:])
            dest = np.repeat(offsets[dense] - run_start, dsz) + np.arange(flat.size)
            body[dest] = flat

        header = cls._header(ends, offsets, modes, params)
        return cls(params, bv.n_bits, n1, [header, body])

    def _check(self, j):
        if not 1 <= j <= self.ones_total:
            raise IndexError(f"ordinal {j} outside [1, {self.ones_total}]")

    def space_bits(self):
        return 8 * sum(len(a) for a in self.areas)

    def area_sizes(self):
        return {"headers": len(self.areas[0]), "body": len(self.areas[1])}

    def serialize(self):
        p = self.params
        return _container.pack(
            MAGIC,
            VARIANTS.index(self.variant),
            (p.ell, p.thr, p.h),
            p.ratio,
            self.n_bits,
            self.ones_total,
            self.areas,
        )

    def block_classes(self):
        """Class of every block, derived from the stored samples."""
        out = np.empty(self.nblocks, dtype=np.uint8)
        prev = -1
        for i in range(self.nblocks):
            end = self._samples[i]
            gap = end - prev
            if i == self.nfull:
                out[i] = SelectBlockClass.SPARSE
            elif gap == self.ell:
                out[i] = SelectBlockClass.ONES_RUN
            elif gap > self.thr:
                out[i] = SelectBlockClass.SPARSE
            else:
                out[i] = SelectBlockClass.DENSE
            prev = end
        return out

    def payload_sizes(self):
        """Body bytes owned by each block, from consecutive stored offsets."""
        offs = [self._block_offset(i) for i in range(self.nblocks)] + [len(self.areas[1])]
        return np.diff(np.array(offs, dtype=np.int64))

    def dense_payload_bytes(self):
        if not self.nblocks:
            return 0
        cls_ = self.block_classes()
        return int(self.payload_sizes()[cls_ == SelectBlockClass.DENSE].sum())

    def select1(self, j):
        if not 1 <= j <= self.ones_total:
            self._check(j)
        i, r = divmod(j, self.ell)
        samples = self._samples
        if r == 0:
            return samples[i - 1]
        start = samples[i - 1] if i else -1
        if i == self.nfull:
            off = self._block_offset(i)
            return int.from_bytes(self._body[off + 4 * (r - 1) : off + 4 * r], "little")
        gap = samples[i] - start
        if gap == self.ell:
            return start + r
        if gap > self.thr:
            off = self._block_offset(i)
            return int.from_bytes(self._body[off + 4 * (r - 1) : off + 4 * r], "little")
        return start + 1 + self._dense_select(i, gap - 1, r)

    def _dense_select(self, i, nbits, r):
        return mpe.select_in_bytes(self._body, self._block_offset(i), (nbits + 7) >> 3, r)

    def __repr__(self):
        return f"<select-{self.variant} {self.params.describe()} n={self.n_bits} space={self.space_bits()}b>"


def _pad_grid(values, nsuper, h, fill):
    pad = np.full(nsuper * h, fill, dtype=np.int64)
    pad[: values.size] = values
    return pad.reshape(nsuper, h)


class SelectBasic(SelectStructure):
    """u32 samples and u32 absolute offsets for every block."""

    variant = "basic"

    @staticmethod
    def header_size(h):
        return 8 * h

    @classmethod
    def _header(cls, ends, offsets, modes, params):
        h = params.h
        nsuper = -(-ends.size // h)
        fill = int(ends[-1]) if ends.size else 0
        hdr = np.zeros((nsuper, cls.header_size(h)), dtype=np.uint8)
        col = _container.put_column(hdr, 0, _pad_grid(ends, nsuper, h, fill), "<u4", h)
        _container.put_column(hdr, col, _pad_grid(offsets[:-1], nsuper, h, offsets[-1]), "<u4", h)
        return hdr

    def _prepare(self):
        h = self.params.h
        mat = np.frombuffer(self.areas[0], dtype=np.uint8).reshape(-1, self.header_size(h))
        samples, col = _container.get_column(mat, 0, "<u4", h)
        offs, _ = _container.get_column(mat, col, "<u4", h)
        self._samples = samples.ravel().tolist()
        self._offsets = offs.ravel().tolist()
        self._body = self.areas[1]

    def _block_offset(self, i):
        return self._offsets[i]


class SelectBch(SelectStructure):
    """u32 samples, one u32 offset per superblock and u16 differential offsets."""

    variant = "bch"
    has_aux = False

    @classmethod
    def header_size(cls, h):
        return 4 * h + 4 + 2 * (h - 1) + (1 if cls.has_aux else 0)

    @classmethod
    def _header(cls, ends, offsets, modes, params):
        h = params.h
        nsuper = -(-ends.size // h)
        fill = int(ends[-1]) if ends.size else 0
        off_grid = _pad_grid(offsets[:-1], nsuper, h, offsets[-1])
        first = off_grid[:, 0]
        rel = off_grid[:, 1:] - first[:, None]
        nbits = _offset_bits(cls.variant)
        if rel.size and rel.max() >= 1 << nbits:
            bad = int(np.argmax(rel.max(axis=1) >= 1 << nbits))
            raise ValueError(
                f"superblock {bad}: differential offset {int(rel[bad].max())} does not fit in {nbits} bits"
            )
        mode_grid = _pad_grid(modes, nsuper, h, 0)
        if cls.has_aux:
            flag = mode_grid[:, 1:]
            if cls.variant == "mpe1":
                flag = (flag == mpe.Mode.BOTH).astype(np.int64)
            rel = rel | (flag << nbits)
        hdr = np.zeros((nsuper, cls.header_size(h)), dtype=np.uint8)
        col = _container.put_column(hdr, 0, _pad_grid(ends, nsuper, h, fill), "<u4", h)
        col = _container.put_column(hdr, col, first, "<u4")
        col = _container.put_column(hdr, col, rel, "<u2", h - 1)
        if cls.has_aux:
            _container.put_column(hdr, col, mode_grid[:, 0], "<u1")
        return hdr

    def _prepare(self):
        h = self.params.h
        mat = np.frombuffer(self.areas[0], dtype=np.uint8).reshape(-1, self.header_size(h))
        samples, col = _container.get_column(mat, 0, "<u4", h)
        first, col = _container.get_column(mat, col, "<u4")
        odiffs, col = _container.get_column(mat, col, "<u2", h - 1)
        self._samples = samples.ravel().tolist()
        self._first = first.ravel().tolist()
        self._odiffs = odiffs.ravel().tolist()
        if self.has_aux:
            aux, _ = _container.get_column(mat, col, "<u1")
            self._aux = aux.ravel().tolist()
        self._shift = _offset_bits(self.variant)
        self._lowmask = (1 << self._shift) - 1
        self._body = self.areas[1]

    def _block_offset(self, i):
        h = self.params.h
        s, t = divmod(i, h)
        if t == 0:
            return self._first[s]
        return self._first[s] + (self._odiffs[s * (h - 1) + t - 1] & self._lowmask)


class SelectMpe(SelectBch):
    has_aux = True

    def block_mode(self, i):
        h = self.params.h
        s, t = divmod(i, h)
        if t == 0:
            return mpe.Mode(self._aux[s])
        flag = self._odiffs[s * (h - 1) + t - 1] >> self._shift
        if self.variant == "mpe1":
            return mpe.Mode.BOTH if flag else mpe.Mode.VERBATIM
        return mpe.Mode(flag)

    def _dense_select(self, i, nbits, r):
        return mpe.select_in_encoded(self._body, self._block_offset(i), self.block_mode(i), (nbits + 15) >> 4, r)


class SelectMpe1(SelectMpe):
    variant = "mpe1"


class SelectMpe2(SelectMpe):
    variant = "mpe2"


class SelectMpe3(SelectMpe):
    variant = "mpe3"


CLASSES = {
    "basic": SelectBasic,
    "bch": SelectBch,
    "mpe1": SelectMpe1,
    "mpe2": SelectMpe2,
    "mpe3": SelectMpe3,
}


def build_select(bv, params):
    if isinstance(params, str):
        params = SelectParams(params)
    return CLASSES[params.variant].build(bv, params)


def deserialize(data):
    code, (ell, thr, h, _), ratio, n_bits, ones_total, areas = _container.unpack(data, MAGIC)
    if code >= len(VARIANTS):
        raise ValueError(f"unknown select variant code {code}")
    params = SelectParams(VARIANTS[code], ell, thr, h, ratio)
    if len(areas) != 2:
        raise ValueError("select structures carry exactly two areas")
    return CLASSES[params.variant](params, n_bits, ones_total, areas)
