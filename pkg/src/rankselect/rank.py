"""Compressed rank structures: basic, bch, mpe1, mpe2, mpe3 and cf.

Every variant cuts the bitvector into blocks of ``k`` bytes (the tail block is
zero-padded) and never stores the body of a block that is all zeros or all
ones.  Such a mono-block is recognised at query time because the ranks at its
two ends differ by 0 or by the block size in bits.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _container, mpe
from .bitvec import MAX_BITS

MAGIC = b"RSRANK01"
VARIANTS = ("basic", "bch", "mpe1", "mpe2", "mpe3", "cf")

_BATCH = 1 << 15


class BlockClass(IntEnum):
    PLAIN = 0
    MONO0 = 1
    MONO1 = 2


@dataclass(frozen=True)
class RankParams:
    variant: str
    k: int = None
    h: int = None
    ratio: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown rank variant {self.variant!r}; expected one of {VARIANTS}")
        # defaults follow the benchmark setup: k=64 for basic/bch/cf, 128 for mpe*
        if self.k is None:
            object.__setattr__(self, "k", 128 if self.variant.startswith("mpe") else 64)
        if self.h is None:
            object.__setattr__(self, "h", 32 if self.variant == "bch" else 16)
        self.validate()

    @property
    def block_bits(self):
        return 8 * self.k

    def validate(self):
        k, h = self.k, self.h
        if k <= 0 or k % 8:
            raise ValueError(f"k={k}: block size must be a positive multiple of 8 bytes")
        if h <= 0:
            raise ValueError(f"h={h}: blocks per superblock must be positive")
        if self.variant in ("bch", "mpe1", "mpe2", "mpe3") and h * k * 8 >= 1 << 16:
            raise ValueError(f"h*k*8 = {h * k * 8} must be < 2^16 for 2-byte differential ranks")
        if self.variant.startswith("mpe"):
            budget = 1 << (15 if self.variant == "mpe1" else 14)
            extent = h * mpe.worst_case_size(k // 2, self.variant)
            if extent >= budget:
                raise ValueError(
                    f"worst-case superblock extent {extent} bytes must be < {budget} "
                    f"for {self.variant} differential offsets"
                )
            if not 0 < self.ratio <= 1:
                raise ValueError("mpe3 ratio must lie in (0, 1]")

    def describe(self):
        s = f"k={self.k},h={self.h}"
        if self.variant == "mpe3" and self.ratio != 0.5:
            s += f",ratio={self.ratio:g}"
        return s


def expected_accesses(variant, f):
    """Modelled memory accesses per query for a mono-block fraction ``f``."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"mono-block fraction {f} outside [0, 1]")
    if variant == "basic":
        return 2.0 - f
    if variant == "cf":
        return 1.0 + f - f * f
    raise ValueError(f"access model only defined for basic and cf, not {variant!r}")


def classify_block(bv, beta, k):
    """Classify block ``beta`` of ``bv`` (blocks of ``k`` bytes, tail zero-padded)."""
    bb = 8 * k
    nblocks = -(-bv.n_bits // bb)
    if not 0 <= beta < nblocks:
        raise IndexError(f"block {beta} outside [0, {nblocks})")
    start = beta * bb
    ones = bv.ones_in_range(start, min(start + bb, bv.n_bits))
    if ones == 0:
        return BlockClass.MONO0
    if ones == min(bb, bv.n_bits - start):
        return BlockClass.MONO1
    return BlockClass.PLAIN


def _split_blocks(bv, k):
    """Return ``(blocks, prefix_ranks)``: a ``(b, k)`` byte matrix and ``b + 1`` ranks."""
    bb = 8 * k
    b = -(-bv.n_bits // bb)
    padded = np.zeros(b * k, dtype=np.uint8)
    raw = np.frombuffer(bv.to_bytes(), dtype=np.uint8)
    padded[: raw.size] = raw
    blocks = padded.reshape(b, k)
    counts = np.bitwise_count(blocks.view("<u8")).sum(axis=1, dtype=np.int64)
    ranks = np.zeros(b + 1, dtype=np.int64)
    np.cumsum(counts, out=ranks[1:])
    return blocks, ranks


def _mono_mask(ranks, n_bits, k):
    """Mono blocks from adjacent ranks.  A short tail block counts as Mono1
    when every one of its real bits is set."""
    bb = 8 * k
    d = np.diff(ranks)
    full = np.full(d.size, bb, dtype=np.int64)
    if d.size:
        full[-1] = n_bits - (d.size - 1) * bb
    return (d == 0) | (d == full)


def _popcount_prefix(buf, off, nbits):
    x = int.from_bytes(buf[off : off + ((nbits + 7) >> 3)], "little")
    return (x & ((1 << nbits) - 1)).bit_count()


class RankStructure:
    """Common query surface; subclasses own a layout."""

    variant = None
    area_names = ()

    def __init__(self, params, n_bits, ones_total, areas):
        self.params = params
        self.n_bits = n_bits
        self.ones_total = ones_total
        self.areas = [bytes(a) for a in areas]
        if len(self.areas) != len(self.area_names):
            raise ValueError(f"{self.variant} expects {len(self.area_names)} areas")
        self.k = params.k
        self.bb = 8 * params.k
        self.nblocks = -(-n_bits // self.bb)
        self._prepare()

    @classmethod
    def build(cls, bv, params):
        if bv.n_bits >= MAX_BITS:
            raise ValueError(f"n_bits={bv.n_bits} must be < 2^32 for 4-byte header fields")
        blocks, ranks = _split_blocks(bv, params.k)
        mono = _mono_mask(ranks, bv.n_bits, params.k)
        areas = cls._layout(blocks, ranks, params, mono)
        return cls(params, bv.n_bits, bv.ones_total, areas)

    def _check(self, i):
        if not 0 <= i <= self.n_bits:
            raise IndexError(f"prefix length {i} outside [0, {self.n_bits}]")

    def rank0(self, i):
        return i - self.rank1(i)

    def _is_mono(self, beta, d):
        # n_bits - beta*bb only drops below bb for the tail block
        return d == 0 or d == self.bb or d == self.n_bits - beta * self.bb

    def space_bits(self):
        return 8 * sum(len(a) for a in self.areas)

    def area_sizes(self):
        return dict(zip(self.area_names, (len(a) for a in self.areas)))

    def body_bytes(self):
        """Bytes spent on block bodies (data that is not a header field)."""
        raise NotImplementedError

    def serialize(self):
        return _container.pack(
            MAGIC,
            VARIANTS.index(self.variant),
            (self.params.k, self.params.h),
            self.params.ratio,
            self.n_bits,
            self.ones_total,
            self.areas,
        )

    def block_ranks(self):
        """Absolute rank at every block boundary, read back from the headers."""
        return np.array([self._block_rank(beta) for beta in range(self.nblocks + 1)], dtype=np.int64)

    def block_classes(self):
        r = self.block_ranks()
        d = np.diff(r)
        out = np.full(d.size, BlockClass.PLAIN, dtype=np.uint8)
        out[d == 0] = BlockClass.MONO0
        full = np.minimum(self.bb, self.n_bits - self.bb * np.arange(d.size))
        out[(d == full) & (d > 0)] = BlockClass.MONO1
        return out

    def mono_fraction(self):
        if self.nblocks == 0:
            return 0.0
        return float(np.count_nonzero(self.block_classes() != BlockClass.PLAIN)) / self.nblocks

    def __repr__(self):
        return f"<rank-{self.variant} {self.params.describe()} n={self.n_bits} space={self.space_bits()}b>"


class RankBasic(RankStructure):
    """Per-block absolute 4-byte rank and 4-byte offset, verbatim bodies."""

    variant = "basic"
    area_names = ("headers", "body")

    @staticmethod
    def _layout(blocks, ranks, params, mono):
        b = blocks.shape[0]
        plain = ~mono
        offsets = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(np.where(plain, params.k, 0), out=offsets[1:])
        hdr = np.zeros((b + 1, 8), dtype=np.uint8)
        col = _container.put_column(hdr, 0, ranks, "<u4")
        _container.put_column(hdr, col, offsets, "<u4")
        return [hdr, blocks[plain]]

    def _prepare(self):
        hdr = np.frombuffer(self.areas[0], dtype=np.uint8).reshape(-1, 8)
        self._ranks = hdr[:, 0:4].copy().view("<u4").ravel().tolist()
        self._offsets = hdr[:, 4:8].copy().view("<u4").ravel().tolist()
        self._body = self.areas[1]

    def _block_rank(self, beta):
        return self._ranks[beta]

    def body_bytes(self):
        return len(self.areas[1])

    def rank1(self, i):
        if not 0 <= i <= self.n_bits:
            self._check(i)
        bb = self.bb
        beta = i // bb
        if beta >= self.nblocks:
            return self.ones_total
        r0 = self._ranks[beta]
        d = self._ranks[beta + 1] - r0
        if d == 0:
            return r0
        rem = i - beta * bb
        if self._is_mono(beta, d):
            return r0 + rem
        return r0 + _popcount_prefix(self._body, self._offsets[beta], rem)

    def access_count_probe(self, i):
        ans = self.rank1(i)
        beta = i // self.bb
        if beta >= self.nblocks:
            return ans, 1
        d = self._ranks[beta + 1] - self._ranks[beta]
        return ans, 1 if self._is_mono(beta, d) else 2


class _SuperblockRank(RankStructure):
    """Shared rank-header handling for bch and mpe: one absolute rank per
    superblock, 2-byte differences for the other ``h - 1`` blocks."""

    def _prepare_ranks(self, mat, col):
        h = self.params.h
        first_rank, col = _container.get_column(mat, col, "<u4")
        first_offset, col = _container.get_column(mat, col, "<u4")
        diffs, col = _container.get_column(mat, col, "<u2", h - 1)
        self._first_rank = first_rank.ravel().tolist()
        self._first_offset = first_offset.ravel().tolist()
        self._diffs = diffs.ravel().tolist()
        self._nsuper = mat.shape[0]
        return col

    def _block_rank(self, beta):
        h = self.params.h
        s, t = divmod(beta, h)
        if s >= self._nsuper:
            return self._sentinel
        if t == 0:
            return self._first_rank[s]
        return self._first_rank[s] + self._diffs[s * (h - 1) + t - 1]

    def _rank_pair(self, beta):
        h = self.params.h
        s, t = divmod(beta, h)
        fr = self._first_rank[s]
        base = s * (h - 1)
        r0 = fr if t == 0 else fr + self._diffs[base + t - 1]
        if t + 1 < h:
            r1 = fr + self._diffs[base + t]
        elif s + 1 < self._nsuper:
            r1 = self._first_rank[s + 1]
        else:
            r1 = self._sentinel
        return s, t, r0, r1

    def access_count_probe(self, i):
        ans = self.rank1(i)
        beta = i // self.bb
        if beta >= self.nblocks:
            return ans, 1
        _, _, r0, r1 = self._rank_pair(beta)
        return ans, 1 if self._is_mono(beta, r1 - r0) else 2


def _superblock_ranks(ranks, b, h):
    """Pad block-start ranks to whole superblocks; returns (first_rank, diffs)."""
    nsuper = -(-b // h)
    total = int(ranks[-1])
    pad = np.full(nsuper * h, total, dtype=np.int64)
    pad[:b] = ranks[:b]
    grid = pad.reshape(nsuper, h)
    first = grid[:, 0]
    diffs = grid[:, 1:] - first[:, None]
    if diffs.size and diffs.max() >= 1 << 16:
        raise ValueError("differential rank overflow; h*k*8 must be < 2^16")
    return first, diffs


class RankBch(_SuperblockRank):
    """Compressed superblock headers with a mono-block bitmap, verbatim bodies."""

    variant = "bch"
    area_names = ("headers", "body")

    @staticmethod
    def header_size(h):
        return 8 + 2 * (h - 1) + 2 * ((h - 1 + 15) // 16)

    @classmethod
    def _layout(cls, blocks, ranks, params, mono):
        b = blocks.shape[0]
        h, k = params.h, params.k
        nsuper = -(-b // h)
        offsets = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(np.where(mono, 0, k), out=offsets[1:])

        first_rank, diffs = _superblock_ranks(ranks, b, h)
        mono_pad = np.ones(nsuper * h, dtype=bool)
        mono_pad[:b] = mono
        flag_bytes = 2 * ((h - 1 + 15) // 16)
        flag_bits = np.zeros((nsuper, 8 * flag_bytes), dtype=bool)
        flag_bits[:, : h - 1] = mono_pad.reshape(nsuper, h)[:, 1:]
        flags = np.packbits(flag_bits, axis=1, bitorder="little")

        hdr = np.zeros((nsuper, cls.header_size(h)), dtype=np.uint8)
        col = _container.put_column(hdr, 0, first_rank, "<u4")
        col = _container.put_column(hdr, col, offsets[: nsuper * h : h], "<u4")
        col = _container.put_column(hdr, col, diffs, "<u2", h - 1)
        hdr[:, col:] = flags
        sentinel = np.array([ranks[-1]], dtype="<u4")
        return [hdr.tobytes() + sentinel.tobytes(), blocks[~mono]]

    def _prepare(self):
        h = self.params.h
        raw = self.areas[0]
        hs = self.header_size(h)
        mat = np.frombuffer(raw[: len(raw) - 4], dtype=np.uint8).reshape(-1, hs)
        col = self._prepare_ranks(mat, 0)
        self._flags = [int.from_bytes(row.tobytes(), "little") for row in mat[:, col:]]
        self._sentinel = int.from_bytes(raw[-4:], "little")
        self._body = self.areas[1]

    def body_bytes(self):
        return len(self.areas[1])

    def rank1(self, i):
        if not 0 <= i <= self.n_bits:
            self._check(i)
        bb = self.bb
        beta = i // bb
        if beta >= self.nblocks:
            return self.ones_total
        s, t, r0, r1 = self._rank_pair(beta)
        d = r1 - r0
        if d == 0:
            return r0
        rem = i - beta * bb
        if self._is_mono(beta, d):
            return r0 + rem
        plain_before = 0
        if t:
            h = self.params.h
            d0 = self._diffs[s * (h - 1)]
            mono_before = (self._flags[s] & ((1 << (t - 1)) - 1)).bit_count()
            mono_before += d0 == 0 or d0 == bb
            plain_before = t - mono_before
        off = self._first_offset[s] + self.k * plain_before
        return r0 + _popcount_prefix(self._body, off, rem)


class RankMpe(_SuperblockRank):
    """Differential ranks and offsets; block mode flags live in the top offset bits."""

    area_names = ("headers", "body")

    @property
    def flag_bits(self):
        return 1 if self.variant == "mpe1" else 2

    @staticmethod
    def header_size(h):
        return 8 + 4 * (h - 1) + 1

    @classmethod
    def _layout(cls, blocks, ranks, params, mono):
        b, k = blocks.shape
        h = params.h
        nsuper = -(-b // h)
        policy = mpe.Policy(cls.variant, params.ratio)

        plain_idx = np.flatnonzero(~mono)
        modes = np.zeros(b, dtype=np.int64)
        sizes = np.zeros(b, dtype=np.int64)
        bodies = []
        for lo in range(0, plain_idx.size, _BATCH):
            sel = plain_idx[lo : lo + _BATCH]
            chunks = blocks[sel].view("<u2")
            m, sz, body = mpe.encode_many(chunks, k // 2, policy)
            modes[sel] = m
            sizes[sel] = sz
            bodies.append(body)
        offsets = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])

        fbits = 1 if cls.variant == "mpe1" else 2
        shift = 16 - fbits
        off_pad = np.full(nsuper * h, offsets[-1], dtype=np.int64)
        off_pad[:b] = offsets[:b]
        mode_pad = np.zeros(nsuper * h, dtype=np.int64)
        mode_pad[:b] = modes
        off_grid = off_pad.reshape(nsuper, h)
        first_offset = off_grid[:, 0]
        rel = off_grid[:, 1:] - first_offset[:, None]
        if rel.size and rel.max() >= 1 << shift:
            bad = int(np.argmax(rel.max(axis=1) >= 1 << shift))
            raise ValueError(f"superblock {bad}: differential offset {int(rel[bad].max())} exceeds {shift} bits")
        mode_grid = mode_pad.reshape(nsuper, h)
        flag = mode_grid[:, 1:]
        if fbits == 1:
            flag = (flag == mpe.Mode.BOTH).astype(np.int64)
        odiffs = rel | (flag << shift)

        first_rank, rdiffs = _superblock_ranks(ranks, b, h)
        hdr = np.zeros((nsuper, cls.header_size(h)), dtype=np.uint8)
        col = _container.put_column(hdr, 0, first_rank, "<u4")
        col = _container.put_column(hdr, col, first_offset, "<u4")
        col = _container.put_column(hdr, col, rdiffs, "<u2", h - 1)
        col = _container.put_column(hdr, col, odiffs, "<u2", h - 1)
        _container.put_column(hdr, col, mode_grid[:, 0], "<u1")
        sentinel = np.array([ranks[-1]], dtype="<u4")
        body = np.concatenate(bodies) if bodies else np.zeros(0, dtype=np.uint8)
        return [hdr.tobytes() + sentinel.tobytes(), body]

    def _prepare(self):
        h = self.params.h
        raw = self.areas[0]
        mat = np.frombuffer(raw[: len(raw) - 4], dtype=np.uint8).reshape(-1, self.header_size(h))
        col = self._prepare_ranks(mat, 0)
        odiffs, col = _container.get_column(mat, col, "<u2", h - 1)
        aux, _ = _container.get_column(mat, col, "<u1")
        self._odiffs = odiffs.ravel().tolist()
        self._aux = aux.ravel().tolist()
        self._sentinel = int.from_bytes(raw[-4:], "little")
        self._body = self.areas[1]
        self._shift = 16 - self.flag_bits
        self._lowmask = (1 << self._shift) - 1
        self._nchunks = self.k // 2

    def body_bytes(self):
        return len(self.areas[1])

    def block_mode(self, beta):
        """``(mode, byte offset)`` of block ``beta`` as stored in the headers."""
        h = self.params.h
        s, t = divmod(beta, h)
        if t == 0:
            return mpe.Mode(self._aux[s]), self._first_offset[s]
        v = self._odiffs[s * (h - 1) + t - 1]
        flag = v >> self._shift
        if self.flag_bits == 1:
            mode = mpe.Mode.BOTH if flag else mpe.Mode.VERBATIM
        else:
            mode = mpe.Mode(flag)
        return mode, self._first_offset[s] + (v & self._lowmask)

    def rank1(self, i):
        if not 0 <= i <= self.n_bits:
            self._check(i)
        bb = self.bb
        beta = i // bb
        if beta >= self.nblocks:
            return self.ones_total
        s, t, r0, r1 = self._rank_pair(beta)
        d = r1 - r0
        if d == 0:
            return r0
        rem = i - beta * bb
        if self._is_mono(beta, d):
            return r0 + rem
        if t == 0:
            mode, off = self._aux[s], self._first_offset[s]
        else:
            v = self._odiffs[s * (self.params.h - 1) + t - 1]
            off = self._first_offset[s] + (v & self._lowmask)
            mode = v >> self._shift
            if self.flag_bits == 1 and mode:
                mode = mpe.Mode.BOTH
        return r0 + mpe.prefix_popcount(self._body, off, mode, self._nchunks, rem)


class RankMpe1(RankMpe):
    variant = "mpe1"


class RankMpe2(RankMpe):
    variant = "mpe2"


class RankMpe3(RankMpe):
    variant = "mpe3"


class RankCf(RankStructure):
    """Cache-friendly split layout.

    The first ``j = b - m`` blocks live in slots of ``[rank u32][k data bytes]``.
    The remaining blocks keep ``[rank u32][offset u32]`` records; a non-mono
    block there points at the data area of a mono slot on the left, which
    would otherwise go unused.
    """

    variant = "cf"
    area_names = ("left", "right")

    @staticmethod
    def split_point(mono):
        """Smallest ``j`` with (monos in the first ``j``) == (non-monos after ``j``)."""
        b = mono.size
        m_prefix = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(mono, out=m_prefix[1:])
        m = m_prefix[-1]
        js = np.arange(b + 1)
        hit = np.flatnonzero(m_prefix == (b - js) - (m - m_prefix))
        return int(hit[0])

    @classmethod
    def _layout(cls, blocks, ranks, params, mono):
        b, k = blocks.shape
        j = cls.split_point(mono)
        slot = 4 + k

        data = blocks[:j].copy()
        left_mono = np.flatnonzero(mono[:j])
        right_plain = j + np.flatnonzero(~mono[j:])
        if left_mono.size != right_plain.size:
            raise AssertionError("split point does not balance mono and plain blocks")
        data[left_mono] = blocks[right_plain]
        left = np.zeros((j, slot), dtype=np.uint8)
        _container.put_column(left, 0, ranks[:j], "<u4")
        left[:, 4:] = data

        rb = b - j
        right_off = np.zeros(rb, dtype=np.int64)
        right_off[right_plain - j] = left_mono * slot + 4
        right = np.zeros((rb, 8), dtype=np.uint8)
        col = _container.put_column(right, 0, ranks[j:b], "<u4")
        _container.put_column(right, col, right_off, "<u4")

        left_sentinel = np.array([ranks[j]], dtype="<u4").tobytes()
        right_sentinel = np.array([ranks[-1]], dtype="<u4").tobytes()
        return [left.tobytes() + left_sentinel, right.tobytes() + right_sentinel]

    def _prepare(self):
        left, right = self.areas
        slot = 4 + self.k
        self.j = (len(left) - 4) // slot
        lmat = np.frombuffer(left[: self.j * slot], dtype=np.uint8).reshape(-1, slot)
        self._lranks = lmat[:, 0:4].copy().view("<u4").ravel().tolist()
        self._lranks.append(int.from_bytes(left[-4:], "little"))
        rmat = np.frombuffer(right[:-4], dtype=np.uint8).reshape(-1, 8)
        self._rranks = rmat[:, 0:4].copy().view("<u4").ravel().tolist()
        self._rranks.append(int.from_bytes(right[-4:], "little"))
        self._roffs = rmat[:, 4:8].copy().view("<u4").ravel().tolist()
        self._left = left
        self._slot = slot

    def _block_rank(self, beta):
        if beta < self.j:
            return self._lranks[beta]
        return self._rranks[beta - self.j]

    def body_bytes(self):
        return self.j * self.k

    def rank1(self, i):
        if not 0 <= i <= self.n_bits:
            self._check(i)
        bb = self.bb
        beta = i // bb
        if beta >= self.nblocks:
            return self.ones_total
        rem = i - beta * bb
        if beta < self.j:
            r0 = self._lranks[beta]
            d = self._lranks[beta + 1] - r0
            if d == 0:
                return r0
            if self._is_mono(beta, d):
                return r0 + rem
            return r0 + _popcount_prefix(self._left, beta * self._slot + 4, rem)
        x = beta - self.j
        r0 = self._rranks[x]
        d = self._rranks[x + 1] - r0
        if d == 0:
            return r0
        if self._is_mono(beta, d):
            return r0 + rem
        return r0 + _popcount_prefix(self._left, self._roffs[x], rem)

    def access_count_probe(self, i):
        ans = self.rank1(i)
        beta = i // self.bb
        if beta >= self.nblocks or beta < self.j:
            return ans, 1
        x = beta - self.j
        d = self._rranks[x + 1] - self._rranks[x]
        return ans, 1 if self._is_mono(beta, d) else 2


CLASSES = {
    "basic": RankBasic,
    "bch": RankBch,
    "mpe1": RankMpe1,
    "mpe2": RankMpe2,
    "mpe3": RankMpe3,
    "cf": RankCf,
}


def build_rank(bv, params):
    if isinstance(params, str):
        params = RankParams(params)
    return CLASSES[params.variant].build(bv, params)


def deserialize(data):
    code, (k, h, _, _), ratio, n_bits, ones_total, areas = _container.unpack(data, MAGIC)
    if code >= len(VARIANTS):
        raise ValueError(f"unknown rank variant code {code}")
    params = RankParams(VARIANTS[code], k, h, ratio)
    return CLASSES[params.variant](params, n_bits, ones_total, areas)
