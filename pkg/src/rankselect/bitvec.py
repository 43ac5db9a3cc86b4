"""Word-packed bitvector with naive reference queries.

Bit ``i`` lives in word ``i // 64`` at position ``i % 64`` counting from the
least significant bit.  Bits past ``n_bits`` in the last word are always zero.
"""

import struct

import numpy as np

MAGIC = b"BITVEC01"
MAX_BITS = 1 << 32

_HEADER = struct.Struct("<8sQ")


class BitVector:
    """Immutable sequence of bits packed into little-endian 64-bit words."""

    __slots__ = ("n_bits", "words", "ones_total", "_bytes")

    def __init__(self, words, n_bits):
        words = np.ascontiguousarray(words, dtype="<u8")
        if words.shape != ((n_bits + 63) // 64,):
            raise ValueError(f"{n_bits} bits need {(n_bits + 63) // 64} words, got {words.shape}")
        tail = n_bits % 64
        if tail and int(words[-1]) >> tail:
            # never trust callers with the padding rule
            words = words.copy()
            words[-1] &= np.uint64((1 << tail) - 1)
        words.setflags(write=False)
        self.n_bits = n_bits
        self.words = words
        self.ones_total = int(np.bitwise_count(words).sum(dtype=np.int64))
        self._bytes = None

    @classmethod
    def from_bits(cls, bits):
        """Pack a sequence of 0/1 values (list, string of '0'/'1', or array)."""
        if isinstance(bits, str):
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(bits, dtype=np.uint8).ravel()
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls.from_bool_array(arr)

    @classmethod
    def from_bool_array(cls, arr):
        n = int(arr.size)
        packed = np.packbits(arr.astype(bool, copy=False), bitorder="little")
        pad = (-packed.size) % 8
        if pad:
            packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
        return cls(packed.view("<u8"), n)

    @classmethod
    def from_bytes(cls, data, n_bits=None):
        """Wrap raw little-endian bytes; byte ``t`` bit ``u`` is bit ``8t + u``."""
        data = bytes(data)
        if n_bits is None:
            n_bits = 8 * len(data)
        nbytes = (n_bits + 7) // 8
        if nbytes > len(data):
            raise ValueError("not enough bytes for requested bit length")
        buf = np.zeros(((n_bits + 63) // 64) * 8, dtype=np.uint8)
        buf[:nbytes] = np.frombuffer(data, dtype=np.uint8, count=nbytes)
        return cls(buf.view("<u8"), n_bits)

    def __len__(self):
        return self.n_bits

    def __eq__(self, other):
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.n_bits == other.n_bits and np.array_equal(self.words, other.words)

    def __repr__(self):
        return f"BitVector(n_bits={self.n_bits}, ones_total={self.ones_total})"

    def to_bytes(self):
        """Packed little-endian bytes, padded to whole words."""
        if self._bytes is None:
            self._bytes = self.words.tobytes()
        return self._bytes

    def to_bool_array(self):
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return bits[: self.n_bits]

    def get(self, i):
        if not 0 <= i < self.n_bits:
            raise IndexError(f"bit index {i} out of range [0, {self.n_bits})")
        return (int(self.words[i >> 6]) >> (i & 63)) & 1

    def ones_in_range(self, start, end):
        """Number of ones in ``[start, end)`` via word popcounts."""
        if not 0 <= start <= end <= self.n_bits:
            raise IndexError(f"range [{start}, {end}) outside [0, {self.n_bits}]")
        if start == end:
            return 0
        w0, w1 = start >> 6, (end - 1) >> 6
        lo_mask = ~((1 << (start & 63)) - 1) & 0xFFFFFFFFFFFFFFFF
        hi_bits = ((end - 1) & 63) + 1
        hi_mask = (1 << hi_bits) - 1
        if w0 == w1:
            return (int(self.words[w0]) & lo_mask & hi_mask).bit_count()
        total = (int(self.words[w0]) & lo_mask).bit_count()
        total += (int(self.words[w1]) & hi_mask).bit_count()
        if w1 > w0 + 1:
            total += int(np.bitwise_count(self.words[w0 + 1 : w1]).sum(dtype=np.int64))
        return total

    def naive_rank1(self, i):
        """Ones among the first ``i`` bits."""
        if not 0 <= i <= self.n_bits:
            raise IndexError(f"prefix length {i} outside [0, {self.n_bits}]")
        return self.ones_in_range(0, i)

    def naive_rank0(self, i):
        return i - self.naive_rank1(i)

    def naive_select1(self, j):
        """Position of the ``j``-th one (1-based), found by a linear word scan."""
        if not 1 <= j <= self.ones_total:
            raise IndexError(f"ordinal {j} outside [1, {self.ones_total}]")
        seen = 0
        for w, word in enumerate(self.words.tolist()):
            c = word.bit_count()
            if seen + c >= j:
                for u in range(64):
                    if (word >> u) & 1:
                        seen += 1
                        if seen == j:
                            return 64 * w + u
            seen += c
        raise AssertionError("ones_total inconsistent with words")

    # Vectorised oracles used by verification harnesses on large inputs.

    def prefix_counts(self):
        """``out[w]`` = ones in words ``[0, w)``; length ``len(words) + 1``."""
        out = np.zeros(self.words.size + 1, dtype=np.int64)
        np.cumsum(np.bitwise_count(self.words), out=out[1:])
        return out

    def ones_positions(self):
        """Sorted positions of all ones."""
        return np.flatnonzero(self.to_bool_array())


def build_bitvector(bits):
    return BitVector.from_bits(bits)


def serialize(bv):
    return _HEADER.pack(MAGIC, bv.n_bits) + bv.to_bytes()


def deserialize(data):
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise ValueError("truncated bitvector stream")
    magic, n_bits = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad bitvector magic {magic!r}")
    nwords = (n_bits + 63) // 64
    body = data[_HEADER.size :]
    if len(body) != 8 * nwords:
        raise ValueError(f"expected {8 * nwords} payload bytes, got {len(body)}")
    return BitVector(np.frombuffer(body, dtype="<u8").copy(), n_bits)


def save(bv, path):
    with open(path, "wb") as f:
        f.write(serialize(bv))


def load(path):
    with open(path, "rb") as f:
        return deserialize(f.read())
