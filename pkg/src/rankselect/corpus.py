"""Dataset generation: wavelet-tree bit emission over byte texts and seeded random bitvectors."""

import heapq
from dataclasses import dataclass

import numpy as np

from .bitvec import BitVector

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_RNG_BATCH = 1 << 22


class SplitMix64:
    """Scalar splitmix64 stream."""

    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _M1) & MASK64
        z = ((z ^ (z >> 27)) * _M2) & MASK64
        return z ^ (z >> 31)


def splitmix64_block(seed, start, count):
    """Outputs ``start .. start + count - 1`` (0-based) of the stream seeded by ``seed``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + idx * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def random_bitvector(n, density, seed):
    """Bit ``i`` is set iff the ``i``-th splitmix64 output is below ``density * 2**64``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density {density} outside [0, 1]")
    threshold = int(density * 2.0**64)
    out = np.empty(n, dtype=bool)
    for lo in range(0, n, _RNG_BATCH):
        cnt = min(_RNG_BATCH, n - lo)
        if threshold > MASK64:
            out[lo : lo + cnt] = True
        else:
            out[lo : lo + cnt] = splitmix64_block(seed, lo, cnt) < np.uint64(threshold)
    return BitVector.from_bool_array(out)


def huffman_codes(freqs):
    """Canonical Huffman codes as ``{symbol: '0101...'}``.

    Code lengths come from the usual two-smallest merge; codes are then
    reassigned canonically in ``(length, symbol)`` order.
    """
    items = sorted((s, c) for s, c in dict(freqs).items() if c > 0)
    if not items:
        raise ValueError("need at least one symbol with positive frequency")
    if len(items) == 1:
        return {items[0][0]: "0"}
    heap = [(c, n, [s]) for n, (s, c) in enumerate(items)]
    heapq.heapify(heap)
    depth = {s: 0 for s, _ in items}
    tiebreak = len(items)
    while len(heap) > 1:
        c1, _, g1 = heapq.heappop(heap)
        c2, _, g2 = heapq.heappop(heap)
        for s in g1 + g2:
            depth[s] += 1
        heapq.heappush(heap, (c1 + c2, tiebreak, g1 + g2))
        tiebreak += 1
    return canonical_codes(depth)


def canonical_codes(lengths):
    order = sorted(lengths, key=lambda s: (lengths[s], s))
    codes = {}
    code = 0
    prev = lengths[order[0]]
    for s in order:
        code <<= lengths[s] - prev
        prev = lengths[s]
        codes[s] = format(code, f"0{prev}b")
        code += 1
    return codes


def balanced_codes(alphabet):
    """Fixed-length binary of each symbol's rank in the sorted alphabet."""
    alphabet = sorted(alphabet)
    if not alphabet:
        raise ValueError("empty alphabet")
    width = max(1, (len(alphabet) - 1).bit_length())
    return {s: format(r, f"0{width}b") for r, s in enumerate(alphabet)}


@dataclass(frozen=True)
class WtPlan:
    shape: str
    alphabet: tuple
    codes: dict

    @classmethod
    def for_text(cls, text, shape):
        text = bytes(text)
        if not text:
            raise ValueError("wavelet tree needs a non-empty text")
        counts = np.bincount(np.frombuffer(text, dtype=np.uint8), minlength=256)
        alphabet = tuple(int(s) for s in np.flatnonzero(counts))
        if shape == "balanced":
            codes = balanced_codes(alphabet)
        elif shape == "huffman":
            codes = huffman_codes({s: int(counts[s]) for s in alphabet})
        else:
            raise ValueError(f"unknown wavelet tree shape {shape!r}")
        return cls(shape, alphabet, codes)

    def code_arrays(self):
        values = np.zeros(256, dtype=np.int64)
        lengths = np.zeros(256, dtype=np.int64)
        for s, c in self.codes.items():
            values[s] = int(c, 2)
            lengths[s] = len(c)
        return values, lengths

    @property
    def depth(self):
        return max(len(c) for c in self.codes.values())


def wt_concat_bits(text, shape, plan=None):
    """Concatenate the node bitvectors of a binary wavelet tree, breadth first.

    At depth ``d`` the nodes are ordered left to right, i.e. by the ``d``-bit
    code prefix; each node contributes, in text order, bit ``d`` of the code
    of every symbol routed through it.
    """
    text = bytes(text)
    plan = plan or WtPlan.for_text(text, shape)
    values, lengths = plan.code_arrays()
    sym = np.frombuffer(text, dtype=np.uint8)
    code = values[sym]
    clen = lengths[sym]
    parts = []
    for d in range(plan.depth):
        active = np.flatnonzero(clen > d)
        prefix = code[active] >> (clen[active] - d)
        bit = (code[active] >> (clen[active] - d - 1)) & 1
        order = np.argsort(prefix, kind="stable")
        parts.append(bit[order].astype(np.uint8))
    bits = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
    return BitVector.from_bool_array(bits)


def wt_decode(bv, plan, n):
    """Rebuild the ``n``-symbol text from its concatenated wavelet-tree bits."""
    code_keys = {}
    for s, c in plan.codes.items():
        code_keys[(1 << len(c)) | int(c, 2)] = s
    keys = np.array(sorted(code_keys), dtype=np.int64)
    key_sym = np.array([code_keys[k] for k in keys.tolist()], dtype=np.uint8)

    bits = bv.to_bool_array().astype(np.int64)
    prefix = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    out = np.zeros(n, dtype=np.uint8)
    pos = 0
    d = 0
    while not done.all():
        active = np.flatnonzero(~done)
        order = np.argsort(prefix[active], kind="stable")
        take = bits[pos : pos + active.size]
        if take.size != active.size:
            raise ValueError("bit stream ends before every symbol reaches a leaf")
        pos += active.size
        routed = active[order]
        prefix[routed] = 2 * prefix[routed] + take
        d += 1
        key = prefix[active] | (1 << d)
        hit = np.searchsorted(keys, key)
        hit_ok = (hit < keys.size) & (keys[np.minimum(hit, keys.size - 1)] == key)
        out[active[hit_ok]] = key_sym[hit[hit_ok]]
        done[active[hit_ok]] = True
        if d > 64:
            raise ValueError("code deeper than 64 levels; corrupt plan")
    if pos != bv.n_bits:
        raise ValueError(f"{bv.n_bits - pos} trailing bits left after decoding")
    return out.tobytes()


# Synthetic stand-ins for the text collections; only their statistics matter.

_PROTEIN_FREQ = {
    "A": 8.3, "R": 5.5, "N": 4.1, "D": 5.5, "C": 1.4, "Q": 3.9, "E": 6.8, "G": 7.1, "H": 2.3, "I": 5.9,
    "L": 9.7, "K": 5.8, "M": 2.4, "F": 3.9, "P": 4.7, "S": 6.6, "T": 5.3, "W": 1.1, "Y": 2.9, "V": 6.9,
}


def synthetic_text(kind, nbytes, seed=0):
    """Deterministic text of roughly natural statistics: dna, proteins, english or xml."""
    rng = np.random.default_rng(seed)
    if kind == "dna":
        alpha = np.frombuffer(b"ACGTN", dtype=np.uint8)
        p = np.array([0.295, 0.205, 0.205, 0.294, 0.001])
        return alpha[rng.choice(alpha.size, size=nbytes, p=p)].tobytes()
    if kind == "proteins":
        alpha = np.frombuffer("".join(_PROTEIN_FREQ).encode(), dtype=np.uint8)
        p = np.array(list(_PROTEIN_FREQ.values()))
        return alpha[rng.choice(alpha.size, size=nbytes, p=p / p.sum())].tobytes()
    if kind in ("english", "xml"):
        words = _vocabulary(rng, 5000)
        ranks = np.arange(1, len(words) + 1, dtype=np.float64)
        zipf = 1.0 / ranks
        zipf /= zipf.sum()
        out = bytearray()
        while len(out) < nbytes:
            picks = rng.choice(len(words), size=4096, p=zipf)
            if kind == "english":
                chunk = b" ".join(words[i] for i in picks.tolist())
                out += chunk.capitalize() + b".\n"
            else:
                for a, b in zip(picks[0::2].tolist(), picks[1::2].tolist()):
                    out += b"<" + words[a] + b">" + words[b] + b"</" + words[a] + b">\n"
        return bytes(out[:nbytes])
    raise ValueError(f"unknown text kind {kind!r}")


def _vocabulary(rng, size):
    letters = np.frombuffer(b"etaoinshrdlcumwfgypbvkjxqz", dtype=np.uint8)
    lf = 1.0 / np.arange(1, letters.size + 1) ** 0.9
    lf /= lf.sum()
    words = []
    for _ in range(size):
        ln = int(rng.integers(1, 10))
        words.append(letters[rng.choice(letters.size, size=ln, p=lf)].tobytes())
    return words
