"""Verification against the naive oracle, timed query workloads and CSV reports."""

import csv
import io
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import rank as rank_mod
from . import select as select_mod
from .corpus import MASK64, splitmix64_block

EXHAUSTIVE_LIMIT = 1 << 20
DEFAULT_SAMPLES = 100_000
DEFAULT_QUERIES = 1_000_000
WARMUP = 10_000

CSV_COLUMNS = (
    "dataset",
    "variant",
    "params",
    "n_bits",
    "ones",
    "space_bytes",
    "space_fraction",
    "queries",
    "seed",
    "ns_per_query",
    "checksum",
)


def kind_of(structure):
    if isinstance(structure, rank_mod.RankStructure):
        return "rank"
    if isinstance(structure, select_mod.SelectStructure):
        return "select"
    raise TypeError(f"not a rank/select structure: {structure!r}")


def load_structure(data):
    magic = bytes(data[:8])
    if magic == rank_mod.MAGIC:
        return rank_mod.deserialize(data)
    if magic == select_mod.MAGIC:
        return select_mod.deserialize(data)
    raise ValueError(f"unrecognised structure magic {magic!r}")


@dataclass(frozen=True)
class Workload:
    kind: str
    count: int
    seed: int

    def __post_init__(self):
        if self.kind not in ("rank", "select"):
            raise ValueError(f"workload kind must be rank or select, not {self.kind!r}")
        if self.count < 0:
            raise ValueError("query count must be non-negative")

    def queries(self, n_bits, ones_total):
        """Uniform ``i`` in ``[0, n]`` for rank, uniform ``j`` in ``[1, N1]`` for select."""
        raw = splitmix64_block(self.seed, 0, self.count)
        if self.kind == "rank":
            return raw % np.uint64(n_bits + 1)
        if ones_total == 0:
            if self.count:
                raise ValueError("select workload over a vector without ones")
            return raw
        return raw % np.uint64(ones_total) + np.uint64(1)


@dataclass
class VerifyResult:
    ok: bool
    checked: int
    counterexample: tuple = None  # (query, expected, got)

    def __bool__(self):
        return self.ok

    def describe(self):
        if self.ok:
            return f"PASS ({self.checked} queries)"
        q, want, got = self.counterexample
        return f"FAIL at query {q}: expected {want}, got {got}"


def _rank_oracle(bv, idx):
    prefix = bv.prefix_counts()
    w = idx >> 6
    words = np.append(bv.words, np.uint64(0))
    partial = words[w] & ((np.uint64(1) << (idx & 63).astype(np.uint64)) - np.uint64(1))
    return prefix[w] + np.bitwise_count(partial).astype(np.int64)


def verify(structure, bv, samples=DEFAULT_SAMPLES, exhaustive=None, seed=0x5EED):
    """Compare every (or ``samples`` random) query with the naive oracle.

    Exhaustive by default when ``n_bits <= 2**20``.
    """
    kind = kind_of(structure)
    if structure.n_bits != bv.n_bits or structure.ones_total != bv.ones_total:
        return VerifyResult(False, 0, ("shape", (bv.n_bits, bv.ones_total), (structure.n_bits, structure.ones_total)))
    if exhaustive is None:
        exhaustive = bv.n_bits <= EXHAUSTIVE_LIMIT
    if kind == "rank":
        if exhaustive:
            qs = np.arange(bv.n_bits + 1, dtype=np.int64)
        else:
            qs = Workload("rank", samples, seed).queries(bv.n_bits, bv.ones_total).astype(np.int64)
        expected = _rank_oracle(bv, qs)
        query = structure.rank1
    else:
        if bv.ones_total == 0:
            return VerifyResult(True, 0)
        if exhaustive:
            qs = np.arange(1, bv.ones_total + 1, dtype=np.int64)
        else:
            qs = Workload("select", samples, seed).queries(bv.n_bits, bv.ones_total).astype(np.int64)
        expected = bv.ones_positions()[qs - 1]
        query = structure.select1
    qs = qs.tolist()
    expected = expected.tolist()
    for q, want in zip(qs, expected):
        try:
            got = query(q)
        except Exception as exc:  # a corrupted structure may fail in any way
            return VerifyResult(False, len(qs), (q, want, repr(exc)))
        if got != want:
            return VerifyResult(False, len(qs), (q, want, got))
    return VerifyResult(True, len(qs))


@dataclass
class BenchReport:
    dataset: str
    variant: str
    params: str
    n_bits: int
    ones: int
    space_bytes: int
    space_fraction: float
    queries: int
    seed: int
    ns_per_query: float
    checksum: int
    mean_accesses: float = None  # only with probing; not part of the CSV


def run_bench(structure, workload, dataset="-", probe=False, warmup=WARMUP):
    kind = kind_of(structure)
    if workload.kind != kind:
        raise ValueError(f"{workload.kind} workload cannot run against a {kind} structure")
    qs = workload.queries(structure.n_bits, structure.ones_total).tolist()
    f = structure.rank1 if kind == "rank" else structure.select1
    for q in qs[:warmup]:
        f(q)
    acc = 0
    t0 = time.perf_counter_ns()
    for q in qs:
        acc += f(q)
    elapsed = time.perf_counter_ns() - t0

    mean_acc = None
    if probe:
        if kind != "rank":
            raise ValueError("access probing is only instrumented for rank structures")
        total = 0
        for q in qs:
            total += structure.access_count_probe(q)[1]
        mean_acc = total / len(qs) if qs else 0.0

    space_bits = structure.space_bits()
    n = structure.n_bits
    return BenchReport(
        dataset=dataset,
        variant=f"{kind}-{structure.variant}",
        params=structure.params.describe(),
        n_bits=n,
        ones=structure.ones_total,
        space_bytes=space_bits // 8,
        space_fraction=space_bits / n if n else 0.0,
        queries=len(qs),
        seed=workload.seed,
        ns_per_query=elapsed / len(qs) if qs else 0.0,
        checksum=acc & MASK64,
        mean_accesses=mean_acc,
    )


def mean_block_aligned_accesses(structure):
    """Average probe count over queries at every block start."""
    bb = structure.bb
    if structure.nblocks == 0:
        return 1.0
    total = sum(structure.access_count_probe(beta * bb)[1] for beta in range(structure.nblocks))
    return total / structure.nblocks


def write_csv(reports):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        row = asdict(r)
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return out.getvalue()


def read_csv(text):
    types = {f.name: f.type for f in fields(BenchReport)}
    rows = list(csv.DictReader(io.StringIO(text)))
    reports = []
    for row in rows:
        kw = {}
        for c in CSV_COLUMNS:
            t = types[c]
            kw[c] = float(row[c]) if t in (float, "float") else int(row[c]) if t in (int, "int") else row[c]
        reports.append(BenchReport(**kw))
    return reports


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)
