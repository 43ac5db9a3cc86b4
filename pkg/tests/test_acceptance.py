"""Acceptance checks.  Each test records its outcome through ``conftest.record``;
the terminal summary prints one PASS/FAIL line per criterion."""

import csv
import functools
import io
import time

import numpy as np
import pytest

from conftest import interleaved, record, runs_vector
from rankselect import _container, bench, mpe
from rankselect.bitvec import BitVector
from rankselect.corpus import WtPlan, random_bitvector, synthetic_text, wt_concat_bits, wt_decode
from rankselect.rank import VARIANTS as RANK_VARIANTS
from rankselect.rank import RankParams, build_rank, expected_accesses
from rankselect.select import VARIANTS as SELECT_VARIANTS
from rankselect.select import SelectParams, build_select

C1, C2, C3, C4, C5, C6, C7 = (
    "1 oracle equivalence",
    "2 access model",
    "3 space accounting",
    "4 checksum consistency",
    "5 bench harness",
    "6 mono payoff",
    "7 corpus round-trip",
)

SMALL_N = 1 << 20
RANDOM_EXHAUSTIVE_N = SMALL_N
SAMPLES = 100_000


@functools.lru_cache(maxsize=None)
def english_mb():
    return synthetic_text("english", 1 << 20, seed=0)


@functools.lru_cache(maxsize=2)
def dataset(name):
    if name == "all-zero":
        return BitVector.from_bits(np.zeros(SMALL_N, np.uint8))
    if name == "all-one":
        return BitVector.from_bits(np.ones(SMALL_N, np.uint8))
    if name == "alternating":
        return BitVector.from_bits(np.tile(np.array([0, 1], np.uint8), SMALL_N // 2))
    if name.startswith("random"):
        _, d, n = name.split("-")
        return random_bitvector(int(float(n)), float(d), seed=1)
    if name.startswith("wt-"):
        return wt_concat_bits(english_mb(), name[3:])
    raise KeyError(name)


DATASETS = [
    "all-zero",
    "all-one",
    "alternating",
    *(f"random-{d}-{RANDOM_EXHAUSTIVE_N}" for d in ("0.05", "0.2", "0.5")),
    *(f"random-{d}-1e7" for d in ("0.05", "0.2", "0.5")),
    "random-0.2-1e8",
    "wt-balanced",
    "wt-huffman",
]


# --- 1: oracle equivalence ----------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["rank", "select"])
@pytest.mark.parametrize("name", DATASETS)
def test_oracle_equivalence(name, kind):
    bv = dataset(name)
    exhaustive = bv.n_bits <= SMALL_N
    variants = RANK_VARIANTS if kind == "rank" else SELECT_VARIANTS
    bad = []
    checked = 0
    for v in variants:
        s = build_rank(bv, RankParams(v)) if kind == "rank" else build_select(bv, SelectParams(v))
        res = bench.verify(s, bv, samples=SAMPLES, exhaustive=exhaustive)
        checked += res.checked
        if not res.ok:
            bad.append(f"{v} {res.describe()}")
        del s
    how = "exhaustive" if exhaustive else "sampled"
    record(C1, not bad, f"{kind}/{name} {how} {checked} queries" + (f" {bad}" if bad else ""))
    assert not bad


# --- 2: access model ----------------------------------------------------------

REFERENCE_ROWS = [
    ("dna200-bal", 73.60, 1.2640, 1.1943),
    ("english200-bal", 52.95, 1.4705, 1.2491),
    ("proteins200-bal", 45.66, 1.5434, 1.2481),
    ("xml200-bal", 78.50, 1.2150, 1.1688),
    ("dna200-huff", 9.03, 1.9097, 1.0822),
    ("english200-huff", 23.74, 1.7626, 1.1811),
    ("proteins200-huff", 3.84, 1.9616, 1.0370),
    ("xml200-huff", 68.35, 1.3165, 1.2163),
]
TOL = 5e-5


def test_reference_rows_within_rounding():
    misses = []
    for name, pct, basic, cf in REFERENCE_ROWS:
        f = pct / 100
        for variant, want in (("basic", basic), ("cf", cf)):
            got = expected_accesses(variant, f)
            if abs(got - want) > TOL:
                misses.append(f"{name} {variant}: {got:.6f} vs {want} (off {got - want:+.1e})")
    record(C2, not misses, "8 reference rows at 5e-5" + (f": {misses}" if misses else ""))
    assert not misses


def test_reference_rows_consistent_with_rounded_fraction():
    """Every row is reproduced by some fraction that rounds to the printed percentage."""
    for name, pct, basic, cf in REFERENCE_ROWS:
        f = pct / 100
        grid = np.linspace(f - 5e-5, f + 5e-5, 20001)
        ok_basic = np.abs(2 - grid - basic) <= TOL
        ok_cf = np.abs(1 + grid - grid * grid - cf) <= TOL
        assert np.any(ok_basic & ok_cf), name


FRACTIONS = [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)]


@pytest.mark.parametrize("num,den", FRACTIONS)
def test_instrumented_accesses_match_model(num, den):
    f = num / den
    bv = interleaved(num, den, 2048)
    report = []
    ok = True
    for v in ("basic", "cf"):
        s = build_rank(bv, RankParams(v))
        assert s.mono_fraction() == f
        got = bench.mean_block_aligned_accesses(s)
        want = expected_accesses(v, f)
        ok &= abs(got - want) <= 0.01
        report.append(f"{v} {got:.4f}/{want:.4f}")
    record(C2, ok, f"probe f={f}: " + ", ".join(report))
    assert ok


# --- 3: space accounting ------------------------------------------------------


def test_basic_all_zero_8192_bits():
    s = build_rank(BitVector.from_bits(np.zeros(8192, np.uint8)), RankParams("basic"))
    got = s.space_bits() // 8
    record(C3, got == 136, f"basic all-zero 8192 bits = {got} bytes")
    assert got == 136


def mpe_size_formula(mode, n, nz, no):
    field = 2 * -(-n // 16)
    return {
        mpe.Mode.VERBATIM: 2 * n,
        mpe.Mode.ZEROS: field + 2 * (n - nz),
        mpe.Mode.ONES: field + 2 * (n - no),
        mpe.Mode.BOTH: 2 * field + 2 * (n - nz - no),
    }[mode]


def analytic_rank_bytes(bits, params):
    k, h = params.k, params.h
    bb = 8 * k
    b = -(-bits.size // bb)
    padded = np.zeros(b * bb, np.uint8)
    padded[: bits.size] = bits
    blocks = padded.reshape(b, bb)
    ones = blocks.sum(axis=1)
    length = [min(bb, bits.size - i * bb) for i in range(b)]
    plain = [i for i in range(b) if 0 < ones[i] < length[i]]
    nsuper = -(-b // h)
    v = params.variant
    if v == "basic":
        return 8 * (b + 1) + k * len(plain)
    if v == "bch":
        return nsuper * (8 + 2 * (h - 1) + 2 * -(-(h - 1) // 16)) + 4 + k * len(plain)
    if v == "cf":
        return len(plain) * (4 + k) + 4 + (b - len(plain)) * 8 + 4
    body = 0
    for i in plain:
        raw = np.packbits(blocks[i], bitorder="little").tobytes()
        body += mpe.mpe_encode(raw, mpe.Policy(v, params.ratio)).size
    return nsuper * (8 + 4 * (h - 1) + 1) + 4 + body


def analytic_select_bytes(bits, params):
    ell, thr, h = params.ell, params.thr, params.h
    pos = np.flatnonzero(bits)
    q, rem = divmod(pos.size, ell)
    nb = q + (rem > 0)
    body = 0
    prev = -1
    for i in range(q):
        end = int(pos[(i + 1) * ell - 1])
        gap = end - prev
        if gap == ell:
            pass
        elif gap > thr:
            body += 4 * (ell - 1)
        else:
            interior = bits[prev + 1 : end]
            if params.variant.startswith("mpe"):
                padded = np.zeros(16 * -(-interior.size // 16), np.uint8)
                padded[: interior.size] = interior
                raw = np.packbits(padded, bitorder="little").tobytes()
                body += mpe.mpe_encode(raw, mpe.Policy(params.variant, params.ratio)).size
            else:
                body += -(-interior.size // 8)
        prev = end
    body += 4 * rem
    nsuper = -(-nb // h)
    hdr = 8 * h if params.variant == "basic" else 4 * h + 4 + 2 * (h - 1) + (params.variant != "bch")
    return nsuper * hdr + body


def space_vectors():
    rng = np.random.default_rng(33)
    sparse = np.zeros(1 << 16, np.uint8)
    sparse[rng.integers(0, sparse.size, 60)] = 1
    clustered = runs_vector(1 << 16, 2, p_mono=0.4, k=16)
    clustered[rng.integers(0, clustered.size, 500)] = 0
    return {
        "random-0.2": (rng.random(50_001) < 0.2).astype(np.uint8),
        "runs": runs_vector(1 << 16, 1, p_mono=0.6, k=128),
        "clustered": clustered,
        "sparse": sparse,
        "all-one": np.ones(40_000, np.uint8),
    }


def test_layout_sizes_match_analytic_and_serialized():
    mismatches = []
    count = 0
    for name, bits in space_vectors().items():
        bv = BitVector.from_bits(bits)
        for params in [RankParams(v) for v in RANK_VARIANTS] + [RankParams("mpe2", 64, 8), RankParams("cf", 16)]:
            s = build_rank(bv, params)
            want = analytic_rank_bytes(bits, params)
            ser = len(s.serialize()) - _container.framing_size(len(s.areas))
            count += 1
            if not s.space_bits() // 8 == want == ser:
                mismatches.append(f"rank {params.describe()} on {name}: {s.space_bits() // 8}/{want}/{ser}")
        for params in [SelectParams(v) for v in SELECT_VARIANTS] + [SelectParams(v, 16, 64, 4) for v in SELECT_VARIANTS]:
            s = build_select(bv, params)
            want = analytic_select_bytes(bits, params)
            ser = len(s.serialize()) - _container.framing_size(len(s.areas))
            count += 1
            if not s.space_bits() // 8 == want == ser:
                mismatches.append(f"select {params.variant} ell={params.ell} on {name}: {s.space_bits() // 8}/{want}/{ser}")
    record(C3, not mismatches, f"{count} layouts analytic == serialized" + (f": {mismatches}" if mismatches else ""))
    assert not mismatches


def test_mpe_formulas_and_criteria_on_random_blocks():
    rng = np.random.default_rng(77)
    k = 128
    n = k // 2
    bad = 0
    total = 0
    for _ in range(3000):
        vals = rng.integers(1, 0xFFFF, n, dtype=np.uint16)
        u = rng.random(n)
        rate = rng.random() * 0.6
        vals[u < rate / 2] = 0
        vals[(u >= rate / 2) & (u < rate)] = 0xFFFF
        raw = vals.astype("<u2").tobytes()
        nz, no = int((vals == 0).sum()), int((vals == 0xFFFF).sum())
        for v in ("mpe1", "mpe2", "mpe3"):
            e = mpe.mpe_encode(raw, mpe.Policy(v))
            total += 1
            allowed = [mpe.Mode.BOTH] if v == "mpe1" else [mpe.Mode.ZEROS, mpe.Mode.ONES, mpe.Mode.BOTH]
            best = min(mpe_size_formula(m, n, nz, no) for m in allowed)
            if v == "mpe3":
                should = best <= k // 2
            else:
                should = nz + no >= k // 16
            ok = e.size == mpe_size_formula(e.mode, n, nz, no)
            ok &= (e.mode != mpe.Mode.VERBATIM) == should
            ok &= e.mode == mpe.Mode.VERBATIM or e.size == best
            ok &= e.decode() == raw
            bad += not ok
    record(C3, bad == 0, f"mpe size/criterion on {total} random blocks, {bad} violations")
    assert bad == 0


# --- 4: checksums -------------------------------------------------------------


@pytest.mark.parametrize("name", ["runs-2^20", "wt-huffman"])
def test_checksums_agree_across_variants(name):
    bv = BitVector.from_bits(runs_vector(1 << 20, 8, p_mono=0.5, k=64)) if name == "runs-2^20" else dataset(name)
    rank_wl = bench.Workload("rank", 100_000, 42)
    sel_wl = bench.Workload("select", 100_000, 43)
    rank_sums = {v: bench.run_bench(build_rank(bv, RankParams(v)), rank_wl, warmup=0).checksum for v in RANK_VARIANTS}
    sel_sums = {v: bench.run_bench(build_select(bv, SelectParams(v)), sel_wl, warmup=0).checksum for v in SELECT_VARIANTS}
    ok = len(set(rank_sums.values())) == 1 and len(set(sel_sums.values())) == 1
    record(C4, ok, f"{name}: rank {sorted(set(rank_sums.values()))}, select {sorted(set(sel_sums.values()))}")
    assert ok


# --- 5: bench harness ---------------------------------------------------------


def well_formed(text, rows):
    parsed = list(csv.reader(io.StringIO(text)))
    if parsed[0] != list(bench.CSV_COLUMNS) or len(parsed) != rows + 1:
        return False
    for row in parsed[1:]:
        if len(row) != len(bench.CSV_COLUMNS):
            return False
        rec = dict(zip(bench.CSV_COLUMNS, row))
        for c in ("n_bits", "ones", "space_bytes", "queries", "seed", "checksum"):
            int(rec[c])
        for c in ("space_fraction", "ns_per_query"):
            float(rec[c])
    return True


@pytest.mark.slow
def test_bench_runs_a_million_queries_each_on_1e8_bits():
    bv = dataset("random-0.2-1e8")
    reports = []
    t0 = time.perf_counter()
    r = build_rank(bv, RankParams("basic"))
    reports.append(bench.run_bench(r, bench.Workload("rank", 1_000_000, 1), dataset="random-0.2-1e8"))
    del r
    s = build_select(bv, SelectParams("basic"))
    reports.append(bench.run_bench(s, bench.Workload("select", 1_000_000, 1), dataset="random-0.2-1e8"))
    del s
    elapsed = time.perf_counter() - t0
    text = bench.write_csv(reports)
    ok = all(rep.queries == 1_000_000 for rep in reports) and well_formed(text, 2)
    ok &= bench.read_csv(text)[0].checksum == reports[0].checksum
    ns = ", ".join(f"{rep.variant} {rep.ns_per_query:.0f} ns" for rep in reports)
    record(C5, ok, f"1e6 rank + 1e6 select on 1e8 bits in {elapsed:.0f}s ({ns}), CSV well-formed")
    assert ok


@pytest.mark.parametrize("kind", ["dna", "proteins", "english", "xml"])
def test_basic_needs_more_accesses_than_cf_on_huffman_trees(kind):
    bv = wt_concat_bits(synthetic_text(kind, 1 << 20, seed=0), "huffman")
    basic = build_rank(bv, RankParams("basic"))
    f = basic.mono_fraction()
    if f >= 0.5:
        record(C5, True, f"huffman-{kind} f={f:.3f} (not in scope)")
        return
    wl = bench.Workload("rank", 100_000, 5)
    a = bench.run_bench(basic, wl, probe=True, warmup=0).mean_accesses
    b = bench.run_bench(build_rank(bv, RankParams("cf")), wl, probe=True, warmup=0).mean_accesses
    record(C5, a > b, f"huffman-{kind} f={f:.3f}: basic {a:.3f} > cf {b:.3f}")
    assert a > b


# --- 6: mono payoff -----------------------------------------------------------


def test_all_ones_stores_no_bodies():
    bv = BitVector.from_bits(np.ones(10_000_000, np.uint8))
    bodies = {f"rank-{v}": build_rank(bv, RankParams(v)).body_bytes() for v in RANK_VARIANTS}
    for v in SELECT_VARIANTS:
        s = build_select(bv, SelectParams(v))
        bodies[f"select-{v}"] = s.dense_payload_bytes()
        assert s.area_sizes()["body"] == 0
    nonzero = {k: b for k, b in bodies.items() if b}
    record(C6, not nonzero, f"all-one 1e7 bits: {len(bodies)} structures, nonzero bodies {nonzero or 'none'}")
    assert not nonzero


# --- 7: corpus round-trip -----------------------------------------------------


def test_wavelet_tree_roundtrip_on_random_texts():
    rng = np.random.default_rng(2024)
    failures = 0
    for t in range(100):
        sigma = int(rng.integers(1, 257))
        alphabet = rng.choice(256, size=sigma, replace=False).astype(np.uint8)
        weights = rng.pareto(1.0, sigma) + 1e-3
        n = int(rng.integers(1, 5000))
        text = rng.choice(alphabet, size=n, p=weights / weights.sum()).tobytes()
        for shape in ("balanced", "huffman"):
            plan = WtPlan.for_text(text, shape)
            failures += wt_decode(wt_concat_bits(text, shape, plan), plan, n) != text
    record(C7, failures == 0, f"WT decode on 100 random texts x 2 shapes, {failures} failures")
    assert failures == 0


@pytest.mark.parametrize("density", [0.05, 0.2, 0.5])
def test_random_density_at_ten_million(density):
    bv = random_bitvector(10_000_000, density, seed=11)
    got = bv.ones_total / bv.n_bits
    ok = abs(got - density) <= 0.001
    record(C7, ok, f"density {density}: {got:.5f}")
    assert ok
