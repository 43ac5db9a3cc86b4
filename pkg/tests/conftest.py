import numpy as np
import pytest
from hypothesis import settings

from rankselect.bitvec import BitVector

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# filled by test_acceptance.py, printed at the end of the run
CRITERIA = (
    "1 oracle equivalence",
    "2 access model",
    "3 space accounting",
    "4 checksum consistency",
    "5 bench harness",
    "6 mono payoff",
    "7 corpus round-trip",
)
ACCEPTANCE = {key: [] for key in CRITERIA}


def record(key, ok, detail):
    ACCEPTANCE[key].append((bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not any(ACCEPTANCE.values()):
        return
    terminalreporter.section("acceptance criteria")
    for key in CRITERIA:
        results = ACCEPTANCE[key]
        if not results:
            terminalreporter.write_line(f"[FAIL] {key}: no result recorded")
            continue
        failed = [d for ok, d in results if not ok]
        if failed:
            line = f"[FAIL] {key}: {len(failed)}/{len(results)} checks failed; " + "; ".join(failed)
        else:
            line = f"[PASS] {key}: {len(results)} checks; " + "; ".join(d for _, d in results)
        terminalreporter.write_line(line)


def runs_vector(n, seed, p_mono=0.5, k=64):
    """Random bits where each k-byte block is, with probability p_mono, forced
    to all zeros or all ones."""
    rng = np.random.default_rng(seed)
    bits = (rng.random(n) < 0.5).astype(np.uint8)
    bb = 8 * k
    for start in range(0, n, bb):
        u = rng.random()
        if u < p_mono / 2:
            bits[start : start + bb] = 0
        elif u < p_mono:
            bits[start : start + bb] = 1
    return bits


def interleaved(f_num, f_den, nblocks, k=64):
    """Block t is mono iff it is one of f_num evenly spread blocks per f_den."""
    bb = 8 * k
    rng = np.random.default_rng(f_num * 1000 + f_den)
    bits = np.zeros(nblocks * bb, np.uint8)
    for t in range(nblocks):
        if (t * f_num) // f_den == ((t + 1) * f_num) // f_den:
            chunk = (rng.random(bb) < 0.5).astype(np.uint8)
            chunk[0], chunk[1] = 0, 1
            bits[t * bb : (t + 1) * bb] = chunk
        elif t % 2:
            bits[t * bb : (t + 1) * bb] = 1
    return BitVector.from_bits(bits)


@pytest.fixture
def small_vectors():
    """Named bit arrays covering the edge cases every structure must survive."""
    rng = np.random.default_rng(20240601)
    out = {
        "empty": np.zeros(0, np.uint8),
        "one-bit": np.ones(1, np.uint8),
        "zeros-4099": np.zeros(4099, np.uint8),
        "ones-4099": np.ones(4099, np.uint8),
        "alt-2048": np.tile(np.array([0, 1], np.uint8), 1024),
        "sparse-3000": (rng.random(3000) < 0.01).astype(np.uint8),
        "dense-3001": (rng.random(3001) < 0.9).astype(np.uint8),
        "runs-4096": runs_vector(4096, 5, k=8),
        "runs-4000": runs_vector(4000, 6, k=16),
    }
    return {name: (bits, BitVector.from_bits(bits)) for name, bits in out.items()}
