"""Command-line front end: dataset generation, structure build, verification, benchmarking."""

import argparse
import os
import sys

from . import bench, bitvec, corpus
from .rank import RankParams, build_rank
from .select import SelectParams, build_select


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def _write(path, data):
    with open(path, "wb") as f:
        f.write(data)


def cmd_gen_corpus(args):
    text = _read(args.input)
    bv = corpus.wt_concat_bits(text, args.shape)
    bitvec.save(bv, args.out)
    print(f"{args.out}: {bv.n_bits} bits, {bv.ones_total} ones ({args.shape} wavelet tree over {len(text)} bytes)")


def cmd_gen_text(args):
    _write(args.out, corpus.synthetic_text(args.kind, args.size, args.seed))
    print(f"{args.out}: {args.size} bytes of synthetic {args.kind}")


def cmd_gen_random(args):
    bv = corpus.random_bitvector(args.n, args.density, args.seed)
    bitvec.save(bv, args.out)
    print(f"{args.out}: {bv.n_bits} bits, {bv.ones_total} ones")


def cmd_build(args):
    bv = bitvec.load(args.input)
    kind = args.kind or ("select" if args.ell is not None or args.thr is not None else "rank")
    if kind == "rank":
        params = RankParams(args.variant, args.k, args.h, args.ratio)
        s = build_rank(bv, params)
    else:
        kw = {k: v for k, v in (("ell", args.ell), ("thr", args.thr), ("h", args.h)) if v is not None}
        s = build_select(bv, SelectParams(args.variant, ratio=args.ratio, **kw))
    _write(args.out, s.serialize())
    print(f"{args.out}: {kind}-{s.variant} {s.params.describe()} space {s.space_bits() // 8} bytes "
          f"({s.space_bits() / max(bv.n_bits, 1):.4f} of n)")


def cmd_verify(args):
    s = bench.load_structure(_read(args.structure))
    bv = bitvec.load(args.bits)
    res = bench.verify(s, bv, samples=args.samples, exhaustive=True if args.exhaustive else None)
    print(f"{bench.kind_of(s)}-{s.variant}: {res.describe()}")
    return 0 if res.ok else 1


def cmd_bench(args):
    s = bench.load_structure(_read(args.structure))
    bv = bitvec.load(args.bits)
    if (s.n_bits, s.ones_total) != (bv.n_bits, bv.ones_total):
        print("structure was not built over this bitvector", file=sys.stderr)
        return 1
    dataset = args.dataset or os.path.splitext(os.path.basename(args.bits))[0]
    wl = bench.Workload(args.kind, args.queries, args.seed)
    rep = bench.run_bench(s, wl, dataset=dataset, probe=args.probe_accesses)
    text = bench.write_csv([rep])
    if args.csv:
        mode = "a" if args.append and os.path.exists(args.csv) else "w"
        with open(args.csv, mode) as f:
            f.write(text if mode == "w" else text.split("\n", 1)[1])
    sys.stdout.write(text)
    if rep.mean_accesses is not None:
        print(f"mean accesses per query: {rep.mean_accesses:.4f}")
    return 0


def make_parser():
    p = argparse.ArgumentParser(prog="rankselect", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-corpus", help="wavelet-tree bits of a byte file")
    g.add_argument("--input", required=True)
    g.add_argument("--shape", choices=("balanced", "huffman"), required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_corpus)

    g = sub.add_parser("gen-text", help="write a synthetic text file")
    g.add_argument("--kind", choices=("dna", "proteins", "english", "xml"), required=True)
    g.add_argument("--size", type=int, default=1 << 20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_text)

    g = sub.add_parser("gen-random", help="seeded random bitvector")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_random)

    g = sub.add_parser("build", help="build a rank or select structure")
    g.add_argument("--variant", required=True)
    g.add_argument("--kind", choices=("rank", "select"),
                   help="defaults to select when --ell/--thr are given, else rank")
    g.add_argument("--k", type=int, help="rank block size in bytes")
    g.add_argument("--h", type=int, help="blocks per superblock")
    g.add_argument("--ell", type=int)
    g.add_argument("--thr", type=int)
    g.add_argument("--ratio", type=float, default=0.5, help="mpe3 acceptance ratio")
    g.add_argument("--in", dest="input", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_build)

    g = sub.add_parser("verify", help="check a structure against the naive oracle")
    g.add_argument("--structure", required=True)
    g.add_argument("--bits", required=True)
    g.add_argument("--exhaustive", action="store_true")
    g.add_argument("--samples", type=int, default=bench.DEFAULT_SAMPLES)
    g.set_defaults(func=cmd_verify)

    g = sub.add_parser("bench", help="time a random query workload")
    g.add_argument("--structure", required=True)
    g.add_argument("--bits", required=True)
    g.add_argument("--kind", choices=("rank", "select"), required=True)
    g.add_argument("--queries", type=int, default=bench.DEFAULT_QUERIES)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--csv")
    g.add_argument("--append", action="store_true", help="append a row to an existing --csv file")
    g.add_argument("--dataset", help="dataset id for the report (default: bits file stem)")
    g.add_argument("--probe-accesses", action="store_true")
    g.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
