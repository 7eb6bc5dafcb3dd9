"""Command-line entry point: ``crvpinn {train,lemmas,infsup,export-gram,bench}``.

Exit codes: 0 success, 1 numerical failure, 2 bad flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .gram import Convention
from .lemmas import DEFAULT_SIZES, run_all
from .neural import save_checkpoint
from .plotting import convergence_svg
from .problems import PROBLEMS, discretize
from .sparse_linalg import write_matrix_market
from .stability import infsup_constant
from .trainer import (
    MANIFEST_SCHEMA,
    NumericalFailure,
    TrainConfig,
    benchmark,
    run_training,
    write_manifest,
    write_records_csv,
)

OVERHEAD_TARGET = 1.6


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _default_seed() -> int:
    env = os.environ.get("CRVPINN_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"error: CRVPINN_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crvpinn", description="Robust collocation PINN training and verification tools.", epilog="exit codes: 0 success, 1 numerical failure, 2 bad flags")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--seed", type=int, default=None, help="random seed (fallback: $CRVPINN_SEED, then 0)")
        p.add_argument("--out", default=out_default, help="output directory")

    t = sub.add_parser("train", help="train a network and log loss/error curves")
    t.add_argument("--problem", choices=list(PROBLEMS), default="laplace-sinsin")
    t.add_argument("--n", type=int, default=32)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--width", type=int, default=50)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--iters", type=int, default=5000)
    t.add_argument("--loss", choices=["crvpinn", "pinn"], default="crvpinn")
    t.add_argument("--log-every", type=int, default=1)
    t.add_argument("--lift", choices=["transfinite", "max"], default="transfinite")
    t.add_argument("--convention", choices=[c.value for c in Convention], default=Convention.UNWEIGHTED.value)
    t.add_argument("--no-svg", action="store_true", help="skip the SVG convergence chart")
    common(t, "runs/train")

    lm = sub.add_parser("lemmas", help="randomized checks of the discrete calculus identities")
    lm.add_argument("--n", type=_int_list, default=list(DEFAULT_SIZES))
    lm.add_argument("--trials", type=int, default=100)
    lm.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    common(lm, "runs/lemmas")

    inf = sub.add_parser("infsup", help="discrete Stokes inf-sup constant")
    inf.add_argument("--n", type=_int_list, default=[8, 12, 16])
    common(inf, "runs/infsup")

    ex = sub.add_parser("export-gram", help="write a Gram matrix in Matrix Market format")
    ex.add_argument("--problem", choices=list(PROBLEMS), default="laplace-sinsin")
    ex.add_argument("--n", type=int, default=4)
    ex.add_argument("--format", choices=["mtx"], default="mtx")
    ex.add_argument("--convention", choices=[c.value for c in Convention], default=Convention.UNWEIGHTED.value)
    common(ex, "runs/gram")

    b = sub.add_parser("bench", help="per-iteration cost of the robust vs the plain loss")
    b.add_argument("--problem", choices=list(PROBLEMS), default="laplace-sinsin")
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--iters", type=int, default=200)
    b.add_argument("--layers", type=int, default=2)
    b.add_argument("--width", type=int, default=100)
    common(b, "runs/bench")
    return ap


def _manifest(out: Path, command: str, args: argparse.Namespace, extra: dict | None = None):
    out.mkdir(parents=True, exist_ok=True)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "out", "inject_bug")}
    data = {"schema": MANIFEST_SCHEMA, "library_version": __version__, "command": command, "flags": flags}
    if extra:
        data.update(extra)
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    try:
        cfg = TrainConfig(
            problem=args.problem, N=args.n, layers=args.layers, width=args.width, lr=args.lr,
            iterations=args.iters, seed=args.seed, loss=args.loss, log_every=args.log_every,
            convention=args.convention, lift=args.lift, out_dir=args.out,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.json", cfg, {"command": "train"})
    try:
        res = run_training(cfg)
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    write_records_csv(out / "records.csv", res.records)
    save_checkpoint(out / "checkpoint.bin", res.params, cfg.iterations, {"problem": cfg.problem, "seed": cfg.seed})
    if not args.no_svg:
        convergence_svg(res.records, out / "convergence.svg", f"{cfg.problem}, N={cfg.N}, {cfg.loss}")
    last = res.records[-1]
    print(
        f"{cfg.problem} N={cfg.N} iters={cfg.iterations} loss={cfg.loss}: "
        f"sqrt_loss={last.sqrt_loss:.6e} err_discrete={last.err_discrete:.6e} err_analytic={last.err_analytic:.6e}"
    )
    print(f"wrote {out / 'records.csv'}")
    return 0


def cmd_lemmas(args) -> int:
    if args.trials < 0:
        print("error: --trials must be >= 0", file=sys.stderr)
        return 2
    if any(n < 2 for n in args.n):
        print("error: every N must be >= 2", file=sys.stderr)
        return 2
    _manifest(Path(args.out), "lemmas", args)
    if args.trials == 0:
        print("warning: --trials 0, nothing checked (vacuous pass)", file=sys.stderr)
    results = run_all(args.n, args.trials, args.seed, inject_bug=args.inject_bug)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_infsup(args) -> int:
    out = Path(args.out)
    _manifest(out, "infsup", args)
    rows = []
    print(f"{'N':>4} {'lambda0':>14} {'lambda1':>14} {'alpha':>10}")
    try:
        for n in args.n:
            r = infsup_constant(n)
            rows.append(r.as_row())
            flag = "" if r.alpha >= 0.125 else "  (below 1/8)"
            print(f"{r.N:>4} {r.lambda0:>14.6e} {r.lambda1:>14.6e} {r.alpha:>10.6f}{flag}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    with (out / "infsup.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    return 0


def cmd_export_gram(args) -> int:
    if args.n < 2:
        print("error: --n must be >= 2", file=sys.stderr)
        return 2
    out = Path(args.out)
    _manifest(out, "export-gram", args)
    d = discretize(args.problem, args.n, Convention(args.convention))
    G = d.gram.matrix
    path = out / f"gram_{args.problem}_N{args.n}.mtx"
    write_matrix_market(path, G, f"{args.problem} Gram, N={args.n}, {args.convention}")
    print(f"wrote {path}: {G.shape[0]}x{G.shape[1]}, {G.nnz} nonzeros")
    return 0


def cmd_bench(args) -> int:
    if args.n < 2 or args.iters < 1:
        print("error: need --n >= 2 and --iters >= 1", file=sys.stderr)
        return 2
    out = Path(args.out)
    _manifest(out, "bench", args)
    try:
        r = benchmark(args.problem, args.n, args.iters, args.layers, args.width, args.seed)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    print(f"pinn     {r['pinn']:.3f} ms/iter")
    print(f"crvpinn  {r['crvpinn']:.3f} ms/iter")
    print(f"ratio    {r['ratio']:.3f}")
    if r["ratio"] > OVERHEAD_TARGET:
        print(f"warning: overhead ratio above {OVERHEAD_TARGET}", file=sys.stderr)
    (out / "bench.json").write_text(json.dumps(r, indent=2, sort_keys=True) + "\n")
    return 0


COMMANDS = {
    "train": cmd_train,
    "lemmas": cmd_lemmas,
    "infsup": cmd_infsup,
    "export-gram": cmd_export_gram,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
