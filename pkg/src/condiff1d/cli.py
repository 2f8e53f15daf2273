"""Command line entry points: solve, sweep, analytic, check."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .metrics import test_grid
from .problem import ProblemSpec, solve_analytic
from .runner import (ALL_METHODS, RunConfig, SweepConfig, default_epsilon_grid,
                     run_single, run_sweep)


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value file; blank lines and #-comments ignored."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"bad config line (expected key=value): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v)


def _tags(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default=None,
                   help="method tag(s) from {v,vz,w,wz,rwz,fem}; comma list for sweeps")
    p.add_argument("--sampler", default=None, help="sampler tag(s) from {u,r,e}")
    p.add_argument("--precision", default=None, help="precision tag(s) from {f16,f32,f64}")
    p.add_argument("--epsilon", default=None, help="diffusivity value(s)")
    p.add_argument("--k", default=None, help="training point count(s)")
    p.add_argument("--reps", type=int, default=None, help="repetitions per grid point")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--max-iters", type=int, default=None, help="optimizer iteration cap")
    p.add_argument("--config", default=None, help="flat key=value config file; flags override")


def _merged(args: argparse.Namespace) -> dict[str, str]:
    values = _parse_config_file(args.config) if args.config else {}
    for key in ("method", "sampler", "precision", "epsilon", "k", "reps",
                "seed", "out", "max_iters", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    return values


def cmd_solve(args: argparse.Namespace) -> int:
    v = _merged(args)
    cfg = RunConfig(
        method=v.get("method", "v"),
        epsilon=float(v.get("epsilon", 1.0)),
        k_train=int(v.get("k", 100)),
        sampler=v.get("sampler", "u"),
        precision=v.get("precision", "f32"),
        repetition=0,
        base_seed=int(v.get("seed", 0)),
        max_iterations=int(v["max_iters"]) if "max_iters" in v else None,
    )
    if cfg.method not in ALL_METHODS:
        raise SystemExit(f"unknown method {cfg.method!r}")
    reps = int(v.get("reps", 1))
    best = None
    for rep in range(reps):
        record, _ = run_single(replace(cfg, repetition=rep))
        print(",".join(record.csv_row()))
        if best is None or record.e_h1 < best.e_h1:
            best = record
    if reps > 1:
        print(f"# best of {reps}: e_h1={best.e_h1!r} ({best.run_id})")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    v = _merged(args)
    cfg = SweepConfig(
        epsilon_grid=_floats(v["epsilon"]) if "epsilon" in v else default_epsilon_grid(),
        k_grid=_ints(v["k"]) if "k" in v else (10, 100, 1000, 10_000),
        methods=_tags(v["method"]) if "method" in v else ALL_METHODS,
        samplers=_tags(v.get("sampler", "u")),
        precisions=_tags(v.get("precision", "f32")),
        repetitions=int(v.get("reps", 10)),
        base_seed=int(v.get("seed", 0)),
        output_dir=Path(v.get("out", "results")),
        max_iterations=int(v["max_iters"]) if "max_iters" in v else None,
        workers=int(v.get("workers", 1)),
    )
    for m in cfg.methods:
        if m not in ALL_METHODS:
            raise SystemExit(f"unknown method {m!r}")
    records = run_sweep(cfg)
    print(f"completed {len(records)} runs -> {cfg.output_dir / 'runs.csv'}")
    return 0


def cmd_analytic(args: argparse.Namespace) -> int:
    v = _merged(args)
    spec = ProblemSpec(epsilon=float(v.get("epsilon", 1.0)))
    sol = solve_analytic(spec)
    x = test_grid(int(v.get("k", 100)))
    u, du = sol.eval(x)
    out = v.get("out")
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["x", "u_exact", "du_exact"])
        for row in zip(x, u, du):
            writer.writerow([repr(float(c)) for c in row])
    finally:
        if out:
            fh.close()
    return 0


def cmd_check(_args: argparse.Namespace) -> int:
    from .checks import run_checks
    return 0 if run_checks() else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="condiff1d",
        description="1D singularly perturbed convection-diffusion workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration (optionally repeated)")
    _add_common(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="run a parameter sweep, writing runs.csv")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("analytic", help="dump the exact solution on a test grid")
    _add_common(p)
    p.set_defaults(fn=cmd_analytic)

    p = sub.add_parser("check", help="run the built-in invariant suites")
    p.set_defaults(fn=cmd_check)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
