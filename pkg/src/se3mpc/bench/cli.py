"""Benchmark CLI.

    bench run <scenario> [--seed N] [--trials N] [--out DIR] [--controller proposed|simplified]
    bench sweep-error-scale [--out FILE]
    bench list-scenarios
    bench kernel-bench [--repeats N] [--out FILE]

<scenario> is a TOML file path or the name of a bundled scenario.  The
SE3MPC_OUT_DIR environment variable overrides the default output directory.
Exit code 0 on success, nonzero with a diagnostic on any fatal error.
"""

import argparse
import dataclasses
import os
import sys
import time

import numpy as np


def _resolve_scenario(spec):
    from .scenario import bundled_scenarios, load_bundled, load_scenario

    if os.path.exists(spec):
        return load_scenario(spec)
    name = spec.removesuffix(".toml")
    if name in bundled_scenarios():
        return load_bundled(name)
    raise FileNotFoundError(
        f"no scenario file {spec!r} and no bundled scenario of that name")


def _default_out(name):
    base = os.environ.get("SE3MPC_OUT_DIR", "bench_out")
    return os.path.join(base, name)


def cmd_run(args):
    from .runner import run_scenario

    s = _resolve_scenario(args.scenario)
    if args.seed is not None:
        s = dataclasses.replace(s, seed=args.seed)
    if args.trials is not None:
        s = dataclasses.replace(s, trials=args.trials)
    if args.controller is not None:
        s = dataclasses.replace(s, controller=args.controller)
    out = args.out or _default_out(s.name)
    results = run_scenario(s, out_dir=out)
    failed = [r for r in results if r.status != "ok"]
    ok = [r for r in results if r.status == "ok"]
    print(f"{s.name}: {len(ok)}/{len(results)} trials ok, output in {out}")
    for r in failed:
        print(f"  trial {r.trial}: {r.status}", file=sys.stderr)
    return 1 if failed else 0


def cmd_sweep(args):
    from .runner import error_scale_sweep

    table = error_scale_sweep()
    lines = ["theta,e_R_norm,log_norm"]
    lines += [f"{t!r},{e!r},{lg!r}" for t, e, lg in table]
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as f:
            f.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_list(args):
    from .scenario import bundled_scenarios

    for name in bundled_scenarios():
        print(name)
    return 0


def cmd_kernel_bench(args):
    """Compare the compiled and pure-python kernel backends."""
    from .. import _kernels
    from .._kernels import AVAILABLE

    rng = np.random.default_rng(0)
    xi = rng.normal(size=6)
    R0 = np.eye(3)
    p0 = np.zeros(3)
    I_b = np.diag([0.1, 0.15, 0.2])
    I_b_inv = np.linalg.inv(I_b)
    u = rng.normal(size=6)
    g = np.array([0.0, 0.0, -9.81])
    ws = rng.normal(size=(200, 3))

    rows = []
    for name, mod in sorted(AVAILABLE.items()):
        t0 = time.perf_counter()
        for _ in range(args.repeats):
            mod.rollout(R0, p0, xi, u, I_b, I_b_inv, 1.0, g, True, 1e-3, 100)
        t_roll = (time.perf_counter() - t0) / args.repeats

        t0 = time.perf_counter()
        for _ in range(args.repeats):
            for w in ws:
                mod.log_so3(mod.exp_so3(w))
        t_explog = (time.perf_counter() - t0) / args.repeats
        rows.append((name, t_roll * 1e6, t_explog * 1e6))

    header = f"{'backend':<10}{'rollout_100steps_us':>22}{'explog_200x_us':>18}"
    print(header)
    for name, tr, te in rows:
        print(f"{name:<10}{tr:>22.1f}{te:>18.1f}")
    if len(rows) == 2:
        by = dict((r[0], r) for r in rows)
        speedup = by["python"][1] / by["compiled"][1]
        print(f"rollout speedup (compiled vs python): {speedup:.1f}x")
    print(f"active backend: {_kernels.BACKEND}")
    if args.out:
        with open(args.out, "w") as f:
            f.write("backend,rollout_100steps_us,explog_200x_us\n")
            for name, tr, te in rows:
                f.write(f"{name},{tr!r},{te!r}\n")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="bench", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--trials", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--controller", choices=["proposed", "simplified"])
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep-error-scale",
                             help="emit the orientation error-scale table")
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_list = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_list.set_defaults(func=cmd_list)

    p_kb = sub.add_parser("kernel-bench",
                          help="benchmark compiled vs pure-python kernels")
    p_kb.add_argument("--repeats", type=int, default=50)
    p_kb.add_argument("--out")
    p_kb.set_defaults(func=cmd_kernel_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
