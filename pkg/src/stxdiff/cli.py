"""Command line: one subcommand per experiment, CSV output plus a run manifest.

Exit codes: 0 success, 1 usage error, 2 a solve did not converge, 3 a
verification (``selftest``, ``verify-hypotheses``) found a violation.
"""
from __future__ import annotations

import argparse
import csv
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- value parsers -------------------------------------------------------------


def int_range(text):
    """``"2"`` or inclusive ``"1..3"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or a range a..b, got {text!r}")


def float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _checked(conv, ok, what):
    def parse(text):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if not ok(v):
            raise argparse.ArgumentTypeError(f"{what}, got {text!r}")
        return v
    return parse


positive_int = _checked(int, lambda v: v > 0, "expected a positive integer")
nonneg_int = _checked(int, lambda v: v >= 0, "expected a nonnegative integer")
positive_float = _checked(float, lambda v: v > 0 and np.isfinite(v), "expected a positive number")
nonneg_float = _checked(float, lambda v: v >= 0 and np.isfinite(v), "expected a nonnegative number")
unit_float = _checked(float, lambda v: 0 < v <= 1, "expected a number in (0, 1]")


def boolean(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


# -- output --------------------------------------------------------------------


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_manifest(path, items):
    with open(path, "w", newline="") as fh:
        for k, v in items.items():
            text = fmt(v).replace("\n", " ")
            fh.write(f"{k}={text}\n")


def _versions():
    import numba
    import scipy
    from . import __version__
    from ._backend import USE_NUMBA
    return {
        "version.stxdiff": __version__, "version.python": platform.python_version(),
        "version.numpy": np.__version__, "version.scipy": scipy.__version__,
        "version.numba": numba.__version__, "backend": "numba" if USE_NUMBA else "numpy",
    }


# -- sweeps --------------------------------------------------------------------


def _sweep_cell(name, p, refinements, eps, nx0, kind):
    from . import experiments as E
    fn = {"heat": E.heat_convergence, "porous": E.porous_convergence,
          "fisher": E.fisher_convergence}[name]
    recs = fn(p_list=(p,), refinements=refinements, epsilon=eps, nx0=nx0, kind=kind)
    return [(r.h, r.p, r.epsilon, r.l2_error, r.rate, r.iterations, r.converged,
             r.report.wall_time if r.report is not None else None) for r in recs]


def _run_sweep(name, args):
    cells = [(name, p, args.refinements, args.eps, args.nx0, args.mesh) for p in args.p]
    if args.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            parts = list(pool.map(_sweep_cell, *zip(*cells)))
    else:
        parts = [_sweep_cell(*c) for c in cells]
    return [row for part in parts for row in part]


def cmd_convergence(name):
    def run(args, out):
        rows = _run_sweep(name, args)
        write_csv(out / "convergence.csv", ["h", "p", "eps", "error", "rate"],
                  [r[:5] for r in rows])
        summary = {"cells": len(rows), "converged": sum(r[6] for r in rows),
                   "max_iterations": max(r[5] for r in rows),
                   "solve_time": sum(r[7] or 0.0 for r in rows)}
        return all(r[6] for r in rows), summary
    return run


def cmd_porous_eps_sweep(args, out):
    from . import experiments as E
    recs = E.porous_eps_sweep(p=args.p, eps_list=args.eps, nx=args.nx, nt=args.nt, kind=args.mesh)
    write_csv(out / "convergence.csv", ["h", "p", "eps", "error", "rate"],
              [(r.h, r.p, r.epsilon, r.l2_error, None) for r in recs])
    return all(r.converged for r in recs), {"cells": len(recs)}


def cmd_heat_adaptive(args, out):
    from . import experiments as E
    adaptive, uniform, _ = E.heat_adaptive(p=args.p, theta=args.theta, steps=args.steps,
                                           nx0=args.nx0, uniform_levels=args.levels,
                                           target=args.target)
    write_csv(out / "indicators.csv", ["level", "ndof", "error"], adaptive)
    write_csv(out / "uniform.csv", ["level", "ndof", "error"], uniform)
    ok = all(r[2] is not None for r in adaptive + uniform)
    return ok, {"adaptive_steps": len(adaptive), "final_ndof": adaptive[-1][1],
                "final_error": adaptive[-1][2]}


def cmd_waiting_time(args, out):
    from . import experiments as E
    res = E.porous_waiting_time(p=args.p, epsilon=args.eps, nx=args.nx, nt=args.nt,
                                threshold=args.threshold, T=args.T)
    rep = res["report"]
    summary = {"t_star": res["t_star"], "x_interface": res["x_interface"],
               "iterations": rep.iterations, "solver_message": rep.message}
    if not rep.converged:
        return False, summary
    write_csv(out / "interface.csv", ["t", "value"], zip(res["times"], res["values"]))
    t_first = res["t_first"]
    summary["t_first"] = t_first if np.isfinite(t_first) else f">{args.T}"
    return True, summary


def _entropy_rows(series):
    return zip(series.times, series.entropy, series.dissipation)


def _fisher_kw(args):
    return dict(p=args.p, epsilon=args.eps, hs=args.hs, ht=args.ht, T=args.T)


def cmd_fisher_jump(args, out):
    from . import experiments as E
    res = E.fisher_jump(n=args.n, **_fisher_kw(args))
    reps = res["reports"]
    summary = {"slabs_solved": len(reps), "iterations": sum(r.iterations for r in reps)}
    if not res["converged"]:
        return False, summary
    write_csv(out / "entropy.csv", ["t", "entropy", "dissipation"], _entropy_rows(res["entropy"]))
    write_csv(out / "species.csv", ["t", "rho_1"], zip(res["times"], res["mean"]))
    summary.update(entropy_initial=res["entropy"].entropy[0], entropy_final=res["entropy"].entropy[-1],
                   t_equilibrium=res["t_equilibrium"] if np.isfinite(res["t_equilibrium"]) else f">{args.T}")
    return True, summary


def cmd_fisher_compare(args, out):
    from . import experiments as E
    res = E.fisher_entropy_compare(tuple(args.n_values), **_fisher_kw(args))
    ok = True
    summary = {}
    for n, r in res.items():
        tag = fmt(n)
        summary[f"n{tag}.iterations"] = sum(rep.iterations for rep in r["reports"])
        if not r["converged"]:
            ok = False
            continue
        write_csv(out / f"entropy_n{tag}.csv", ["t", "entropy", "dissipation"], _entropy_rows(r["entropy"]))
        write_csv(out / f"entropy_boltzmann_n{tag}.csv", ["t", "entropy", "dissipation"],
                  _entropy_rows(r["boltzmann"]))
        summary[f"n{tag}.entropy_ratio"] = r["entropy"].entropy[-1] / r["entropy"].entropy[0]
    return ok, summary


def cmd_duncan_toor(args, out):
    from . import experiments as E
    res = E.duncan_toor(p=args.p, epsilon=args.eps, slab_dt=args.slab_dt, slabs=args.slabs,
                        nx=args.nx)
    reps = res["reports"]
    summary = {"slabs_solved": len(reps), "iterations": sum(r.iterations for r in reps),
               "solve_time": sum(r.wall_time for r in reps)}
    if not res["converged"]:
        return False, summary
    left = res["left"]
    full = np.column_stack([left, 1.0 - left.sum(axis=1)])
    names = [f"rho_{i + 1}" for i in range(full.shape[1])]
    write_csv(out / "species.csv", ["t"] + names, ([t, *row] for t, row in zip(res["times"], full)))
    write_csv(out / "entropy.csv", ["t", "entropy", "dissipation"], _entropy_rows(res["relative_entropy"]))
    return True, summary


def cmd_ms_implicit(args, out):
    from . import experiments as E
    res = E.ms_implicit(p=args.p, q=args.q, nx=args.nx, nt=args.nt, D12=args.d12, T=args.T,
                        kind=args.mesh)
    ok = res["mixed"].converged and res["primal"].converged
    summary = {"mixed_iterations": res["mixed"].iterations, "primal_iterations": res["primal"].iterations}
    if ok:
        summary.update(difference=res["difference"], mixed_error=res["mixed_error"],
                       primal_error=res["primal_error"])
    return ok, summary


def cmd_ms_open(args, out):
    from . import experiments as E
    levels = [args.nx0 * 2 ** k for k in range(args.refinements + 1)]
    res = E.ms_open(p=args.p, levels=levels)
    rows, prev = [], None
    for h, err in res["rows"]:
        rate = None
        if prev is not None and prev[1] and err:
            rate = float(np.log(prev[1] / err) / np.log(prev[0] / h))
        rows.append((h, args.p, 0.0, err, rate))
        prev = (h, err)
    write_csv(out / "convergence.csv", ["h", "p", "eps", "error", "rate"], rows)
    ok = all(r[3] is not None for r in rows)
    if res["entropy"] is not None:
        write_csv(out / "entropy.csv", ["t", "entropy", "dissipation"], _entropy_rows(res["entropy"]))
    return ok, {"levels": len(rows)}


def cmd_verify(args, out):
    from . import models
    sysm = {
        "heat": lambda: models.heat(),
        "porous": lambda: models.porous_medium(args.m),
        "fisher": lambda: models.fisher_kpp(1.0, args.n, enforce=False),
        "duncan-toor": models.duncan_toor_system,
    }[args.system]()
    res = models.verify_hypotheses(sysm, args.samples)
    return None, res


def cmd_selftest(args, out):
    from . import checks
    rows = checks.run_all(quick=not args.full)
    write_csv(out / "selftest.csv", ["check", "value", "threshold", "passed"], rows)
    for name, v, thr, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {v:.3e} (<= {thr:g})")
    failed = [r for r in rows if not r[3]]
    return None, {"checks": len(rows), "failed": len(failed), "pass": not failed}


# -- parser --------------------------------------------------------------------


def _common(sp):
    sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    sp.add_argument("--workers", type=positive_int, default=1, help="worker processes for sweeps")
    sp.add_argument("--deterministic", type=boolean, default=False,
                    help="single-threaded assembly in every worker")


def _sweep_args(sp, p="1..3"):
    sp.add_argument("--p", type=int_range, default=int_range(p))
    sp.add_argument("--refinements", type=nonneg_int, default=4)
    sp.add_argument("--eps", type=nonneg_float, default=0.0)
    sp.add_argument("--nx0", type=positive_int, default=4)
    sp.add_argument("--mesh", choices=("cartesian", "simplicial", "crisscross"), default="cartesian")


def build_parser():
    parser = _Parser(prog="stxdiff", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text, allow_abbrev=False)
        sp.set_defaults(handler=fn)
        _common(sp)
        return sp

    for name, label in (("heat", "heat equation"), ("porous", "porous medium exact solution"),
                        ("fisher", "Fisher-KPP travelling wave")):
        _sweep_args(add(f"{name}-convergence", cmd_convergence(name), f"h/p convergence, {label}"))

    sp = add("heat-adaptive", cmd_heat_adaptive, "Dorfler-marked refinement vs uniform refinement")
    sp.add_argument("--p", type=positive_int, default=1)
    sp.add_argument("--theta", type=unit_float, default=0.5)
    sp.add_argument("--steps", type=positive_int, default=40)
    sp.add_argument("--nx0", type=positive_int, default=4)
    sp.add_argument("--levels", type=positive_int, default=4)
    sp.add_argument("--target", type=positive_float, default=None)

    sp = add("porous-eps-sweep", cmd_porous_eps_sweep, "error against the regularization weight")
    sp.add_argument("--p", type=positive_int, default=3)
    sp.add_argument("--eps", type=float_list, default=[1e-4, 1e-6, 1e-8, 1e-10, 1e-12])
    sp.add_argument("--nx", type=positive_int, default=32)
    sp.add_argument("--nt", type=positive_int, default=32)
    sp.add_argument("--mesh", choices=("cartesian", "simplicial", "crisscross"), default="cartesian")

    sp = add("porous-waiting-time", cmd_waiting_time, "interface value of a compactly supported bump")
    sp.add_argument("--p", type=positive_int, default=5)
    sp.add_argument("--eps", type=nonneg_float, default=1e-6)
    sp.add_argument("--nx", type=positive_int, default=96)
    sp.add_argument("--nt", type=positive_int, default=8)
    sp.add_argument("--threshold", type=positive_float, default=0.01)
    sp.add_argument("--T", type=positive_float, default=0.2)

    for name, fn, help_text in (("fisher-jump", cmd_fisher_jump, "Fisher-KPP with a jump initial datum"),
                                ("fisher-entropy-compare", cmd_fisher_compare,
                                 "entropy series for several entropy exponents")):
        sp = add(name, fn, help_text)
        if name == "fisher-jump":
            sp.add_argument("--n", type=positive_float, default=2.0)
        else:
            sp.add_argument("--n-values", type=float_list, default=[2.0, 2.1])
        sp.add_argument("--p", type=positive_int, default=3)
        sp.add_argument("--eps", type=nonneg_float, default=1e-8)
        sp.add_argument("--hs", type=positive_float, default=0.025)
        sp.add_argument("--ht", type=positive_float, default=0.4)
        sp.add_argument("--T", type=positive_float, default=24.0)

    sp = add("ms-duncan-toor-1d", cmd_duncan_toor, "three-gas diffusion between two half-domains")
    sp.add_argument("--p", type=positive_int, default=2)
    sp.add_argument("--eps", type=nonneg_float, default=1e-10)
    sp.add_argument("--slab-dt", type=positive_float, default=20.8)
    sp.add_argument("--slabs", type=positive_int, default=40)
    sp.add_argument("--nx", type=positive_int, default=84)

    sp = add("ms-implicit-1d", cmd_ms_implicit, "mixed current formulation against the primal solve")
    sp.add_argument("--p", type=positive_int, default=2)
    sp.add_argument("--q", type=positive_int, default=2)
    sp.add_argument("--nx", type=positive_int, default=8)
    sp.add_argument("--nt", type=positive_int, default=8)
    sp.add_argument("--d12", type=positive_float, default=1.0)
    sp.add_argument("--T", type=positive_float, default=0.25)
    sp.add_argument("--mesh", choices=("cartesian", "simplicial", "crisscross"), default="cartesian")

    sp = add("ms-open-1d", cmd_ms_open, "Dirichlet data imposed by Nitsche terms")
    sp.add_argument("--p", type=positive_int, default=2)
    sp.add_argument("--nx0", type=positive_int, default=4)
    sp.add_argument("--refinements", type=nonneg_int, default=3)

    sp = add("verify-hypotheses", cmd_verify, "sample the structural hypotheses of a model")
    sp.add_argument("--system", choices=("heat", "porous", "fisher", "duncan-toor"), required=True)
    sp.add_argument("--samples", type=positive_int, default=10_000)
    sp.add_argument("--m", type=positive_float, default=2.0)
    sp.add_argument("--n", type=positive_float, default=2.0)

    sp = add("selftest", cmd_selftest, "property battery: round trips, Jacobians, M.A, mass")
    sp.add_argument("--full", type=boolean, default=False, help="20 directions per Jacobian check")
    return parser


def _single_thread():
    import warnings
    try:
        import numba
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # threading-layer probing
            numba.set_num_threads(1)
    except (ImportError, ValueError):
        pass


def run(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.deterministic:
        _single_thread()
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    converged, summary = args.handler(args, out)
    wall = time.perf_counter() - start
    manifest = {"command": args.command, "argv": " ".join(argv)}
    for k, v in sorted(vars(args).items()):
        if k in ("handler", "command"):
            continue
        manifest[f"param.{k}"] = ",".join(fmt(x) for x in v) if isinstance(v, list) else v
    manifest.update(_versions())
    manifest["wall_time"] = wall
    for k, v in summary.items():
        manifest[f"result.{k}"] = v
    write_manifest(out / "manifest.txt", manifest)
    if "pass" in summary:
        print(f"{args.command}: {'pass' if summary['pass'] else 'FAIL'}")
        return EXIT_OK if summary["pass"] else EXIT_CHECK
    if not converged:
        print(f"{args.command}: a solve did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
