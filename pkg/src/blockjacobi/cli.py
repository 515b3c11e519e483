"""Command-line driver ``bjs``.

Subcommands: verify, barrier, check, density, weyl, periodic. Grid points are
farmed out to a process pool and reassembled in grid order, so the output
does not depend on the worker count. Exit codes: 0 ok, 1 verification
failure, 2 usage or model-spec error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

import numpy as np

from . import __version__, conditions, report
from .barrier import DEFAULT_SEED, BarrierProfile, minimal_profile, transfer_profile
from .errors import BJSError, InvalidSpec
from .model import load_model, model_from_spec, named_model
from .periodic import periodic_analysis
from .verify import run_suite
from .weyl import DEFAULT_LADDER, assemble_density, density_at, truncated_weyl

EXIT_OK, EXIT_FAIL = 0, 1
CONDITIONS = ("gls", "gbs", "hclass", "carleman", "nonsub")


# ---------------------------------------------------------------------------
# argument parsing


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` (inclusive, n points) or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return np.linspace(a, b, n)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected a:b:n or a number, got {text!r}")


def parse_ladder(text: str) -> np.ndarray:
    try:
        vals = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if len(vals) == 0 or np.any(vals <= 0) or np.any(np.diff(vals) >= 0):
        raise argparse.ArgumentTypeError("eps list must be positive and strictly decreasing")
    return vals


def parse_seed(text: str) -> int:
    try:
        return int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be hexadecimal, got {text!r}") from None


def resolve_model(text: str):
    """A path to a JSON model spec, or a shorthand such as ``laguerre(0.5)``."""
    if os.path.exists(text) or text.endswith(".json"):
        return load_model(text)
    return named_model(text)


def worker_count(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("BJS_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidSpec(f"BJS_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bjs", description="Spectral diagnostics for block Jacobi matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lam_default=None):
        sp.add_argument("--model", required=True, help="model spec JSON path or shorthand")
        sp.add_argument("--lambda", dest="lam", type=parse_grid, default=lam_default,
                        required=lam_default is None, help="grid a:b:n or a single value")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=parse_seed, default=DEFAULT_SEED, help="hex seed")
        sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("verify", help="run the identity suite")
    common(sp, lam_default=np.array([0.0]))
    sp.add_argument("--horizon", type=int, default=50)

    sp = sub.add_parser("barrier", help="barrier profile on a (lambda, t) grid")
    common(sp)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--kind", choices=("minimal", "transfer"), default="transfer")

    sp = sub.add_parser("check", help="sufficient-condition checker")
    common(sp)
    sp.add_argument("--condition", choices=CONDITIONS, required=True)
    sp.add_argument("--horizon", type=int, default=1 << 16)
    sp.add_argument("--kind", choices=("minimal", "transfer"), default="transfer")

    sp = sub.add_parser("density", help="extrapolated a.c. density")
    common(sp)
    sp.add_argument("--eps", type=parse_ladder, default=np.array(DEFAULT_LADDER))

    sp = sub.add_parser("weyl", help="Weyl function samples at lambda + i eps")
    common(sp)
    sp.add_argument("--eps", type=parse_ladder, default=np.array([0.1]))

    sp = sub.add_parser("periodic", help="period products, Lambda test, D_1^N sums")
    common(sp)
    sp.add_argument("--horizon", type=int, default=4096)
    return p


# ---------------------------------------------------------------------------
# per-point tasks (module level so they pickle)


@lru_cache(maxsize=8)
def _model(spec_json: str):
    return model_from_spec(json.loads(spec_json))


def _task(args):
    kind, spec_json, lam, opts = args
    model = _model(spec_json)
    if kind == "barrier":
        prof = (transfer_profile if opts["kind"] == "transfer" else minimal_profile)
        kw = {} if opts["kind"] == "transfer" else {"seed": opts["seed"]}
        return prof(model, [lam], opts["t_grid"], **kw).values[0]
    if kind == "check":
        return _check(model, lam, opts).to_dict()
    if kind == "density":
        return density_at(model, lam, opts["eps"])
    if kind == "weyl":
        return [truncated_weyl(model, complex(lam, e)) for e in opts["eps"]]
    raise ValueError(kind)


def _check(model, lam, opts):
    c, h = opts["condition"], opts["horizon"]
    if c == "gls":
        return conditions.gls_check(model, lam, h)
    if c == "gbs":
        return conditions.gbs_check(model, lam, h)
    if c == "hclass":
        return conditions.hclass_check(model, lam, h, seed=opts["seed"])
    if c == "nonsub":
        return conditions.nonsubordinacy_scan(model, lam, h, kind=opts["kind"])
    return conditions.carleman_check(model, h)


def run_grid(kind: str, model, grid, opts: dict, workers: int) -> list:
    """Evaluate ``kind`` at every grid point; results are in grid order."""
    spec_json = json.dumps(model.spec, sort_keys=True)
    jobs = [(kind, spec_json, float(lam), opts) for lam in grid]
    if workers <= 1 or len(jobs) <= 1:
        return [_task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_task, jobs))


# ---------------------------------------------------------------------------
# commands


def t_grid_for(tmax: float) -> np.ndarray:
    """Integers 1..floor(tmax), plus tmax itself when it is fractional."""
    if tmax < 1:
        raise InvalidSpec("--tmax must be at least 1")
    grid = np.arange(1, int(np.floor(tmax)) + 1, dtype=float)
    return grid if tmax == grid[-1] else np.append(grid, tmax)


def cmd_verify(args, model, workers):
    results = run_suite(model, args.horizon, args.seed)
    ok = all(r.passed for r in results)
    meta = report.provenance(model, args.seed, horizon=args.horizon)
    if args.format == "json":
        text = report.dumps({"meta": meta, "passed": ok, "checks": results})
    else:
        text = report.csv_text(["check", "passed", "value", "tolerance"],
                               [[r.name, r.passed, r.value, r.tolerance] for r in results], meta)
    return text, EXIT_OK if ok else EXIT_FAIL


def cmd_barrier(args, model, workers):
    t_grid = t_grid_for(args.tmax)
    rows = run_grid("barrier", model, args.lam,
                    {"kind": args.kind, "t_grid": t_grid, "seed": args.seed}, workers)
    prof = BarrierProfile(args.lam, t_grid, np.array(rows), args.kind, float(args.tmax),
                          lower_bound=args.kind == "minimal" and model.d > 1)
    meta = report.provenance(model, args.seed, tmax=args.tmax)
    meta["kind"] = args.kind
    if args.format == "json":
        return report.dumps({"meta": meta, "profile": prof}), EXIT_OK
    header, data = report.profile_rows(prof)
    return report.csv_text(header, data, meta), EXIT_OK


def cmd_check(args, model, workers):
    grid = args.lam[:1] if args.condition == "carleman" else args.lam
    opts = {"condition": args.condition, "horizon": args.horizon, "seed": args.seed,
            "kind": args.kind}
    reps = run_grid("check", model, grid, opts, workers)
    meta = report.provenance(model, args.seed, horizon=args.horizon)
    if args.format == "json":
        return report.dumps({"meta": meta, "reports": reps}), EXIT_OK
    header = ["lambda", "condition", "verdict", "horizon", "stopped_at"]
    data = [[r["lambda"], r["condition"], r["verdict"], r["horizon"],
             "" if r["stopped_at"] is None else r["stopped_at"]] for r in reps]
    return report.csv_text(header, data, meta), EXIT_OK


def cmd_density(args, model, workers):
    rows = run_grid("density", model, args.lam, {"eps": args.eps}, workers)
    est = assemble_density(args.lam, args.eps, rows)
    meta = report.provenance(model, None, eps_ladder=args.eps.tolist())
    if args.format == "json":
        return report.dumps({"meta": meta, "density": est}), EXIT_OK
    header, data = report.density_rows(est)
    return report.csv_text(header, data, meta), EXIT_OK


def cmd_weyl(args, model, workers):
    samples = [s for row in run_grid("weyl", model, args.lam, {"eps": args.eps}, workers)
               for s in row]
    meta = report.provenance(model, None,
                             truncation=max(s.truncation_n for s in samples))
    if args.format == "json":
        return report.dumps({"meta": meta, "samples": samples}), EXIT_OK
    header = ["lambda", "eps", "i", "j", "re", "im", "truncation_n", "convergence_gap",
              "converged"]
    data = [[s.z.real, s.z.imag, i, j, s.W[i, j].real, s.W[i, j].imag, s.truncation_n,
             s.convergence_gap, s.converged]
            for s in samples for i in range(model.d) for j in range(model.d)]
    return report.csv_text(header, data, meta), EXIT_OK


def cmd_periodic(args, model, workers):
    res = periodic_analysis(model, args.lam, args.horizon)
    meta = report.provenance(model, None, horizon=args.horizon)
    if args.format == "json":
        out = {"meta": meta, "N": res.N, "modulated": res.modulated,
               "period_products": {str(k): v for k, v in res.period_products.items()},
               "limit_error": {str(k): v for k, v in res.limit_error.items()},
               "lambda_window": res.lambda_window,
               "d1n": {k: {"total": v["total"], "decay_exponent": v["decay_exponent"]}
                       for k, v in res.d1n.items()}}
        return report.dumps(out), EXIT_OK
    header = ["lambda", "definite", "sign", "min_eigenvalue", "max_eigenvalue"]
    data = [[w["lambda"], w["definite"], w["sign"] or "", w["eigenvalues"][0],
             w["eigenvalues"][-1]] for w in res.lambda_window]
    meta["limit_error"] = res.limit_error
    meta["d1n_totals"] = {k: v["total"] for k, v in res.d1n.items()}
    return report.csv_text(header, data, meta), EXIT_OK


COMMANDS = {"verify": cmd_verify, "barrier": cmd_barrier, "check": cmd_check,
            "density": cmd_density, "weyl": cmd_weyl, "periodic": cmd_periodic}


def _join_values(argv: list[str]) -> list[str]:
    """Glue ``--lambda -2:2:81`` into ``--lambda=-2:2:81`` so argparse accepts a leading minus."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--lambda", "--eps") and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_values(argv))
    try:
        model = resolve_model(args.model)
        workers = worker_count(args.workers)
        text, code = COMMANDS[args.command](args, model, workers)
    except BJSError as exc:
        sys.stderr.write(json.dumps(report.to_jsonable(exc.to_dict()), sort_keys=True,
                                    default=str) + "\n")
        return exc.exit_code
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
