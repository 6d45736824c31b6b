"""Command-line front end.

Subcommands
-----------
price          initial capital and diagnostics for the configured claim
hedge-surface  value/hedge tables on the configured (t, x, s) grid (CSV)
simulate       path replay of the hedge with residual statistics
pde            finite-difference solve (diffusion models only)
compare        Fourier route against the PDE route on shared grids
check          the Monte Carlo validation battery; fails with exit 4

All subcommands read one JSON config (--config).  Reports go to the
directory named by --out (or the config's output.directory) as
summary.json / sim_report.json, next to hedge_surface.csv,
pde_surface.csv and checks.log where applicable; without a directory
the JSON report is printed to stdout.  Outputs are deterministic for a
fixed config and seed: JSON is key-sorted with no timestamps, files are
written atomically, and nothing is written for an invalid config.  Exit
codes: 0 success, 2 configuration errors, 3 violated model/regime
assumptions, 4 failed validation checks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import engine, pde, simulation
from .config import load_config
from .errors import (
    AssumptionError,
    CheckFailure,
    ConfigError,
    RegimeError,
)

__all__ = ["main"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _dump(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def _write_text(path: str, text: str):
    full = os.path.abspath(path)
    parent = os.path.dirname(full)
    if parent:
        os.makedirs(parent, exist_ok=True)
    tmp = full + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, full)


def _emit(payload: dict, outdir: str | None, name: str):
    text = _dump(payload)
    if outdir:
        path = os.path.join(outdir, name)
        _write_text(path, text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _surface_csv(times, xs, ss, y, z) -> str:
    rows = ["t,x,s,y,z"]
    for i, t in enumerate(times):
        for j, xv in enumerate(xs):
            for k, sv in enumerate(ss):
                rows.append(
                    f"{float(t)!r},{float(xv)!r},{float(sv)!r},"
                    f"{float(y[i, j, k])!r},{float(z[i, j, k])!r}"
                )
    return "\n".join(rows) + "\n"


def _fail_with_payload(payload: dict, args, name: str):
    """Persist the full report before a CheckFailure unwinds to exit 4."""
    _emit(payload, args.outdir, name)


def _decompose(cfg):
    return engine.decompose(cfg.model(), cfg.measure(), cfg.settings())


def _pde_solution(cfg):
    spec = pde.DiffusionSpec.from_additive(cfg.model())
    return pde.solve(spec, cfg.measure(), cfg.pde_grid())


def _cmd_price(cfg, args) -> dict:
    out = {"route": cfg.route}
    model = cfg.model()
    out["model_digest"] = model.digest()
    out["measure_digest"] = cfg.measure().digest()
    if cfg.route in ("fourier", "both"):
        dec = _decompose(cfg)
        out["h0"] = float(np.real(dec.h0))
        out["assumptions"] = dec.assumptions
        out["quadrature"] = dec.quadrature_report()
    if cfg.route in ("pde", "both"):
        sol = _pde_solution(cfg)
        out["h0_pde"] = sol.h0
        out["pde"] = {"steps": sol.steps, "cfl_number": sol.cfl_number}
        if cfg.route == "pde":
            out["h0"] = sol.h0
    if cfg.route == "both":
        out["route_gap"] = abs(out["h0"] - out["h0_pde"])
    return out


def _cmd_hedge_surface(cfg, args) -> dict:
    dec = _decompose(cfg)
    grid = cfg.surface_grid()
    times, xs, ss = grid["times"], grid["x"], grid["s"]
    y, z = dec.hedge_surface(times, xs, ss)
    csv_path = os.path.join(args.outdir or ".", "hedge_surface.csv")
    _write_text(csv_path, _surface_csv(times, xs, ss, y, z))
    if args.outdir:
        print(f"wrote {csv_path}")
    return {
        "h0": float(np.real(dec.h0)),
        "csv": csv_path,
        "shape": [len(times), len(xs), len(ss)],
        "model_digest": cfg.model().digest(),
        "measure_digest": cfg.measure().digest(),
        "quadrature": dec.quadrature_report(),
    }


def _cmd_simulate(cfg, args) -> dict:
    val = cfg.validation()
    if args.seed is not None:
        val["seed"] = args.seed
    model = cfg.model()
    dec = _decompose(cfg)
    ens = simulation.simulate(model, val["n_paths"], val["n_steps"], val["seed"])
    run = simulation.hedge_run(dec, ens)
    return {
        "seed": val["seed"],
        "n_paths": val["n_paths"],
        "n_steps": val["n_steps"],
        "h0": run.initial_capital,
        "payoff_mean": run.payoff_mean,
        "gain_mean": run.gain_mean,
        "residual_mean": run.residual_mean,
        "residual_stderr": run.residual_stderr,
        "residual_tstat": run.residual_tstat,
        "residual_variance": float(run.residuals.var(ddof=1)),
        "orthogonality_corr": run.orthogonality_corr,
        "self_check_error": run.self_check_error,
        "model_digest": model.digest(),
        "measure_digest": cfg.measure().digest(),
    }


def _cmd_pde(cfg, args) -> dict:
    sol = _pde_solution(cfg)
    out = {
        "h0": sol.h0,
        "steps": sol.steps,
        "cfl_number": sol.cfl_number,
        "grid": {"nx": len(sol.x), "ns": len(sol.s), "nt": len(sol.times)},
        "model_digest": cfg.model().digest(),
        "measure_digest": cfg.measure().digest(),
    }
    if args.outdir:
        csv_path = os.path.join(args.outdir, "pde_surface.csv")
        _write_text(csv_path, _surface_csv(sol.times, sol.x, sol.s, sol.y, sol.z))
        print(f"wrote {csv_path}")
        out["csv"] = csv_path
    return out


def _cmd_compare(cfg, args) -> dict:
    """Route comparison on the interior: the spatial box spans two log
    standard deviations around the spot and times stop at 0.9 T, before
    the terminal layer where the kink defeats finite differences.  A
    small agreement table adds the probabilistic representation at a few
    sample points; exceeding the configured limits raises CheckFailure."""
    model = cfg.model()
    dec = _decompose(cfg)
    spec = pde.DiffusionSpec.from_additive(model)
    sol = pde.solve(spec, cfg.measure(), cfg.pde_grid())
    limits = cfg.compare_limits()
    val = cfg.validation()
    T = model.horizon
    half_x = 2.0 * float(np.sqrt(model.covariance[0, 0] * T))
    half_s = 2.0 * float(np.sqrt(model.covariance[1, 1] * T))
    ix = np.abs(np.log(sol.x / model.spot[0])) <= half_x
    isl = np.abs(np.log(sol.s / model.spot[1])) <= half_s
    xs, ss = sol.x[ix], sol.s[isl]
    gap_y = gap_z = 0.0
    for k, t in enumerate(sol.times):
        if t > 0.9 * T:
            continue
        yf, zf = dec.hedge_surface([t], xs, ss)
        yp = sol.y[k][np.ix_(ix, isl)]
        zp = sol.z[k][np.ix_(ix, isl)]
        gap_y = max(gap_y, float(np.max(np.abs(yp - yf[0]) / np.maximum(np.abs(yf[0]), 1.0))))
        gap_z = max(gap_z, float(np.max(np.abs(zp - zf[0]) / np.maximum(np.abs(zf[0]), 0.05))))
    h0_f = float(np.real(dec.h0))

    x0, s0 = float(model.spot[0]), float(model.spot[1])
    mid = float(sol.times[np.searchsorted(sol.times, 0.5 * T)])
    table = []
    for t in (0.0, mid):
        for bump in (0.85, 1.0, 1.15):
            xq = x0 * bump
            y_f = float(np.real(dec.value(t, xq, s0)))
            y_p = float(sol.value_at(t, xq, s0))
            y_m, se = pde.monte_carlo_representation(
                spec, cfg.measure(), t, xq, s0,
                n_paths=val["n_paths"], seed=val["seed"],
            )
            table.append({
                "t": t, "x": xq, "s": s0,
                "y_fourier": y_f, "y_pde": y_p, "y_mc": y_m, "mc_stderr": se,
                "max_pairwise_gap": max(
                    abs(y_f - y_p), abs(y_f - y_m), abs(y_p - y_m)
                ),
            })

    out = {
        "h0_fourier": h0_f,
        "h0_pde": sol.h0,
        "h0_gap_rel": abs(h0_f - sol.h0) / max(abs(h0_f), 1e-12),
        "interior_value_gap_rel": gap_y,
        "interior_hedge_gap_rel": gap_z,
        "interior_box_log_halfwidths": [half_x, half_s],
        "table": table,
        "limits": limits,
        "model_digest": model.digest(),
        "measure_digest": cfg.measure().digest(),
    }
    failed = []
    if out["h0_gap_rel"] > limits["h0_limit"]:
        failed.append("h0")
    if gap_y > limits["surface_limit"] or gap_z > limits["surface_limit"]:
        failed.append("surfaces")
    if failed:
        _fail_with_payload(out, args, "summary.json")
        raise CheckFailure("route agreement outside limits: " + ", ".join(failed))
    return out


def _cmd_check(cfg, args) -> dict:
    val = cfg.validation()
    if args.seed is not None:
        val["seed"] = args.seed
    model = cfg.model()
    dec = _decompose(cfg)
    ens = simulation.simulate(model, val["n_paths"], val["n_steps"], val["seed"])
    results = {}
    failed = []

    def record(name, payload, ok):
        payload["passed"] = bool(ok)
        results[name] = payload
        if not ok:
            failed.append(name)

    tests = val["tests"]
    run = None
    if "martingale" in tests:
        mt = simulation.martingale_test(model, ens)
        record("martingale", mt, mt["max_tstat"] <= val["tstat_limit"])
    if "moments" in tests:
        mc = simulation.moment_check(model, ens)
        record("moments", mc, mc["max_tstat"] <= val["tstat_limit"])
    if "orthogonality" in tests or "baselines" in tests:
        run = simulation.hedge_run(dec, ens)
    if "orthogonality" in tests:
        payload = {
            "corr": run.orthogonality_corr,
            "residual_tstat": run.residual_tstat,
            "self_check_error": run.self_check_error,
        }
        ok = (
            abs(run.orthogonality_corr) <= val["orthogonality_limit"]
            and abs(run.residual_tstat) <= val["tstat_limit"]
        )
        record("orthogonality", payload, ok)
    if "baselines" in tests:
        base = simulation.baseline_comparison(dec, ens, run)
        ok = base["fs_variance"] < base["no_hedge_variance"] and base[
            "fs_variance"
        ] < base.get("naive_delta_variance", float("inf"))
        record("baselines", base, ok)
    if "tradeoff" in tests:
        to = simulation.tradeoff_check(model, ens)
        record("tradeoff", to, to["rel_error"] <= val["tradeoff_limit"])

    out = {
        "seed": val["seed"],
        "n_paths": val["n_paths"],
        "n_steps": val["n_steps"],
        "results": results,
        "failed": failed,
        "model_digest": model.digest(),
        "measure_digest": cfg.measure().digest(),
    }
    if args.outdir:
        log_path = os.path.join(args.outdir, "checks.log")
        lines = [
            f"{name}: {'PASS' if results[name]['passed'] else 'FAIL'}"
            for name in tests
            if name in results
        ]
        _write_text(log_path, "\n".join(lines) + "\n")
        print(f"wrote {log_path}")
    if failed:
        _fail_with_payload(out, args, "sim_report.json")
        raise CheckFailure("validation checks failed: " + ", ".join(failed))
    return out


_COMMANDS = {
    "price": _cmd_price,
    "hedge-surface": _cmd_hedge_surface,
    "simulate": _cmd_simulate,
    "pde": _cmd_pde,
    "compare": _cmd_compare,
    "check": _cmd_check,
}

# file name of the JSON report inside the output directory
_REPORT_NAME = {
    "price": "summary.json",
    "hedge-surface": "summary.json",
    "pde": "summary.json",
    "compare": "summary.json",
    "simulate": "sim_report.json",
    "check": "sim_report.json",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="basishedge",
        description="Quadratic hedging of claims on a non-traded asset",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument(
            "--out", default=None,
            help="directory for report artifacts (default: config output.directory)",
        )
        sp.add_argument("--seed", type=int, default=None, help="override the validation seed")
        sp.add_argument(
            "--threads", type=int, default=None,
            help="numpy thread cap to request (recorded; exported for child BLAS)",
        )
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(max(1, args.threads))
    try:
        cfg = load_config(args.config)
        args.outdir = args.out or cfg.output_directory
        payload = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # configured paths are the only filesystem inputs and outputs
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AssumptionError, RegimeError) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 3
    except CheckFailure as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return 4
    _emit(payload, args.outdir, _REPORT_NAME[args.command])
    return 0


if __name__ == "__main__":
    sys.exit(main())
