"""Command line harness: ``avgbound {n-op|l-op|compare|check|sweep} --config FILE``.

Exit codes: 0 success, 1 a bound or self-check failed, 2 a fixed point
hypothesis failed, 3 the run left its domain (partial output written),
4 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import (AveragedBlowupError, ConfigError, HypothesisViolation, IterationError, ParameterError,
                     StiffnessError)
from .flow import solve_averaged
from .l_operation import run_l_operation, verify_bounds
from .n_operation import FixedPointSpec, audit_integral_inequality, check_bundle, run_n_operation
from .registry import get_example
from .seminorms import check_family, component_family, partition_family
from .system import check_identities, corrupt

__all__ = ["main", "EXIT_OK", "EXIT_FAIL", "EXIT_HYPOTHESIS", "EXIT_DOMAIN", "EXIT_CONFIG"]

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2, 3, 4
CSV_FMT = "%.16e"
TIMING_NOTE = "wall-clock seconds on this machine; only ratios are meaningful across machines"


class _Exit(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


# -- setup ---------------------------------------------------------------------

@dataclasses.dataclass
class _Run:
    cfg: object
    example: object
    system: object
    family: object
    flow: object
    flow_exit: object


def _family(cfg, d):
    if cfg.family_kind == "partition":
        return partition_family(cfg.blocks, d)
    return component_family(d)


def _setup(cfg, need_flow=True) -> _Run:
    ex = get_example(cfg.example_id)
    system = ex.build_system(cfg.params)
    if cfg.corrupt:
        if not hasattr(system, cfg.corrupt) or not callable(getattr(system, cfg.corrupt)):
            raise ConfigError(f"debug.corrupt: no handle named {cfg.corrupt!r}")
        system = corrupt(system, cfg.corrupt, cfg.corrupt_factor)
    fam = _family(cfg, system.d)
    flow, exit_time = None, None
    if need_flow:
        U = cfg.params.U
        source = cfg.flow_source or ("closed_form" if ex.closed_form_flow is not None else "numeric")
        if source == "closed_form":
            if ex.closed_form_flow is None:
                raise ConfigError(f"example {cfg.example_id!r} has no closed-form flow")
            flow = ex.closed_form_flow(cfg.params, U)
        else:
            try:
                flow = solve_averaged(system, U)
            except AveragedBlowupError as exc:
                flow, exit_time = exc.partial, exc.exit_time
    return _Run(cfg, ex, system, fam, flow, exit_time)


def _fixed_point_spec(cfg):
    if not cfg.fixed_point:
        return None
    fp = cfg.fixed_point
    kw = {k: fp[k] for k in ("tol", "max_iter") if k in fp}
    return FixedPointSpec(ell_star=fp["ell_star"], sigma=fp["sigma"], A_bound=fp["A"], **kw)


def _out(cfg) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path, header, columns):
    """Comma-separated, 17 significant digits, one header row."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        if data.size:
            np.savetxt(fh, data, fmt=CSV_FMT, delimiter=",")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _seconds(x):
    return float(f"{x:.3g}")


# -- N-operation -------------------------------------------------------------------

def _n_operation(run: _Run):
    cfg = run.cfg
    bundle = run.example.build_bundle(cfg.params, run.family.kind)
    eps = float(cfg.params.epsilon)
    try:
        res = run_n_operation(bundle, eps, run.flow, spec=_fixed_point_spec(cfg), cfg=cfg.n_cfg)
    except HypothesisViolation as exc:
        raise _Exit(EXIT_HYPOTHESIS, f"hypothesis violated [{exc.condition}]: {exc}") from None
    except IterationError as exc:
        raise _Exit(EXIT_HYPOTHESIS, f"fixed point iteration failed: {exc}") from None
    except StiffnessError as exc:
        res = exc.partial
    audit = audit_integral_inequality(bundle, eps, res, run.flow, n_quad_nodes=cfg.audit_nodes, tol=cfg.audit_tol)
    return bundle, res, audit


def _write_n(out, res, audit, labels):
    k = len(labels)
    write_csv(out / "n_result.csv", ["tau"] + [f"n_{l}" for l in labels] + [f"m_{l}" for l in labels],
              [res.tau] + [res.traj.y[:, k + i] for i in range(k)] + [res.traj.y[:, i] for i in range(k)])
    write_csv(out / "audit.csv", ["tau"] + [f"margin_{l}" for l in labels],
              [audit.tau] + [audit.margins[:, i] for i in range(k)])
    fp = res.fixed_point
    _write_json(out / "ell0.json", {
        "ell0": res.ell0, "iterations": res.iterations, "eps_A": res.contraction_margin,
        "error_bound": fp.error_bound if fp else None, "residual": fp.residual if fp else None,
        "degenerate": fp.degenerate if fp else False, "status": res.status, "U": res.U,
        "U_eff": res.U_eff, "violation": res.violation, "T_N": _seconds(res.wall_time),
        "audit": {"min_margin": audit.min_margin, "max_abs_margin": audit.max_abs_margin,
                  "tol": audit.tol, "rho_ok": audit.rho_ok, "passed": audit.passed},
    })


def cmd_n_op(cfg) -> int:
    run = _setup(cfg)
    _, res, audit = _n_operation(run)
    _write_n(_out(cfg), res, audit, run.family.labels)
    print(f"T_N = {_seconds(res.wall_time)} s  ell0 = {res.ell0.tolist()}  eps*A = {res.contraction_margin:.3g}")
    if run.flow_exit is not None or res.status != "full_horizon":
        print(f"domain violation: {res.violation or {'tau': run.flow_exit, 'condition': 'averaged_exit'}}; "
              f"U_eff = {res.U_eff}", file=_sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


# -- L-operation ---------------------------------------------------------------------

def _l_operation(run: _Run):
    return run_l_operation(run.system, run.flow, steps_per_period=run.cfg.steps_per_period, step=run.cfg.l_step)


def _write_l(out, direct, fam, n_rows):
    t = np.linspace(0.0, direct.t_end, n_rows)
    L = direct.L_traj(t)
    nL = np.asarray(fam.vec(L))
    d = L.shape[1]
    write_csv(out / "l_result.csv",
              ["t", "tau"] + [f"L_{i + 1}" for i in range(d)] + ["theta_mod_2pi"]
              + [f"normL_{l}" for l in fam.labels],
              [t, direct.epsilon * t] + [L[:, i] for i in range(d)] + [direct.theta_mod(t)]
              + [nL[:, i] for i in range(nL.shape[1])])


def cmd_l_op(cfg) -> int:
    run = _setup(cfg)
    direct = _l_operation(run)
    _write_l(_out(cfg), direct, run.family, cfg.n_samples)
    print(f"T_L = {_seconds(direct.wall_time)} s  steps = {len(direct.t) - 1}  h = {direct.step:.6g}")
    for w in direct.warnings:
        print(f"warning: {w}", file=_sys.stderr)
    if run.flow_exit is not None or direct.status != "completed":
        print(f"domain exit at t = {direct.exit_time}", file=_sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


# -- compare ---------------------------------------------------------------------------

def _compare(run: _Run):
    bundle, res, audit = _n_operation(run)
    direct = _l_operation(run)
    rep = verify_bounds(direct, res, run.family, n_samples=run.cfg.n_samples, n_windows=run.cfg.n_windows)
    return res, audit, direct, rep


def cmd_compare(cfg) -> int:
    run = _setup(cfg)
    res, audit, direct, rep = _compare(run)
    out = _out(cfg)
    _write_n(out, res, audit, run.family.labels)
    report = rep.to_dict()
    report.update({
        "T_N": _seconds(res.wall_time), "T_L": _seconds(direct.wall_time),
        "speedup": rep.speedup, "timing_note": TIMING_NOTE,
        "windows_at_or_above_0.75": rep.windows_above(0.75),
        "ell0": res.ell0, "eps_A": res.contraction_margin, "U_eff": min(res.U_eff, direct.U_eff),
        "n_status": res.status, "l_status": direct.status, "audit_passed": audit.passed,
        "audit_min_margin": audit.min_margin, "l_step": direct.step, "warnings": direct.warnings,
    })
    _write_json(out / "report.json", report)
    t = np.linspace(0.0, rep.tau_horizon / direct.epsilon, cfg.n_samples)
    L = direct.L_traj(t)
    nL = np.asarray(run.family.vec(L))
    N = res.n(np.minimum(direct.epsilon * t, res.tau_end))
    labels = run.family.labels
    write_csv(out / "compare.csv",
              ["t", "tau"] + [f"n_{l}" for l in labels] + [f"normL_{l}" for l in labels]
              + [f"L_{i + 1}" for i in range(L.shape[1])],
              [t, direct.epsilon * t] + [N[:, i] for i in range(N.shape[1])]
              + [nL[:, i] for i in range(nL.shape[1])] + [L[:, i] for i in range(L.shape[1])])
    print(f"bound_holds = {report['bound_holds']}  worst_ratio = {[round(r, 6) for r in report['worst_ratio']]}")
    print(f"T_N = {report['T_N']} s  T_L = {report['T_L']} s  speedup = {rep.speedup:.3g}")
    if run.flow_exit is not None or res.status != "full_horizon" or direct.status != "completed":
        return EXIT_DOMAIN
    return EXIT_OK if rep.all_hold else EXIT_FAIL


# -- check ---------------------------------------------------------------------------------

def cmd_check(cfg) -> int:
    run = _setup(cfg)
    ids = check_identities(run.system, samples=cfg.check_samples, rng_seed=cfg.seed)
    families = {"component": component_family(run.system.d)}
    if run.family.kind == "partition":
        families["partition"] = run.family
    fam_reports = {k: check_family(f, trials=cfg.family_trials, rng_seed=cfg.seed) for k, f in families.items()}
    result = {
        "identities": ids.to_dict(),
        "identities_passed": ids.passed(),
        "identity_failures": ids.failures(),
        "families": {k: r.to_dict() for k, r in fam_reports.items()},
    }
    ok = ids.passed() and all(r.passed for r in fam_reports.values())
    try:
        bundle = run.example.build_bundle(cfg.params, run.family.kind)
    except ConfigError as exc:
        result["bundle"] = {"skipped": str(exc)}
    else:
        br = check_bundle(bundle, run.system, run.flow, run.family, samples=cfg.check_samples, rng_seed=cfg.seed)
        result["bundle"] = br.to_dict()
        ok = ok and br.passed
    result["passed"] = ok
    _write_json(_out(cfg) / "check.json", result)
    if ids.failures():
        print(f"identity failures: {ids.failures()}", file=_sys.stderr)
    print("check passed" if ok else "check FAILED")
    return EXIT_OK if ok else EXIT_FAIL


# -- sweep -----------------------------------------------------------------------------------

def _sweep_point(cfg, updates):
    row = dict(updates, status="ok", bound_holds="", worst_ratio="", speedup="", U_eff="", message="")
    try:
        point = cfg.with_params(**updates)
    except (ParameterError, ConfigError) as exc:
        return dict(row, status="param-error", message=str(exc))
    try:
        res, audit, direct, rep = _compare(_setup(point))
    except _Exit as exc:
        return dict(row, status="hypothesis-error" if exc.code == EXIT_HYPOTHESIS else "error", message=str(exc))
    except Exception as exc:  # recorded per row, never aborts the sweep
        return dict(row, status="error", message=f"{type(exc).__name__}: {exc}")
    status = "ok" if res.status == "full_horizon" and direct.status == "completed" else "domain-violation"
    return dict(row, status=status, bound_holds=rep.all_hold, worst_ratio=max(rep.worst_ratio),
                speedup=rep.speedup, U_eff=min(res.U_eff, direct.U_eff))


def cmd_sweep(cfg) -> int:
    axes = list(cfg.sweep)
    header = ["point"] + axes + ["status", "bound_holds", "worst_ratio", "speedup", "U_eff", "message"]
    grids = [cfg.sweep[a] for a in axes]
    points = [dict(zip(axes, vals)) for vals in itertools.product(*grids)] if axes and all(grids) else []
    workers = max(1, min(cfg.workers, os.cpu_count() or 1, len(points) or 1))
    if workers == 1:
        rows = [_sweep_point(cfg, p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [cfg] * len(points), points))
    path = _out(cfg) / "sweep.csv"
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(rows):
            cells = [str(i)]
            for key in header[1:]:
                v = row.get(key, "")
                if isinstance(v, bool):
                    cells.append(str(v).lower())
                elif isinstance(v, float):
                    cells.append(CSV_FMT % v)
                else:
                    cells.append('"' + str(v).replace('"', "'") + '"' if "," in str(v) else str(v))
            fh.write(",".join(cells) + "\n")
    for i, row in enumerate(rows):
        print(f"point {i}: {row['status']} bound_holds={row['bound_holds']}")
    return EXIT_OK


COMMANDS = {"n-op": cmd_n_op, "l-op": cmd_l_op, "compare": cmd_compare, "check": cmd_check, "sweep": cmd_sweep}


def build_parser():
    ap = argparse.ArgumentParser(prog="avgbound", description="Averaging error estimators and their direct check.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key = value configuration file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="random seed for sampled checks (overrides seed)")
    ap.add_argument("--debug-corrupt", metavar="HANDLE", help="multiply a system handle by 2 before running")
    return ap


def main(argv=None) -> int:
    from .config import load_config

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg.seed = args.seed
        if args.debug_corrupt:
            cfg.corrupt = args.debug_corrupt
        return COMMANDS[args.command](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(str(exc), file=_sys.stderr)
        return exc.code


if __name__ == "__main__":
    _sys.exit(main())
