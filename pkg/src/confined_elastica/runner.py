"""Run orchestration: single runs and radius / epsilon sweeps."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import RunConfig
from .flow_solver import ERROR, FlowState, GradientFlow, SolverError, perturb
from .io import format_float, write_energy_csv, write_json, write_snapshot

__all__ = ["RunResult", "execute", "cmd_run", "cmd_sweep_radius", "cmd_sweep_epsilon",
           "fit_loglog_slope", "WORKERS_ENV"]

log = logging.getLogger(__name__)

WORKERS_ENV = "CONFINED_ELASTICA_WORKERS"


@dataclass
class RunResult:
    state: FlowState
    summary: dict
    flow: GradientFlow


def execute(config: RunConfig, out_dir=None) -> RunResult:
    """Run one flow; write outputs to ``out_dir`` when given."""
    curve = config.initial_curve()
    L = config.nominal_length()
    mesh = curve.mesh
    conf = config.confinement()
    params = config.flow_params(mesh)
    bc = config.boundary_condition(mesh.closed)
    if config.perturb_amplitude > 0:
        curve = perturb(curve, config.perturb_amplitude, config.seed)
    flow = GradientFlow(mesh, conf, params, bc=bc, curve=curve,
                        method=config.flow.get("method", "schur"))
    state = flow.initial_state(curve)

    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    def snapshot(s):
        if out is not None and s.k % params.snapshot_every == 0:
            write_snapshot(out / f"snap_{s.k}.txt", s.curve, L, s.k)

    error = None
    try:
        flow.run(state, callback=snapshot)
    except SolverError as exc:
        error = str(exc)
        state.termination_reason = ERROR
        log.error("run failed: %s", exc)

    summary = summarize(config, state, flow, L, error)
    if out is not None:
        last = out / f"snap_{state.k}.txt"
        if not last.exists():
            write_snapshot(last, state.curve, L, state.k)
        write_energy_csv(out / "energy.csv", state.history)
        write_json(out / "summary.json", summary)
    return RunResult(state, summary, flow)


def summarize(config: RunConfig, state: FlowState, flow: GradientFlow, L: float, error=None) -> dict:
    params = flow.params
    curve = state.curve
    first, last = state.history[0], state.history[-1]
    classification = None
    if curve.mesh.closed:
        try:
            classification = diagnostics.classify(curve, length=L).to_dict()
        except ValueError as exc:
            log.warning("classification failed: %s", exc)
    return {
        "termination_reason": state.termination_reason,
        "error": error,
        "steps": state.k,
        "time": state.k * params.tau,
        "parameters": {
            "kappa": params.kappa, "eps": params.eps, "tau": params.tau,
            "h": flow.mesh.h_max, "n_elements": flow.mesh.n_elements,
            "max_steps": params.max_steps, "stop_tol": params.stop_tol,
            "seed": config.seed, "perturb_amplitude": config.perturb_amplitude,
            "bc": flow.bc.kind, "method": flow.method,
        },
        "length": L,
        "r_L": L / (2 * math.pi),
        "initial": {"E_bend": first.E_bend, "E_conf": first.E_conf, "E_total": first.E_total},
        "final": {
            "E_bend": last.E_bend, "E_conf": last.E_conf, "E_total": last.E_total,
            "dtu_norm": last.dtu_norm, "arclen_violation": last.arclen_violation,
        },
        "dissipation": {
            "E_final_plus_dissipated": last.E_total + state.dissipated,
            "E_initial": first.E_total,
        },
        "normalized_energy": diagnostics.normalized_energy(curve, params.kappa, L),
        "max_penetration": diagnostics.penetration_report(curve, flow.conf),
        "classification": classification,
    }


def cmd_run(config: RunConfig, out_dir=None) -> int:
    out_dir = out_dir or config.output_dir or "."
    result = execute(config, out_dir)
    return 1 if result.state.termination_reason == ERROR else 0


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, jobs):
    workers = min(_workers(), max(1, len(jobs)))
    if workers == 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _radius_job(job):
    config, radius, out = job
    result = execute(config.with_ball(radius), out)
    return result.summary


def _eps_job(job):
    config, eps, out = job
    result = execute(config.with_eps(eps), out)
    return result.summary


def _shape(summary):
    c = summary["classification"]
    if c is None:
        return "unclassified", 0, 0
    return c["label"], c["mu"], c["nu"]


def cmd_sweep_radius(config: RunConfig, radii, out_dir=None) -> list:
    """Run to stationarity for every ball radius; write ``sweep.csv``."""
    out = Path(out_dir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    jobs = [(config, R, out / f"R_{format_float(R)}") for R in radii]
    summaries = _map(_radius_job, jobs)
    rows = []
    for R, s in zip(radii, summaries):
        label, mu, nu = _shape(s)
        rows.append({
            "R": R, "rL_over_R": s["r_L"] / R, "normalized_energy": s["normalized_energy"],
            "shape": label, "mu": mu, "nu": nu, "termination_reason": s["termination_reason"],
        })
    _write_rows(out / "sweep.csv", rows,
                ["R", "rL_over_R", "normalized_energy", "shape", "mu", "nu", "termination_reason"])
    return rows


def fit_loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; ``None`` if undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if np.count_nonzero(ok) < 2 or np.unique(x[ok]).size < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def cmd_sweep_epsilon(config: RunConfig, epsilons, out_dir=None):
    """Run to stationarity for every penalty scale; write ``sweep.csv`` and ``sweep_summary.json``."""
    out = Path(out_dir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0 for e in epsilons):
        raise ValueError("epsilons must be positive")
    jobs = [(config, e, out / f"eps_{format_float(e)}") for e in epsilons]
    summaries = _map(_eps_job, jobs)
    rows = []
    for eps, s in zip(epsilons, summaries):
        label, mu, nu = _shape(s)
        rows.append({
            "eps": eps, "max_penetration": s["max_penetration"]["max_nodal"],
            "E_total": s["final"]["E_total"], "shape": label,
            "termination_reason": s["termination_reason"],
        })
    _write_rows(out / "sweep.csv", rows,
                ["eps", "max_penetration", "E_total", "shape", "termination_reason"])
    slope = fit_loglog_slope([r["eps"] for r in rows], [r["max_penetration"] for r in rows])
    summary = {"slope": slope, "rows": rows}
    write_json(out / "sweep_summary.json", summary)
    return rows, slope


def _write_rows(path, rows, columns):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])
