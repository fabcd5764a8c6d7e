"""Scenario execution and sweep orchestration.

Each scenario reads a validated RunConfig, executes against the library,
writes its artifacts into ``<out>/<run id>/`` and finishes by renaming the
manifest into place.  Outputs are deterministic for a fixed config: fixed
iteration orders, no wall-clock content outside the manifest.
"""

from __future__ import annotations

import math
import shutil
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, SCHEMA, ConfigError
from .diagnostics import compare_backward_forward, detect_echoes, fit_decay
from .evolution import EvolutionParams, forward_solve
from .norms import a_infinity, functional_M, functional_N, functional_P_Q, solve_a
from .profiles import (
    bgk_to_field,
    kernel_j,
    lorentzian,
    make_asymptotic_datum,
    maxwellian,
    omega_of_nu,
    solve_bgk,
)
from .scattering import (
    ScatteringConfig,
    backward_solve,
    continue_in_T,
    nonperturbative_solve,
)
from .spectral import make_grid
from .volterra import stability_margin
from .outputs import write_csv, write_json, write_manifest_atomic, write_snapshots


class RunRefusedError(RuntimeError):
    """The run id already has a completed manifest and overwrite is off."""


@dataclass
class RunManifest:
    path: Path
    data: dict


def _profile_from(cfg: RunConfig):
    kind = cfg.values["profile.kind"]
    if kind == "maxwellian":
        return maxwellian(beta=cfg.values["profile.beta"])
    return lorentzian(scale=cfg.values["profile.scale"])


def _grid_from(cfg: RunConfig):
    return make_grid(
        cfg.values["grid.n_max"],
        cfg.values["grid.xi_max"],
        cfg.values["grid.d_xi"],
        cfg.values["grid.t_final"],
    )


def _datum_from(cfg: RunConfig, grid):
    return make_asymptotic_datum(
        cfg.values["datum.amplitude"],
        cfg.values["datum.modes"],
        cfg.values["datum.width"],
        grid,
        shape=cfg.values["datum.shape"],
    )


def _scattering_config(cfg: RunConfig, grid, datum=None, background=None, tau=None):
    return ScatteringConfig(
        terminal=datum if datum is not None else _datum_from(cfg, grid),
        background=background if background is not None else _profile_from(cfg),
        epsilon=cfg.values["evolve.epsilon"],
        T=cfg.values["evolve.T"],
        d_t=cfg.values["evolve.d_t"],
        tau=cfg.values.get("evolve.tau", 0.0) if tau is None else tau,
        sign=cfg.values["evolve.sign"],
        picard_max_iters=cfg.values["picard.max_iters"],
        picard_tol=cfg.values["picard.tol"],
        zeta_refine=cfg.values["picard.zeta_refine"],
        snap_stride=cfg.values["evolve.snap_stride"],
        inner_max=cfg.values["picard.inner_max"],
        norm_lambda=cfg.values["norms.lambda"],
        norm_delta=cfg.values["norms.delta"],
    )


def _write_zeta_csv(out, series):
    write_csv(
        out / "zeta.csv",
        ["t", "re_zeta1", "im_zeta1", "abs_zeta1"],
        (
            (t, z.real, z.imag, abs(z))
            for t, z in zip(series.t, series.zeta1)
        ),
    )


def _write_picard_csv(out, trace):
    rows = []
    for i, diff in enumerate(trace.sup_diffs):
        ratio = trace.contraction_ratios[i - 1] if i >= 1 else math.nan
        rows.append((i + 1, diff, ratio))
    write_csv(out / "picard.csv", ["iter", "sup_diff", "contraction_ratio"], rows)


def _decay_window(cfg: RunConfig, series):
    lo = cfg.values.get("fit.window_lo")
    hi = cfg.values.get("fit.window_hi")
    if lo is None:
        lo = 0.5 * float(series.t[-1])
    if hi is None:
        hi = float(series.t[-1])
    return (lo, hi)


def _run_stability(cfg: RunConfig, out: Path) -> dict:
    profile = _profile_from(cfg)
    kernel = kernel_j(profile, 1).sample(cfg.values["stability.t_max"], cfg.values["stability.d_t"])
    report = stability_margin(
        kernel,
        cfg.values["stability.omega_max"],
        cfg.values["stability.n_scan"],
        threshold=cfg.values["stability.threshold"],
        m_bound=cfg.values.get("stability.m_bound"),
        lam=cfg.values.get("stability.lambda"),
    )
    from .volterra import laplace

    at_zero = laplace(kernel, 0.0)
    write_json(
        out / "stability.json",
        {
            "profile": profile.name,
            "laplace_at_zero": {"re": at_zero.value.real, "im": at_zero.value.imag},
            "laplace_tail_bound": at_zero.tail_bound,
            **report.as_dict(),
        },
    )
    return {"converged": True, "margin": report.margin, "satisfied": report.satisfied}


def _run_bgk(cfg: RunConfig, out: Path) -> dict:
    beta = cfg.values["bgk.beta"]
    nus = np.linspace(0.0, 1.5, 151)
    write_csv(
        out / "bgk.csv",
        ["nu", "omega"],
        ((nu, omega_of_nu(beta, nu) if nu > 0 else 0.0) for nu in nus),
    )
    state = solve_bgk(beta)
    payload = {"beta": beta, "has_fixed_point": state is not None}
    if state is not None:
        payload.update(
            {"nu": state.nu, "residual": state.residual, "z_norm": state.z_norm}
        )
    write_json(out / "bgk.json", payload)
    return {"converged": True, "has_fixed_point": state is not None}


def _run_weights(cfg: RunConfig, out: Path) -> dict:
    T = cfg.values["weights.T"]
    d_t = cfg.values["weights.d_t"]
    deltas = cfg.values["weights.delta_list"]
    a0s = []
    for d in deltas:
        a0s.append(solve_a(T, d, d_t).a0)
    slope = float(np.polyfit(np.log(deltas), np.log(a0s), 1)[0]) if len(deltas) >= 2 else math.nan
    delta = cfg.values["weights.delta"]
    t_max = cfg.values["weights.t_max"]
    w_T = solve_a(T, delta, d_t)
    w_inf = a_infinity(delta, t_max, d_t)
    n = min(len(w_T.t), len(w_inf.t))
    write_csv(
        out / "weights.csv",
        ["t", "a_T", "a_inf"],
        ((w_T.t[i], w_T.a[i], w_inf.a[i]) for i in range(n)),
    )
    write_json(
        out / "weights.json",
        {
            "T": T,
            "delta_list": deltas,
            "a0_values": a0s,
            "loglog_slope": slope,
            "delta": delta,
            "a_inf_0": w_inf.a0,
            "a_inf_at_t_max": float(w_inf.a[-1]),
            "t_max": t_max,
        },
    )
    return {"converged": True, "loglog_slope": slope}


def _run_forward(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    profile = _profile_from(cfg)
    datum = _datum_from(cfg, grid)
    params = EvolutionParams(
        profile=profile,
        epsilon=cfg.values["evolve.epsilon"],
        d_t=cfg.values["evolve.d_t"],
        t_final=cfg.values["evolve.T"],
        sign=cfg.values["evolve.sign"],
        snap_stride=cfg.values["evolve.snap_stride"],
    )
    traj = forward_solve(datum, params)
    _write_zeta_csv(out, traj.series)
    write_snapshots(out / "snapshots.bin", out / "snapshots.json", grid, traj.times, traj.snapshots)
    half = 0.5 * params.t_final
    mags = traj.series.magnitude()
    first = float(np.max(mags[traj.series.t <= half]))
    second = float(np.max(mags[traj.series.t >= half]))
    diag = {
        "mass_drift": traj.max_mean_drift(),
        "first_half_max": first,
        "second_half_max": second,
        "damped": second < first,
        "truncation": traj.counters.as_dict(),
        "m_norm": functional_M(traj.series, cfg.values["norms.lambda"]).value,
    }
    try:
        fit = fit_decay(traj.series, _decay_window(cfg, traj.series))
        diag["decay"] = {"rate": fit.rate, "amplitude": fit.amplitude, "residual": fit.residual}
        echoes = detect_echoes(traj.series, fit, cfg.values["echo.threshold"])
        diag["echoes"] = [{"time": e.time, "prominence": e.prominence} for e in echoes]
    except ValueError as exc:
        diag["decay"] = {"error": str(exc)}
    write_json(out / "diagnostics.json", diag)
    return {"converged": True, "damped": diag["damped"], "mass_drift": diag["mass_drift"]}


def _run_backward(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    scfg = _scattering_config(cfg, grid)
    t_list = cfg.values.get("backward.T_list")
    if t_list:
        cont = continue_in_T(scfg, t_list)
        write_csv(
            out / "cauchy.csv",
            ["t_star", "zeta_diff", "h_diff", "extension_zeta_diff"],
            (
                (cont.t_values[i], cont.zeta_diffs[i], cont.h_diffs[i], cont.extension_zeta_diffs[i])
                for i in range(len(cont.zeta_diffs))
            ),
        )
        traj = cont.last_trajectory
        trace = cont.traces[-1]
        m_values = [
            functional_M(s, cfg.values["norms.lambda"]).value for s in cont.series
        ]
    else:
        traj, trace = backward_solve(scfg)
        m_values = [functional_M(traj.series, cfg.values["norms.lambda"]).value]
    _write_zeta_csv(out, traj.series)
    _write_picard_csv(out, trace)
    write_snapshots(out / "snapshots.bin", out / "snapshots.json", grid, traj.times, traj.snapshots)
    weight = solve_a(scfg.T, scfg.norm_delta, scfg.d_t)
    norms_payload = {
        "lambda": cfg.values["norms.lambda"],
        "m_norm": functional_M(traj.series, cfg.values["norms.lambda"]).value,
        "n_norm": functional_N(traj, cfg.values["norms.lambda"], weight,
                               mu_points=cfg.values["norms.mu_points"]).value,
        "m_norm_per_T": m_values,
        "picard": trace.as_dict(),
        "truncation": traj.counters.as_dict(),
    }
    try:
        fit = fit_decay(traj.series, _decay_window(cfg, traj.series))
        norms_payload["decay"] = {
            "rate": fit.rate, "amplitude": fit.amplitude, "residual": fit.residual,
        }
    except ValueError as exc:
        norms_payload["decay"] = {"error": str(exc)}
    write_json(out / "norms.json", norms_payload)
    return {
        "converged": trace.converged,
        "iterations": trace.iterations,
        "contraction_ratio": max(trace.contraction_ratios) if trace.contraction_ratios else math.nan,
        "m_norm": norms_payload["m_norm"],
        "n_norm": norms_payload["n_norm"],
        "lambda_fit": norms_payload["decay"].get("rate", math.nan),
    }


def _run_nonperturbative(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    beta = cfg.values["bgk.beta"]
    state = solve_bgk(beta)
    if state is None:
        raise ConfigError(f"no self-consistent state at beta={beta}; need beta > 2")
    datum, background = bgk_to_field(state, grid)
    scfg = _scattering_config(cfg, grid, datum=datum, background=background)
    kernel = kernel_j(background, 1).sample(max(25.0, scfg.T - scfg.tau), 5e-3).scaled(scfg.sign)
    margin_report = stability_margin(kernel, 20.0, 801)
    traj, trace, split = nonperturbative_solve(scfg)
    _write_zeta_csv(out, traj.series)
    _write_picard_csv(out, trace)
    write_snapshots(out / "snapshots.bin", out / "snapshots.json", grid, traj.times, traj.snapshots)
    if split is not None:
        write_csv(
            out / "echoes.csv",
            ["t", "abs_b_plus", "abs_b_minus", "abs_b_plus_reconstructed"],
            (
                (split.t[i], abs(split.b_plus[i]), abs(split.b_minus[i]), abs(split.b_plus_reconstructed[i]))
                for i in range(len(split.t))
            ),
        )
    weight = solve_a(scfg.T, 1.0, scfg.d_t)
    w_inf = a_infinity(1.0, max(scfg.tau, 1.0), min(scfg.d_t, 0.01))
    a_inf_tau = float(w_inf(scfg.tau)) if scfg.tau > 0 else w_inf.a0
    p_rep, q_rep = functional_P_Q(
        traj.series, traj, cfg.values["norms.lambda"], cfg.values["norms.lambda_prime"],
        scfg.tau, weight, a_inf_tau,
    )
    payload = {
        "beta": beta,
        "nu": state.nu,
        "tau": scfg.tau,
        "T": scfg.T,
        "kernel_margin": margin_report.as_dict(),
        "p_norm": p_rep.value,
        "q_norm": q_rep.value,
        "picard": trace.as_dict(),
        "echo_split": split.sup_values() if split is not None else None,
        "truncation": traj.counters.as_dict(),
    }
    write_json(out / "norms.json", payload)
    return {
        "converged": trace.converged,
        "iterations": trace.iterations,
        "contraction_ratio": max(trace.contraction_ratios) if trace.contraction_ratios else math.nan,
        "m_norm": p_rep.value,
        "n_norm": q_rep.value,
    }


def _run_compare(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    scfg = _scattering_config(cfg, grid)
    traj, trace = backward_solve(scfg)
    rough_forward = None
    rough_width = cfg.values.get("compare.rough_width")
    if rough_width:
        rough = make_asymptotic_datum(
            cfg.values["datum.amplitude"], cfg.values["datum.modes"], rough_width, grid,
            shape=cfg.values["datum.shape"],
        )
        params = EvolutionParams(
            profile=scfg.background,
            epsilon=scfg.epsilon,
            d_t=scfg.d_t,
            t_final=scfg.T,
            sign=scfg.sign,
            snap_stride=scfg.snap_stride,
        )
        rough_forward = forward_solve(rough, params)
    report = compare_backward_forward(
        traj, scfg.terminal, scfg.background, scfg.epsilon, scfg.picard_tol,
        sign=scfg.sign, forward_rough=rough_forward,
    )
    rows = []
    for i, t in enumerate(report.backward_profile.t):
        row = [t, report.backward_profile.mu_star[i]]
        if report.forward_profile is not None:
            j = int(np.argmin(np.abs(report.forward_profile.t - t)))
            row.append(report.forward_profile.mu_star[j])
        rows.append(tuple(row))
    header = ["t", "mu_star_backward"] + (
        ["mu_star_forward"] if report.forward_profile is not None else []
    )
    write_csv(out / "profiles.csv", header, rows)
    write_json(
        out / "compare.json",
        {
            "round_trip_error": report.error,
            "tolerance": report.tolerance,
            "within_tolerance": report.within_tolerance,
            "picard": trace.as_dict(),
        },
    )
    return {
        "converged": trace.converged and report.within_tolerance,
        "round_trip_error": report.error,
    }


_SCENARIO_IMPL = {
    "stability": _run_stability,
    "bgk": _run_bgk,
    "weights": _run_weights,
    "forward": _run_forward,
    "backward": _run_backward,
    "nonperturbative": _run_nonperturbative,
    "compare": _run_compare,
}


def run(cfg: RunConfig, out_root, overwrite: bool = False, threads: int = 1) -> RunManifest:
    """Execute one scenario into ``<out_root>/<run id>/``, manifest last."""
    out = Path(out_root) / cfg.run_id
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not overwrite:
        raise RunRefusedError(
            f"run id {cfg.run_id!r} already completed at {out}; pass overwrite to redo"
        )
    out.mkdir(parents=True, exist_ok=True)
    for old in out.iterdir():
        if old.is_file():
            old.unlink()
        else:
            shutil.rmtree(old)
    started = time.time()
    manifest = {
        "run_id": cfg.run_id,
        "scenario": cfg.scenario,
        "artifact_version": __version__,
        "config": cfg.as_dict(),
        "status": "failed",
        "headline": {},
    }
    try:
        if cfg.scenario == "sweep":
            headline = sweep(cfg, out, threads=threads)
        else:
            headline = _SCENARIO_IMPL[cfg.scenario](cfg, out)
        manifest["status"] = "ok"
        manifest["headline"] = headline
    except Exception as exc:  # recorded, then re-raised after the manifest lands
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["traceback"] = traceback.format_exc().splitlines()
        manifest["wall_seconds"] = time.time() - started
        write_manifest_atomic(out, manifest)
        raise
    manifest["wall_seconds"] = time.time() - started
    path = write_manifest_atomic(out, manifest)
    return RunManifest(path=path, data=manifest)


def _sweep_member(args):
    base_values, axis, value, member_dir = args
    from .config import RunConfig as RC

    values = dict(base_values)
    parser = SCHEMA[axis][0]
    values[axis] = parser(str(value)) if parser in (int, float) else value
    scenario = values["sweep.scenario"]
    member_values = {
        k: v for k, v in values.items() if not k.startswith("sweep.")
    }
    member_values["run.scenario"] = scenario
    member_values["run.id"] = "member"
    member = RC(scenario=scenario, run_id="member", values=member_values)
    try:
        result = run(member, member_dir, overwrite=True)
        headline = result.data["headline"]
        return {"value": value, "ok": True, **headline}
    except Exception as exc:
        return {"value": value, "ok": False, "error": f"{type(exc).__name__}: {exc}"}


def sweep(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    """Run the wrapped scenario across the axis values; failures recorded.

    Members execute in input order (in parallel when threads > 1) and the
    aggregate lands in ``sweep.csv`` in input order regardless.
    """
    axis = cfg.values["sweep.axis"]
    values = cfg.values["sweep.values"]
    jobs = [
        (cfg.values, axis, v, str(out / "runs" / f"{i:03d}")) for i, v in enumerate(values)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]
    rows = []
    n_failed = 0
    for res in results:
        if res["ok"]:
            rows.append(
                (
                    res["value"],
                    res.get("converged", False),
                    res.get("lambda_fit", math.nan),
                    res.get("contraction_ratio", math.nan),
                    res.get("m_norm", math.nan),
                    res.get("n_norm", math.nan),
                )
            )
        else:
            n_failed += 1
            rows.append((res["value"], False, math.nan, math.nan, math.nan, math.nan))
    write_csv(
        out / "sweep.csv",
        ["axis_value", "converged", "lambda_fit", "contraction_ratio", "M_norm", "N_norm"],
        rows,
    )
    failures = {fmt_axis(r["value"]): r["error"] for r in results if not r["ok"]}
    headline = {
        "axis": axis,
        "n_values": len(values),
        "n_failed": n_failed,
        "converged_values": [r["value"] for r in results if r.get("converged")],
    }
    if failures:
        headline["failures"] = failures
    return headline


def fmt_axis(v) -> str:
    return f"{float(v):.17g}"
