"""Experiment kinds run by the harness.

Each runner takes a validated :class:`~mcflab.config.ExperimentConfig`, a
run directory and a worker count, writes its CSVs (and SVGs when plots are
enabled) and returns the checks.  Checks read their measured values back
from the CSVs they were written to, so verification can re-derive them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import mpmath
import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, DivergentNormError
from .exact import ExactSphereFlow, euclidean_sphere_flow, spaceform_sphere_flow
from .flow import (
    ProfileFlow,
    StepControl,
    cylinder_profile,
    dumbbell_profile,
    ellipsoid_profile,
    integrate_geodesic_sphere,
    detect_singularity,
    load_profile,
    snapshot_csv_rows,
    sphere_profile,
    step_profile,
)
from .manifest import Check, sourced, write_csv
from .moser import (
    admissible_radius,
    beta_check,
    energy_inequality_exact,
    h2_lower_bound_monitor,
    iteration_schedule,
    lp_functional,
    sup_bound_check,
)
from .norms import (
    DIVERGENT,
    FINITE,
    _exact_integral,
    classify_divergence,
    dyadic_horizons,
    limit_norm,
    profile_norm_trace,
)
from .rescale import blowup_sequence, norm_vanishing_check, normalization_check
from .sobolev import sobolev_C, sobolev_battery, write_battery_csv


@dataclass
class Outputs:
    """Files written by a runner, relative to the run directory."""

    run_dir: Path
    plots_enabled: bool
    csv: list[str] = field(default_factory=list)
    plots: list[str] = field(default_factory=list)

    def table(self, name: str, fields, rows) -> Path:
        path = write_csv(self.run_dir / name, fields, rows)
        self.csv.append(name)
        return path

    def plot(self, name: str, fn, *args, **kw):
        if self.plots_enabled:
            fn(self.run_dir / name, *args, **kw)
            self.plots.append(name)


def exact_flow(n: int, c: int, H0: float | None = None, r0: float | None = None) -> ExactSphereFlow:
    if c == 0:
        return euclidean_sphere_flow(n, n / H0 if H0 is not None else (1.0 if r0 is None else r0))
    return spaceform_sphere_flow(n, c, H0)


def _flow_from(p: dict) -> ExactSphereFlow:
    return exact_flow(p["n"], p["c"], p.get("H0"), p.get("r0"))


def _plotting():
    from . import plotting

    return plotting


# ---------------------------------------------------------------------------
# exact

def run_exact(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    flow = _flow_from(p)
    n, c = flow.n, flow.c
    if c == 0:
        T_ref = flow.r0**2 / (2 * n)
    else:
        # independent route through mpmath: T = ln(1 + n^2 c / H0^2) / (2 n c)
        T_ref = float(mpmath.log1p(mpmath.mpf(n * n * c) / mpmath.mpf(flow.H0) ** 2) / (2 * n * c))
    H0_in = p["H0"] if p.get("H0") is not None else n / flow.r0
    traj = integrate_geodesic_sphere(flow.amb, flow.rho0, H_stop=p["H_stop"])
    keep = traj.t < flow.T
    t_ode, H_ode = traj.t[keep], traj.H[keep]
    H_ex = np.asarray(flow.H(t_ode))
    rows = [{"t": float(t), "rho_ode": float(r), "H_ode": float(h), "H_exact": float(he),
             "rel_err": float(abs(h / he - 1)), "V_exact": float(flow.V(t)),
             "margin": float(he * he - n * n * flow.amb.K1)}
            for t, r, h, he in zip(t_ode, traj.rho[keep], H_ode, H_ex)]
    out.table("trajectory.csv", ("t", "rho_ode", "H_ode", "H_exact", "rel_err", "V_exact", "margin"), rows)
    summary = dict(flow.to_params())
    summary.update(T_expected=T_ref, T_rel_err=abs(flow.T / T_ref - 1), H0_input=float(H0_in),
                   H0_recovered=float(flow.H(0.0)), H0_rel_err=abs(float(flow.H(0.0)) / H0_in - 1),
                   H_reached=float(H_ode[-1]), ode_reason=traj.reason)
    out.table("summary.csv", tuple(summary), [summary])
    d = out.run_dir
    checks = [
        sourced(d, "T-closed-form", "summary.csv:T_rel_err:first", "<=", tol["T_rel_err"]),
        sourced(d, "H0-recovered", "summary.csv:H0_rel_err:first", "<=", tol["H0_rel_err"]),
        sourced(d, "ode-tracks-closed-form", "trajectory.csv:rel_err:max", "<=", tol["ode_rel_err"]),
        sourced(d, "ode-reaches-H-stop", "summary.csv:H_reached:first", ">=", p["H_stop"]),
    ]
    if flow.amb.K1 > 0:
        checks.append(sourced(d, "H2-margin-positive", "trajectory.csv:margin:min", ">", 0.0))
    tt = np.linspace(0.0, min(flow.time_at_H(p["H_stop"]), t_ode[-1]), p["samples"])
    out.plot("H.svg", _plotting().plot_H, tt, flow.H(tt), t_ode, H_ode, title=f"n={n}, c={c}")
    return checks


# ---------------------------------------------------------------------------
# profile

RECORD_FIELDS = ("t", "dt", "max_A", "max_H2", "location", "area", "min_H2", "H2_location",
                 "min_kappa", "min_rho", "inner", "accumulated", "area_increase", "oracle_rel_err")


def _initial_profile(p: dict) -> ProfileFlow:
    kw = dict(control=StepControl(safety=p["safety"]), blowup_threshold=p["blowup_threshold"])
    shape, m = p["shape"], p["m"]
    if shape == "file":
        flow = load_profile(p["file"], **kw)
        if flow.n != p["n"]:
            raise ConfigError([f"parameters.n: {p['file']} declares n={flow.n}, config says {p['n']}"])
        return flow
    if shape == "sphere":
        x, y = sphere_profile(m, p["radius"], p["boundary"])
    elif shape == "ellipsoid":
        x, y = ellipsoid_profile(m, p["a"], p["b"])
    elif shape == "cylinder":
        x, y = cylinder_profile(m, p["radius"], p["length"])
    else:
        x, y = dumbbell_profile(m, p["bulb_radius"], p["neck_radius"], p["softness"])
    return ProfileFlow(x, y, p["n"], p["boundary"], **kw)


def run_profile_experiment(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    flow = _initial_profile(p)
    n = flow.n
    keep = max(p["snapshots"], 2)
    saved = [(flow.t, flow.x.copy(), flow.rho.copy())]
    A0 = flow.records[0].max_A
    top = p["stop_H"] / math.sqrt(n) if math.isfinite(p["stop_H"]) else flow.blowup_threshold
    a_levels = A0 * (max(top, A0 * 1.0001) / A0) ** (np.arange(1, keep) / (keep - 1))
    t_levels = p["t_end"] * np.arange(1, keep) / (keep - 1) if math.isfinite(p["t_end"]) else None
    ia = it = 0
    stop_H2 = p["stop_H"] ** 2
    while flow.alive and flow.steps < p["max_steps"]:
        step_profile(flow, p["t_end"])
        rec = flow.records[-1]
        hit = False
        while ia < len(a_levels) and rec.max_A >= a_levels[ia]:
            ia, hit = ia + 1, True
        if t_levels is not None:
            while it < len(t_levels) and rec.t >= t_levels[it]:
                it, hit = it + 1, True
        if hit or not flow.alive:
            saved.append((flow.t, flow.x.copy(), flow.rho.copy()))
        if rec.max_H2 >= stop_H2:
            break
    if flow.report is not None:
        report = flow.report
    else:
        report = replace(detect_singularity(flow.records, flow.blowup_threshold), reason="stopped")
    if saved[-1][0] != flow.t:
        saved.append((flow.t, flow.x.copy(), flow.rho.copy()))
    trace = profile_norm_trace(flow)
    recs = flow.records
    area0 = recs[0].area
    R = p["radius"]
    is_sphere = p["shape"] == "sphere"
    rows = []
    for k, (r, acc) in enumerate(zip(recs, trace.accumulated_series)):
        row = {f: getattr(r, f) for f in RECORD_FIELDS[:11]}
        row["accumulated"] = float(acc)
        row["area_increase"] = 0.0 if k == 0 else (r.area - recs[k - 1].area) / area0
        if is_sphere:
            Hx = n / math.sqrt(R * R - 2 * n * r.t)
            row["oracle_rel_err"] = max(abs(math.sqrt(r.max_H2) / Hx - 1), abs(math.sqrt(r.min_H2) / Hx - 1))
        rows.append(row)
    out.table("records.csv", RECORD_FIELDS, rows)
    from .geometry import profile_snapshot

    snap_rows = []
    for k, (t, x, y) in enumerate(saved):
        snap = profile_snapshot(x, y, n, flow.boundary, t=t, multiplicity=flow.multiplicity)
        for xx, yy, H, a in snapshot_csv_rows(snap):
            snap_rows.append({"snapshot": k, "t": t, "x": xx, "rho": yy, "H": H, "abs_A": a})
    out.table("profiles.csv", ("snapshot", "t", "x", "rho", "H", "abs_A"), snap_rows)
    t_sing = report.t_sing_estimate
    t90 = 0.9 * t_sing if math.isfinite(t_sing) else math.nan
    acc90 = trace.accumulated_at(t90) if math.isfinite(t90) and t90 <= trace.t_horizon else math.nan
    summary = {
        "detected": report.detected, "reason": report.reason, "t_sing_estimate": t_sing,
        "max_A": report.max_A, "location": report.location, "steps": flow.steps,
        "remeshes": flow.remeshes, "t_final": flow.t, "blowup_threshold": flow.blowup_threshold,
        "accumulated_final": trace.accumulated, "accumulated_at_90pct": acc90,
        "growth_ratio": trace.accumulated / acc90 if acc90 and math.isfinite(acc90) else math.nan,
        "location_error": (abs(report.location - p["expected_location"])
                           if p["expected_location"] is not None else math.nan),
    }
    out.table("summary.csv", tuple(summary), [summary])
    d = out.run_dir
    checks = [sourced(d, "area-nonincreasing", "records.csv:area_increase:max", "<=", tol["area_increase"])]
    if is_sphere:
        checks.append(sourced(d, "sphere-oracle", "records.csv:oracle_rel_err:max", "<=", tol["oracle_rel_err"]))
    if p["expect_singularity"]:
        checks.append(sourced(d, "singularity-detected", "summary.csv:detected:first", "==", 1.0))
        checks.append(sourced(d, "norm-growth-ratio", "summary.csv:growth_ratio:first", ">=", p["growth_ratio"]))
        if p["expected_location"] is not None:
            checks.append(sourced(d, "singularity-location", "summary.csv:location_error:first", "<=",
                                  tol["location_abs"]))
    pl = _plotting()
    show = saved if len(saved) <= keep else [saved[i] for i in np.linspace(0, len(saved) - 1, keep).astype(int)]
    out.plot("profiles.svg", pl.plot_profiles, show)
    t = np.array([r.t for r in recs])
    out.plot("curvature.svg", pl.plot_series, t, [("max |A|", np.array([r.max_A for r in recs]))],
             "t", "max |A|", logy=True)
    out.plot("norm_trace.svg", pl.plot_norm_traces, [(f"alpha = {flow.track_alpha:g}", t[1:],
                                                      trace.accumulated_series[1:])])
    return checks


# ---------------------------------------------------------------------------
# sharpness

SHARPNESS_FIELDS = ("n", "c", "alpha", "expected", "classification", "correct", "fitted_exponent",
                    "expected_exponent", "exponent_err", "increment_ratio", "confidence", "limit_norm", "T")


def sharpness_flow(n: int, c: int, p: dict) -> ExactSphereFlow:
    if c == 0:
        return euclidean_sphere_flow(n, 1.0)
    H0 = p["H0_sphere"] if c == 1 else p["H0_hyperbolic_factor"] * n
    return spaceform_sphere_flow(n, c, H0)


def sharpness_entry(n: int, c: int, alpha: float, p: dict) -> dict:
    flow = sharpness_flow(n, c, p)
    v = classify_divergence(flow, alpha, dyadic_horizons(flow.T, levels=p["levels"]))
    expected = FINITE if alpha < n + 2 else DIVERGENT
    expo = (n - alpha) / 2 if c == 0 else None
    return {
        "n": n, "c": c, "alpha": float(alpha), "expected": expected, "classification": v.classification,
        "correct": int(v.classification == expected), "fitted_exponent": v.fitted_exponent,
        "expected_exponent": expo, "exponent_err": None if expo is None else abs(v.fitted_exponent - expo),
        "increment_ratio": v.increment_ratio, "confidence": v.confidence,
        "limit_norm": limit_norm(flow, alpha), "T": flow.T,
    }


def sharpness_grid(p: dict) -> list[tuple[int, int, float]]:
    grid = []
    for n in p["n"]:
        alphas = p["alpha"] if p["alpha"] is not None else [n + k for k in p["alpha_offsets"]]
        for c in p["c"]:
            grid.extend((n, c, float(a)) for a in alphas)
    return grid


def run_sharpness(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    grid = sharpness_grid(p)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda e: sharpness_entry(*e, p), grid))
    out.table("verdicts.csv", SHARPNESS_FIELDS, rows)
    d = out.run_dir
    checks = [sourced(d, "misclassifications", "verdicts.csv:correct:count_false", "==", 0.0)]
    if any(r["c"] == 0 for r in rows):
        checks.append(sourced(d, "euclidean-exponent", "verdicts.csv:exponent_err:max", "<=", tol["exponent_abs"]))
    for k, r in enumerate(rows):
        checks.append(sourced(d, f"verdict[n={r['n']},c={r['c']},alpha={r['alpha']:g}]",
                              f"verdicts.csv:correct:row{k}", "==", 1.0))
    out.plot("verdicts.svg", _plotting().plot_verdict_table, rows)
    return checks


# ---------------------------------------------------------------------------
# sobolev

def sobolev_constant_reference(n: int, a) -> float:
    """``C(n, a)`` at 50 digits from ``omega_n = pi^(n/2) / Gamma(n/2 + 1)``."""
    with mpmath.workdps(50):
        a = mpmath.mpf(a)
        om = mpmath.pi ** (mpmath.mpf(n) / 2) / mpmath.gamma(mpmath.mpf(n) / 2 + 1)
        C = (mpmath.pi / 2 * mpmath.mpf(2) ** (n - 2) / a * (1 - a) ** (-mpmath.mpf(1) / n)
             * mpmath.mpf(n) / (n - 1) * om ** (-mpmath.mpf(1) / n))
        return float(C)


def run_sobolev(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    rows = sobolev_battery(p["trials"], cfg.seed, p["m"], p["dims"], workers=workers)
    write_battery_csv(rows, out.run_dir / "battery.csv")
    out.csv.append("battery.csv")
    consts = []
    for n, a in sorted({(3, 0.75)} | {(n, n / (n + 1)) for n in p["dims"]}):
        ref = sobolev_constant_reference(n, mpmath.mpf(n) / (n + 1) if a == n / (n + 1) else a)
        C = sobolev_C(n, a)
        consts.append({"n": n, "a": a, "C": C, "C_reference": ref, "rel_err": abs(C / ref - 1)})
    out.table("constants.csv", ("n", "a", "C", "C_reference", "rel_err"), consts)
    d = out.run_dir
    checks = [
        sourced(d, "violations", "battery.csv:passed:count_false", "==", 0.0),
        sourced(d, "admissible-pairs", "battery.csv:margin_volume:count_nonneg", ">=", float(len(rows))),
        sourced(d, "sobolev-constant", "constants.csv:rel_err:max", "<=", tol["C_rel_err"]),
    ]
    ratios = [r["slack"] / r["rhs"] for r in rows if r["rhs"] > 0]
    out.plot("slack.svg", _plotting().plot_histogram, ratios, "slack / rhs", title="Sobolev battery")
    return checks


# ---------------------------------------------------------------------------
# moser

def run_moser(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    flow = _flow_from(p)
    n = flow.n
    T0 = p["T0_fraction"] * flow.T
    pp = (n + 2) / 2 if p["p"] is None else p["p"]
    levels = p["levels"] or 60 * n
    sched = iteration_schedule(n, T0, 1.0)
    out.table("schedule.csv", ("k", "p", "tau", "R", "partial_sum_inv_p", "partial_sum_k_over_p"),
              [dict(row, partial_sum_inv_p=sched.partial_sum_inv_p(row["k"] + 1),
                    partial_sum_k_over_p=sched.partial_sum_k_over_p(row["k"] + 1))
               for row in sched.table(levels)])
    en = energy_inequality_exact(flow, pp, 0.0, T0)
    be = beta_check(flow, 0.0, T0)
    out.table("energy.csv", ("t", "lhs", "rhs", "margin", "beta_margin_rel"),
              [{"t": float(t), "lhs": float(a), "rhs": float(b), "margin": float(b - a),
                "beta_margin_rel": float(m / r)}
               for t, a, b, m, r in zip(en.t, en.lhs, en.rhs, be.margin, be.rhs)])
    L = lp_functional(flow, pp, 0.0, T0)
    ref = _exact_integral(flow, 2 * pp, 0.0, T0)
    sup = sup_bound_check(flow, T0)
    R_adm = admissible_radius(flow.amb, p["K_lower"])
    low = h2_lower_bound_monitor(flow, t_end=T0)
    summary = {
        "T": flow.T, "T0": T0, "p": pp, "levels": levels,
        "partial_sum_error": abs(sched.partial_sum_inv_p(levels) - 1.0),
        "lp_functional": L, "norm_integral": ref, "cross_rel_err": abs(L / ref - 1),
        "sup_lhs": sup.lhs, "sup_norm_term": sup.norm_term, "sup_ratio": sup.ratio,
        "sup_ratio_times_T0": sup.ratio * T0, "admissible_radius": R_adm,
        "lower_bound_min_margin": low.min_margin, "K1": low.K1,
    }
    out.table("summary.csv", tuple(summary), [summary])
    d = out.run_dir
    checks = [
        sourced(d, "partial-sums-reach-one", "summary.csv:partial_sum_error:first", "<=", tol["partial_sum_abs"]),
        sourced(d, "energy-margin", "energy.csv:margin:min", ">=", 0.0),
        sourced(d, "beta-margin", "energy.csv:beta_margin_rel:min", ">=", -1e-12),
        sourced(d, "lp-norm-cross-check", "summary.csv:cross_rel_err:first", "<=", tol["cross_rel_err"]),
        sourced(d, "admissible-radius", "summary.csv:admissible_radius:first", ">", 0.0),
    ]
    if flow.amb.K1 > 0:
        checks.append(sourced(d, "H2-lower-bound", "summary.csv:lower_bound_min_margin:first", ">", 0.0))
    pl = _plotting()
    k = np.arange(1, levels + 1)
    out.plot("partial_sums.svg", pl.plot_series, k,
             [("1 - partial sum", np.array([max(1 - sched.partial_sum_inv_p(int(i)), 1e-300) for i in k]))],
             "levels", "1 - sum 1/p_k", logy=True)
    out.plot("energy.svg", pl.plot_series, en.t, [("rhs - lhs", en.margin)], "t", "margin", logy=True)
    return checks


# ---------------------------------------------------------------------------
# rescale

def run_rescale(cfg: ExperimentConfig, out: Outputs, workers: int = 1) -> list[Check]:
    p, tol = cfg.parameters, cfg.tolerances
    flow = _flow_from(p)
    n = flow.n
    alpha = n + 1 if p["alpha"] is None else p["alpha"]
    tau = flow.T * 10.0 ** -(1 + p["depth"] * np.arange(p["count"]) / (p["count"] - 1))
    seq = blowup_sequence(flow, flow.T - tau)
    rows, norm_recs = [], []
    for i, pt in enumerate(seq):
        rec = normalization_check(flow, pt)
        if not rec:
            rows.append({"i": i, "t": pt.t, "Q": pt.Q, "needs_later_time": 1})
            continue
        norm_recs.append(rec)
        rows.append({"i": i, "t": pt.t, "Q": pt.Q, "needs_later_time": 0, "H2_at_one": rec.at_one,
                     "deviation": abs(rec.at_one - 1.0), "max_H2": rec.max_H2,
                     "excess": rec.max_H2 - 1.0, "min_curvature": rec.min_curvature,
                     "curvature_bound": rec.curvature_bound,
                     "curvature_margin": rec.min_curvature - rec.curvature_bound})
    out.table("sequence.csv", ("i", "t", "Q", "needs_later_time", "H2_at_one", "deviation", "max_H2",
                               "excess", "min_curvature", "curvature_bound", "curvature_margin"), rows)
    usable = [pt for pt, r in zip(seq, rows) if not r["needs_later_time"]]
    try:
        tails = norm_vanishing_check(flow, usable, alpha)
    except DivergentNormError:
        tails = None
    if tails is not None:
        out.table("tails.csv", ("t", "Q", "tail"),
                  [{"t": t, "Q": q, "tail": v} for t, q, v in zip(tails.t, tails.Q, tails.tails)])
    try:
        norm_vanishing_check(flow, usable, n + 2)
        refused = 0
    except DivergentNormError:
        refused = 1
    summary = {"alpha": float(alpha), "usable_points": len(usable),
               "tails_finite": int(tails is not None),
               "vanishing_ratio": tails.vanishing_ratio if tails else math.nan,
               "tails_decreasing": int(tails.decreasing) if tails else 0,
               "divergent_refused": refused}
    out.table("summary.csv", tuple(summary), [summary])
    d = out.run_dir
    checks = [
        sourced(d, "usable-points", "summary.csv:usable_points:first", ">=", 2.0),
        sourced(d, "H2-at-one", "sequence.csv:deviation:max", "<=", tol["normalization_abs"]),
        sourced(d, "H2-bounded-by-one", "sequence.csv:excess:max", "<=", tol["normalization_abs"]),
        sourced(d, "curvature-lower-bound", "sequence.csv:curvature_margin:min", ">=", 0.0),
        sourced(d, "divergent-exponent-refused", "summary.csv:divergent_refused:first", "==", 1.0),
    ]
    if alpha < n + 2:
        checks += [
            sourced(d, "tails-decreasing", "summary.csv:tails_decreasing:first", "==", 1.0),
            sourced(d, "tails-vanish", "summary.csv:vanishing_ratio:first", "<=", tol["vanishing_ratio"]),
        ]
    pl = _plotting()
    if norm_recs:
        out.plot("rescaled_H2.svg", pl.plot_series, norm_recs[0].s,
                 [(f"Q = {r.Q:.3g}", r.H2) for r in norm_recs], "s", "rescaled H^2")
    if tails is not None:
        out.plot("tails.svg", pl.plot_series, np.array(tails.Q), [("tail", np.array(tails.tails))],
                 "Q", "tail integral", logy=True)
    return checks


RUNNERS = {
    "exact": run_exact,
    "profile": run_profile_experiment,
    "sharpness": run_sharpness,
    "sobolev": run_sobolev,
    "moser": run_moser,
    "rescale": run_rescale,
}
