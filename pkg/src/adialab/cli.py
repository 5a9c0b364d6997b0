"""Batch driver: declarative experiment configs to CSV/JSON/PNG artifacts.

Usage: ``adialab run CONFIG.json [--out DIR] [--seed N] [--jobs K]``.

A config names one experiment kind, a model block and a numeric block; the
driver dispatches to the library, writes delimited series with rendered
figures, and always leaves a run manifest behind, also on failure.  Exit
codes: 0 success, 2 invalid config, 3 numerical failure, 4 invariant
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .eigenpath import FixedPointConfig, continue_path, count_solutions, detect_fold
from .errors import AdialabError, ConfigInvalid, InvariantFailure
from .linearized import build_f, search_nonreal_instance, spectrum_f
from .models import make_frame, model_from_config
from .propagation import IntegratorConfig, adiabatic_error, propagate
from .report import emit_plot_data, render_figure, write_csv, write_json
from .transport import (
    build_transport_bundle,
    compare_adiabatic,
    fit_order,
    source_integral_check,
)

KINDS = ("simulate", "eigenpath", "spectrum", "transport", "sweep",
         "bifurcate", "discriminant", "anharmonic-gaps")

_CLAIMS = {
    "simulate": "the flow preserves the state norm and its energy stays bounded",
    "eigenpath": "a unit self-consistent eigenvector branch exists with vanishing "
                 "tangent phase",
    "spectrum": "the doubled linearization has real, symmetric, semisimple spectrum "
                "with a two-dimensional kernel",
    "transport": "the evolution generated by the doubled operator stays within "
                 "O(eps) of the transported dynamical phase, uniformly bounded",
    "sweep": "the flow follows the phase-dressed eigenvector branch up to O(eps)",
    "bifurcate": "the eigenvector branch folds at an interior time where the "
                 "solution count jumps from one to three",
    "discriminant": "a negative discriminant instance produces complex "
                    "eigenvalue quadruples of the doubled operator",
    "anharmonic-gaps": "the truncated oscillator spectrum has gaps growing as a "
                       "power above one half",
}


class RunManifest:
    """Collects diagnostics and invariant verdicts during a run."""

    def __init__(self, config, out_dir):
        self.config = config
        self.out_dir = out_dir
        self.t0 = time.time()
        self.invariants = {}
        self.diagnostics = {}
        self.files = []
        self.status = "running"
        self.failure = None

    def check(self, name: str, ok: bool, detail=None):
        self.invariants[name] = {"passed": bool(ok)}
        if detail is not None:
            self.invariants[name]["value"] = detail
        if not ok:
            raise InvariantFailure(f"invariant failed: {name} ({detail})")

    def note(self, name: str, value):
        self.diagnostics[name] = value

    def write(self):
        payload = {
            "tool_version": __version__,
            "config": self.config,
            "claim": _CLAIMS.get(self.config.get("kind", ""), ""),
            "wall_time_s": time.time() - self.t0,
            "invariants": self.invariants,
            "diagnostics": self.diagnostics,
            "files": self.files,
            "status": self.status,
            "failure": self.failure,
        }
        write_json(os.path.join(self.out_dir, "manifest.json"), payload)


def _require(cond, message):
    if not cond:
        raise ConfigInvalid(message)


def _numeric(config) -> dict:
    return dict(config.get("numeric", {}))


def _eps_list(num) -> list:
    eps = num.get("epsilon_list")
    _require(eps is not None, "numeric.epsilon_list is required")
    eps = [float(e) for e in eps]
    _require(all(b < a for a, b in zip(eps, eps[1:])),
             "epsilon_list must be strictly decreasing")
    return eps


def _t_range(num, default=(0.0, 1.0)):
    tr = num.get("t_range", list(default))
    _require(isinstance(tr, (list, tuple)) and len(tr) == 2 and tr[0] != tr[1],
             "numeric.t_range must be two distinct times")
    return float(tr[0]), float(tr[1])


def _model(config):
    block = config.get("model")
    _require(isinstance(block, dict) and "name" in block,
             "config needs a model block with a name")
    return model_from_config(block)


def _state(config, model, t0, path_step=None):
    """Initial state: explicit, or the tracked branch vector at t0."""
    raw = config.get("v0")
    if raw is not None:
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 2:                      # [[re, im], ...]
            return arr[:, 0] + 1j * arr[:, 1]
        return arr.astype(complex)
    from .eigenpath import solve_fixed_point

    frame = make_frame(model, model.point(t0, np.full(model.p, 0.5)))
    return solve_fixed_point(model, frame, t0, frame.anchor_vector)


def _emit_states(manifest, name, result, render):
    cols = {"t": result.times}
    n = result.states.shape[1]
    for i in range(n):
        cols[f"re_v{i + 1}"] = result.states[:, i].real
        cols[f"im_v{i + 1}"] = result.states[:, i].imag
    cols["norm_drift"] = result.norm_drift
    cols["energy"] = result.energy
    path = os.path.join(manifest.out_dir, name)
    manifest.files += emit_plot_data(
        cols, path, {"xlabel": "t", "ylabel": "state components / diagnostics",
                     "epsilon": result.epsilon}, render=render)


def _run_simulate(config, manifest, rng, jobs, render):
    num = _numeric(config)
    _require("epsilon" in num, "kind=simulate requires numeric.epsilon")
    model = _model(config)
    t_range = _t_range(num)
    cfg = IntegratorConfig(epsilon=float(num["epsilon"]),
                           dt_factor=float(num.get("dt_factor", 40)))
    v0 = _state(config, model, t_range[0])
    result = propagate(model, v0, t_range, cfg)
    manifest.note("steps", len(result) - 1)
    _emit_states(manifest, "propagation.csv", result, render)
    manifest.check("norm_drift<=1e-8", float(result.norm_drift.max()) <= 1e-8,
                   float(result.norm_drift.max()))


def _run_eigenpath(config, manifest, rng, jobs, render):
    num = _numeric(config)
    model = _model(config)
    t_range = _t_range(num)
    cfg = FixedPointConfig(continuation_step=float(num.get("path_step", 1e-2)))
    frame = make_frame(model, model.point(t_range[0], np.full(model.p, 0.5)))
    path = continue_path(model, frame, t_range, frame.anchor_vector, cfg)
    cols = {"t": path.times}
    for i in range(path.omegas.shape[1]):
        cols[f"re_w{i + 1}"] = path.omegas[:, i].real
        cols[f"im_w{i + 1}"] = path.omegas[:, i].imag
    cols["lambda"] = path.lambdas
    cols["phase"] = path.phase
    cols["residual"] = path.residual
    cols["phase_defect"] = path.phase_defect
    manifest.files += emit_plot_data(
        cols, os.path.join(manifest.out_dir, "eigenpath.csv"),
        {"xlabel": "t", "ylabel": "branch data"}, render=render)
    manifest.check("eigen_residual<=1e-8", float(path.residual.max()) <= 1e-8,
                   float(path.residual.max()))
    norms = np.linalg.norm(path.omegas, axis=1)
    manifest.check("unit_norm<=1e-10", float(np.max(np.abs(norms - 1))) <= 1e-10,
                   float(np.max(np.abs(norms - 1))))


def _run_spectrum(config, manifest, rng, jobs, render):
    num = _numeric(config)
    model = _model(config)
    t_range = _t_range(num)
    cfg = FixedPointConfig(continuation_step=float(num.get("path_step", 1e-2)))
    frame = make_frame(model, model.point(t_range[0], np.full(model.p, 0.5)))
    path = continue_path(model, frame, t_range, frame.anchor_vector, cfg)
    rows = []
    worst_nil = 0.0
    max_im = 0.0
    for k in range(len(path)):
        spec = spectrum_f(build_f(model, path, k))
        for ci, cluster in enumerate(spec.clusters):
            worst_nil = max(worst_nil, cluster.nilpotent_norm)
            for idx in cluster.indices:
                ell = spec.eigenvalues[idx]
                max_im = max(max_im, abs(ell.imag))
                rows.append((path.times[k], ell.real, ell.imag,
                             spec.conditions[idx], cluster.nilpotent_norm, ci))
    out = os.path.join(manifest.out_dir, "spectrum.csv")
    write_csv(out, ["t", "re_ell", "im_ell", "condition", "nilpotent_norm",
                    "cluster"], rows)
    manifest.files.append(out)
    manifest.note("max_im", max_im)
    manifest.check("nilpotent<=1e-8", worst_nil <= 1e-8, worst_nil)
    manifest.check("spectrum_real<=1e-8", max_im <= 1e-8, max_im)
    if render:
        arr = np.asarray(rows, dtype=float)
        manifest.files.append(render_figure(
            {"t": arr[:, 0], "re_ell": arr[:, 1]},
            os.path.join(manifest.out_dir, "spectrum.png"),
            {"xlabel": "t", "ylabel": "Re ell_j", "legend": False}))


def _run_sweep(config, manifest, rng, jobs, render):
    num = _numeric(config)
    model = _model(config)
    t_range = _t_range(num)
    eps_list = _eps_list(num)
    dt_factor = float(num.get("dt_factor", 40))
    cfg = FixedPointConfig(continuation_step=float(num.get("path_step", 5e-3)))
    frame = make_frame(model, model.point(t_range[0], np.full(model.p, 0.5)))
    path = continue_path(model, frame, t_range, frame.anchor_vector, cfg)

    def one(eps):
        return adiabatic_error(model, path, IntegratorConfig(epsilon=eps,
                                                             dt_factor=dt_factor))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(one, eps_list))
    else:
        outs = [one(e) for e in eps_list]
    sups = [o["sup"] for o in outs]
    early = [o["early_time_ratio"] for o in outs]
    slope = fit_order(eps_list, sups) if min(sups) > 0 else float("nan")
    manifest.note("fitted_slope", slope)
    manifest.files += emit_plot_data(
        {"epsilon": np.asarray(eps_list), "sup_error": np.asarray(sups),
         "early_time_ratio": np.asarray(early)},
        os.path.join(manifest.out_dir, "adiabatic_error.csv"),
        {"scale": "log-log", "xlabel": "epsilon", "ylabel": "sup_t error",
         "fitted_slope": slope}, render=render)
    for eps, out in zip(eps_list, outs):
        name = f"error_series_eps{eps:g}.csv"
        manifest.files += emit_plot_data(
            {"t": out["times"], "error": out["error"]},
            os.path.join(manifest.out_dir, name),
            {"xlabel": "t", "ylabel": "adiabatic error", "epsilon": eps},
            render=render)


def _run_transport(config, manifest, rng, jobs, render):
    num = _numeric(config)
    model = _model(config)
    t_range = _t_range(num)
    eps_list = _eps_list(num)
    # node spacing h such that the true-evolution step 2h resolves the
    # fastest phase: 2h <= eps_min / 40
    n_nodes = int(num.get("n_nodes",
                          2 * int(np.ceil(abs(t_range[1] - t_range[0])
                                          / (min(eps_list) / 40.0))) + 1))
    frame = make_frame(model, model.point(t_range[0], np.full(model.p, 0.5)))
    bundle = build_transport_bundle(model, frame, t_range, n_nodes)
    manifest.note("intertwining_residual", bundle.intertwining_residual)
    comps, slope, spread = compare_adiabatic(bundle, eps_list)
    sups, source_slope = source_integral_check(bundle, eps_list)
    for comp in comps:
        name = f"defect_eps{comp.epsilon:g}.csv"
        manifest.files += emit_plot_data(
            {"t": comp.times, "defect": comp.defect},
            os.path.join(manifest.out_dir, name),
            {"xlabel": "t", "ylabel": "||T - V||", "epsilon": comp.epsilon},
            render=render)
    summary = {
        "epsilon_list": eps_list,
        "sup_defect": [c.sup_defect for c in comps],
        "uniform_bound": [c.uniform_bound for c in comps],
        "defect_slope": slope,
        "uniform_bound_spread": spread,
        "source_integral_sup": sups,
        "source_integral_slope": source_slope,
    }
    out = os.path.join(manifest.out_dir, "transport_summary.json")
    write_json(out, summary)
    manifest.files.append(out)
    manifest.check("defect_slope~1", abs(slope - 1.0) <= 0.2, slope)
    manifest.check("uniform_bound_spread<=0.1", spread <= 0.1, spread)


def _run_bifurcate(config, manifest, rng, jobs, render):
    num = _numeric(config)
    model = _model(config)
    t_range = _t_range(num, default=(0.05, 1.0))
    tau = detect_fold(model, t_range, grid_size=int(num.get("grid_size", 200001)))
    counts = []
    for t in np.linspace(t_range[0], t_range[1], int(num.get("count_samples", 40))):
        counts.append((float(t), count_solutions(model, float(t))[0]))
    out = os.path.join(manifest.out_dir, "tau.json")
    write_json(out, {"tau": tau, "counts": counts})
    manifest.files.append(out)
    write_csv(os.path.join(manifest.out_dir, "solution_counts.csv"),
              ["t", "count"], counts)
    manifest.files.append(os.path.join(manifest.out_dir, "solution_counts.csv"))
    manifest.check("tau_interior", t_range[0] < tau < t_range[1], tau)
    c_lo = count_solutions(model, tau - 1e-3)[0]
    c_hi = count_solutions(model, tau + 1e-3)[0]
    manifest.note("count_below", c_lo)
    manifest.note("count_above", c_hi)
    manifest.check("count_transition", c_lo != c_hi, (c_lo, c_hi))


def _run_discriminant(config, manifest, rng, jobs, render):
    num = _numeric(config)
    seed = int(config.get("_seed", 0))
    found = search_nonreal_instance(
        dim=int(num.get("dim", 5)), seed=seed,
        max_draws=int(num.get("max_draws", 100000)),
        threshold=float(num.get("threshold", -0.1)),
        lam_ratio=float(num.get("lambda_ratio", 50.0)))
    manifest.check("instance_found", found is not None, None)
    spec = spectrum_f(found["operator"])
    max_im = float(np.max(np.abs(spec.eigenvalues.imag)))
    payload = {
        "draws": found["draws"],
        "discriminant": found["discriminant"],
        "omega": found["omega"],
        "u1": found["u1"],
        "u2": found["u2"],
        "eigenvalues": [[z.real, z.imag] for z in spec.eigenvalues],
        "max_imag": max_im,
    }
    out = os.path.join(manifest.out_dir, "discriminant.json")
    write_json(out, payload)
    manifest.files.append(out)
    manifest.check("nonreal_pair", max_im > 1e-3, max_im)


def _run_anharmonic_gaps(config, manifest, rng, jobs, render):
    num = _numeric(config)
    block = dict(config.get("model") or {"name": "truncated_anharmonic"})
    block.setdefault("name", "truncated_anharmonic")
    model = model_from_config(block)
    _require(model.name == "truncated_anharmonic",
             "anharmonic-gaps needs the truncated_anharmonic model")
    n_gaps = int(num.get("n_gaps", 20))
    ev = model.extras["h0_eigenvalues"]
    gaps = np.diff(ev[: n_gaps + 1])
    j = np.arange(1, n_gaps + 1, dtype=float)
    a = np.vstack([np.ones_like(j), np.log(j)]).T
    coef, *_ = np.linalg.lstsq(a, np.log(gaps), rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((np.log(gaps) - pred) ** 2))
    ss_tot = float(np.sum((np.log(gaps) - np.log(gaps).mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    alpha = float(coef[1])
    c0 = float(np.exp(coef[0]))
    manifest.note("truncation_shift", model.extras["truncation_shift"])
    manifest.files += emit_plot_data(
        {"j": j, "gap": gaps, "fit": np.exp(pred)},
        os.path.join(manifest.out_dir, "gaps.csv"),
        {"scale": "log-log", "xlabel": "level index", "ylabel": "gap",
         "alpha": alpha, "c0": c0, "r_squared": r2}, render=render)
    manifest.check("alpha>0.5", alpha > 0.5, alpha)
    manifest.check("r_squared>0.99", r2 > 0.99, r2)


_RUNNERS = {
    "simulate": _run_simulate,
    "eigenpath": _run_eigenpath,
    "spectrum": _run_spectrum,
    "transport": _run_transport,
    "sweep": _run_sweep,
    "bifurcate": _run_bifurcate,
    "discriminant": _run_discriminant,
    "anharmonic-gaps": _run_anharmonic_gaps,
}


def run(config: dict, out_dir: str, seed: int = 0, jobs: int = 1) -> RunManifest:
    """Validate and execute one experiment config; always writes a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(config, out_dir)
    try:
        kind = config.get("kind")
        _require(kind in KINDS, f"kind must be one of {KINDS}, got {kind!r}")
        config["_seed"] = seed
        render = bool(config.get("output", {}).get("figures", True))
        rng = np.random.default_rng(seed)
        _RUNNERS[kind](config, manifest, rng, jobs, render)
        manifest.status = "ok"
    except BaseException as exc:
        manifest.status = "failed"
        manifest.failure = {"stage": type(exc).__name__, "message": str(exc)}
        manifest.write()
        raise
    manifest.write()
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adialab",
        description="slow-driving nonlinear evolution laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute an experiment config")
    runp.add_argument("config", help="path to a JSON experiment config")
    runp.add_argument("--out", default=None, help="output directory override")
    runp.add_argument("--seed", type=int, default=0)
    runp.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or config.get("output", {}).get("directory", ".")
    try:
        manifest = run(config, out_dir, seed=args.seed, jobs=max(1, args.jobs))
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 4
    except (AdialabError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for name in manifest.files:
        print(f"wrote {name}")
    print(f"ok: {len(manifest.invariants)} invariants passed "
          f"({time.time() - manifest.t0:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
