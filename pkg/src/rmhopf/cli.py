"""Run one diagnostic or simulation command from a JSON configuration.

    rmhopf CONFIG.json [--out PATH] [--format csv|json] [--seed N] [--threads N]

JSON output is ``{"meta": {...}, "result": {...}}``; ``meta`` carries the
fully resolved configuration, so feeding ``meta.resolved_config`` back in
reproduces the same result. CSV output writes the command's table, plus a
``PATH.meta.json`` sidecar with the metadata when written to a file.

Exit codes: 0 success, 2 configuration error, 3 domain error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closures import (
    ClosureKind,
    base_covariance,
    full_covariance,
    predation_covariance,
    predation_intensity,
)
from .config import ConfigValueError, RunConfig, SchemaError, parse_config, validate_config
from .ensemble import ensemble_run
from .errors import DomainError, ReplicateError
from .lna import (
    NOT_DEFINED,
    closure_w22_gap,
    psd_sweep,
    spectral_scale,
    ssf_pipeline,
)
from .model import (
    ModelParams,
    State2,
    classify_regime,
    equilibria,
    hopf_threshold,
    is_feasible,
    jacobian,
    jacobian_at_K3,
    require_coexistence,
)
from .output import dumps_csv, dumps_json
from .simulate import RNG_NAME, SimConfig

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN = 0, 2, 3


def _params(cfg: RunConfig) -> ModelParams:
    mb = cfg.model
    return ModelParams(m=mb.m, c=mb.c, k=mb.k, omega=mb.omega, e=mb.e)


def _sym(s) -> dict:
    return {"q11": s.q11, "q12": s.q12, "q22": s.q22}


def _state(cfg: RunConfig, params: ModelParams) -> State2:
    if cfg.state is not None:
        return State2(cfg.state.N, cfg.state.P)
    return require_coexistence(params)


def _kv_table(result: dict):
    rows = [(k, v) for k, v in result.items() if not isinstance(v, (dict, list))]
    return ["quantity", "value"], rows


# --- commands ----------------------------------------------------------------

def cmd_equilibria(cfg, params, threads):
    eqs = equilibria(params)
    result = {
        "coexistence_feasible": len(eqs) == 3,
        "equilibria": [{"kind": e.kind.value, "N": e.state.n, "P": e.state.p} for e in eqs],
    }
    return result, (["kind", "N", "P"], [(e.kind.value, e.state.n, e.state.p) for e in eqs])


def cmd_regime(cfg, params, threads):
    r = classify_regime(params)
    result = {"label": r.label.value, "k": params.k, "hopf_k": r.hopf_k, "margin": r.margin}
    return result, _kv_table(result)


def cmd_jacobian(cfg, params, threads):
    if cfg.state is None:
        x = require_coexistence(params)
        j = jacobian_at_K3(params)
        where = "K3"
    else:
        x = _state(cfg, params)
        j = jacobian(params, x)
        where = "state"
    ev = j.eigenvalues()
    result = {
        "at": where, "N": x.n, "P": x.p,
        "a11": j.a11, "a12": j.a12, "a21": j.a21, "a22": j.a22,
        "trace": j.trace, "det": j.det, "hurwitz": j.is_hurwitz,
        "eigenvalues": [{"re": z.real, "im": z.imag} for z in ev],
    }
    return result, _kv_table(result)


def cmd_covariance(cfg, params, threads):
    x = _state(cfg, params)
    closure = ClosureKind.from_name(cfg.closure)
    base = base_covariance(params, x)
    pred = predation_covariance(params, x, closure)
    full = full_covariance(params, x, closure)
    result = {
        "closure": closure.value, "N": x.n, "P": x.p,
        "f_pred": predation_intensity(params, x),
        "base": _sym(base), "predation": _sym(pred), "full": _sym(full),
    }
    rows = [(part, s.q11, s.q12, s.q22) for part, s in (("base", base), ("predation", pred), ("full", full))]
    return result, (["part", "q11", "q12", "q22"], rows)


def _not_defined(report) -> dict:
    return {
        "defined": False, "message": NOT_DEFINED,
        "regime": report.regime.label.value, "trace": report.jacobian.trace,
    }


def cmd_lyapunov(cfg, params, threads):
    rep = ssf_pipeline(params, cfg.closure, cfg.p, cfg.d_sep)
    if not rep.defined:
        result = _not_defined(rep)
        return result, _kv_table(result)
    w = rep.lyapunov.w
    result = {
        "defined": True, "closure": rep.closure.value,
        "w11": w.q11, "w12": w.q12, "w22": w.q22,
        "residual_norm": rep.lyapunov.residual_norm,
        "d_star": _sym(rep.d_star),
    }
    return result, _kv_table(result)


def _psd_grid(cfg, j) -> np.ndarray:
    g = cfg.psd_grid
    wmax = g.omega_max if g.omega_max is not None else 4.0 * spectral_scale(j)
    if wmax <= g.omega_min:
        raise ConfigValueError("/psd_grid/omega_max", "must exceed omega_min")
    return np.linspace(g.omega_min, wmax, g.n)


def cmd_psd(cfg, params, threads):
    rep = ssf_pipeline(params, cfg.closure, cfg.p, cfg.d_sep)
    header = ["omega", "S_NN", "S_PP", "Re_S_NP", "Im_S_NP"]
    if not rep.defined:
        return _not_defined(rep), (header, [])
    grid = _psd_grid(cfg, rep.jacobian)
    sw = psd_sweep(rep.jacobian, rep.d_star, grid, workers=threads)
    rows = [(w, snn, spp, snp.real, snp.imag)
            for w, snn, spp, snp in zip(sw.omegas, sw.s_nn, sw.s_pp, sw.s_np)]
    result = {
        "defined": True, "closure": rep.closure.value,
        "peak_nn": {"omega": sw.peak_nn.omega, "height": sw.peak_nn.height},
        "peak_pp": {"omega": sw.peak_pp.omega, "height": sw.peak_pp.height},
        "table": {"columns": header, "rows": [list(r) for r in rows]},
    }
    return result, (header, rows)


def _ellipse_dict(rep) -> dict:
    g = rep.ellipse
    return {
        "lambda_plus": g.lambda_plus, "lambda_minus": g.lambda_minus,
        "ell_plus": g.ell_plus, "ell_minus": g.ell_minus, "theta": g.theta, "p": g.p,
    }


def cmd_ellipse(cfg, params, threads):
    rep = ssf_pipeline(params, cfg.closure, cfg.p, cfg.d_sep)
    if not rep.defined:
        result = _not_defined(rep)
        return result, _kv_table(result)
    result = {"defined": True, "closure": rep.closure.value, **_ellipse_dict(rep)}
    return result, _kv_table(result)


def cmd_precursor(cfg, params, threads):
    rep = ssf_pipeline(params, cfg.closure, cfg.p, cfg.d_sep)
    if not rep.defined:
        result = _not_defined(rep)
        return result, _kv_table(result)
    pr = rep.precursor
    result = {
        "defined": True, "closure": rep.closure.value,
        "pi_p": pr.pi_p, "d_sep": pr.d_sep, "d_sep_source": pr.d_sep_source.value,
        "ell_plus": rep.ellipse.ell_plus, "p": rep.ellipse.p,
        "regime": rep.regime.label.value,
    }
    return result, _kv_table(result)


def _sim_config(cfg: RunConfig, params: ModelParams) -> SimConfig:
    s = cfg.simulation
    init = None if s.initial_state is None else State2(s.initial_state.N, s.initial_state.P)
    return SimConfig(
        params=params, closure=cfg.closure, scheme=s.scheme, viewpoint=s.viewpoint,
        t_end=s.t_end, dt=s.dt, burn_in=s.burn_in, sample_stride=s.sample_stride,
        seed=s.seed, n_replicates=s.n_replicates, initial_state=init,
    )


def cmd_simulate(cfg, params, threads):
    sim = _sim_config(cfg, params)
    res = ensemble_run(sim, threads=threads, psd_segment_length=cfg.simulation.psd_segment_length,
                       psd_overlap=cfg.simulation.psd_overlap)
    result = {"scheme": sim.scheme.value, "closure": sim.closure.value,
              "viewpoint": sim.viewpoint.value, "rng": RNG_NAME}
    if res.stats is not None:
        st = res.stats
        se = st.standard_errors()
        result["stats"] = {
            "sample_mean": st.sample_mean, "sample_cov": _sym(st.sample_cov),
            "standard_errors": None if se is None else _sym(se),
            "n_samples": st.n_samples, "survival_fraction": st.survival_fraction,
            "mean_absorption_time": st.mean_absorption_time,
        }
    else:
        result["stats"] = None
    ex = res.extinction
    result["extinction"] = {
        "survival_fraction": ex.survival_fraction,
        "mean_absorption_time": ex.mean_absorption_time,
        "median_absorption_time": ex.median_absorption_time,
        "boundary_counts": ex.boundary_counts,
    }
    result["clamp_count"] = res.clamp_count
    result["n_events"] = res.n_events
    result["replicates"] = [
        {
            "replicate": i, "n_samples": len(tr), "clamp_count": tr.clamp_count,
            "n_events": tr.n_events,
            "absorbed_at": None if tr.absorbed_at is None else
            {"time": tr.absorbed_at.time, "boundary": tr.absorbed_at.boundary.value},
        }
        for i, tr in enumerate(res.trajectories)
    ]
    if res.psd is not None:
        result["psd"] = {
            "segment_count": res.psd.segment_count, "omega": res.psd.omega_grid,
            "S_NN": res.psd.s_nn, "S_PP": res.psd.s_pp,
            "Re_S_NP": res.psd.s_np.real, "Im_S_NP": res.psd.s_np.imag,
        }
    rep = ssf_pipeline(params, sim.closure) if is_feasible(params) else None
    if rep is not None and rep.defined:
        result["lna_reference"] = _sym(rep.lyapunov.w)

    coords = ("y_N", "y_P") if sim.scheme.value == "ou" else ("N", "P")
    if sim.n_replicates == 1:
        tr = res.trajectories[0]
        table = (["t", *coords], [(t, a, b) for t, (a, b) in zip(tr.times, tr.states)])
    else:
        rows = [(i, t, a, b) for i, tr in enumerate(res.trajectories)
                for t, (a, b) in zip(tr.times, tr.states)]
        table = (["replicate", "t", *coords], rows)
    return result, table


def _pipeline_quantities(rep, grid) -> dict:
    q = {"q11": rep.d_star.q11, "q12": rep.d_star.q12, "q22": rep.d_star.q22}
    if not rep.defined:
        return q
    w = rep.lyapunov.w
    sw = psd_sweep(rep.jacobian, rep.d_star, grid)
    q.update({
        "w11": w.q11, "w12": w.q12, "w22": w.q22,
        **_ellipse_dict(rep),
        "pi_p": rep.precursor.pi_p,
        "peak_nn_omega": sw.peak_nn.omega, "peak_nn_height": sw.peak_nn.height,
        "peak_pp_omega": sw.peak_pp.omega, "peak_pp_height": sw.peak_pp.height,
    })
    q.pop("p")
    return q


def cmd_compare_closures(cfg, params, threads):
    a, b = (ClosureKind.from_name(n) for n in cfg.compare.closures)
    rep_a = ssf_pipeline(params, a, cfg.p, cfg.d_sep)
    rep_b = ssf_pipeline(params, b, cfg.p, cfg.d_sep)
    grid = _psd_grid(cfg, rep_a.jacobian) if rep_a.defined else None
    qa = _pipeline_quantities(rep_a, grid)
    qb = _pipeline_quantities(rep_b, grid)
    rows = [(name, qa[name], qb[name], qb[name] - qa[name]) for name in qa]
    result = {
        "closures": [a.value, b.value],
        "defined": rep_a.defined,
        "rows": [{"quantity": r[0], a.value: r[1], b.value: r[2], "delta": r[3]} for r in rows],
        "delta": {r[0]: r[3] for r in rows},
    }
    if not rep_a.defined:
        result["message"] = NOT_DEFINED
    if {a, b} == {ClosureKind.BERNOULLI_COUPLED, ClosureKind.SPLIT_DIAGONAL} and rep_a.defined:
        result["analytic_w22_gap"] = closure_w22_gap(params)
    return result, (["quantity", a.value, b.value, "delta"], rows)


SWEEP_COLUMNS = [
    "k", "status", "trace", "w11", "w12", "w22", "peak_nn_omega", "peak_nn_height",
    "ell_plus", "ell_minus", "theta", "pi_p",
]


def _k_values(cfg, params) -> list[float]:
    g = cfg.k_grid
    if g.values is not None:
        return list(g.values)
    m, c = params.m, params.c
    if m <= c:
        raise DomainError("sweep-k needs m > c")
    lo = g.k_min if g.k_min is not None else 1.05 * c / (m - c)
    hi = g.k_max if g.k_max is not None else 0.99 * hopf_threshold(params)
    if g.n == 1:
        return [lo]
    if hi <= lo:
        raise ConfigValueError("/k_grid/k_max", "must exceed k_min")
    return [float(v) for v in np.linspace(lo, hi, g.n)]


def cmd_sweep_k(cfg, params, threads):
    rows = []
    for k in _k_values(cfg, params):
        p_k = params.replace(k=k)
        if not is_feasible(p_k):
            rows.append([k, "infeasible"] + [None] * (len(SWEEP_COLUMNS) - 2))
            continue
        rep = ssf_pipeline(p_k, cfg.closure, cfg.p, cfg.d_sep)
        if not rep.defined:
            rows.append([k, NOT_DEFINED, rep.jacobian.trace] + [None] * (len(SWEEP_COLUMNS) - 3))
            continue
        sw = psd_sweep(rep.jacobian, rep.d_star, _psd_grid(cfg, rep.jacobian))
        w, g = rep.lyapunov.w, rep.ellipse
        rows.append([k, "ok", rep.jacobian.trace, w.q11, w.q12, w.q22,
                     sw.peak_nn.omega, sw.peak_nn.height, g.ell_plus, g.ell_minus, g.theta,
                     rep.precursor.pi_p])
    result = {
        "closure": cfg.closure,
        "hopf_k": classify_regime(params).hopf_k,
        "columns": SWEEP_COLUMNS,
        "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows],
    }
    return result, (SWEEP_COLUMNS, rows)


COMMANDS = {
    "equilibria": cmd_equilibria,
    "regime": cmd_regime,
    "jacobian": cmd_jacobian,
    "covariance": cmd_covariance,
    "lyapunov": cmd_lyapunov,
    "psd": cmd_psd,
    "ellipse": cmd_ellipse,
    "precursor": cmd_precursor,
    "simulate": cmd_simulate,
    "compare-closures": cmd_compare_closures,
    "sweep-k": cmd_sweep_k,
}


def execute(cfg: RunConfig, threads: int = 1) -> tuple[dict, tuple]:
    """Run one command; returns the JSON document and the CSV table."""
    params = _params(cfg)
    result, table = COMMANDS[cfg.command](cfg, params, threads)
    meta = {
        "resolved_config": cfg.resolved(),
        "seed": cfg.simulation.seed,
        "version": __version__,
        "rng_name": RNG_NAME,
    }
    return {"meta": meta, "result": result}, table


def render(cfg: RunConfig, threads: int = 1) -> tuple[str, str | None]:
    """Output text and, for CSV, the metadata sidecar text."""
    doc, (header, rows) = execute(cfg, threads)
    if cfg.output.format == "csv":
        return dumps_csv(header, rows), dumps_json({"meta": doc["meta"]})
    return dumps_json(doc), None


def apply_overrides(cfg: RunConfig, out=None, fmt=None, seed=None) -> RunConfig:
    data = cfg.resolved()
    if out is not None:
        data["output"]["path"] = out
    if fmt is not None:
        data["output"]["format"] = fmt
    if seed is not None:
        data["simulation"]["seed"] = seed
    return validate_config(data)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmhopf", description=__doc__.split("\n\n")[0])
    ap.add_argument("config", help="JSON run configuration")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads for replicates and spectral grids; does not change results")
    ap.add_argument("--version", action="version", version=f"rmhopf {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_bytes())
        cfg = apply_overrides(cfg, args.out, args.format, args.seed)
    except (SchemaError, ConfigValueError) as exc:
        print(f"rmhopf: config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rmhopf: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text, sidecar = render(cfg, max(1, args.threads))
    except (SchemaError, ConfigValueError) as exc:
        print(f"rmhopf: config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplicateError as exc:
        print(f"rmhopf: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except DomainError as exc:
        print(f"rmhopf: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    path = cfg.output.path
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
        if sidecar is not None:
            Path(path + ".meta.json").write_text(sidecar, encoding="utf-8", newline="\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
