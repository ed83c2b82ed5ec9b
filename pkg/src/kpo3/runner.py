"""Execute a validated :class:`~kpo3.config.RunConfig` and write its output directory."""
import os
import subprocess
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, experiments as ex, fock, tables
from .config import TWO_PI, parse_quantity
from .dynamics import evolve_lindblad, evolve_unitary, steady_state
from .errors import ConfigError
from .spectrum import diagonalize, quasienergy_curves
from .tomography import wigner

OUTPUT_ENV = "KPO3_OUTPUT_ROOT"

# experiment option -> (kind of quantity, default); None default means required
OPTIONS = {
    "chevron": {"detuning_start": ("frequency", "-12 MHz"), "detuning_stop": ("frequency", "-2 MHz"),
                "detuning_points": ("int", 201), "duration_stop": ("time", "10 us"),
                "duration_points": ("int", 201)},
    "prepare": {},
    "breathing": {"hold_stop": ("time", "4 us"), "hold_step": ("time", "20 ns"),
                  "t1eff_ratio": ("none", ex.T1EFF_RATIO), "parity_window": ("time", ex.PARITY_WINDOW)},
    "steady_scan": {"delta_over_k_start": ("none", 0.0), "delta_over_k_stop": ("none", 1.2),
                    "delta_over_k_points": ("int", 13), "eta": ("none", -0.04),
                    "t1eff_ratio": ("none", ex.T1EFF_RATIO), "parity_window": ("time", ex.PARITY_WINDOW)},
    "relaxation": {"hold_stop": ("time", "4 us"), "hold_points": ("int", 81),
                   "start": ("choice", "prepared", ("prepared", "ideal"))},
    "spectrum": {"delta_over_k_start": ("none", None), "delta_over_k_stop": ("none", None),
                 "delta_over_k_points": ("int", 1)},
    "wigner": {"extent": ("none", 3.0), "points": ("int", 61),
               "state": ("choice", "prepared", ("prepared", "qutrit0", "steady"))},
}


def check_options(cfg):
    """Parse ``cfg.options`` in place against the option table of its experiment."""
    table = OPTIONS[cfg.experiment]
    raw = dict(cfg.options)
    extra = sorted(set(raw) - set(table))
    if extra:
        raise ConfigError(f"[experiment] unknown keys for '{cfg.experiment}': {', '.join(extra)}")
    parsed = {}
    for key, spec in table.items():
        kind, default = spec[0], spec[1]
        val = raw.get(key, default)
        where = f"[experiment].{key}"
        if val is None:
            parsed[key] = None
        elif kind == "int":
            if not isinstance(val, int) or isinstance(val, bool) or val < 1:
                raise ConfigError(f"{where} must be a positive integer")
            parsed[key] = val
        elif kind == "choice":
            if val not in spec[2]:
                raise ConfigError(f"{where} must be one of {', '.join(spec[2])}")
            parsed[key] = val
        else:
            parsed[key] = parse_quantity(val, kind, where)
    if cfg.experiment == "spectrum":
        start = parsed["delta_over_k_start"]
        if start is None:
            start = cfg.model.delta_over_k
        stop = parsed["delta_over_k_stop"]
        parsed["delta_over_k_start"] = start
        parsed["delta_over_k_stop"] = start if stop is None else stop
    if cfg.experiment in ("breathing", "relaxation") and cfg.pump.tau_ramp <= 0 \
            and (cfg.experiment == "breathing" or parsed["start"] == "prepared"):
        raise ConfigError(f"[pump].tau_ramp must be positive for '{cfg.experiment}'")
    if cfg.experiment == "chevron" and parsed["detuning_points"] < 1:
        raise ConfigError("[experiment].detuning_points must be >= 1")
    cfg.options = parsed


def git_describe():
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def output_dir(root, name):
    """Fresh directory ``root/name``; on collision ``name-1``, ``name-2``, ..."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    k = 0
    while True:
        cand = root / (name if k == 0 else f"{name}-{k}")
        try:
            cand.mkdir()
            return cand
        except FileExistsError:
            k += 1


def _params_meta(cfg):
    p = cfg.model
    meta = {"delta_hz": p.delta / TWO_PI, "kerr_hz": p.kerr / TWO_PI, "pump_hz": p.pump / TWO_PI,
            "delta_over_k": p.delta_over_k, "pump_over_k": p.pump_over_k, "eta": p.eta,
            "dim": cfg.numerics.dim}
    if cfg.pump is not None:
        meta.update({f"pump.{k}": v for k, v in asdict(cfg.pump).items()})
    if cfg.dissipation is not None:
        meta.update({f"dissipation.{k}": v for k, v in asdict(cfg.dissipation).items()})
    return meta


def _meta_text(cfg, extra):
    lines = [f"code: kpo3 {__version__} ({git_describe()})",
             f"experiment: {cfg.experiment}",
             f"dim: {cfg.numerics.dim}",
             f"rtol: {cfg.numerics.rtol}", f"atol: {cfg.numerics.atol}",
             f"dt_max: {cfg.numerics.dt_max}", f"seed: {cfg.seed}"]
    for k, v in _params_meta(cfg).items():
        lines.append(f"{k}: {v}")
    if cfg.derived is not None:
        for k, v in asdict(cfg.derived).items():
            lines.append(f"derived.{k}: {float(v)!r}")
    for k, v in extra.items():
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def _snapshot(source):
    # re-emit the parsed document; values are echoed as written
    lines = []
    for sec, body in source.items():
        if isinstance(body, dict):
            lines.append(f"[{sec}]")
            lines += [f"{k} = {_toml_value(v)}" for k, v in body.items()]
            lines.append("")
        else:
            lines.insert(0, f"{sec} = {_toml_value(body)}")
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(v)


def _prepared_state(cfg):
    dim = cfg.numerics.dim
    psi0 = fock.basis(dim, 0)
    times = [0.0, cfg.pump.duration] if cfg.pump.duration > 0 else [0.0]
    if cfg.dissipation is None:
        return evolve_unitary(cfg.model, cfg.pump, psi0, times=times, dt_max=cfg.numerics.dt_max,
                              rtol=cfg.numerics.rtol, atol=cfg.numerics.atol).states[-1]
    return evolve_lindblad(cfg.model, cfg.pump, cfg.dissipation, psi0, times=times,
                           dt_max=cfg.numerics.dt_max, rtol=cfg.numerics.rtol,
                           atol=cfg.numerics.atol).states[-1]


def _run_chevron(cfg, out, workers):
    o = cfg.options
    det = np.linspace(o["detuning_start"], o["detuning_stop"], o["detuning_points"])
    dur = np.linspace(0.0, o["duration_stop"], o["duration_points"])
    params = cfg.model if cfg.pump.p_peak is None else cfg.model.with_(pump=cfg.pump.p_peak)
    grid = ex.rabi_chevron(params, det, dur, cfg.numerics.dim, workers)
    meta = _params_meta(cfg)
    meta["delta_rad_s"] = " ".join(repr(float(d)) for d in grid.deltas)
    tables.write_text(out / "grid.tsv", tables.format_grid(
        grid.p0, ("pump_detuning_hz", det), ("duration_s", dur), meta))
    return {"p0_min": float(grid.p0.min())}


def _run_prepare(cfg, out, workers):
    state = _prepared_state(cfg)
    res = diagonalize(cfg.model if cfg.pump.p_peak is None else cfg.model.with_(pump=cfg.pump.p_peak),
                      cfg.numerics.dim)
    cols = {"n": [fock.mean_photon(state)]}
    for i, ket in enumerate(res.qutrit_states):
        cols[f"F_q{i}"] = [fock.fidelity(state, ket)]
    cols["F_ex0"] = [fock.fidelity(state, res.excited_states[0])]
    tables.write_text(out / "series.tsv", tables.format_series(cols, _params_meta(cfg)))
    tables.write_text(out / "state.mat.txt", tables.format_matrix(fock.as_density(state)))
    return {"n": cols["n"][0], "F_q0": cols["F_q0"][0]}


def _run_breathing(cfg, out, workers):
    o = cfg.options
    holds = np.arange(0.0, o["hold_stop"] + 0.5 * o["hold_step"], o["hold_step"])
    tab = ex.breathing_run(cfg.model, cfg.pump, cfg.dissipation, holds, cfg.numerics.dim,
                           o["t1eff_ratio"], o["parity_window"], cfg.numerics.dt_max)
    extra = {}
    try:
        f, tau = ex.breathing_frequency(tab)
        extra = {"breathing_frequency_hz": f, "breathing_decay_s": tau}
    except (ValueError, RuntimeError) as exc:
        extra = {"breathing_fit": f"not available ({exc})"}
    tables.write_text(out / "series.tsv", tables.format_series(tab, {**_params_meta(cfg), **extra}))
    return extra


def _run_steady_scan(cfg, out, workers):
    o = cfg.options
    deltas = np.linspace(o["delta_over_k_start"], o["delta_over_k_stop"], o["delta_over_k_points"])
    tab = ex.steady_scan(cfg.model.pump_over_k, deltas, cfg.dissipation, cfg.numerics.dim,
                         o["eta"], cfg.model.kerr / TWO_PI, o["t1eff_ratio"], o["parity_window"],
                         workers)
    tables.write_text(out / "series.tsv", tables.format_series(tab, _params_meta(cfg)))
    return {}


def _run_relaxation(cfg, out, workers):
    o = cfg.options
    holds = np.linspace(0.0, o["hold_stop"], o["hold_points"])
    tab = ex.relaxation_run(cfg.model, cfg.pump, cfg.dissipation, holds, cfg.numerics.dim,
                            o["start"], cfg.numerics.dt_max)
    extra = {"first_peak_q2_s": ex.first_peak_time(holds, tab["F_q2"]),
             "first_peak_q1_s": ex.first_peak_time(holds, tab["F_q1"])}
    tables.write_text(out / "series.tsv", tables.format_series(tab, {**_params_meta(cfg), **extra}))
    return extra


def _run_spectrum(cfg, out, workers):
    o = cfg.options
    deltas = np.linspace(o["delta_over_k_start"], o["delta_over_k_stop"], o["delta_over_k_points"])
    rows = quasienergy_curves(cfg.model, deltas * cfg.model.kerr, cfg.numerics.dim)
    cols = dict(zip(["delta_over_k", "E_q0", "E_q1", "E_q2", "E_ex0", "E_ex1", "E_ex2"], rows.T))
    cols["gap_sector0"] = cols["E_q0"] - cols["E_ex0"]
    tables.write_text(out / "series.tsv", tables.format_series(
        cols, {**_params_meta(cfg), "energy_unit": "K"}))
    return {}


def _run_wigner(cfg, out, workers):
    o = cfg.options
    dim = cfg.numerics.dim
    if o["state"] == "qutrit0":
        rho = diagonalize(cfg.model, dim).qutrit_states[0]
    elif o["state"] == "steady":
        if cfg.dissipation is None:
            raise ConfigError("wigner of the steady state needs a [dissipation] section")
        rho = steady_state(cfg.model, cfg.dissipation, dim).rho
    else:
        rho = _prepared_state(cfg)
    xs = np.linspace(-o["extent"], o["extent"], o["points"])
    grid = wigner(rho, xs, xs)
    tables.write_text(out / "grid.tsv", tables.format_grid(
        grid.values, ("im_alpha", xs), ("re_alpha", xs),
        {**_params_meta(cfg), "convention": "W(0) of vacuum = 2/pi"}))
    tables.write_text(out / "state.mat.txt", tables.format_matrix(fock.as_density(rho)))
    return {"mean_photon": fock.mean_photon(rho)}


def _run_steady(cfg, out, workers):
    if cfg.dissipation is None:
        raise ConfigError("steady needs a [dissipation] section")
    ss = steady_state(cfg.model, cfg.dissipation, cfg.numerics.dim)
    tables.write_text(out / "state.mat.txt", tables.format_matrix(ss.rho))
    cols = {"n": [fock.mean_photon(ss.rho)], "residual": [ss.residual]}
    cols.update({f"sector{s}": [v] for s, v in enumerate(fock.sector_populations(ss.rho))})
    tables.write_text(out / "series.tsv", tables.format_series(cols, _params_meta(cfg)))
    return {"n": cols["n"][0]}


RUNNERS = {"chevron": _run_chevron, "prepare": _run_prepare, "breathing": _run_breathing,
           "steady_scan": _run_steady_scan, "relaxation": _run_relaxation,
           "spectrum": _run_spectrum, "wigner": _run_wigner, "steady": _run_steady}


def retarget(cfg, kind):
    """Copy of ``cfg`` running utility ``kind`` with default options."""
    if kind == cfg.experiment:
        return cfg
    new = replace(cfg, experiment=kind, options={})
    if kind in OPTIONS:
        if kind == "wigner" and cfg.pump is None:
            new.options = {"state": "qutrit0"}
        check_options(new)
    return new


def execute(cfg, out_root=None, workers=1, kind=None, name=None):
    """Run ``kind`` (default ``cfg.experiment``) and return the output directory."""
    kind = kind or cfg.experiment
    cfg = retarget(cfg, kind)
    root = out_root or cfg.output or os.environ.get(OUTPUT_ENV) or "runs"
    out = output_dir(root, name or (cfg.source.get("output", {}) or {}).get("name") or kind)
    (out / "config.snapshot").write_text(_snapshot(cfg.source))
    try:
        extra = RUNNERS[kind](cfg, out, workers)
    except Exception as exc:
        (out / "meta.txt").write_text(_meta_text(cfg, {"status": f"failed: {exc}"}))
        raise
    (out / "meta.txt").write_text(_meta_text(cfg, {"status": "ok", **extra}))
    return out
