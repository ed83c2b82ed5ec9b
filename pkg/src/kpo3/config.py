"""TOML run configurations with unit-suffixed quantities.

Frequencies are written as ordinary frequencies ("1.46 MHz"); they become
angular frequencies here and nowhere else.  Times take s/ms/us/ns, flux takes
rad or Phi0, capacitance F/pF/fF.  Bare numbers are SI.
"""
import re
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .circuit import CircuitParams, derive_coefficients, table_one_device
from .errors import ConfigError, KpoError
from .model import DissipationSpec, KpoParams, PumpSchedule

TWO_PI = 2 * np.pi
EXPERIMENTS = ("chevron", "prepare", "breathing", "steady_scan", "relaxation", "spectrum", "wigner")
NEEDS_PUMP = ("chevron", "prepare", "breathing", "relaxation", "wigner")
NEEDS_DISSIPATION = ("steady_scan", "relaxation")
DIM_RANGE = (8, 200)

UNITS = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "flux": {"rad": 1.0, "Phi0": TWO_PI},
    "capacitance": {"F": 1.0, "pF": 1e-12, "fF": 1e-15},
    "none": {},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([A-Za-zµ0-9]*)\s*$")


def parse_quantity(value, kind, where):
    """Number in SI base units from a bare number or a ``"<number> <unit>"`` string."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number or quantity string, got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    num, unit = float(m.group(1)), m.group(2)
    if not unit:
        return num
    table = UNITS[kind]
    if unit not in table:
        allowed = ", ".join(table) or "none"
        raise ConfigError(f"{where}: unit {unit!r} not allowed (use {allowed})")
    return num * table[unit]


@dataclass
class Numerics:
    dim: int = 30
    dt_max: float = None
    rtol: float = 1e-10
    atol: float = 1e-12


@dataclass
class RunConfig:
    model: KpoParams
    experiment: str
    options: dict
    pump: PumpSchedule = None
    dissipation: DissipationSpec = None
    numerics: Numerics = field(default_factory=Numerics)
    output: str = None
    seed: int = 0
    circuit: CircuitParams = None
    derived: object = None
    source: dict = field(default_factory=dict)


def _section(doc, name, required=False, experiment=None):
    sec = doc.get(name)
    if sec is None:
        if required:
            why = f" (required by experiment '{experiment}')" if experiment else ""
            raise ConfigError(f"missing [{name}] section{why}")
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _check_keys(sec, name, allowed):
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"[{name}] has unknown keys: {', '.join(extra)}")


def _pick(sec, name, key, ratio_key, kerr):
    # "key" as a frequency or "ratio_key" in units of K; exactly one
    has_abs, has_ratio = key in sec, ratio_key in sec
    if has_abs and has_ratio:
        raise ConfigError(f"[{name}] give either {key} or {ratio_key}, not both")
    if has_abs:
        return TWO_PI * parse_quantity(sec[key], "frequency", f"[{name}].{key}")
    if has_ratio:
        return parse_quantity(sec[ratio_key], "none", f"[{name}].{ratio_key}") * kerr
    raise ConfigError(f"[{name}] needs {key} or {ratio_key}")


MODEL_KEYS = ("delta", "delta_over_k", "kerr", "pump", "pump_over_k", "eta", "eta_guard")
CIRCUIT_KEYS = ("preset", "N1", "N2", "EJ1a", "EJ1b", "EJ2", "CJ1a", "CJ1b", "CJ2", "Cs", "phi_dc",
                "phi_ac_amp", "ra", "rb", "delta", "delta_over_k", "eta")
CIRCUIT_UNITS = {"EJ1a": "frequency", "EJ1b": "frequency", "EJ2": "frequency",
                 "CJ1a": "capacitance", "CJ1b": "capacitance", "CJ2": "capacitance",
                 "Cs": "capacitance", "phi_dc": "flux", "phi_ac_amp": "flux",
                 "ra": "none", "rb": "none"}


def _model(sec):
    _check_keys(sec, "model", MODEL_KEYS)
    if "kerr" not in sec:
        raise ConfigError("[model] needs kerr")
    kerr = TWO_PI * parse_quantity(sec["kerr"], "frequency", "[model].kerr")
    if not kerr > 0:
        raise ConfigError("[model].kerr must be positive")
    delta = _pick(sec, "model", "delta", "delta_over_k", kerr)
    pump = _pick(sec, "model", "pump", "pump_over_k", kerr)
    eta = parse_quantity(sec.get("eta", 0.0), "none", "[model].eta")
    guard = parse_quantity(sec.get("eta_guard", 0.5), "none", "[model].eta_guard")
    return KpoParams(delta=delta, kerr=kerr, pump=pump, eta=eta, eta_guard=guard)


def _circuit(sec):
    _check_keys(sec, "circuit", CIRCUIT_KEYS)
    if sec.get("preset") == "table_one":
        base = table_one_device().as_dict()
    elif "preset" in sec:
        raise ConfigError(f"[circuit].preset {sec['preset']!r} unknown (use 'table_one')")
    else:
        base = {}
    for key, kind in CIRCUIT_UNITS.items():
        if key in sec:
            base[key] = parse_quantity(sec[key], kind, f"[circuit].{key}")
    for key in ("N1", "N2"):
        if key in sec:
            if not isinstance(sec[key], int) or isinstance(sec[key], bool):
                raise ConfigError(f"[circuit].{key} must be an integer")
            base[key] = sec[key]
    missing = [k for k in ("N1", "N2", "EJ1a", "EJ1b", "EJ2", "CJ1a", "CJ1b", "CJ2", "Cs", "phi_dc")
               if k not in base]
    if missing:
        raise ConfigError(f"[circuit] missing {', '.join(missing)}")
    circ = CircuitParams(**base)
    derived = derive_coefficients(circ)
    kerr = TWO_PI * derived.kerr
    delta = _pick(sec, "circuit", "delta", "delta_over_k", kerr)
    eta = parse_quantity(sec["eta"], "none", "[circuit].eta") if "eta" in sec else derived.eta
    params = KpoParams(delta=delta, kerr=kerr, pump=TWO_PI * derived.pump, eta=eta)
    return circ, derived, params


def _pump(sec, params):
    _check_keys(sec, "pump", ("p_peak", "p_peak_over_k", "cd_fraction", "tau_ramp", "tau_hold",
                              "ramp_shape"))
    p_peak = None
    if "p_peak" in sec or "p_peak_over_k" in sec:
        p_peak = _pick(sec, "pump", "p_peak", "p_peak_over_k", params.kerr)
    return PumpSchedule(
        p_peak=p_peak,
        cd_fraction=parse_quantity(sec.get("cd_fraction", 0.0), "none", "[pump].cd_fraction"),
        tau_ramp=parse_quantity(sec.get("tau_ramp", 0.0), "time", "[pump].tau_ramp"),
        tau_hold=parse_quantity(sec.get("tau_hold", 0.0), "time", "[pump].tau_hold"),
        ramp_shape=sec.get("ramp_shape", "sin2"),
    )


def _dissipation(sec):
    _check_keys(sec, "dissipation", ("t1", "n_th", "t_phi"))
    if "t1" not in sec:
        raise ConfigError("[dissipation] needs t1")
    return DissipationSpec(
        t1=parse_quantity(sec["t1"], "time", "[dissipation].t1"),
        n_th=parse_quantity(sec.get("n_th", 0.0), "none", "[dissipation].n_th"),
        t_phi=parse_quantity(sec.get("t_phi", "inf"), "time", "[dissipation].t_phi"),
    )


def _numerics(sec):
    sec = sec or {}
    _check_keys(sec, "numerics", ("dim", "dt_max", "rtol", "atol"))
    dim = sec.get("dim", 30)
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise ConfigError("[numerics].dim must be an integer")
    dt_max = sec.get("dt_max")
    return Numerics(
        dim=dim,
        dt_max=None if dt_max is None else parse_quantity(dt_max, "time", "[numerics].dt_max"),
        rtol=parse_quantity(sec.get("rtol", 1e-10), "none", "[numerics].rtol"),
        atol=parse_quantity(sec.get("atol", 1e-12), "none", "[numerics].atol"),
    )


def check_dim(dim):
    """Truncation bounds for runs; the Hamiltonian's own dim >= 6 guard is checked first."""
    from .model import _check_model_dim

    _check_model_dim(dim)
    lo, hi = DIM_RANGE
    if not lo <= dim <= hi:
        raise ConfigError(f"[numerics].dim = {dim} outside the allowed range [{lo}, {hi}]")
    return dim


def build_config(doc, dim_override=None):
    """Validate a parsed TOML document and return a :class:`RunConfig`."""
    _check_keys(doc, "top level", ("model", "circuit", "pump", "dissipation", "experiment",
                                   "numerics", "output", "seed"))
    exp = _section(doc, "experiment", required=True)
    kind = exp.get("kind")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"[experiment].kind must be one of {', '.join(EXPERIMENTS)}, got {kind!r}")
    model_sec, circuit_sec = doc.get("model"), doc.get("circuit")
    if (model_sec is None) == (circuit_sec is None):
        raise ConfigError("exactly one of [model] and [circuit] must be present")
    circ = derived = None
    if model_sec is not None:
        params = _model(_section(doc, "model"))
    else:
        circ, derived, params = _circuit(_section(doc, "circuit"))
    pump_sec = _section(doc, "pump", required=kind in NEEDS_PUMP, experiment=kind)
    diss_sec = _section(doc, "dissipation", required=kind in NEEDS_DISSIPATION, experiment=kind)
    numerics = _numerics(_section(doc, "numerics"))
    if dim_override is not None:
        numerics.dim = int(dim_override)
    check_dim(numerics.dim)
    out = _section(doc, "output") or {}
    _check_keys(out, "output", ("dir", "name"))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    cfg = RunConfig(
        model=params, experiment=kind, options={k: v for k, v in exp.items() if k != "kind"},
        pump=_pump(pump_sec, params) if pump_sec is not None else None,
        dissipation=_dissipation(diss_sec) if diss_sec is not None else None,
        numerics=numerics, output=out.get("dir"), seed=seed, circuit=circ, derived=derived,
        source=doc,
    )
    from .runner import check_options

    check_options(cfg)
    return cfg


def load_config(path, dim_override=None):
    """Read and validate a configuration file.

    Parse errors carry the line and column reported by the TOML reader.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    try:
        return build_config(doc, dim_override)
    except KpoError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
