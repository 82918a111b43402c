"""JSON experiment configurations.

A configuration is one JSON object::

    {
      "kind": "ode_closed",            # ode_open | ode_closed | pde | beta_table | verify_suite
      "mirrors_figure": "Fig. 2(a)",   # optional metadata
      "description": "...",            # optional
      "system": {...},                 # kind-specific, see the *_FIELDS tables
      "sweep": [0, 3, 4],              # optional amplitudes (A for ODE runs, A1 for PDE runs)
      "certificate": false,            # ODE closed loop only: check the LiISS envelope
      "outputs": {"dir": "out", "plots": true, "stride": 1}
    }

Coefficients are strings in the expression mini-language. Unknown fields are
rejected with the line and column of the offending key.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .comparison import ComparisonFn, TimeSignal
from .errors import ConfigError, ExpressionError, InvariantViolation
from .numerics import ODE_TOL, Tolerance

KINDS = ("ode_open", "ode_closed", "pde", "beta_table", "verify_suite")
TOP_FIELDS = {"kind", "mirrors_figure", "description", "system", "sweep", "certificate", "outputs"}
OUTPUT_FIELDS = {"dir", "plots", "stride"}

ODE_FIELDS = {
    "m": 4, "n": 4,
    "g": "1/(1+t)", "g_tilde": "1/(1+t)", "b": "0.08+0.03*sin(3*pi*t)",
    "h1": "1+0.1*sin(2*pi*t)", "h1_prime": "0.2*pi*cos(2*pi*t)",
    "g1": "5/(1+t)", "g2": "1+5/(1+t)", "h2": "(1+0.1*sin(2*pi*t))/(2+0.1*sin(2*pi*t))",
    "M": 1.1, "A": 0.0, "x0": [0.1, 0.25], "T": 20.0,
    "rtol": ODE_TOL.rel_tol, "atol": ODE_TOL.abs_tol, "blowup_threshold": 1e6, "output_dt": 0.05,
}
PDE_FIELDS = {
    "a": "sqrt(exp(-t)+0.5*sin(pi*xi)+0.5)", "c": "1+pi*sqrt(sin(xi)+exp(-t)+1)",
    "h": "sqrt(1+sin(xi))/(1+t)*x^2", "u": "A1*sin(10*t+xi)", "A1": 0.0,
    "x0": "0.5*(xi-0.5)*(xi-2)", "M": 2 ** 0.5, "m1": 2.0, "m2": 2.0,
    "a_min": None, "c_min": None, "xi_min": 0.5, "xi_max": 2.0, "n_xi": 201, "dt": 1e-3,
    "T": 20.0, "blowup_threshold": 1e6, "max_halvings": 20,
    "output_times": [0.0, 1.0, 2.0, 5.0, 10.0, 20.0], "record_every": 10,
}
BETA_FIELDS = {"alpha": None, "g": None, "s_grid": None, "t_grid": None}
SYSTEM_FIELDS = {"ode_open": ODE_FIELDS, "ode_closed": ODE_FIELDS, "pde": PDE_FIELDS,
                 "beta_table": BETA_FIELDS, "verify_suite": {}}


def _position(text: str, key: str):
    """Line and column (1-based) of the first occurrence of ``"key"`` as an object key."""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if m is None:
        return None, None
    line = text.count("\n", 0, m.start()) + 1
    col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
    return line, col


@dataclass
class ExperimentConfig:
    kind: str
    system: dict
    raw: dict
    text: str = ""
    mirrors_figure: str = None
    sweep: list = None
    certificate: bool = False
    out_dir: str = None
    plots: bool = True
    stride: int = 1
    extra: dict = field(default_factory=dict)

    def error(self, message, key=None):
        line, col = _position(self.text, key) if key else (None, None)
        return ConfigError(message, line, col)

    def amplitude_key(self) -> str:
        return "A1" if self.kind == "pde" else "A"

    def system_with(self, **overrides) -> dict:
        out = dict(self.system)
        out.update(overrides)
        return out


def parse_grid(spec: str, name: str):
    """``"a:b:n"`` -> ``(a, b, n)``."""
    parts = str(spec).split(":")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3 or n < 1 or (n > 1 and not a <= b):
            raise ValueError
    except (ValueError, IndexError):
        raise ConfigError(f"{name} must look like a:b:n with a <= b and n >= 1, got {spec!r}") from None
    return a, b, n


def load_text(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", 1, 1)
    cfg = ExperimentConfig(kind=None, system={}, raw=raw, text=text)
    for key in raw:
        if key not in TOP_FIELDS:
            raise cfg.error(f"unknown field {key!r}", key)
    kind = raw.get("kind")
    if kind not in KINDS:
        raise cfg.error(f"kind must be one of {', '.join(KINDS)}; got {kind!r}", "kind" if "kind" in raw else None)
    cfg.kind = kind
    allowed = SYSTEM_FIELDS[kind]
    system = raw.get("system", {})
    if not isinstance(system, dict):
        raise cfg.error("system must be an object", "system")
    for key in system:
        if key not in allowed:
            raise cfg.error(f"unknown field {key!r} for kind {kind}", key)
    merged = {k: v for k, v in allowed.items()}
    merged.update(system)
    if kind == "beta_table":
        for key in BETA_FIELDS:
            if merged.get(key) is None:
                raise cfg.error(f"beta_table needs system.{key}", "system" if "system" in raw else "kind")
    cfg.system = merged
    cfg.mirrors_figure = raw.get("mirrors_figure")
    sweep = raw.get("sweep")
    if sweep is not None:
        if kind not in ("ode_closed", "ode_open", "pde") or not isinstance(sweep, list) or not sweep \
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in sweep):
            raise cfg.error("sweep must be a nonempty list of nonnegative amplitudes (ODE or PDE kinds)", "sweep")
        cfg.sweep = [float(v) for v in sweep]
    cert = raw.get("certificate", False)
    if not isinstance(cert, bool) or (cert and kind != "ode_closed"):
        raise cfg.error("certificate must be a boolean and is only supported for ode_closed", "certificate")
    cfg.certificate = cert
    outputs = raw.get("outputs", {})
    if not isinstance(outputs, dict):
        raise cfg.error("outputs must be an object", "outputs")
    for key in outputs:
        if key not in OUTPUT_FIELDS:
            raise cfg.error(f"unknown field {key!r} in outputs", key)
    cfg.out_dir = outputs.get("dir")
    cfg.plots = bool(outputs.get("plots", True))
    stride = outputs.get("stride", 1)
    if not isinstance(stride, int) or isinstance(stride, bool) or stride < 1:
        raise cfg.error("outputs.stride must be a positive integer", "stride")
    cfg.stride = stride
    # build once so that expression and invariant errors surface as config errors
    try:
        if kind in ("ode_open", "ode_closed"):
            build_ode(merged)
        elif kind == "pde":
            build_pde(merged, validate=False)
        elif kind == "beta_table":
            build_beta(merged)
    except ExpressionError as exc:
        key = _key_for_text(system, exc.text)
        raise ConfigError(str(exc), *_position(text, key)) if key else exc
    except (InvariantViolation, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid system: {exc}") from None
    return cfg


def _key_for_text(system: dict, text: str):
    for k, v in system.items():
        if v == text:
            return k
    return None


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_text(text)


def build_ode(s: dict, validate: bool = True):
    from .ode_example import OdeConfig

    def sig(key, nonneg=True):
        return TimeSignal.parse(s[key], nonneg=nonneg, horizon=max(float(s["T"]), 1.0))

    x0 = s["x0"]
    if not isinstance(x0, list) or len(x0) != 2:
        raise ValueError("x0 must be a list of two numbers")
    tol = Tolerance(float(s["atol"]), float(s["rtol"]), ODE_TOL.max_iters)
    return OdeConfig(g=sig("g"), g_tilde=sig("g_tilde"), b=sig("b"), h1=sig("h1"), g1=sig("g1"),
                     g2=sig("g2"), h2=sig("h2"), m=s["m"], n=s["n"], A=float(s["A"]), x0=tuple(x0),
                     T=float(s["T"]), tol=tol, blowup_threshold=float(s["blowup_threshold"]),
                     M=float(s["M"]), h1_prime=sig("h1_prime", False) if s.get("h1_prime") else None,
                     output_dt=float(s["output_dt"]), validate=validate)


def build_pde(s: dict, validate: bool = True):
    from .expr import Expression
    from .pde_example import PdeConfig

    u = Expression(s["u"], ("xi", "t"), {"A1": float(s["A1"])})
    return PdeConfig(a=s["a"], c=s["c"], h=s["h"], u=u, x0=s["x0"], M=float(s["M"]),
                     m1=float(s["m1"]), m2=float(s["m2"]), a_min=s["a_min"], c_min=s["c_min"],
                     xi_min=float(s["xi_min"]), xi_max=float(s["xi_max"]), n_xi=int(s["n_xi"]),
                     dt=float(s["dt"]), T=float(s["T"]), blowup_threshold=float(s["blowup_threshold"]),
                     max_halvings=int(s["max_halvings"]), output_times=tuple(s["output_times"]),
                     record_every=int(s["record_every"]), validate=validate)


def build_beta(s: dict):
    from .comparison import kl_beta

    alpha = ComparisonFn.parse(s["alpha"], "K")
    g = TimeSignal.parse(s["g"], nonneg=True)
    return kl_beta(alpha, g), parse_grid(s["s_grid"], "s_grid"), parse_grid(s["t_grid"], "t_grid")

