"""Coefficient functions for conductance-based neuron populations.

Membrane drifts (FitzHugh-Nagumo cubic or Hodgkin-Huxley current balance),
sigmoid synaptic activation, the compact-support cutoff that keeps
proportion variables inside [0, 1], clamped gate opening/closing rates,
and the synapse / gate drift and diffusion fields built from them.

Everything in this module is a pure function of its arguments and accepts
scalars or numpy arrays; simulation state lives in `network`.

Units are fixed package-wide: mV, ms, mS/cm^2; all rates are per ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

from .errors import VariantMismatchError

Array = Union[float, np.ndarray]

GATES = ("n", "m", "h")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


# ---------------------------------------------------------------------------
# parameter blocks


@dataclass(frozen=True)
class SigmoidParams:
    """Synaptic activation S(v) = c_max / (1 + exp(-lam * (v - v_half)))."""

    c_max: float = 1.0
    lam: float = 1.0   # 1/mV
    v_half: float = 0.0  # mV

    def __post_init__(self):
        _require(math.isfinite(self.c_max) and self.c_max > 0, "sigmoid.c_max must be finite and > 0")
        _require(math.isfinite(self.lam) and self.lam > 0, "sigmoid.lam must be finite and > 0")
        _require(math.isfinite(self.v_half), "sigmoid.v_half must be finite")


@dataclass(frozen=True)
class CutoffSpec:
    """Piecewise-linear trapezoid cutoff with compact support inside (0, 1).

    Zero on (-inf, support_lo] and [support_hi, +inf), one on the plateau
    [support_lo + ramp, support_hi - ramp], linear in between.  The global
    Lipschitz constant is 1 / ramp.
    """

    support_lo: float = 0.01
    support_hi: float = 0.99
    ramp: float = 0.04

    def __post_init__(self):
        _require(0.0 < self.support_lo < 0.5, "cutoff.support_lo must lie in (0, 1/2)")
        _require(0.5 < self.support_hi < 1.0, "cutoff.support_hi must lie in (1/2, 1)")
        _require(self.ramp > 0.0, "cutoff.ramp must be > 0")
        _require(self.support_lo + self.ramp < 0.5, "cutoff: support_lo + ramp must be < 1/2")
        _require(self.support_hi - self.ramp > self.support_lo + self.ramp,
                 "cutoff: plateau is empty (ramps overlap)")


@dataclass(frozen=True)
class GateRates:
    """Clamped gate kinetics.

    The opening/closing rates follow the standard squid-axon expressions
    (modern -65 mV resting convention).  Outside |v| <= clamp_v the rates
    are held at their boundary values, and every rate is clipped to
    [clamp_lo, clamp_hi].  clamp_lo > 0 is the coercivity floor that keeps
    the gate diffusion radicand strictly positive on [0, 1].
    """

    clamp_lo: float = 1e-3  # 1/ms
    clamp_hi: float = 1e2   # 1/ms
    clamp_v: float = 100.0  # mV

    def __post_init__(self):
        _require(self.clamp_lo > 0, "gates.clamp_lo must be > 0")
        _require(self.clamp_hi > self.clamp_lo, "gates.clamp_hi must exceed clamp_lo")
        _require(self.clamp_v > 0, "gates.clamp_v must be > 0")


@dataclass(frozen=True)
class CurrentSpec:
    """Applied current, either constant or a single rectangular pulse."""

    kind: str = "const"      # "const" | "pulse"
    amplitude: float = 0.0   # uA/cm^2
    base: float = 0.0
    t_on: float = 0.0        # ms, pulse only
    t_off: float = 0.0

    def __post_init__(self):
        _require(self.kind in ("const", "pulse"), f"current.kind must be const or pulse, got {self.kind!r}")
        if self.kind == "pulse":
            _require(self.t_off >= self.t_on, "current: t_off must be >= t_on")

    def __call__(self, t: float) -> float:
        if self.kind == "const":
            return self.amplitude
        return self.base + (self.amplitude if self.t_on <= t < self.t_off else 0.0)


@dataclass(frozen=True)
class FhnMembrane:
    """FitzHugh-Nagumo membrane: cubic drift plus linear recovery variable w."""

    a: float = 0.7   # mV
    b: float = 0.8
    c: float = 0.08  # 1/ms

    def __post_init__(self):
        _require(self.c > 0, "fhn.c must be > 0")


@dataclass(frozen=True)
class HhMembrane:
    """Hodgkin-Huxley current balance with gates (n, m, h)."""

    g_na: float = 120.0  # mS/cm^2
    g_k: float = 36.0
    g_l: float = 0.3
    e_na: float = 50.0   # mV
    e_k: float = -77.0
    e_l: float = -54.4
    i_ext: CurrentSpec = CurrentSpec()

    def __post_init__(self):
        for name in ("g_na", "g_k", "g_l"):
            _require(getattr(self, name) >= 0, f"hh.{name} must be >= 0")


Membrane = Union[FhnMembrane, HhMembrane]


@dataclass(frozen=True)
class PopulationParams:
    """All per-population coefficients."""

    label: str
    membrane: Membrane
    sigma_v: float            # mV/sqrt(ms), membrane noise
    rise_rate: float          # 1/ms, transmitter binding rate
    decay_rate: float         # 1/ms, transmitter unbinding rate
    sigmoid: SigmoidParams
    cutoff: CutoffSpec
    gates: GateRates | None = None  # required for HH populations

    def __post_init__(self):
        _require(bool(self.label), "population label must be nonempty")
        _require(self.sigma_v >= 0, f"population {self.label!r}: sigma_v must be >= 0")
        _require(self.rise_rate > 0, f"population {self.label!r}: rise_rate must be > 0")
        _require(self.decay_rate > 0, f"population {self.label!r}: decay_rate must be > 0")
        if isinstance(self.membrane, HhMembrane):
            _require(self.gates is not None, f"population {self.label!r}: HH membrane needs gate rates")
        else:
            _require(self.gates is None, f"population {self.label!r}: FHN membrane carries no gates")

    @property
    def is_hh(self) -> bool:
        return isinstance(self.membrane, HhMembrane)


@dataclass(frozen=True)
class PairParams:
    """Synaptic constants for one ordered (target, source) population pair.

    j_mean = 0 switches the connection off entirely; this degenerate case
    is allowed so that interaction-free reference runs stay inside the
    validated configuration space.
    """

    v_rev: float          # mV, reversal potential
    j_mean: float         # mS/cm^2, mean maximal conductance
    sigma_j: float = 0.0  # conductance noise scale
    theta: float = 0.0    # 1/ms, mean reversion (sign-preserving variant)

    def __post_init__(self):
        _require(math.isfinite(self.v_rev), "pair.v_rev must be finite")
        _require(self.j_mean >= 0, "pair.j_mean must be >= 0")
        _require(self.sigma_j >= 0, "pair.sigma_j must be >= 0")
        _require(self.theta >= 0, "pair.theta must be >= 0")


# ---------------------------------------------------------------------------
# scalar / vectorized coefficient evaluations


def eval_sigmoid(p: SigmoidParams, v: Array) -> Array:
    """S(v), strictly increasing, valued in (0, c_max)."""
    return p.c_max * expit(p.lam * (np.asarray(v, dtype=float) - p.v_half))


def eval_cutoff(c: CutoffSpec, x: Array) -> Array:
    """Trapezoid cutoff value in [0, 1]; identically zero outside the support."""
    x = np.asarray(x, dtype=float)
    up = (x - c.support_lo) / c.ramp
    down = (c.support_hi - x) / c.ramp
    return np.clip(np.minimum(np.minimum(up, down), 1.0), 0.0, 1.0)


def _vtrap(x: Array, scale: float) -> Array:
    """x / (1 - exp(-x/scale)) with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-7
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        raw = x / (-np.expm1(-x / scale))
    return np.where(small, scale + 0.5 * x, raw)


def _raw_gate_rates(gate: str, v: Array) -> tuple[Array, Array]:
    v = np.asarray(v, dtype=float)
    if gate == "n":
        return 0.01 * _vtrap(v + 55.0, 10.0), 0.125 * np.exp(-(v + 65.0) / 80.0)
    if gate == "m":
        return 0.1 * _vtrap(v + 40.0, 10.0), 4.0 * np.exp(-(v + 65.0) / 18.0)
    if gate == "h":
        return 0.07 * np.exp(-(v + 65.0) / 20.0), expit((v + 35.0) / 10.0)
    raise ValueError(f"unknown gate {gate!r}; expected one of {GATES}")


def eval_gate_rates(g: GateRates, gate: str, v: Array) -> tuple[Array, Array]:
    """(opening, closing) rate pair, frozen outside |v| <= clamp_v and clipped.

    Freezing happens before evaluation, so the expressions never see
    voltages outside the physiological window (this also rules out
    overflow in the exponentials).
    """
    v_eff = np.clip(np.asarray(v, dtype=float), -g.clamp_v, g.clamp_v)
    rho, zeta = _raw_gate_rates(gate, v_eff)
    return (
        np.clip(rho, g.clamp_lo, g.clamp_hi),
        np.clip(zeta, g.clamp_lo, g.clamp_hi),
    )


def eval_membrane_drift(pop: PopulationParams, t: float, v: Array, q) -> Array:
    """Membrane drift F(t, v, q) in mV/ms.

    For FHN, q is the recovery variable w.  For HH, q is the gate triple
    (n, m, h).  Passing the wrong shape for the population's variant is a
    contract violation.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(pop.membrane, FhnMembrane):
        if isinstance(q, (tuple, list)):
            raise VariantMismatchError(f"population {pop.label!r} is FHN; q must be the recovery variable")
        w = np.asarray(q, dtype=float)
        return -(v ** 3) / 3.0 + v - w
    if not isinstance(q, (tuple, list)) or len(q) != 3:
        raise VariantMismatchError(f"population {pop.label!r} is HH; q must be the gate triple (n, m, h)")
    n, m, h = (np.asarray(x, dtype=float) for x in q)
    mb = pop.membrane
    i_na = mb.g_na * m ** 3 * h * (v - mb.e_na)
    i_k = mb.g_k * n ** 4 * (v - mb.e_k)
    i_l = mb.g_l * (v - mb.e_l)
    return mb.i_ext(t) - i_na - i_k - i_l


def recovery_drift(m: FhnMembrane, v: Array, w: Array) -> Array:
    """FHN recovery equation drift c * (v + a - b * w); no noise term."""
    return m.c * (np.asarray(v, dtype=float) + m.a - m.b * np.asarray(w, dtype=float))


def _synapse_fields_from_s(pop: PopulationParams, s: Array, y: Array) -> tuple[Array, Array]:
    y = np.asarray(y, dtype=float)
    release = pop.rise_rate * s * (1.0 - y)
    drift = release - pop.decay_rate * y
    rad = release + pop.decay_rate * y
    return drift, np.sqrt(np.abs(rad)) * eval_cutoff(pop.cutoff, y)


def synapse_fields(pop: PopulationParams, v: Array, y: Array) -> tuple[Array, Array]:
    """(drift, diffusion) of the available-transmitter proportion.

    drift = rise * S(v) * (1 - y) - decay * y, positive at y <= 0 and
    negative at y >= 1.  diffusion = sqrt(|rise*S(v)*(1-y) + decay*y|)
    times the cutoff, hence zero outside (0, 1).  The absolute value keeps
    the evaluation total for transient out-of-range y produced by a
    discrete step before projection; on [0, 1] the radicand is a convex
    combination of two positive rates, so it is never active there.
    """
    return _synapse_fields_from_s(pop, eval_sigmoid(pop.sigmoid, v), y)


def synapse_drift(pop: PopulationParams, v: Array, y: Array) -> Array:
    return synapse_fields(pop, v, y)[0]


def synapse_diffusion(pop: PopulationParams, v: Array, y: Array) -> Array:
    return synapse_fields(pop, v, y)[1]


def gate_fields(g: GateRates, gate: str, v: Array, x: Array, cutoff: CutoffSpec) -> tuple[Array, Array]:
    """(drift, diffusion) of one gate proportion; same structure as the synapse."""
    rho, zeta = eval_gate_rates(g, gate, v)
    x = np.asarray(x, dtype=float)
    drift = rho * (1.0 - x) - zeta * x
    rad = rho * (1.0 - x) + zeta * x
    return drift, np.sqrt(np.abs(rad)) * eval_cutoff(cutoff, x)


def gate_drift(g: GateRates, gate: str, v: Array, x: Array) -> Array:
    rho, zeta = eval_gate_rates(g, gate, v)
    x = np.asarray(x, dtype=float)
    return rho * (1.0 - x) - zeta * x


def gate_diffusion(g: GateRates, gate: str, v: Array, x: Array, cutoff: CutoffSpec) -> Array:
    return gate_fields(g, gate, v, x, cutoff)[1]


# ---------------------------------------------------------------------------
# invariant checks (shared by the test suite and the CLI `validate` command)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def check_boundary_drift_signs(pop: PopulationParams, v_lo: float = -120.0, v_hi: float = 120.0,
                               n_v: int = 241) -> CheckResult:
    """Inward drift at the proportion boundaries for synapse and gate fields."""
    v = _grid(v_lo, v_hi, n_v)[:, None]
    below = np.array([-0.5, -1e-9, 0.0])[None, :]
    above = np.array([1.0, 1.0 + 1e-9, 1.5])[None, :]
    ok = bool(np.all(synapse_drift(pop, v, below) >= 0.0) and np.all(synapse_drift(pop, v, above) <= 0.0))
    if pop.gates is not None:
        for gate in GATES:
            ok = ok and bool(np.all(gate_drift(pop.gates, gate, v, below) >= 0.0))
            ok = ok and bool(np.all(gate_drift(pop.gates, gate, v, above) <= 0.0))
    return CheckResult("boundary-drift-signs", ok, f"population {pop.label!r}, v in [{v_lo}, {v_hi}]")


def check_diffusion_support(pop: PopulationParams, v_lo: float = -120.0, v_hi: float = 120.0,
                            n_v: int = 241) -> CheckResult:
    """Diffusion vanishes identically for proportion state outside (0, 1)."""
    v = _grid(v_lo, v_hi, n_v)[:, None]
    outside = np.array([-1.0, -1e-12, 0.0, pop.cutoff.support_lo, pop.cutoff.support_hi, 1.0, 1.0 + 1e-12, 2.0])[None, :]
    ok = bool(np.all(synapse_diffusion(pop, v, outside) == 0.0))
    if pop.gates is not None:
        for gate in GATES:
            ok = ok and bool(np.all(gate_diffusion(pop.gates, gate, v, outside, pop.cutoff) == 0.0))
    return CheckResult("diffusion-support", ok, f"population {pop.label!r}")


def check_gate_coercivity(g: GateRates, v_lo: float = -200.0, v_hi: float = 200.0,
                          n_v: int = 4001) -> CheckResult:
    """min over the grid of all opening/closing rates >= clamp_lo."""
    v = _grid(v_lo, v_hi, n_v)
    worst = min(
        float(np.min(np.minimum(*eval_gate_rates(g, gate, v))))
        for gate in GATES
    )
    return CheckResult("gate-coercivity", worst >= g.clamp_lo, f"min rate {worst:.3e} vs floor {g.clamp_lo:.3e}")


def check_sigmoid_monotone(p: SigmoidParams, v_lo: float = -120.0, v_hi: float = 120.0,
                           n_v: int = 961) -> CheckResult:
    """Nondecreasing on the wide grid, strictly increasing and interior
    wherever the exponential has not saturated in float."""
    s_wide = np.asarray(eval_sigmoid(p, _grid(v_lo, v_hi, n_v)))
    ok = bool(np.all(np.diff(s_wide) >= 0)) and bool(np.all(s_wide >= 0)) and bool(np.all(s_wide <= p.c_max))
    half_width = 30.0 / p.lam
    s_mid = np.asarray(eval_sigmoid(p, _grid(p.v_half - half_width, p.v_half + half_width, n_v)))
    ok = ok and bool(np.all(np.diff(s_mid) > 0)) and bool(np.all(s_mid > 0)) and bool(np.all(s_mid < p.c_max))
    return CheckResult("sigmoid-monotone", ok, "strictly increasing, inside (0, c_max)")


def check_fhn_one_sided_lipschitz(m: FhnMembrane, n_pairs: int = 4000, seed: int = 0) -> CheckResult:
    """(F(v,q) - F(v',q)) (v - v') <= (v - v')^2 on a random sample of pairs.

    The cubic drift satisfies this with constant 1 (the linear part), the
    cubic part only helps.
    """
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0xF4], dtype=np.uint64)))
    v1 = gen.uniform(-60.0, 60.0, n_pairs)
    v2 = gen.uniform(-60.0, 60.0, n_pairs)
    f1 = -(v1 ** 3) / 3.0 + v1
    f2 = -(v2 ** 3) / 3.0 + v2
    lhs = (f1 - f2) * (v1 - v2)
    rhs = (v1 - v2) ** 2
    ok = bool(np.all(lhs <= rhs * (1.0 + 1e-12) + 1e-9))
    return CheckResult("fhn-one-sided-lipschitz", ok, "constant L = 1")


def run_population_checks(pop: PopulationParams) -> list[CheckResult]:
    """All model-level invariant checks that apply to one population."""
    out = [
        check_boundary_drift_signs(pop),
        check_diffusion_support(pop),
        check_sigmoid_monotone(pop.sigmoid),
    ]
    if pop.gates is not None:
        out.append(check_gate_coercivity(pop.gates))
    if isinstance(pop.membrane, FhnMembrane):
        out.append(check_fhn_one_sided_lipschitz(pop.membrane))
    return out
