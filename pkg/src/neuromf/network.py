"""The finite network of interacting neurons.

Neurons are grouped into populations; every neuron of a target population
feels every source population only through that population's mean
available-transmitter proportion, so one pass of per-population means
(O(N)) replaces the nominal O(N^2) pairwise sum.

Two maximal-conductance models are supported.  In the "simple" variant the
conductance fluctuates as white noise around its mean and enters both the
drift and the diffusion of the membrane potential.  In the
"sign_preserving" variant each (neuron, source) pair carries a
mean-reverting square-root conductance process that stays nonnegative.

The same stepping engine also advances ensembles of independent limit
copies (interaction read from a deterministic curve instead of empirical
means) and lockstep-coupled pairs of the two, sharing every Brownian
increment, the initial draws, and, in the sign-preserving variant, the
conductance paths themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError, SimulationDiverged
from .model import (
    GATES,
    PairParams,
    PopulationParams,
    eval_membrane_drift,
    eval_sigmoid,
    gate_fields,
    recovery_drift,
    synapse_fields,
)
from .rng import BlockNoise, Component
from .stepping import CirParams, TimeGrid, step_cir, step_euler_confined


class Conductance(str, Enum):
    SIMPLE = "simple"
    SIGN_PRESERVING = "sign_preserving"


# ---------------------------------------------------------------------------
# initial laws


@dataclass(frozen=True)
class Dist:
    """Small closed family of scalar distributions with analytic means."""

    kind: str        # const | normal | uniform | lognormal | beta
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "normal", "uniform", "lognormal", "beta"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind in ("normal", "lognormal") and self.p2 < 0:
            raise ValueError(f"{self.kind}: scale must be >= 0")
        if self.kind == "uniform" and self.p2 < self.p1:
            raise ValueError("uniform: hi must be >= lo")
        if self.kind == "beta" and not (self.p1 > 0 and self.p2 > 0):
            raise ValueError("beta: both shape parameters must be > 0")

    @classmethod
    def const(cls, value: float) -> "Dist":
        return cls("const", value)

    @classmethod
    def normal(cls, mean: float, std: float) -> "Dist":
        return cls("normal", mean, std)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "Dist":
        return cls("uniform", lo, hi)

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "Dist":
        return cls("lognormal", mu, sigma)

    @classmethod
    def beta(cls, alpha: float, beta: float) -> "Dist":
        return cls("beta", alpha, beta)

    def mean(self) -> float:
        if self.kind in ("const", "normal"):
            return self.p1
        if self.kind == "uniform":
            return 0.5 * (self.p1 + self.p2)
        if self.kind == "lognormal":
            return math.exp(self.p1 + 0.5 * self.p2 ** 2)
        return self.p1 / (self.p1 + self.p2)

    def support(self) -> tuple[float, float]:
        if self.kind == "const":
            return (self.p1, self.p1)
        if self.kind == "normal":
            return (self.p1, self.p1) if self.p2 == 0 else (-math.inf, math.inf)
        if self.kind == "uniform":
            return (self.p1, self.p2)
        if self.kind == "lognormal":
            v = math.exp(self.p1)
            return (v, v) if self.p2 == 0 else (0.0, math.inf)
        return (0.0, 1.0)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "const":
            return np.full(size, self.p1)
        if self.kind == "normal":
            return gen.normal(self.p1, self.p2, size)
        if self.kind == "uniform":
            return gen.uniform(self.p1, self.p2, size)
        if self.kind == "lognormal":
            return gen.lognormal(self.p1, self.p2, size)
        return gen.beta(self.p1, self.p2, size)


@dataclass(frozen=True)
class InitialLaw:
    """Per-population initial condition, i.i.d. across the population.

    Proportion variables need support inside [0, 1]; conductances need
    nonnegative support.  Which fields are required depends on the
    membrane variant and the conductance model; `NetworkConfig.validate`
    enforces all of it with field-level messages.
    """

    v: Dist
    y: Dist
    w: Dist | None = None
    n: Dist | None = None
    m: Dist | None = None
    h: Dist | None = None
    j: dict[str, Dist] | None = None  # keyed by source-population label


# ---------------------------------------------------------------------------
# network configuration


@dataclass
class NetworkConfig:
    populations: list[tuple[PopulationParams, int]]
    pairs: dict[tuple[str, str], PairParams]
    conductance: Conductance
    grid: TimeGrid
    seed: int
    init: dict[str, InitialLaw]
    thin: int = 1

    # -- structure helpers ---------------------------------------------------

    @property
    def labels(self) -> list[str]:
        return [p.label for p, _ in self.populations]

    @property
    def sizes(self) -> list[int]:
        return [n for _, n in self.populations]

    @property
    def total_neurons(self) -> int:
        return sum(self.sizes)

    def proportions(self) -> list[float]:
        n = self.total_neurons
        return [s / n for s in self.sizes]

    def population_slices(self) -> list[tuple[int, int]]:
        out, lo = [], 0
        for s in self.sizes:
            out.append((lo, lo + s))
            lo += s
        return out

    def population_of(self) -> np.ndarray:
        """Population index of each neuron column (block layout)."""
        return np.repeat(np.arange(len(self.populations)), self.sizes)

    def with_total_neurons(self, total: int) -> "NetworkConfig":
        """Same config rescaled to `total` neurons at identical proportions."""
        props = self.proportions()
        sizes = [p * total for p in props]
        rounded = [round(s) for s in sizes]
        if any(abs(s - r) > 1e-9 for s, r in zip(sizes, rounded)) or sum(rounded) != total:
            raise ConfigError([
                f"total {total} is incompatible with fixed proportions "
                f"{[f'{p:.6g}' for p in props]} (population sizes must stay integral)"
            ])
        if any(r < 1 for r in rounded):
            raise ConfigError([f"total {total} leaves an empty population"])
        pops = [(p, r) for (p, _), r in zip(self.populations, rounded)]
        return replace(self, populations=pops)

    # -- validation -----------------------------------------------------------

    def validate(self) -> list[str]:
        errs: list[str] = []
        if not self.populations:
            errs.append("populations: at least one population is required")
            return errs
        if len(self.populations) > 8:
            errs.append("populations: at most 8 populations are supported")
        labels = self.labels
        if len(set(labels)) != len(labels):
            errs.append("populations: labels must be unique")
        for pop, n in self.populations:
            if n < 1:
                errs.append(f"populations[{pop.label!r}].n: population must have at least one neuron")
        for a in labels:
            for g in labels:
                if (a, g) not in self.pairs:
                    errs.append(f"pairs[{a!r}->{g!r}]: missing synaptic parameters")
                elif self.conductance is Conductance.SIGN_PRESERVING and self.pairs[(a, g)].theta <= 0:
                    errs.append(f"pairs[{a!r}->{g!r}].theta: must be > 0 for the sign-preserving variant")
        if not 0 <= self.seed < (1 << 63):
            errs.append("seed: must be a nonnegative 63-bit integer")
        if self.thin < 1:
            errs.append("thin: must be >= 1")
        for pop, _ in self.populations:
            law = self.init.get(pop.label)
            if law is None:
                errs.append(f"init[{pop.label!r}]: missing initial law")
                continue
            errs.extend(self._check_law(pop, law, labels))
        return errs

    def _check_law(self, pop: PopulationParams, law: InitialLaw, labels: list[str]) -> list[str]:
        errs = []
        pre = f"init[{pop.label!r}]"

        def support_in(d: Dist, lo: float, hi: float) -> bool:
            slo, shi = d.support()
            return slo >= lo and shi <= hi

        if not support_in(law.y, 0.0, 1.0):
            errs.append(f"{pre}.y: support must lie in [0, 1]")
        if pop.is_hh:
            if law.w is not None:
                errs.append(f"{pre}.w: HH population carries no recovery variable")
            for name in GATES:
                d = getattr(law, name)
                if d is None:
                    errs.append(f"{pre}.{name}: gate initial law required for HH population")
                elif not support_in(d, 0.0, 1.0):
                    errs.append(f"{pre}.{name}: support must lie in [0, 1]")
        else:
            if law.w is None:
                errs.append(f"{pre}.w: recovery initial law required for FHN population")
            for name in GATES:
                if getattr(law, name) is not None:
                    errs.append(f"{pre}.{name}: FHN population carries no gates")
        if self.conductance is Conductance.SIGN_PRESERVING:
            if law.j is None:
                errs.append(f"{pre}.j: conductance initial laws required for the sign-preserving variant")
            else:
                for g in labels:
                    d = law.j.get(g)
                    if d is None:
                        errs.append(f"{pre}.j[{g!r}]: missing conductance initial law")
                    elif not support_in(d, 0.0, math.inf):
                        errs.append(f"{pre}.j[{g!r}]: support must be nonnegative")
        elif law.j is not None:
            errs.append(f"{pre}.j: the simple variant carries no conductance state")
        return errs

    def validate_or_raise(self) -> None:
        errs = self.validate()
        if errs:
            raise ConfigError(errs)


def population_sums(y: np.ndarray, slices: Sequence[tuple[int, int]]) -> np.ndarray:
    """Per-population mean of y over the neuron axis (the last one), O(N).

    Returns an array of shape y.shape[:-1] + (n_populations,); every entry
    lies in [0, 1] whenever y does.
    """
    parts = [y[..., lo:hi].mean(axis=-1) for lo, hi in slices]
    return np.stack(parts, axis=-1)


# ---------------------------------------------------------------------------
# engine


@dataclass
class _Plan:
    pops: list[PopulationParams]
    labels: list[str]
    slices: list[tuple[int, int]]
    n_cols: int
    conductance: Conductance
    v_rev: np.ndarray    # (P, P) target x source
    j_mean: np.ndarray
    sigma_j: np.ndarray
    cir: list[list[CirParams]] | None
    any_hh: bool
    any_fhn: bool
    components: list[int]
    init_laws: list[InitialLaw]
    dt: float
    sqrt_dt: float
    n_steps: int


def _make_plan(config: NetworkConfig) -> _Plan:
    pops = [p for p, _ in config.populations]
    labels = config.labels
    P = len(pops)
    v_rev = np.zeros((P, P))
    j_mean = np.zeros((P, P))
    sigma_j = np.zeros((P, P))
    cir: list[list[CirParams]] | None = None
    for a, la in enumerate(labels):
        for g, lg in enumerate(labels):
            pair = config.pairs[(la, lg)]
            v_rev[a, g] = pair.v_rev
            j_mean[a, g] = pair.j_mean
            sigma_j[a, g] = pair.sigma_j
    sign_preserving = config.conductance is Conductance.SIGN_PRESERVING
    if sign_preserving:
        cir = [
            [
                CirParams(
                    theta=config.pairs[(la, lg)].theta,
                    j_mean=config.pairs[(la, lg)].j_mean,
                    sigma_j=config.pairs[(la, lg)].sigma_j,
                )
                for lg in labels
            ]
            for la in labels
        ]
    any_hh = any(p.is_hh for p in pops)
    any_fhn = any(not p.is_hh for p in pops)
    comps = [int(Component.V), int(Component.Y)]
    if any_hh:
        comps += [int(Component.GATE_N), int(Component.GATE_M), int(Component.GATE_H)]
    comps += [Component.j(g) for g in range(P)]
    return _Plan(
        pops=pops,
        labels=labels,
        slices=config.population_slices(),
        n_cols=config.total_neurons,
        conductance=config.conductance,
        v_rev=v_rev,
        j_mean=j_mean,
        sigma_j=sigma_j,
        cir=cir,
        any_hh=any_hh,
        any_fhn=any_fhn,
        components=comps,
        init_laws=[config.init[l] for l in labels],
        dt=config.grid.dt,
        sqrt_dt=math.sqrt(config.grid.dt) if config.grid.n_steps else 0.0,
        n_steps=config.grid.n_steps,
    )


@dataclass
class NeuronStates:
    v: np.ndarray
    y: np.ndarray
    w: np.ndarray
    n: np.ndarray
    m: np.ndarray
    h: np.ndarray
    j: np.ndarray | None  # (B, n_cols, P)

    def copy(self) -> "NeuronStates":
        return NeuronStates(
            v=self.v.copy(), y=self.y.copy(), w=self.w.copy(),
            n=self.n.copy(), m=self.m.copy(), h=self.h.copy(),
            j=None if self.j is None else self.j.copy(),
        )


def _draw_initial(plan: _Plan, noise: BlockNoise, path_ids: Sequence[int]) -> NeuronStates:
    B, N, P = len(path_ids), plan.n_cols, len(plan.pops)
    st = NeuronStates(
        v=np.zeros((B, N)), y=np.zeros((B, N)), w=np.zeros((B, N)),
        n=np.zeros((B, N)), m=np.zeros((B, N)), h=np.zeros((B, N)),
        j=np.zeros((B, N, P)) if plan.conductance is Conductance.SIGN_PRESERVING else None,
    )
    for b, pid in enumerate(path_ids):
        gens = {c: noise.init_stream(pid, c) for c in (
            Component.INIT_V, Component.INIT_Y, Component.INIT_W,
            Component.INIT_GATE_N, Component.INIT_GATE_M, Component.INIT_GATE_H,
        )}
        jgens = [noise.init_stream(pid, Component.init_j(g)) for g in range(P)]
        for a, (lo, hi) in enumerate(plan.slices):
            law = plan.init_laws[a]
            size = hi - lo
            st.v[b, lo:hi] = law.v.sample(gens[Component.INIT_V], size)
            st.y[b, lo:hi] = law.y.sample(gens[Component.INIT_Y], size)
            if plan.pops[a].is_hh:
                st.n[b, lo:hi] = law.n.sample(gens[Component.INIT_GATE_N], size)
                st.m[b, lo:hi] = law.m.sample(gens[Component.INIT_GATE_M], size)
                st.h[b, lo:hi] = law.h.sample(gens[Component.INIT_GATE_H], size)
            else:
                st.w[b, lo:hi] = law.w.sample(gens[Component.INIT_W], size)
            if st.j is not None:
                for g, lg in enumerate(plan.labels):
                    st.j[b, lo:hi, g] = law.j[lg].sample(jgens[g], size)
    return st


def _advance(plan: _Plan, st: NeuronStates, ybar: np.ndarray, draws: dict[int, np.ndarray],
             t: float, update_j: bool = True) -> NeuronStates:
    """One Euler step of every column.

    ybar holds the interaction aggregates, shape (P,) for a deterministic
    curve or (B, P) for empirical per-path means; it broadcasts against
    the (B, block) state slices either way.
    """
    dt, sqrt_dt = plan.dt, plan.sqrt_dt
    sign_preserving = plan.conductance is Conductance.SIGN_PRESERVING
    out = NeuronStates(
        v=np.empty_like(st.v), y=np.empty_like(st.y),
        w=st.w.copy() if plan.any_fhn else st.w,
        n=st.n.copy() if plan.any_hh else st.n,
        m=st.m.copy() if plan.any_hh else st.m,
        h=st.h.copy() if plan.any_hh else st.h,
        j=np.empty_like(st.j) if (st.j is not None and update_j) else st.j,
    )
    ybar = np.asarray(ybar)
    for a, (lo, hi) in enumerate(plan.slices):
        pop = plan.pops[a]
        vs = st.v[:, lo:hi]
        ys = st.y[:, lo:hi]
        if pop.is_hh:
            q = (st.n[:, lo:hi], st.m[:, lo:hi], st.h[:, lo:hi])
        else:
            q = st.w[:, lo:hi]
        drift_v = np.asarray(eval_membrane_drift(pop, t, vs, q), dtype=float).copy()
        noise_v = pop.sigma_v * draws[int(Component.V)][:, lo:hi]
        for g in range(len(plan.pops)):
            ybg = ybar[..., g, None] if ybar.ndim == 2 else ybar[g]
            dv = vs - plan.v_rev[a, g]
            if sign_preserving:
                drift_v -= dv * st.j[:, lo:hi, g] * ybg
            else:
                drift_v -= dv * plan.j_mean[a, g] * ybg
                if plan.sigma_j[a, g] != 0.0:
                    noise_v = noise_v - dv * plan.sigma_j[a, g] * ybg * draws[Component.j(g)][:, lo:hi]
        out.v[:, lo:hi] = vs + drift_v * dt + noise_v * sqrt_dt

        dy, sy = synapse_fields(pop, vs, ys)
        out.y[:, lo:hi] = step_euler_confined(ys, dy, sy, dt, draws[int(Component.Y)][:, lo:hi] * sqrt_dt)

        if pop.is_hh:
            for gate, comp in (("n", Component.GATE_N), ("m", Component.GATE_M), ("h", Component.GATE_H)):
                xs = getattr(st, gate)[:, lo:hi]
                dx, sx = gate_fields(pop.gates, gate, vs, xs, pop.cutoff)
                getattr(out, gate)[:, lo:hi] = step_euler_confined(
                    xs, dx, sx, dt, draws[int(comp)][:, lo:hi] * sqrt_dt
                )
        else:
            out.w[:, lo:hi] = st.w[:, lo:hi] + recovery_drift(pop.membrane, vs, st.w[:, lo:hi]) * dt

        if sign_preserving and update_j:
            for g in range(len(plan.pops)):
                out.j[:, lo:hi, g] = step_cir(
                    st.j[:, lo:hi, g], plan.cir[a][g], dt, draws[Component.j(g)][:, lo:hi] * sqrt_dt
                )
    return out


def network_noise(config: NetworkConfig, path_ids: Sequence[int]) -> BlockNoise:
    """The keyed increment source a step-by-step caller shares with `simulate`."""
    plan = _make_plan(config)
    return BlockNoise(config.seed, list(path_ids), plan.components, plan.n_cols,
                      config.grid.n_steps)


def draw_initial_states(config: NetworkConfig, path_ids: Sequence[int]) -> NeuronStates:
    """Initial state arrays of shape (len(path_ids), N), from the keyed laws."""
    config.validate_or_raise()
    plan = _make_plan(config)
    return _draw_initial(plan, network_noise(config, path_ids), path_ids)


def _step_network(config: NetworkConfig, states: NeuronStates, sums: np.ndarray,
                  draws: dict[int, np.ndarray], t: float, variant: Conductance) -> NeuronStates:
    if config.conductance is not variant:
        raise ConfigError([f"configuration uses the {config.conductance.value} variant"])
    return _advance(_make_plan(config), states, np.asarray(sums, dtype=float), draws, t)


def step_network_simple(config: NetworkConfig, states: NeuronStates, sums: np.ndarray,
                        draws: dict[int, np.ndarray], t: float) -> NeuronStates:
    """One Euler step of the white-noise-conductance network.

    `sums` holds the per-population interaction aggregates, (P,) for a
    deterministic curve value or (B, P) for empirical means; `draws` is
    one step's worth of raw increments as produced by `network_noise`.
    """
    return _step_network(config, states, sums, draws, t, Conductance.SIMPLE)


def step_network_sign_preserving(config: NetworkConfig, states: NeuronStates, sums: np.ndarray,
                                 draws: dict[int, np.ndarray], t: float) -> NeuronStates:
    """One Euler step of the network with mean-reverting nonnegative conductances."""
    return _step_network(config, states, sums, draws, t, Conductance.SIGN_PRESERVING)


def _ensure_finite(v: np.ndarray, k: int, t: float, path_ids: Sequence[int]) -> None:
    if np.isfinite(v).all():
        return
    b, col = np.argwhere(~np.isfinite(v))[0]
    raise SimulationDiverged(
        f"non-finite membrane potential at step {k} (t = {t:.6g} ms), "
        f"path {path_ids[int(b)]}, neuron {int(col)}"
    )


# ---------------------------------------------------------------------------
# trajectory storage


@dataclass
class PathEnsemble:
    """Thinned trajectories of one simulation batch plus full-resolution extremes."""

    times: np.ndarray
    store_steps: np.ndarray
    labels: list[str]
    pop_of: np.ndarray
    data: dict[str, np.ndarray]       # component -> (n_paths, n_stored, N)
    j: np.ndarray | None              # (n_paths, n_stored, N, P)
    seed: int
    config_hash: str
    extremes: dict[str, tuple[float, float]]
    block_means: dict[str, np.ndarray] | None = None  # component -> (P, n_steps + 1)
    block_se: dict[str, np.ndarray] | None = None

    @property
    def n_paths(self) -> int:
        return self.data["v"].shape[0]


def _store_indices(n_steps: int, thin: int) -> np.ndarray:
    idx = list(range(0, n_steps + 1, thin))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx, dtype=int)


class _NodeStats:
    """Online per-node block means (and SEs) of selected per-population stats."""

    def __init__(self, plan: _Plan, n_nodes: int):
        self.plan = plan
        P = len(plan.pops)
        self.sums = {name: np.zeros((P, n_nodes)) for name in ("y", "s")}
        self.sumsq = {name: np.zeros((P, n_nodes)) for name in ("y", "s")}
        self.count = np.zeros(len(plan.pops), dtype=int)
        self._nodes_seen = 0

    def accumulate(self, st: NeuronStates, node: int) -> None:
        for a, (lo, hi) in enumerate(self.plan.slices):
            ys = st.y[:, lo:hi]
            ss = np.asarray(eval_sigmoid(self.plan.pops[a].sigmoid, st.v[:, lo:hi]))
            if node == 0:
                self.count[a] += ys.size
            self.sums["y"][a, node] += ys.sum()
            self.sumsq["y"][a, node] += (ys ** 2).sum()
            self.sums["s"][a, node] += ss.sum()
            self.sumsq["s"][a, node] += (ss ** 2).sum()

    def finalize(self) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        means, ses = {}, {}
        cnt = self.count[:, None].astype(float)
        for name in ("y", "s"):
            mean = self.sums[name] / cnt
            var = np.maximum(self.sumsq[name] / cnt - mean ** 2, 0.0)
            ses[name] = np.sqrt(var / np.maximum(cnt - 1, 1))
            means[name] = mean
        return means, ses


def simulate(config: NetworkConfig, n_paths: int = 1, *, path_offset: int = 0,
             ybar_curve: np.ndarray | None = None, collect_node_stats: bool = False,
             max_batch_cols: int = 1 << 19) -> PathEnsemble:
    """Simulate `n_paths` independent realizations of the network.

    With `ybar_curve` (shape (P, n_steps + 1)) the interaction reads the
    given deterministic per-population curve instead of the empirical
    means; that is how ensembles of independent limit copies are advanced.
    Results are a pure function of (config, path indices): batching,
    worker count, and buffer sizes cannot change a single bit.
    """
    config.validate_or_raise()
    plan = _make_plan(config)
    if ybar_curve is not None:
        ybar_curve = np.asarray(ybar_curve, dtype=float)
        if ybar_curve.shape != (len(plan.pops), plan.n_steps + 1):
            raise ConfigError([
                f"ybar_curve shape {ybar_curve.shape} does not match "
                f"(populations, nodes) = ({len(plan.pops)}, {plan.n_steps + 1})"
            ])
    store = _store_indices(plan.n_steps, config.thin)
    store_set = {int(k): i for i, k in enumerate(store)}
    n_stored = len(store)
    N, P = plan.n_cols, len(plan.pops)

    comp_names = ["v", "y"] + (["n", "m", "h"] if plan.any_hh else ["w"])
    data = {name: np.empty((n_paths, n_stored, N)) for name in comp_names}
    j_out = (np.empty((n_paths, n_stored, N, P))
             if plan.conductance is Conductance.SIGN_PRESERVING else None)
    tracked = ["y"] + (["n", "m", "h"] if plan.any_hh else []) + (
        ["j"] if plan.conductance is Conductance.SIGN_PRESERVING else [])
    extremes = {name: (math.inf, -math.inf) for name in tracked}
    stats = _NodeStats(plan, plan.n_steps + 1) if collect_node_stats else None

    batch = max(1, min(n_paths, max_batch_cols // max(N, 1)))
    times = config.grid.times()
    for b0 in range(0, n_paths, batch):
        ids = [path_offset + i for i in range(b0, min(b0 + batch, n_paths))]
        noise = BlockNoise(config.seed, ids, plan.components, N, plan.n_steps)
        st = _draw_initial(plan, noise, ids)
        _update_extremes(plan, st, extremes)
        _record(st, data, j_out, comp_names, b0, store_set, 0)
        if stats is not None:
            stats.accumulate(st, 0)
        for k in range(plan.n_steps):
            draws = noise.step(k)
            if ybar_curve is not None:
                ybar = ybar_curve[:, k]
            else:
                ybar = population_sums(st.y, plan.slices)
            st = _advance(plan, st, ybar, draws, times[k])
            _ensure_finite(st.v, k + 1, times[k + 1], ids)
            _update_extremes(plan, st, extremes)
            _record(st, data, j_out, comp_names, b0, store_set, k + 1)
            if stats is not None:
                stats.accumulate(st, k + 1)

    from .configio import config_hash  # local import: configio builds on this module

    block_means = block_se = None
    if stats is not None:
        block_means, block_se = stats.finalize()
    return PathEnsemble(
        times=times[store], store_steps=store, labels=plan.labels,
        pop_of=config.population_of(), data=data, j=j_out,
        seed=config.seed, config_hash=config_hash(config), extremes=extremes,
        block_means=block_means, block_se=block_se,
    )


def _record(st: NeuronStates, data, j_out, comp_names, b0, store_set, k) -> None:
    slot = store_set.get(k)
    if slot is None:
        return
    B = st.v.shape[0]
    rows = slice(b0, b0 + B)
    src = {"v": st.v, "y": st.y, "w": st.w, "n": st.n, "m": st.m, "h": st.h}
    for name in comp_names:
        data[name][rows, slot] = src[name]
    if j_out is not None:
        j_out[rows, slot] = st.j


def _update_extremes(plan: _Plan, st: NeuronStates, extremes: dict[str, tuple[float, float]]) -> None:
    tracked = [("y", st.y)]
    if plan.any_hh:
        tracked += [("n", st.n), ("m", st.m), ("h", st.h)]
    if st.j is not None:
        tracked.append(("j", st.j))
    for name, arr in tracked:
        lo, hi = extremes[name]
        extremes[name] = (min(lo, float(arr.min())), max(hi, float(arr.max())))


# ---------------------------------------------------------------------------
# lockstep-coupled pair (finite network vs independent limit copies)


@dataclass
class CoupledPaths:
    """Per-path supremum statistics of a coupled (network, limit-copies) pair."""

    sup_sq: np.ndarray                     # (n_paths,) sup_t sum_pops |state gap|^2 at representatives
    comp_sup_sq: dict[str, np.ndarray]     # per-component sup contributions
    representatives: list[int]
    terminal_v: np.ndarray | None          # (n_paths, N) network side
    terminal_v_tilde: np.ndarray | None
    terminal_y: np.ndarray | None
    max_gap_all: float                     # max over t, paths, ALL columns of |v gap|


def coupled_distance_paths(config: NetworkConfig, ybar_curve: np.ndarray, n_paths: int,
                           *, representatives: Sequence[int] | None = None,
                           path_offset: int = 0, collect_terminal: bool = False,
                           max_batch_cols: int = 1 << 19) -> CoupledPaths:
    """Advance the network and its copy system through shared noise.

    Both systems consume identical Brownian increments and identical
    initial draws; under the sign-preserving variant the copy system reads
    the very conductance paths of the network (one array, no re-draw).
    The copy system's interaction follows `ybar_curve`.
    """
    config.validate_or_raise()
    plan = _make_plan(config)
    ybar_curve = np.asarray(ybar_curve, dtype=float)
    if ybar_curve.shape != (len(plan.pops), plan.n_steps + 1):
        raise ConfigError([
            f"ybar_curve shape {ybar_curve.shape} does not match "
            f"(populations, nodes) = ({len(plan.pops)}, {plan.n_steps + 1})"
        ])
    N, P = plan.n_cols, len(plan.pops)
    if representatives is None:
        representatives = [lo for lo, _ in plan.slices]
    reps = np.asarray(representatives, dtype=int)
    if len(reps) != P:
        raise ValueError("one representative neuron per population is required")
    for a, (lo, hi) in enumerate(plan.slices):
        if not lo <= reps[a] < hi:
            raise ValueError(f"representative {reps[a]} not in population {plan.labels[a]!r}")

    comp_names = ("v", "y", "w", "gates", "j")
    sup_sq = np.zeros(n_paths)
    comp_sup = {name: np.zeros(n_paths) for name in comp_names}
    term_v = np.empty((n_paths, N)) if collect_terminal else None
    term_vt = np.empty((n_paths, N)) if collect_terminal else None
    term_y = np.empty((n_paths, N)) if collect_terminal else None
    max_gap_all = 0.0

    times = config.grid.times()
    batch = max(1, min(n_paths, max_batch_cols // max(N, 1)))
    for b0 in range(0, n_paths, batch):
        ids = [path_offset + i for i in range(b0, min(b0 + batch, n_paths))]
        rows = slice(b0, b0 + len(ids))
        noise = BlockNoise(config.seed, ids, plan.components, N, plan.n_steps)
        st_n = _draw_initial(plan, noise, ids)
        st_t = st_n.copy()
        if st_t.j is not None:
            st_t.j = st_n.j  # pathwise-shared conductances
        b_sup = np.zeros(len(ids))
        b_comp = {name: np.zeros(len(ids)) for name in comp_names}
        for k in range(plan.n_steps):
            draws = noise.step(k)
            ybar_emp = population_sums(st_n.y, plan.slices)
            st_n = _advance(plan, st_n, ybar_emp, draws, times[k])
            st_t = _advance(plan, st_t, ybar_curve[:, k], draws, times[k], update_j=False)
            if st_t.j is not None:
                st_t.j = st_n.j
            _ensure_finite(st_n.v, k + 1, times[k + 1], ids)
            _ensure_finite(st_t.v, k + 1, times[k + 1], ids)
            contrib = _rep_distances(plan, st_n, st_t, reps)
            total = sum(contrib.values())
            np.maximum(b_sup, total, out=b_sup)
            for name in comp_names:
                np.maximum(b_comp[name], contrib[name], out=b_comp[name])
            gap = float(np.max(np.abs(st_n.v - st_t.v)))
            max_gap_all = max(max_gap_all, gap)
        sup_sq[rows] = b_sup
        for name in comp_names:
            comp_sup[name][rows] = b_comp[name]
        if collect_terminal:
            term_v[rows] = st_n.v
            term_vt[rows] = st_t.v
            term_y[rows] = st_n.y
    return CoupledPaths(
        sup_sq=sup_sq, comp_sup_sq=comp_sup, representatives=reps.tolist(),
        terminal_v=term_v, terminal_v_tilde=term_vt, terminal_y=term_y,
        max_gap_all=max_gap_all,
    )


def _rep_distances(plan: _Plan, st_n: NeuronStates, st_t: NeuronStates, reps: np.ndarray) -> dict[str, np.ndarray]:
    dv = (st_n.v[:, reps] - st_t.v[:, reps]) ** 2
    dy = (st_n.y[:, reps] - st_t.y[:, reps]) ** 2
    dw = (st_n.w[:, reps] - st_t.w[:, reps]) ** 2
    dg = ((st_n.n[:, reps] - st_t.n[:, reps]) ** 2
          + (st_n.m[:, reps] - st_t.m[:, reps]) ** 2
          + (st_n.h[:, reps] - st_t.h[:, reps]) ** 2)
    if st_n.j is not None:
        dj = ((st_n.j[:, reps, :] - st_t.j[:, reps, :]) ** 2).sum(axis=-1)
    else:
        dj = np.zeros_like(dv)
    return {
        "v": dv.sum(axis=1), "y": dy.sum(axis=1), "w": dw.sum(axis=1),
        "gates": dg.sum(axis=1), "j": dj.sum(axis=1),
    }
