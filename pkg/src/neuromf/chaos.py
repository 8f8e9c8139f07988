"""Coupling-based convergence diagnostics for the finite network.

For each Monte Carlo path the network and a bank of independent limit
copies are driven by the same Brownian families, start from the same
initial draws, and (sign-preserving variant) share the conductance paths
outright.  The per-path observable is the supremum over the time grid of
the summed squared state gap at one representative neuron per population;
its sample mean D(N) over paths, swept across network sizes at fixed
population proportions, carries the convergence-rate content: D(N) should
fall with N and sqrt(N) * D(N) should stay bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .errors import ConfigError
from .meanfield import MeanCurve, MeanFieldSolution, solve_fixed_point, wasserstein2_marginal
from .network import CoupledPaths, NetworkConfig, coupled_distance_paths, simulate


@dataclass
class CouplingRun:
    """Per-path sup-distance samples of one coupled run at one network size."""

    n_total: int
    labels: list[str]
    proportions: list[float]
    representatives: list[int]
    sup_sq: np.ndarray                  # (n_paths,)
    comp_sup_sq: dict[str, np.ndarray]
    max_gap_all: float
    coupled: CoupledPaths | None = None  # terminal samples, when collected


@dataclass
class RateFit:
    slope: float
    intercept: float
    ci_lo: float
    ci_hi: float
    used: list[tuple[int, float]]
    excluded: list[tuple[int, float]]


@dataclass
class CouplingReport:
    ns: list[int]
    d_hat: list[float]
    se: list[float]
    sqrtn_d: list[float]
    fit: RateFit
    n_paths: int

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.ns, self.d_hat, self.se, self.sqrtn_d))


def run_coupled(config: NetworkConfig, ybar: MeanCurve | np.ndarray, n_paths: int,
                *, representatives=None, path_offset: int = 0,
                collect_terminal: bool = False) -> CouplingRun:
    """Simulate the coupled pair and collect per-path sup distances.

    `ybar` is the converged mean-proportion curve the limit copies follow;
    any fixed-point error in it biases every network size equally and so
    cancels from the N-trend the sweep reads.
    """
    if isinstance(ybar, MeanCurve):
        if len(ybar.times) != config.grid.n_steps + 1 or not np.allclose(
                ybar.times, config.grid.times(), rtol=0, atol=1e-12):
            raise ConfigError(["mean curve grid does not match the configuration grid"])
        curve = ybar.y_bar
    else:
        curve = np.asarray(ybar, dtype=float)
    res: CoupledPaths = coupled_distance_paths(
        config, curve, n_paths, representatives=representatives,
        path_offset=path_offset, collect_terminal=collect_terminal,
    )
    return CouplingRun(
        n_total=config.total_neurons, labels=config.labels,
        proportions=config.proportions(), representatives=res.representatives,
        sup_sq=res.sup_sq, comp_sup_sq=res.comp_sup_sq, max_gap_all=res.max_gap_all,
        coupled=res if collect_terminal else None,
    )


def estimate_distance(run: CouplingRun) -> tuple[float, float]:
    """Sample mean of the per-path sups and its CLT standard error."""
    sups = np.asarray(run.sup_sq, dtype=float)
    if sups.size < 2:
        raise ValueError("need at least two coupled paths")
    return float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(sups.size))


def fit_rate(points: list[tuple[int, float]], confidence: float = 0.95) -> RateFit:
    """Ordinary least squares of log D on log N with a slope confidence band.

    Points with nonpositive distance cannot enter the log fit and are
    reported back as excluded.
    """
    used = [(int(n), float(d)) for n, d in points if d > 0]
    excluded = [(int(n), float(d)) for n, d in points if d <= 0]
    if len(used) < 3:
        raise ValueError("need at least three positive points to fit a rate")
    x = np.log(np.asarray([n for n, _ in used], dtype=float))
    y = np.log(np.asarray([d for _, d in used], dtype=float))
    n = len(used)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    if n > 2:
        s2 = float(np.sum(resid ** 2) / (n - 2))
        se_slope = math.sqrt(s2 / sxx)
        tq = float(scipy.stats.t.ppf(0.5 + confidence / 2, n - 2))
        half = tq * se_slope
    else:
        half = math.inf
    return RateFit(slope=slope, intercept=intercept, ci_lo=slope - half,
                   ci_hi=slope + half, used=used, excluded=excluded)


def sweep(base_config: NetworkConfig, ns: list[int], n_paths: int,
          *, solution: MeanFieldSolution | None = None, m_copies: int = 10_000,
          tol: float = 1e-3, max_iter: int = 20,
          path_offset: int = 0) -> tuple[CouplingReport, list[CouplingRun], MeanFieldSolution]:
    """Coupled runs across network sizes at fixed population proportions.

    One mean-field solve serves every N (the limit does not depend on N).
    The sweep refuses size lists that cannot keep the proportions integral.
    """
    if len(ns) < 2 or sorted(set(ns)) != list(ns):
        raise ConfigError(["sweep sizes must be strictly increasing"])
    configs = [base_config.with_total_neurons(n) for n in ns]  # raises on proportion drift
    if solution is None:
        solution = solve_fixed_point(base_config, m_copies=m_copies, tol=tol, max_iter=max_iter)
    d_hat, se = [], []
    runs = []
    for cfg in configs:
        run = run_coupled(cfg, solution.curve, n_paths, path_offset=path_offset)
        d, s = estimate_distance(run)
        runs.append(run)
        d_hat.append(d)
        se.append(s)
    fit = fit_rate(list(zip(ns, d_hat)))
    sqrtn_d = [math.sqrt(n) * d for n, d in zip(ns, d_hat)]
    report = CouplingReport(ns=list(ns), d_hat=d_hat, se=se, sqrtn_d=sqrtn_d,
                            fit=fit, n_paths=n_paths)
    return report, runs, solution


@dataclass
class MarginalCheck:
    labels: list[str]
    w2: dict[str, list[float]]          # per population, one W2 per inspected neuron
    w2_floor: dict[str, float]          # self-distance of two independent limit halves
    cross_corr: dict[str, float]        # corr of two same-population terminal voltages
    cross_corr_se: dict[str, float]


def marginal_chaos_check(config: NetworkConfig, k: int, n_paths: int,
                         solution: MeanFieldSolution, *, path_offset: int = 0) -> MarginalCheck:
    """Terminal-time distributional comparison of k neurons per population.

    For each population, the terminal-voltage sample of each of the first
    k neurons (across paths) is compared by quadratic transport distance
    with the limit-copy ensemble's terminal marginal; the noise floor is
    the distance between two halves of the limit ensemble itself.  The
    independence proxy is the cross-path correlation of the first two
    same-population neurons.
    """
    if k < 1 or k > min(config.sizes):
        raise ValueError("k must be between 1 and the smallest population size")
    ens = simulate(config, n_paths=n_paths, path_offset=path_offset)
    term_v = ens.data["v"][:, -1, :]                       # (n_paths, N)
    lim = solution.ensemble
    lim_v = lim.data["v"][0, -1, :]                        # (P * M,)
    m = lim_v.size // len(config.populations)
    w2, floor, corr, corr_se = {}, {}, {}, {}
    for a, (label, (lo, hi)) in enumerate(zip(config.labels, config.population_slices())):
        lim_a = lim_v[a * m:(a + 1) * m]
        half = m // 2
        floor[label] = wasserstein2_marginal(lim_a[:half], lim_a[half:])
        w2[label] = [
            wasserstein2_marginal(term_v[:, lo + i], lim_a) for i in range(k)
        ]
        x1, x2 = term_v[:, lo], term_v[:, lo + 1] if hi - lo > 1 else term_v[:, lo]
        r = float(np.corrcoef(x1, x2)[0, 1]) if hi - lo > 1 else 0.0
        corr[label] = r
        corr_se[label] = 1.0 / math.sqrt(max(n_paths - 3, 1))
    return MarginalCheck(labels=config.labels, w2=w2, w2_floor=floor,
                         cross_corr=corr, cross_corr_se=corr_se)
