"""Interacting neuron network SDE simulator with mean-field tooling.

Simulates finite populations of FitzHugh-Nagumo / Hodgkin-Huxley neurons
coupled through stochastic chemical synapses, solves the associated
mean-field limit self-consistently, and measures how fast the finite
network converges to that limit through an exact shared-noise coupling.
"""

from .chaos import CouplingReport, CouplingRun, estimate_distance, fit_rate, run_coupled, sweep
from .errors import ConfigError, SimulationDiverged, VariantMismatchError
from .meanfield import (
    MeanCurve,
    MeanFieldSolution,
    estimate_ms,
    simulate_limit_given_ybar,
    solve_fixed_point,
    wasserstein2_marginal,
    ybar_from_ms,
)
from .model import (
    CurrentSpec,
    CutoffSpec,
    FhnMembrane,
    GateRates,
    HhMembrane,
    PairParams,
    PopulationParams,
    SigmoidParams,
    eval_cutoff,
    eval_gate_rates,
    eval_membrane_drift,
    eval_sigmoid,
    gate_diffusion,
    gate_drift,
    synapse_diffusion,
    synapse_drift,
)
from .network import (
    Conductance,
    Dist,
    InitialLaw,
    NetworkConfig,
    NeuronStates,
    PathEnsemble,
    draw_initial_states,
    network_noise,
    population_sums,
    simulate,
    step_network_sign_preserving,
    step_network_simple,
)
from .rng import Component, RngStreamKey, gaussian_increments
from .stepping import CirParams, TimeGrid, step_cir, step_euler_confined, step_euler_free

__version__ = "0.1.0"

__all__ = [
    "CirParams", "Component", "ConfigError", "Conductance", "CouplingReport",
    "CouplingRun", "CurrentSpec", "CutoffSpec", "Dist", "FhnMembrane", "GateRates",
    "HhMembrane", "InitialLaw", "MeanCurve", "MeanFieldSolution", "NetworkConfig",
    "PairParams", "PathEnsemble", "PopulationParams", "RngStreamKey", "SigmoidParams",
    "SimulationDiverged", "TimeGrid", "VariantMismatchError", "estimate_distance",
    "estimate_ms", "eval_cutoff", "eval_gate_rates", "eval_membrane_drift",
    "eval_sigmoid", "fit_rate", "gate_diffusion", "gate_drift", "gaussian_increments",
    "NeuronStates", "draw_initial_states", "network_noise",
    "population_sums", "run_coupled", "simulate", "simulate_limit_given_ybar",
    "step_network_sign_preserving", "step_network_simple",
    "solve_fixed_point", "step_cir", "step_euler_confined", "step_euler_free",
    "sweep", "synapse_diffusion", "synapse_drift", "wasserstein2_marginal",
    "ybar_from_ms",
]
