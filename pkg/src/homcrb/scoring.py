"""Generalized Fisher scoring on coset spaces, plus a plain gradient
ascent baseline.

The scoring step preconditions the summed m-gradient with the inverse
reduced FIM and retracts through the group exponential:

    g <- g exp((Pi' Fbar^-1 grad / m)^)   on G/H,
    g <- exp((Pi' Fbar^-1 grad / m)^) g   on H\\G.

The h-components of every step are zero by construction, so iterates
never move along the fiber. Convergence is declared on the natural-
gradient step norm, which is invariant to basis rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fisher, groups
from .exceptions import DegenerateFimError, DivergenceError
from .groups import GroupElement
from .homspace import Side

ANALYTIC, MONTE_CARLO, FROZEN_AT_INITIAL = "analytic", "monte-carlo", "frozen-at-initial"
_FIM_MODES = (ANALYTIC, MONTE_CARLO, FROZEN_AT_INITIAL)
_DIVERGENCE_DROP = 1e3
_DRIFT_LIMIT = 1e-12


@dataclass(frozen=True)
class ScoringOptions:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-10
    fim_mode: str = ANALYTIC
    step_scale: float = 1.0
    mc_fim_samples: int = 20_000

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.fim_mode not in _FIM_MODES:
            raise ValueError(f"fim_mode must be one of {_FIM_MODES}")


@dataclass
class ScoringTrace:
    iterates: list[GroupElement]
    logliks: list[float]
    step_norms: list[float]
    grad_norms: list[float]
    converged: bool
    iterations_used: int
    max_drift: float = 0.0

    @property
    def final(self) -> GroupElement:
        return self.iterates[-1]


def _fim_provider(model, g0: GroupElement, opts: ScoringOptions, random_state):
    """Per-iterate reduced FIM callable; analytic when available, frozen
    Monte-Carlo at the initial point otherwise."""
    def analytic(g):
        return model.fim_reduced(g)

    if opts.fim_mode == ANALYTIC and analytic(g0) is not None:
        return analytic
    if opts.fim_mode == MONTE_CARLO:
        counter = [0]

        def per_iterate_mc(g):
            counter[0] += 1
            seed = None if random_state is None else [random_state, counter[0]]
            return fisher.fim(
                model,
                g,
                fisher.REDUCED,
                fisher.MC_GRADIENT,
                opts.mc_fim_samples,
                random_state=seed,
            ).matrix

        return per_iterate_mc
    frozen = analytic(g0)
    if frozen is None:
        frozen = fisher.fim(
            model,
            g0,
            fisher.REDUCED,
            fisher.MC_GRADIENT,
            opts.mc_fim_samples,
            random_state=random_state,
        ).matrix
    return lambda g: frozen


def _apply_step(model, g: GroupElement, step_m: np.ndarray) -> tuple[GroupElement, float]:
    struct = model.struct
    coords = np.concatenate([np.zeros(struct.n_H), step_m])
    move = groups.exp(struct.from_coords(coords))
    g_next = (g @ move) if struct.side == Side.G_MOD_H else (move @ g)
    drift = groups.manifold_defect(g_next)
    if drift > _DRIFT_LIMIT:
        g_next = groups.polar_project(g_next)
    return g_next, drift


def _solve_step(F: np.ndarray, mean_grad: np.ndarray) -> np.ndarray:
    cond = float(np.linalg.cond(F))
    if not math.isfinite(cond) or cond > 1e12:
        raise DegenerateFimError(
            f"reduced FIM singular at iterate (condition number {cond:.3e})",
            condition_number=cond,
        )
    return np.linalg.solve(F, mean_grad)


def fisher_scoring(
    model,
    observations,
    g0: GroupElement,
    opts: ScoringOptions | None = None,
    random_state=None,
) -> ScoringTrace:
    """Natural-gradient maximum-likelihood iteration; no step size.

    Stops once the preconditioned step norm falls below the tolerance
    (recorded, not applied) or after max_iterations applications.
    """
    opts = opts or ScoringOptions()
    struct = model.struct
    m = model.n_observations(observations)
    summary = model.summarize(observations)
    gram_m = struct.gram[struct.n_H :, struct.n_H :]
    provider = _fim_provider(model, g0, opts, random_state)

    g = g0
    trace = ScoringTrace(
        iterates=[g0],
        logliks=[model.total_loglik(summary, g0)],
        step_norms=[],
        grad_norms=[],
        converged=False,
        iterations_used=0,
    )

    def measure(point: GroupElement) -> np.ndarray:
        mean_grad = model.total_grad_m(summary, point) / m
        step = opts.step_scale * _solve_step(provider(point), mean_grad)
        trace.grad_norms.append(float(np.linalg.norm(mean_grad)))
        trace.step_norms.append(math.sqrt(float(step @ gram_m @ step)))
        return step

    for _ in range(opts.max_iterations):
        step = measure(g)
        if trace.step_norms[-1] <= opts.gradient_tolerance:
            trace.converged = True
            break
        g, drift = _apply_step(model, g, step)
        trace.max_drift = max(trace.max_drift, drift)
        ll = model.total_loglik(summary, g)
        if ll < max(trace.logliks) - _DIVERGENCE_DROP:
            trace.iterates.append(g)
            trace.logliks.append(ll)
            raise DivergenceError(
                f"log-likelihood dropped by more than {_DIVERGENCE_DROP:g}",
                trace=trace,
            )
        trace.iterates.append(g)
        trace.logliks.append(ll)
    else:
        measure(g)
        trace.converged = trace.step_norms[-1] <= opts.gradient_tolerance
    trace.iterations_used = len(trace.iterates) - 1
    return trace


def gradient_ascent(
    model,
    observations,
    g0: GroupElement,
    step0: float,
    decay: float = 1.0,
    max_iterations: int = 100,
    gradient_tolerance: float = 1e-10,
) -> ScoringTrace:
    """First-order baseline g <- g exp((alpha_k Pi' grad / m)^) with
    alpha_k = step0 decay^k; needs tuning, unlike Fisher scoring."""
    if step0 <= 0:
        raise ValueError("step0 must be positive")
    if not (0.0 < decay <= 1.0):
        raise ValueError("decay must be in (0, 1]")
    struct = model.struct
    m = model.n_observations(observations)
    summary = model.summarize(observations)
    gram_m = struct.gram[struct.n_H :, struct.n_H :]

    g = g0
    trace = ScoringTrace(
        iterates=[g0],
        logliks=[model.total_loglik(summary, g0)],
        step_norms=[],
        grad_norms=[],
        converged=False,
        iterations_used=0,
    )

    def measure(point: GroupElement, alpha: float) -> np.ndarray:
        mean_grad = model.total_grad_m(summary, point) / m
        step = alpha * mean_grad
        trace.grad_norms.append(float(np.linalg.norm(mean_grad)))
        trace.step_norms.append(math.sqrt(float(step @ gram_m @ step)))
        return step

    for k in range(max_iterations):
        step = measure(g, step0 * decay**k)
        if trace.step_norms[-1] <= gradient_tolerance:
            trace.converged = True
            break
        g, drift = _apply_step(model, g, step)
        trace.max_drift = max(trace.max_drift, drift)
        ll = model.total_loglik(summary, g)
        trace.iterates.append(g)
        trace.logliks.append(ll)
        if ll < max(trace.logliks) - _DIVERGENCE_DROP:
            raise DivergenceError(
                f"log-likelihood dropped by more than {_DIVERGENCE_DROP:g}",
                trace=trace,
            )
    else:
        measure(g, step0 * decay**max_iterations)
        trace.converged = trace.step_norms[-1] <= gradient_tolerance
    trace.iterations_used = len(trace.iterates) - 1
    return trace


def mle(
    model,
    observations,
    g0: GroupElement,
    opts: ScoringOptions | None = None,
    random_state=None,
) -> GroupElement:
    """Final Fisher-scoring iterate."""
    return fisher_scoring(model, observations, g0, opts, random_state).final
