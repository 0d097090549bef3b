"""Cramer-Rao bounds on groups and homogeneous spaces.

Estimator statistics are collected in the adapted basis: trial estimates
are horizontally lifted, so their invariant errors live in m and the
bias/covariance carry the h-block-zero pattern. The exact group bound is
Phi F^+ Phi' with Phi the expected log-derivative correction
E[Psi_{-eta}] (left errors) or E[Psi_{eta'}] (right errors) plus the
bias Jacobian; unbiasedness (zero Jacobian) is the default assumption.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import fisher, groups
from .exceptions import DegenerateModelError, LiftFailureError, UnsupportedMethodError
from .groups import AlgebraVector, GroupElement
from .homspace import ReductiveStructure, Side, coset_error, selector_pi

log = logging.getLogger("homcrb.crb")

PINV_RCOND = 1e-10
_COND_LIMIT = 1e12


def _bound_ready_matrix(fim_matrix: fisher.FimMatrix) -> np.ndarray:
    """Hessian-form Monte-Carlo estimates can carry tiny negative
    eigenvalues from second-difference noise; floor them at zero before
    inverting (logged). Other estimations are PSD by construction."""
    F = fim_matrix.matrix
    if fim_matrix.estimation != fisher.MC_HESSIAN:
        return F
    eigvals, eigvecs = np.linalg.eigh(F)
    if eigvals.min() >= 0.0:
        return F
    log.info(
        "flooring %d negative eigenvalues (min %.3e) of a Hessian-form FIM",
        int(np.sum(eigvals < 0)),
        float(eigvals.min()),
    )
    return (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T

GROUP_EXACT_LEFT = "group-exact-left"
GROUP_EXACT_RIGHT = "group-exact-right"
HOMOGENEOUS_EXACT = "homogeneous-exact"
HOMOGENEOUS_THIRD_ORDER = "homogeneous-third-order-unbiased"


@dataclass(frozen=True, eq=False)
class EstimatorStats:
    """Monte-Carlo error statistics of an estimator at a reference point.

    errors hold the lifted invariant errors (left-invariant eta on G/H,
    right-invariant eta' on H\\G); variance_on_G uses the raw, unlifted
    group error, which is what fails to approach the CRB in the presence
    of symmetries.
    """

    at: GroupElement
    struct: ReductiveStructure
    errors: tuple[AlgebraVector, ...]
    error_coords: np.ndarray  # (n_trials, n_G) adapted coordinates
    bias: np.ndarray
    covariance: np.ndarray
    variance_on_G: float
    variance_on_coset: float
    n_trials: int


def estimator_stats(
    g_ref: GroupElement,
    estimates,
    struct: ReductiveStructure,
) -> EstimatorStats:
    """Lift each estimate onto the cross-section through g_ref and form
    bias, covariance, and the two variances."""
    raw_sq = []
    coords_rows = []
    errors = []
    for idx, est in enumerate(estimates):
        if struct.side == Side.G_MOD_H:
            raw = groups.log(g_ref.inverse() @ est)
        else:
            raw = groups.log(est @ g_ref.inverse())
        raw_sq.append(struct.norm(struct.coords_of(raw)) ** 2)
        try:
            ce = coset_error(g_ref, est, struct)
        except LiftFailureError as exc:
            raise LiftFailureError(
                f"trial {idx}: {exc}",
                iterations=exc.iterations,
                residual=exc.residual,
            ) from exc
        errors.append(ce.eta_full)
        coords_rows.append(ce.eta_struct)
    coords = np.array(coords_rows)
    n = len(coords)
    bias = coords.mean(axis=0)
    centered = coords - bias
    covariance = (centered.T @ centered) / n
    G_m = struct.gram[struct.n_H :, struct.n_H :]
    reduced = coords[:, struct.n_H :]
    variance_on_coset = float(np.mean(np.einsum("ti,ij,tj->t", reduced, G_m, reduced)))
    return EstimatorStats(
        at=g_ref,
        struct=struct,
        errors=tuple(errors),
        error_coords=coords,
        bias=bias,
        covariance=covariance,
        variance_on_G=float(np.mean(raw_sq)),
        variance_on_coset=variance_on_coset,
        n_trials=n,
    )


@dataclass(frozen=True, eq=False)
class CrbReport:
    bound_matrix: np.ndarray
    bound_trace: float
    variant: str
    phi: np.ndarray | None
    delta: np.ndarray | None


def _report(matrix: np.ndarray, variant: str, phi=None, delta=None) -> CrbReport:
    matrix = 0.5 * (matrix + matrix.T)  # kill rounding asymmetry
    return CrbReport(
        bound_matrix=matrix,
        bound_trace=float(np.trace(matrix)),
        variant=variant,
        phi=phi,
        delta=delta,
    )


def phi_matrix(
    stats: EstimatorStats,
    bias_jacobian: np.ndarray | None = None,
    psi_order: int = 10,
) -> np.ndarray:
    """Phi = E[Psi_{-eta}] (G/H) or E[Psi_{eta'}] (H\\G), plus the bias
    Jacobian when one is supplied (unbiasedness is assumed otherwise)."""
    struct = stats.struct
    sign = -1.0 if struct.side == Side.G_MOD_H else 1.0
    n_G = struct.group.algebra_dim
    acc = np.zeros((n_G, n_G))
    for row in stats.error_coords:
        acc += struct.psi(sign * row, order=psi_order)
    acc /= max(len(stats.error_coords), 1)
    if bias_jacobian is not None:
        acc = acc + bias_jacobian
    return acc


def crb_group(fim_matrix: fisher.FimMatrix, phi: np.ndarray) -> CrbReport:
    """Exact group-level bound Phi F^+ Phi' (Moore-Penrose, relative
    singular-value threshold 1e-10). The frame and the Phi variant must
    match: left FIM with the left-error Phi, right FIM with the
    right-error Phi'."""
    if fim_matrix.frame not in (fisher.LEFT, fisher.RIGHT):
        raise ValueError("crb_group expects a left- or right-frame FIM")
    F_pinv = np.linalg.pinv(
        _bound_ready_matrix(fim_matrix), rcond=PINV_RCOND, hermitian=True
    )
    variant = (
        GROUP_EXACT_LEFT if fim_matrix.frame == fisher.LEFT else GROUP_EXACT_RIGHT
    )
    return _report(phi @ F_pinv @ phi.T, variant, phi=phi)


def _checked_inverse(fim_matrix: fisher.FimMatrix) -> np.ndarray:
    F = _bound_ready_matrix(fim_matrix)
    cond = float(np.linalg.cond(F))
    if not math.isfinite(cond) or cond > _COND_LIMIT:
        raise DegenerateModelError(
            f"reduced FIM is numerically singular (condition number {cond:.3e})",
            condition_number=cond,
        )
    return np.linalg.inv(F)


def crb_homogeneous(
    fim_reduced: fisher.FimMatrix,
    phi: np.ndarray,
    struct: ReductiveStructure,
) -> CrbReport:
    """Coset-space bound (Pi Phi Pi') Fbar^-1 (Pi Phi Pi')'."""
    if fim_reduced.frame != fisher.REDUCED:
        raise ValueError("crb_homogeneous expects a reduced-frame FIM")
    F_inv = _checked_inverse(fim_reduced)
    Pi = selector_pi(struct)
    core = Pi @ phi @ Pi.T
    return _report(core @ F_inv @ core.T, HOMOGENEOUS_EXACT, phi=phi)


def crb_third_order(fim_reduced: fisher.FimMatrix, delta: np.ndarray) -> CrbReport:
    """Third-order unbiased bound (I + Delta) Fbar^-1 (I + Delta)'."""
    if fim_reduced.frame != fisher.REDUCED:
        raise ValueError("crb_third_order expects a reduced-frame FIM")
    F_inv = _checked_inverse(fim_reduced)
    core = np.eye(F_inv.shape[0]) + delta
    return _report(core @ F_inv @ core.T, HOMOGENEOUS_THIRD_ORDER, delta=delta)


def delta_matrix(errors, struct: ReductiveStructure) -> np.ndarray:
    """Delta = Pi E[ad_eta^2 / 12] Pi' from error samples (adapted
    coordinates or AlgebraVectors).

    ad is linear in eta, so E[ad_eta^2] = sum_kl E[eta_k eta_l] T_k T_l
    with T_k the adapted-basis ad matrices; only the sample second moment
    is accumulated.
    """
    n_G = struct.group.algebra_dim
    rows = []
    for err in errors:
        if isinstance(err, AlgebraVector):
            rows.append(struct.coords_of(err))
        else:
            rows.append(np.asarray(err, dtype=float))
    if not rows:
        return np.zeros((struct.n_Theta, struct.n_Theta))
    coords = np.array(rows)
    second = coords.T @ coords / len(coords)
    T = np.stack([struct.ad(struct.from_coords(e)) for e in np.eye(n_G)])
    mean = np.einsum("kl,kij,ljm->im", second, T, T) / 12.0
    return mean[struct.n_H :, struct.n_H :].copy()


def variance_bound(fim_reduced: fisher.FimMatrix) -> float:
    """tr(Fbar^-1): the coset-space variance bound for unbiased
    estimators, representative-independent under Ad_H-invariance."""
    if fim_reduced.frame != fisher.REDUCED:
        raise ValueError("variance_bound expects a reduced-frame FIM")
    return float(np.trace(_checked_inverse(fim_reduced)))


def efficiency_residual(
    model,
    observations,
    g_ref: GroupElement,
    estimates,
    struct: ReductiveStructure,
    c: float | None = None,
    psi_order: int = 10,
) -> float:
    """Mean over trials of |eta - b - c Phi Pi' Fbar^-1 grad|.

    Zero exactly when the estimator is efficient at that c; when c is
    None a 1-D least-squares fit over the trials picks it. The true bias
    b is taken as zero (unbiasedness default).
    """
    if len(observations) != len(estimates):
        raise ValueError("need one observation set per estimate")
    stats = estimator_stats(g_ref, estimates, struct)
    phi = phi_matrix(stats, psi_order=psi_order)
    F1 = model.fim_reduced(g_ref)
    if F1 is None:
        raise UnsupportedMethodError("model provides no analytic reduced FIM")
    Pi = selector_pi(struct)
    core = phi @ Pi.T
    predictions = []
    for obs in observations:
        m = model.n_observations(obs)
        grad_tot = model.total_grad_m(model.summarize(obs), g_ref)
        predictions.append(core @ np.linalg.solve(m * F1, grad_tot))
    V = np.array(predictions)
    E = stats.error_coords
    if c is None:
        denom = float(np.einsum("ti,ij,tj->", V, struct.gram, V))
        if denom == 0.0:
            c = 0.0
        else:
            c = float(np.einsum("ti,ij,tj->", E, struct.gram, V)) / denom
    R = E - c * V
    return float(np.mean([struct.norm(r) for r in R]))


def bias_jacobian(
    model,
    g_ref: GroupElement,
    estimator_fn,
    struct: ReductiveStructure,
    n_samples: int,
    h: float = 1e-3,
    random_state=None,
    obs_per_trial: int = 1,
) -> np.ndarray:
    """Finite-difference Jacobian of the Monte-Carlo bias along the
    adapted basis directions, with common random numbers across the +/-
    perturbations of each direction."""
    n_G = struct.group.algebra_dim
    left = struct.side == Side.G_MOD_H
    base_entropy = 0 if random_state is None else int(random_state)

    def bias_at(g: GroupElement, seed_salt: int) -> np.ndarray:
        acc = np.zeros(n_G)
        for t in range(n_samples):
            rng = np.random.default_rng([base_entropy, seed_salt, t])
            obs = model.sample(g, obs_per_trial, rng)
            est = estimator_fn(obs, g)
            raw = groups.log(g.inverse() @ est) if left else groups.log(est @ g.inverse())
            acc += struct.coords_of(raw)
        return acc / n_samples

    J = np.zeros((n_G, n_G))
    for j, direction in enumerate(struct.basis):
        step_p = groups.exp(AlgebraVector(struct.group, h * direction.coords))
        step_m = groups.exp(AlgebraVector(struct.group, -h * direction.coords))
        if left:
            g_p, g_m = g_ref @ step_p, g_ref @ step_m
        else:
            g_p, g_m = step_p @ g_ref, step_m @ g_ref
        J[:, j] = (bias_at(g_p, j) - bias_at(g_m, j)) / (2.0 * h)
    return J
