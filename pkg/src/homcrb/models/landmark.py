"""SE(3) landmark pose estimation on the right coset space H\\SE(3).

A robot at pose g = (R, p) measures known world-frame landmarks a_k in
its body frame: x_k ~ N(R'(a_k - p), sigma_k^2 I). The likelihood is
invariant under left multiplication by rotations fixing every landmark:
all rotations about a single landmark (n_H = 3), rotations about the
axis through two landmarks (n_H = 1), trivial for >= 3 non-collinear.

The analytic gradient and FIM along a direction X = (Omega, v) are
    X^R l(g)   = sum_k (Omega a_k + v)'(a_k - p - R x_k) / sigma_k^2
    F(X_i,X_j) = sum_k (Omega_j a_k + v_j)'(Omega_i a_k + v_i) / sigma_k^2
with the FIM independent of g (constant along fibers, trivially).
"""

from __future__ import annotations

import math
from functools import partial

import numpy as np

from .. import groups
from ..exceptions import DomainError
from ..groups import AlgebraVector, GroupElement
from ..homspace import ReductiveStructure, Side, build_reductive
from .base import RIVF, ModelBase, translate_directions


def _hat(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def se3_element(R: np.ndarray, p: np.ndarray) -> GroupElement:
    M = np.eye(4)
    M[:3, :3] = R
    M[:3, 3] = p
    return GroupElement(groups.se3(), M)


def pose_parts(g: GroupElement) -> tuple[np.ndarray, np.ndarray]:
    return g.matrix[:3, :3], g.matrix[:3, 3]


def _sample_point_stabilizer(
    rng: np.random.Generator, point: np.ndarray, axis: np.ndarray | None
) -> GroupElement:
    """Random element of {(Q, (I - Q) a)}: a rotation fixing `point`,
    about `axis` when given, with angle uniform on [-pi, pi]."""
    if axis is None:
        axis = rng.standard_normal(3)
        axis = axis / np.linalg.norm(axis)
    angle = rng.uniform(-math.pi, math.pi)
    Q = groups.exp(AlgebraVector(groups.so3(), angle * axis)).matrix
    return se3_element(Q, (np.eye(3) - Q) @ point)


def _stabilizer_h_basis(a: np.ndarray) -> list[AlgebraVector]:
    """Basis of the subalgebra fixing the point a: (e_i, a^ e_i).

    The translation part is built with the same hat-matrix arithmetic the
    gradient/FIM formulas use, so Omega a + v cancels exactly in floats.
    """
    desc = groups.se3()
    a_hat = _hat(a)
    out = []
    for e in np.eye(3):
        out.append(AlgebraVector(desc, np.concatenate([e, a_hat @ e])))
    return out


def _translation_metric_factors(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ad matrices of the translations by -a and +a in (omega, v) coords.

    Gram-Schmidt under <x, y> = (Mx)'(My) with M = Ad_{T_{-a}} leaves the
    point-stabilizer basis and the pure translations orthonormal, which
    yields the Ad_H-invariant complement m = pure translations.
    """
    M = np.eye(6)
    M[3:, :3] = -_hat(a)
    M_inv = np.eye(6)
    M_inv[3:, :3] = _hat(a)
    return M, M_inv


def _landmark_structure(landmarks: np.ndarray) -> ReductiveStructure:
    desc = groups.se3()
    k = len(landmarks)
    if k == 1:
        a = landmarks[0]
        h = _stabilizer_h_basis(a)
        M, M_inv = _translation_metric_factors(a)
        seeds = [AlgebraVector(desc, row) for row in np.eye(6)[3:]]
        sampler = partial(_sample_point_stabilizer, point=a, axis=None)
        return build_reductive(
            desc,
            h,
            seed_m=seeds,
            side=Side.H_MOD_G,
            metric_factor=M,
            metric_factor_inv=M_inv,
            subgroup_sampler=sampler,
        )
    if k == 2:
        a1, a2 = landmarks
        axis = a1 - a2
        axis = axis / np.linalg.norm(axis)
        a1_hat = _hat(a1)
        h = [AlgebraVector(desc, np.concatenate([axis, a1_hat @ axis]))]
        M, M_inv = _translation_metric_factors(a1)
        # Ad_{T_{a1}} images of the standard basis keep m Ad_H-invariant:
        # rotations about axes through a1 plus pure translations.
        seeds = [AlgebraVector(desc, M_inv @ row) for row in np.eye(6)]
        sampler = partial(_sample_point_stabilizer, point=a1, axis=axis)
        return build_reductive(
            desc,
            h,
            seed_m=seeds,
            side=Side.H_MOD_G,
            metric_factor=M,
            metric_factor_inv=M_inv,
            subgroup_sampler=sampler,
        )
    # Three or more non-collinear landmarks: trivial symmetry group.
    sampler = _sample_identity
    return build_reductive(
        desc, [], side=Side.H_MOD_G, subgroup_sampler=sampler
    )


def _sample_identity(rng: np.random.Generator) -> GroupElement:
    return groups.identity_element(groups.se3())


class LandmarkModel(ModelBase):
    """Pose estimation from body-frame landmark observations."""

    def __init__(self, landmarks, noise=1.0):
        landmarks = np.atleast_2d(np.asarray(landmarks, dtype=float))
        if landmarks.shape[1] != 3:
            raise ValueError("landmarks must be points in R^3")
        if len(landmarks) == 2 and np.allclose(landmarks[0], landmarks[1]):
            raise ValueError("two-landmark model requires distinct landmarks")
        self.landmarks = landmarks
        self.noise = np.broadcast_to(
            np.asarray(noise, dtype=float), (len(landmarks),)
        ).copy()
        if np.any(self.noise < 0):
            raise ValueError("noise standard deviations must be nonnegative")
        self.descriptor = groups.se3()
        self.struct = _landmark_structure(landmarks)

    @property
    def _weights(self) -> np.ndarray:
        if np.any(self.noise == 0):
            raise DomainError("zero-noise model has no likelihood density")
        return 1.0 / self.noise**2

    # -- observations ------------------------------------------------------

    def mean_observation(self, g: GroupElement) -> np.ndarray:
        R, p = pose_parts(g)
        return (self.landmarks - p) @ R  # rows R'(a_k - p)

    def sample(self, g: GroupElement, m: int, rng: np.random.Generator):
        mean = self.mean_observation(g)
        sigma = self.noise[:, None]
        return mean[None, :, :] + sigma * rng.standard_normal(
            (m, len(self.landmarks), 3)
        )

    def loglik_batch(self, observations, g: GroupElement) -> np.ndarray:
        x = np.asarray(observations, dtype=float)
        resid = x - self.mean_observation(g)[None, :, :]
        return -0.5 * np.einsum("mkj,mkj,k->m", resid, resid, self._weights)

    def summarize(self, observations):
        x = np.asarray(observations, dtype=float)
        return x.shape[0], x.mean(axis=0), np.einsum("mkj,mkj->k", x, x)

    def total_loglik(self, summary, g: GroupElement) -> float:
        m, xbar, sq = summary
        mu = self.mean_observation(g)
        per_k = sq - 2.0 * m * np.einsum("kj,kj->k", xbar, mu) + m * np.einsum(
            "kj,kj->k", mu, mu
        )
        return float(-0.5 * np.sum(self._weights * per_k))

    # -- analytic derivatives -----------------------------------------------

    def _direction_terms(self, directions) -> np.ndarray:
        """(n_dirs, K, 3) array of Omega_d a_k + v_d."""
        out = np.empty((len(directions), len(self.landmarks), 3))
        for d, vec in enumerate(directions):
            W = _hat(vec.coords[:3])
            v = vec.coords[3:]
            out[d] = self.landmarks @ W.T + v
        return out

    def grad_rivf(self, x, g: GroupElement, X: AlgebraVector) -> float:
        """Right-invariant derivative of the log-likelihood along X."""
        return float(
            self.analytic_gradient_batch(self._as_batch(x), g, [X], RIVF)[0, 0]
        )

    def fim_rivf(self, g: GroupElement, X_i: AlgebraVector, X_j: AlgebraVector) -> float:
        """Right-frame FIM entry; independent of g."""
        return float(self.analytic_fim(g, [X_i, X_j], RIVF)[0, 1])

    def analytic_gradient_batch(self, observations, g, directions, op):
        dirs = translate_directions(directions, g, RIVF, op)
        x = np.asarray(observations, dtype=float)
        R, p = pose_parts(g)
        terms = self._direction_terms(dirs)  # (d, K, 3)
        resid = (self.landmarks - p)[None, :, :] - x @ R.T  # (m, K, 3)
        return np.einsum("dkj,mkj,k->md", terms, resid, self._weights)

    def analytic_fim(self, g, directions, op):
        dirs = translate_directions(directions, g, RIVF, op)
        terms = self._direction_terms(dirs) * np.sqrt(self._weights)[None, :, None]
        V = terms.reshape(len(dirs), -1)
        return V @ V.T

    def total_grad_m(self, summary, g: GroupElement) -> np.ndarray:
        m, xbar, _ = summary
        R, p = pose_parts(g)
        terms = self._direction_terms(self.struct.m_basis)
        resid = (self.landmarks - p) - xbar @ R.T
        return m * np.einsum("dkj,kj,k->d", terms, resid, self._weights)
