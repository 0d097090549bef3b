"""Matrix Lie group primitives.

Group elements are square real matrices tagged with a descriptor that
carries the matrix dimension and an ordered basis {E_i} of the Lie
algebra. Vectors in the algebra are identified with their coordinates in
that basis (the vee form); wedge is the inverse map. Closed-form exp/log
are provided for SO(3), SE(2) and SE(3); GL(n)+ (and unipotent subgroups
used for translation groups) fall back to dense scaling-and-squaring.

Conventions: SE(2)/SE(3) coordinates are ordered rotation-first, i.e.
X = (omega, v) with wedge(X) = [[omega^, v], [0, 0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import expm, logm
from scipy.special import bernoulli

from .exceptions import (
    BasisClosureError,
    CutLocusError,
    DomainError,
    EvaluationError,
    NotInAlgebraError,
)

# Families with dedicated closed forms; everything else goes through expm/logm.
SO3, SE2, SE3, GLN_PLUS, PRODUCT = "SO3", "SE2", "SE3", "GLnPlus", "Product"

_BRACKET_TOL = 1e-10
_VEE_RESIDUAL_TOL = 1e-6
_CUT_LOCUS_MARGIN = 1e-6
_SMALL_ANGLE = 1e-4


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroupDescriptor:
    """A matrix Lie group: name tag, matrix size, and ordered algebra basis."""

    name: str
    family: str
    matrix_dim: int
    algebra_dim: int
    algebra_basis: np.ndarray  # (n_G, d, d), read-only
    factors: tuple["GroupDescriptor", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "algebra_basis", _frozen(self.algebra_basis))
        n, d = self.algebra_dim, self.matrix_dim
        if self.algebra_basis.shape != (n, d, d):
            raise ValueError(
                f"algebra basis shape {self.algebra_basis.shape} != ({n}, {d}, {d})"
            )
        flat = self.algebra_basis.reshape(n, -1)
        gram = flat @ flat.T
        if np.linalg.matrix_rank(gram) < n:
            raise ValueError("algebra basis matrices are linearly dependent")
        # Bracket closure: [E_i, E_j] must stay in span{E_k}.
        for i in range(n):
            for j in range(i + 1, n):
                br = self.algebra_basis[i] @ self.algebra_basis[j]
                br = br - self.algebra_basis[j] @ self.algebra_basis[i]
                _, res = _vee_lstsq(br, self)
                if res > _BRACKET_TOL * max(1.0, float(np.abs(br).max())):
                    raise ValueError(
                        f"basis not closed under bracket at ({i},{j}), residual {res:.2e}"
                    )
        if self.family == PRODUCT:
            if self.algebra_dim != sum(f.algebra_dim for f in self.factors):
                raise ValueError("product algebra_dim != sum of factor dims")
            if self.matrix_dim != sum(f.matrix_dim for f in self.factors):
                raise ValueError("product matrix_dim != sum of factor dims")

    @property
    def factor_slices(self) -> list[tuple[slice, slice]]:
        """(matrix block, coordinate block) slice pairs, one per factor."""
        out = []
        r = c = 0
        for f in self.factors:
            out.append((slice(r, r + f.matrix_dim), slice(c, c + f.algebra_dim)))
            r += f.matrix_dim
            c += f.algebra_dim
        return out


@lru_cache(maxsize=None)
def _vee_solver(descriptor: GroupDescriptor):
    """Least-squares projector onto the algebra basis (cached per descriptor)."""
    flat = descriptor.algebra_basis.reshape(descriptor.algebra_dim, -1)
    gram = flat @ flat.T
    proj = np.linalg.solve(gram, flat)  # coords = proj @ X.ravel()
    return flat, proj


def _vee_lstsq(X, descriptor: GroupDescriptor):
    flat, proj = _vee_solver(descriptor)
    x = np.asarray(X, dtype=float).ravel()
    coords = proj @ x
    residual = float(np.linalg.norm(flat.T @ coords - x))
    return coords, residual


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A point on the group: square matrix plus its descriptor."""

    descriptor: GroupDescriptor
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        d = self.descriptor.matrix_dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({d}, {d})")
        _check_membership(self.matrix, self.descriptor)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.descriptor, _inverse_matrix(self.matrix, self.descriptor))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        if other.descriptor is not self.descriptor:
            raise ValueError("cannot compose elements of different groups")
        return GroupElement(self.descriptor, self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    """Coordinates of a Lie algebra element w.r.t. the descriptor basis."""

    descriptor: GroupDescriptor
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))
        if self.coords.shape != (self.descriptor.algebra_dim,):
            raise ValueError(
                f"coords length {self.coords.shape} != ({self.descriptor.algebra_dim},)"
            )

    @property
    def matrix(self) -> np.ndarray:
        return wedge(self.coords, self.descriptor)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class PsiMatrix:
    """Truncated log-derivative operator Psi_X in the descriptor basis."""

    matrix: np.ndarray
    source: AlgebraVector
    truncation_order: int
    truncation_error_bound: float


# ---------------------------------------------------------------------------
# Membership checks


def _rotation_defect(R) -> float:
    return float(
        max(
            np.abs(R.T @ R - np.eye(R.shape[0])).max(),
            abs(np.linalg.det(R) - 1.0),
        )
    )


def _check_membership(mat: np.ndarray, descriptor: GroupDescriptor):
    fam = descriptor.family
    if fam == SO3:
        if _rotation_defect(mat) > 1e-9:
            raise ValueError("matrix is not in SO(3) to 1e-9")
    elif fam in (SE2, SE3):
        d = descriptor.matrix_dim
        if _rotation_defect(mat[: d - 1, : d - 1]) > 1e-9:
            raise ValueError(f"rotation block is not in SO({d - 1}) to 1e-9")
        bottom = np.zeros(d)
        bottom[-1] = 1.0
        if np.abs(mat[-1] - bottom).max() > 1e-9:
            raise ValueError("bottom row must be (0, ..., 0, 1)")
    elif fam == GLN_PLUS:
        if np.linalg.det(mat) <= 0:
            raise ValueError("determinant must be positive")
    elif fam == PRODUCT:
        for f, (rows, _) in zip(descriptor.factors, descriptor.factor_slices):
            block = mat[rows, rows]
            _check_membership(block, f)
            off = mat[rows].copy()
            off[:, rows] = 0.0
            if np.abs(off).max() > 0:
                raise ValueError("product element must be block diagonal")
    else:
        raise ValueError(f"unknown group family {fam!r}")


def manifold_defect(g: GroupElement) -> float:
    """Distance from the rotation-block constraints (0 for GL(n)+)."""
    fam = g.descriptor.family
    if fam == SO3:
        return _rotation_defect(g.matrix)
    if fam in (SE2, SE3):
        d = g.descriptor.matrix_dim
        return _rotation_defect(g.matrix[: d - 1, : d - 1])
    if fam == PRODUCT:
        return max(
            manifold_defect(GroupElement(f, g.matrix[rows, rows]))
            for f, (rows, _) in zip(g.descriptor.factors, g.descriptor.factor_slices)
        )
    return 0.0


def _inverse_matrix(mat: np.ndarray, descriptor: GroupDescriptor) -> np.ndarray:
    fam = descriptor.family
    if fam == SO3:
        return mat.T.copy()
    if fam in (SE2, SE3):
        d = descriptor.matrix_dim
        out = np.eye(d)
        R = mat[: d - 1, : d - 1]
        out[: d - 1, : d - 1] = R.T
        out[: d - 1, -1] = -R.T @ mat[: d - 1, -1]
        return out
    if fam == PRODUCT:
        out = np.zeros_like(mat)
        for f, (rows, _) in zip(descriptor.factors, descriptor.factor_slices):
            out[rows, rows] = _inverse_matrix(mat[rows, rows], f)
        return out
    return np.linalg.inv(mat)


# ---------------------------------------------------------------------------
# Descriptor factories


def _hat3(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@lru_cache(maxsize=None)
def so3() -> GroupDescriptor:
    basis = np.stack([_hat3(e) for e in np.eye(3)])
    return GroupDescriptor(SO3, SO3, 3, 3, basis)


@lru_cache(maxsize=None)
def se2() -> GroupDescriptor:
    # Coordinates (omega, vx, vy).
    E = np.zeros((3, 3, 3))
    E[0, 0, 1], E[0, 1, 0] = -1.0, 1.0
    E[1, 0, 2] = 1.0
    E[2, 1, 2] = 1.0
    return GroupDescriptor(SE2, SE2, 3, 3, E)


@lru_cache(maxsize=None)
def se3() -> GroupDescriptor:
    # Coordinates (omega_1..3, v_1..3).
    E = np.zeros((6, 4, 4))
    for i, e in enumerate(np.eye(3)):
        E[i, :3, :3] = _hat3(e)
        E[3 + i, i, 3] = 1.0
    return GroupDescriptor(SE3, SE3, 4, 6, E)


@lru_cache(maxsize=None)
def glnplus(n: int) -> GroupDescriptor:
    """GL(n)+ with the matrix-unit basis in row-major order."""
    E = np.zeros((n * n, n, n))
    for i in range(n):
        for j in range(n):
            E[i * n + j, i, j] = 1.0
    return GroupDescriptor(f"GL({n})+", GLN_PLUS, n, n * n, E)


@lru_cache(maxsize=None)
def translation_group(d: int) -> GroupDescriptor:
    """(R^d, +) embedded as unipotent matrices in GL(d+1)+."""
    E = np.zeros((d, d + 1, d + 1))
    for i in range(d):
        E[i, i, d] = 1.0
    return GroupDescriptor(f"T({d})<GL({d + 1})+", GLN_PLUS, d + 1, d, E)


def product_group(factors, name: str | None = None) -> GroupDescriptor:
    factors = tuple(factors)
    d = sum(f.matrix_dim for f in factors)
    n = sum(f.algebra_dim for f in factors)
    E = np.zeros((n, d, d))
    r = c = 0
    for f in factors:
        E[c : c + f.algebra_dim, r : r + f.matrix_dim, r : r + f.matrix_dim] = (
            f.algebra_basis
        )
        r += f.matrix_dim
        c += f.algebra_dim
    name = name or " x ".join(f.name for f in factors)
    return GroupDescriptor(name, PRODUCT, d, n, E, factors)


def identity_element(descriptor: GroupDescriptor) -> GroupElement:
    return GroupElement(descriptor, np.eye(descriptor.matrix_dim))


# ---------------------------------------------------------------------------
# wedge / vee


def wedge(v, descriptor: GroupDescriptor) -> np.ndarray:
    """Map coordinates to the algebra matrix sum_i v^i E_i."""
    v = np.asarray(v, dtype=float)
    if v.shape != (descriptor.algebra_dim,):
        raise ValueError(
            f"coordinate vector length {v.shape} != ({descriptor.algebra_dim},)"
        )
    return np.tensordot(v, descriptor.algebra_basis, axes=1)


def vee(X, descriptor: GroupDescriptor, tol: float = _VEE_RESIDUAL_TOL) -> np.ndarray:
    """Coordinates of an algebra matrix (least squares against the basis)."""
    X = np.asarray(X, dtype=float)
    if X.shape != (descriptor.matrix_dim,) * 2:
        raise ValueError(f"matrix shape {X.shape} incompatible with descriptor")
    coords, residual = _vee_lstsq(X, descriptor)
    if residual > tol * max(1.0, float(np.linalg.norm(X))):
        raise NotInAlgebraError(
            f"matrix is not in the algebra span: residual {residual:.3e}"
        )
    return coords


def bracket(X: AlgebraVector, Y: AlgebraVector) -> AlgebraVector:
    d = X.descriptor
    A, B = X.matrix, Y.matrix
    return AlgebraVector(d, vee(A @ B - B @ A, d))


# ---------------------------------------------------------------------------
# exp


def _so3_coeffs(theta: float) -> tuple[float, float]:
    """(sin t / t, (1 - cos t) / t^2) with 4th-order Taylor near 0."""
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    return math.sin(theta) / theta, (1.0 - math.cos(theta)) / theta**2


def _so3_exp(omega) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    W = _hat3(omega)
    a, b = _so3_coeffs(theta)
    return np.eye(3) + a * W + b * (W @ W)


def _so3_left_jacobian(omega) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    W = _hat3(omega)
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        b = (1.0 - math.cos(theta)) / theta**2
        c = (theta - math.sin(theta)) / theta**3
    return np.eye(3) + b * W + c * (W @ W)


def _so3_left_jacobian_inv(omega) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    W = _hat3(omega)
    if theta < _SMALL_ANGLE:
        c = 1.0 / 12.0
    else:
        c = 1.0 / theta**2 - (1.0 + math.cos(theta)) / (
            2.0 * theta * math.sin(theta)
        )
    return np.eye(3) - 0.5 * W + c * (W @ W)


def _se2_V(theta: float) -> np.ndarray:
    if abs(theta) < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = theta / 2.0 - theta * t2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta
    return np.array([[a, -b], [b, a]])


def exp(X: AlgebraVector) -> GroupElement:
    """Group exponential; closed form per family, expm fallback for GL(n)+."""
    d = X.descriptor
    fam = d.family
    if fam == SO3:
        return GroupElement(d, _so3_exp(X.coords))
    if fam == SE2:
        theta, v = float(X.coords[0]), X.coords[1:]
        c, s = math.cos(theta), math.sin(theta)
        M = np.eye(3)
        M[:2, :2] = [[c, -s], [s, c]]
        M[:2, 2] = _se2_V(theta) @ v
        return GroupElement(d, M)
    if fam == SE3:
        omega, v = X.coords[:3], X.coords[3:]
        M = np.eye(4)
        M[:3, :3] = _so3_exp(omega)
        M[:3, 3] = _so3_left_jacobian(omega) @ v
        return GroupElement(d, M)
    if fam == PRODUCT:
        M = np.eye(d.matrix_dim)
        for f, (rows, cols) in zip(d.factors, d.factor_slices):
            M[rows, rows] = exp(AlgebraVector(f, X.coords[cols])).matrix
        return GroupElement(d, M)
    return GroupElement(d, expm(X.matrix))


# ---------------------------------------------------------------------------
# log


def _so3_log(R) -> np.ndarray:
    cos_theta = min(1.0, max(-1.0, 0.5 * (float(np.trace(R)) - 1.0)))
    theta = math.acos(cos_theta)
    if math.pi - theta < _CUT_LOCUS_MARGIN:
        raise CutLocusError(
            f"rotation angle {theta:.9f} within {_CUT_LOCUS_MARGIN} of pi"
        )
    skew = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * skew
    return (theta / math.sin(theta)) * skew


def log(g: GroupElement) -> AlgebraVector:
    """Principal group logarithm; raises CutLocusError near angle pi."""
    d = g.descriptor
    fam = d.family
    if fam == SO3:
        return AlgebraVector(d, _so3_log(g.matrix))
    if fam == SE2:
        theta = math.atan2(g.matrix[1, 0], g.matrix[0, 0])
        if math.pi - abs(theta) < _CUT_LOCUS_MARGIN:
            raise CutLocusError(f"rotation angle {theta:.9f} within margin of pi")
        v = np.linalg.solve(_se2_V(theta), g.matrix[:2, 2])
        return AlgebraVector(d, np.concatenate([[theta], v]))
    if fam == SE3:
        omega = _so3_log(g.matrix[:3, :3])
        v = _so3_left_jacobian_inv(omega) @ g.matrix[:3, 3]
        return AlgebraVector(d, np.concatenate([omega, v]))
    if fam == PRODUCT:
        coords = np.zeros(d.algebra_dim)
        for f, (rows, cols) in zip(d.factors, d.factor_slices):
            coords[cols] = log(GroupElement(f, g.matrix[rows, rows])).coords
        return AlgebraVector(d, coords)
    # GL(n)+: dense principal log; real-negative eigenvalues have no real log.
    eigvals = np.linalg.eigvals(g.matrix)
    if np.any((eigvals.real < 0) & (np.abs(eigvals.imag) < 1e-12)):
        raise DomainError("matrix has real-negative eigenvalues; principal log undefined")
    L = logm(g.matrix)
    if np.abs(L.imag).max() > 1e-9:
        raise DomainError("matrix log is not real")
    return AlgebraVector(d, vee(L.real, d))


# ---------------------------------------------------------------------------
# Adjoint representations


def adjoint_matrix(g: GroupElement, tol: float = _VEE_RESIDUAL_TOL) -> np.ndarray:
    """Matrix of Ad_g: columns are vee(g E_i g^-1)."""
    d = g.descriptor
    ginv = _inverse_matrix(g.matrix, d)
    cols = []
    for E in d.algebra_basis:
        M = g.matrix @ E @ ginv
        coords, residual = _vee_lstsq(M, d)
        if residual > tol * max(1.0, float(np.linalg.norm(M))):
            raise BasisClosureError(
                f"Ad_g left the algebra span: residual {residual:.3e}"
            )
        cols.append(coords)
    return np.array(cols).T


def ad_matrix(X: AlgebraVector, tol: float = _VEE_RESIDUAL_TOL) -> np.ndarray:
    """Matrix of ad_X: columns are vee([X^, E_i])."""
    d = X.descriptor
    A = X.matrix
    cols = []
    for E in d.algebra_basis:
        M = A @ E - E @ A
        coords, residual = _vee_lstsq(M, d)
        if residual > tol * max(1.0, float(np.linalg.norm(M))):
            raise BasisClosureError(
                f"ad_X left the algebra span: residual {residual:.3e}"
            )
        cols.append(coords)
    return np.array(cols).T


# ---------------------------------------------------------------------------
# Psi (derivative of the log map) via the Bernoulli series


@lru_cache(maxsize=None)
def _bernoulli_even(order: int) -> tuple[float, ...]:
    """beta_{2n}/(2n)! for n = 1..order//2 (even Bernoulli numbers only)."""
    nmax = order // 2
    b = bernoulli(2 * nmax)
    return tuple(float(b[2 * n]) / math.factorial(2 * n) for n in range(1, nmax + 1))


def psi_matrix(X: AlgebraVector, order: int = 10) -> PsiMatrix:
    """Psi_X = I + ad_X/2 + sum_n beta_{2n}/(2n)! ad_X^{2n}, truncated.

    The even-series form never references beta_1, so no sign convention is
    needed. The bound on the dropped term (next even power) is reported.
    """
    if order < 2:
        raise ValueError("order must be >= 2")
    n_G = X.descriptor.algebra_dim
    ad = ad_matrix(X)
    out = np.eye(n_G) + 0.5 * ad
    ad2 = ad @ ad
    power = np.eye(n_G)
    for coeff in _bernoulli_even(order):
        power = power @ ad2
        out = out + coeff * power
    # Magnitude of the first neglected even term.
    nmax = order // 2
    next_coeff = float(bernoulli(2 * nmax + 2)[-1]) / math.factorial(2 * nmax + 2)
    next_term = float(np.linalg.norm(power @ ad2, 2)) * abs(next_coeff)
    return PsiMatrix(out, X, order, next_term)


# ---------------------------------------------------------------------------
# Invariant vector field derivatives (finite differences)


def default_step(g: GroupElement) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(g.matrix)))


def _directional_diff(
    fn: Callable[[GroupElement], float],
    g: GroupElement,
    X: AlgebraVector,
    h: float,
    left_translate: bool,
) -> float:
    step = AlgebraVector(X.descriptor, h * X.coords)
    e_plus, e_minus = exp(step), exp(AlgebraVector(X.descriptor, -h * X.coords))
    if left_translate:
        f_plus, f_minus = fn(e_plus @ g), fn(e_minus @ g)
    else:
        f_plus, f_minus = fn(g @ e_plus), fn(g @ e_minus)
    value = (float(f_plus) - float(f_minus)) / (2.0 * h)
    if not math.isfinite(value):
        raise EvaluationError("function returned a non-finite value")
    return value


def livf_derivative(fn, g: GroupElement, X: AlgebraVector, h: float | None = None) -> float:
    """Central-difference d/dt fn(g exp(tX)) at t = 0."""
    return _directional_diff(fn, g, X, h or default_step(g), left_translate=False)


def rivf_derivative(fn, g: GroupElement, X: AlgebraVector, h: float | None = None) -> float:
    """Central-difference d/dt fn(exp(tX) g) at t = 0."""
    return _directional_diff(fn, g, X, h or default_step(g), left_translate=True)


# ---------------------------------------------------------------------------
# Misc helpers


def random_algebra_vector(
    descriptor: GroupDescriptor, rng: np.random.Generator, scale: float = 1.0
) -> AlgebraVector:
    return AlgebraVector(descriptor, scale * rng.standard_normal(descriptor.algebra_dim))


def random_element(
    descriptor: GroupDescriptor, rng: np.random.Generator, scale: float = 1.0
) -> GroupElement:
    return exp(random_algebra_vector(descriptor, rng, scale))


def polar_project(g: GroupElement) -> GroupElement:
    """Re-orthonormalize rotation blocks via the polar decomposition."""
    d = g.descriptor
    fam = d.family

    def polar(R):
        U, _, Vt = np.linalg.svd(R)
        P = U @ Vt
        if np.linalg.det(P) < 0:  # keep det +1
            U = U.copy()
            U[:, -1] *= -1.0
            P = U @ Vt
        return P

    if fam == SO3:
        return GroupElement(d, polar(g.matrix))
    if fam in (SE2, SE3):
        M = np.array(g.matrix)
        k = d.matrix_dim - 1
        M[:k, :k] = polar(M[:k, :k])
        M[-1, :] = 0.0
        M[-1, -1] = 1.0
        return GroupElement(d, M)
    if fam == PRODUCT:
        M = np.array(g.matrix)
        for f, (rows, _) in zip(d.factors, d.factor_slices):
            M[rows, rows] = polar_project(GroupElement(f, g.matrix[rows, rows])).matrix
        return GroupElement(d, M)
    return g
