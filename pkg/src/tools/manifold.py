"""Embedded manifolds in ambient coordinates: the unit sphere and the Stiefel manifold.

Points and tangent vectors are flat float arrays of length `ambient_dim`; Stiefel
matrices are flattened column-major (see `src.utils.linalg.vec`). Geodesic steps never
reproject silently, so floating-point drift is visible to the caller through
`constraint_violation`.
"""
from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np
import scipy.linalg

from src.utils.errors import DriftTooLarge, InvalidInput
from src.utils.linalg import commutation_matrix, kron, unvec, vec
from src.utils.logger import get_logger

logger = get_logger(__name__)

# ManifoldPoint and TangentVector are plain ndarrays of shape (ambient_dim,)
ManifoldPoint = np.ndarray
TangentVector = np.ndarray

MEMBERSHIP_TOL = 1e-10
TANGENCY_TOL = 1e-10
REPROJECT_LIMIT = 1e-4
# below this violation a point is already on the manifold to rounding
EXACT_TOL = 1e-14


class ManifoldDescriptor(ABC):
    kind: str
    d: int
    s: int

    @property
    def ambient_dim(self) -> int:
        return self.d * self.s

    @property
    @abstractmethod
    def tangent_dim(self) -> int:
        ...

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.d, self.s)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.d}, s={self.s})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ManifoldDescriptor) and (self.kind, self.d, self.s) == (other.kind, other.d, other.s)

    def __hash__(self) -> int:
        return hash((self.kind, self.d, self.s))

    # ------------------------
    # membership
    # ------------------------
    @abstractmethod
    def constraint_violation(self, x: np.ndarray) -> float:
        ...

    def as_vector(self, x, name: str = "x") -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 2 and arr.shape == self.shape:
            arr = vec(arr)
        if arr.shape != (self.ambient_dim,):
            raise InvalidInput(f"{name} must have {self.ambient_dim} ambient coordinates for {self!r}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput(f"{name} has non-finite coordinates")
        return arr

    def check_point(self, x) -> np.ndarray:
        arr = self.as_vector(x)
        violation = self.constraint_violation(arr)
        if violation > MEMBERSHIP_TOL:
            raise InvalidInput(f"point is off {self!r}: constraint violation {violation:.3e}")
        return arr

    def check_tangent(self, x: np.ndarray, v) -> np.ndarray:
        arr = self.as_vector(v, name="v")
        residual = float(np.linalg.norm(self.tangent_project(x, arr) - arr))
        if residual > TANGENCY_TOL * max(1.0, float(np.linalg.norm(arr))):
            raise InvalidInput(f"velocity is not tangent at x: |Pi v - v| = {residual:.3e}")
        return arr

    # ------------------------
    # geometry
    # ------------------------
    @abstractmethod
    def frame(self, x: np.ndarray) -> np.ndarray:
        """Nearest orthonormal representative of x; equals x on the manifold up to rounding."""

    @abstractmethod
    def tangent_project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply Pi_x to v (a vector or a stack of row vectors) without forming Pi_x."""

    def projection_matrix(self, x: np.ndarray) -> np.ndarray:
        basis = np.eye(self.ambient_dim)
        pi = self.tangent_project(x, basis)
        return 0.5 * (pi + pi.T)

    @abstractmethod
    def flow(self, x: np.ndarray, v: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Geodesic flow without validation."""

    @abstractmethod
    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        ...

    def reproject(self, x) -> np.ndarray:
        arr = self.as_vector(x)
        violation = self.constraint_violation(arr)
        if violation > REPROJECT_LIMIT:
            raise DriftTooLarge(violation, REPROJECT_LIMIT)
        if violation <= EXACT_TOL:
            return arr.copy()
        return self.frame(arr)


class Sphere(ManifoldDescriptor):
    """Unit sphere S^{d-1} in R^d."""
    kind = "sphere"

    def __init__(self, d: int):
        if int(d) < 2:
            raise InvalidInput(f"sphere needs ambient dimension d >= 2, got {d}")
        self.d = int(d)
        self.s = 1

    @property
    def tangent_dim(self) -> int:
        return self.d - 1

    def constraint_violation(self, x: np.ndarray) -> float:
        return abs(float(x @ x) - 1.0)

    def frame(self, x: np.ndarray) -> np.ndarray:
        return x / np.linalg.norm(x)

    def tangent_project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        y = self.frame(x)
        return v - np.multiply.outer(v @ y, y)

    def flow(self, x: np.ndarray, v: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        speed = float(np.linalg.norm(v))
        if speed == 0.0 or t == 0.0:
            return x.copy(), v.copy()
        c, s = np.cos(speed * t), np.sin(speed * t)
        return x * c + v * (s / speed), v * c - x * (speed * s)

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.d)
        return z / np.linalg.norm(z)


class Stiefel(ManifoldDescriptor):
    """d x s matrices with orthonormal columns, stored as vec(X)."""
    kind = "stiefel"

    def __init__(self, d: int, s: int):
        if int(s) < 1 or int(d) < int(s):
            raise InvalidInput(f"Stiefel manifold needs 1 <= s <= d, got d={d}, s={s}")
        self.d = int(d)
        self.s = int(s)

    @property
    def tangent_dim(self) -> int:
        return self.d * self.s - self.s * (self.s + 1) // 2

    def _mat(self, x: np.ndarray) -> np.ndarray:
        return unvec(x, self.d, self.s)

    def constraint_violation(self, x: np.ndarray) -> float:
        m = self._mat(x)
        return float(np.linalg.norm(m.T @ m - np.eye(self.s)))

    def _qr_frame(self, m: np.ndarray) -> np.ndarray:
        q, r = np.linalg.qr(m)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return q * signs

    def frame(self, x: np.ndarray) -> np.ndarray:
        return vec(self._qr_frame(self._mat(x)))

    def _stack(self, v: np.ndarray) -> np.ndarray:
        # (k, d*s) column-major rows -> (k, d, s) matrices
        return v.reshape(-1, self.s, self.d).transpose(0, 2, 1)

    def _unstack(self, mats: np.ndarray) -> np.ndarray:
        return mats.transpose(0, 2, 1).reshape(mats.shape[0], -1)

    def tangent_project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        q = self._qr_frame(self._mat(x))
        single = v.ndim == 1
        vs = self._stack(np.atleast_2d(v))
        qtv = np.einsum("di,kdj->kij", q, vs)
        sym = qtv + qtv.transpose(0, 2, 1)
        out = self._unstack(vs - 0.5 * np.einsum("di,kij->kdj", q, sym))
        return out[0] if single else out

    def projection_kron(self, x: np.ndarray) -> np.ndarray:
        """I_ds - 1/2 (I_s kron X)(P + I_{s^2})(I_s kron X^T), with P the s x s commutation matrix."""
        q = self._qr_frame(self._mat(x))
        lift = kron(np.eye(self.s), q)  # ds x s^2, maps vec(C) to vec(X C)
        inner = lift.T  # s^2 x ds, maps vec(V) to vec(X^T V)
        swap = commutation_matrix(self.s, self.s)
        return np.eye(self.ambient_dim) - 0.5 * lift @ (swap.apply(inner) + inner)

    def flow(self, x: np.ndarray, v: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        if t == 0.0 or not np.any(v):
            return x.copy(), v.copy()
        s = self.s
        xm, vm = self._mat(x), self._mat(v)
        a = xm.T @ vm
        gram = vm.T @ vm
        block = np.block([[a, -gram], [np.eye(s), a]])
        e = scipy.linalg.expm(t * block)
        r = scipy.linalg.expm(-t * a)
        frame = np.hstack([xm, vm])
        m = frame @ e[:, :s]
        m_dot = frame @ (e @ np.vstack([a, np.eye(s)]))
        return vec(m @ r), vec((m_dot - m @ a) @ r)

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        return vec(self._qr_frame(rng.standard_normal((self.d, self.s))))


def make_manifold(kind: str, d: int, s: int = 1) -> ManifoldDescriptor:
    key = str(kind).strip().lower()
    if key == "sphere":
        if int(s) != 1:
            raise InvalidInput(f"sphere has s = 1, got s={s}")
        return Sphere(d)
    if key == "stiefel":
        return Stiefel(d, s)
    raise InvalidInput(f"unknown manifold kind {kind!r} (expected 'sphere' or 'stiefel')")


def constraint_violation(m: ManifoldDescriptor, x) -> float:
    return m.constraint_violation(m.as_vector(x))


def tangent_project(m: ManifoldDescriptor, x, v) -> np.ndarray:
    return m.tangent_project(m.check_point(x), m.as_vector(v, name="v"))


def projection(m: ManifoldDescriptor, x) -> np.ndarray:
    """Dense orthogonal projector Pi_x onto the tangent space at x (ambient_dim x ambient_dim)."""
    return m.projection_matrix(m.check_point(x))


def projection_kron(m: ManifoldDescriptor, x) -> np.ndarray:
    """Pi_x assembled through Kronecker products and the commutation matrix (sphere: I - x x^T)."""
    x = m.check_point(x)
    if isinstance(m, Stiefel):
        return m.projection_kron(x)
    y = m.frame(x)
    return np.eye(m.ambient_dim) - np.outer(y, y)


def geodesic_flow(m: ManifoldDescriptor, x, v, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Follow the geodesic through x with initial velocity v for time t.

    Returns:
        tuple: (point at time t, velocity at time t). Speed is conserved.
    """
    x = m.check_point(x)
    v = m.check_tangent(x, v)
    return m.flow(x, v, float(t))


def reference_uniform_sample(m: ManifoldDescriptor, rng: np.random.Generator) -> np.ndarray:
    """Uniform (Haar) draw: normalized Gaussian on the sphere, sign-corrected QR on Stiefel."""
    return m.uniform(rng)


def reproject(m: ManifoldDescriptor, x) -> np.ndarray:
    """Pull a slightly drifted point back onto the manifold (x/|x| or sign-corrected QR)."""
    return m.reproject(x)
