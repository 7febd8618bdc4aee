"""Unnormalized log-densities defined directly in embedding coordinates.

Every family is evaluated with its formula as written, so the same expression is a
smooth function on the whole ambient space; finite-difference checks use that extension.
Gradients are ambient (not projected onto the tangent space).
"""
from typing import Callable, Optional

import numpy as np

from src.tools.manifold import ManifoldDescriptor, Sphere
from src.utils.errors import InvalidInput
from src.utils.linalg import as_symmetric, unvec, vec
from src.utils.logger import get_logger

logger = get_logger(__name__)


class Target:
    family = "abstract"

    def __init__(self, descriptor: ManifoldDescriptor):
        self.descriptor = descriptor

    def log_density_ambient(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad_ambient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(descriptor={self.descriptor!r})"


class UniformTarget(Target):
    family = "uniform"

    def log_density_ambient(self, x: np.ndarray) -> float:
        return 0.0

    def grad_ambient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.descriptor.ambient_dim)


class VonMisesFisher(Target):
    """pi(x) proportional to exp(kappa mu^T x) on the sphere."""
    family = "vmf"

    def __init__(self, descriptor: ManifoldDescriptor, kappa: float, mu):
        if not isinstance(descriptor, Sphere):
            raise InvalidInput("von Mises-Fisher target is defined on the sphere; use bingham_vmf on Stiefel")
        super().__init__(descriptor)
        kappa = float(kappa)
        if not np.isfinite(kappa) or kappa < 0.0:
            raise InvalidInput(f"vMF concentration kappa must be >= 0, got {kappa}")
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (descriptor.d,):
            raise InvalidInput(f"vMF mean direction mu must have length {descriptor.d}, got shape {mu.shape}")
        if abs(float(mu @ mu) - 1.0) > 1e-10:
            raise InvalidInput(f"vMF mean direction must be a unit vector (|mu|^2 = {float(mu @ mu):.12f})")
        self.kappa = kappa
        self.mu = mu
        self._grad = kappa * mu

    def log_density_ambient(self, x: np.ndarray) -> float:
        return float(self._grad @ x)

    def grad_ambient(self, x: np.ndarray) -> np.ndarray:
        return self._grad.copy()


class BinghamVonMisesFisher(Target):
    """pi(X) proportional to exp(tr(C^T X) + tr(B X^T A X)) with A symmetric and B diagonal."""
    family = "bingham_vmf"

    def __init__(self, descriptor: ManifoldDescriptor, c, a, b):
        super().__init__(descriptor)
        d, s = descriptor.d, descriptor.s
        c = np.asarray(c, dtype=float)
        if c.ndim == 1 and s == 1:
            c = c.reshape(d, 1)
        if c.shape != (d, s):
            raise InvalidInput(f"Bingham-vMF C must be {d}x{s}, got shape {c.shape}")
        a = as_symmetric(a, name="Bingham-vMF A")
        if a.shape != (d, d):
            raise InvalidInput(f"Bingham-vMF A must be {d}x{d}, got shape {a.shape}")
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            if b.shape != (s, s) or np.any(b != np.diag(np.diag(b))):
                raise InvalidInput(f"Bingham-vMF B must be an {s}x{s} diagonal matrix")
            b = np.diag(b).copy()
        elif b.ndim == 0 and s == 1:
            b = b.reshape(1)
        if b.shape != (s,):
            raise InvalidInput(f"Bingham-vMF B must have {s} diagonal entries, got shape {b.shape}")
        self.c = c
        self.a = a
        self.b = b

    def log_density_ambient(self, x: np.ndarray) -> float:
        xm = unvec(x, self.descriptor.d, self.descriptor.s)
        ax = self.a @ xm
        return float(np.sum(self.c * xm) + np.sum(self.b * np.sum(xm * ax, axis=0)))

    def grad_ambient(self, x: np.ndarray) -> np.ndarray:
        xm = unvec(x, self.descriptor.d, self.descriptor.s)
        return vec(self.c + 2.0 * (self.a @ xm) * self.b)


class CallbackTarget(Target):
    """User-supplied density: a pair of callables on flat ambient coordinates."""
    family = "callback"

    def __init__(self, descriptor: ManifoldDescriptor,
                 log_density: Callable[[np.ndarray], float],
                 grad_log_density: Callable[[np.ndarray], np.ndarray]):
        super().__init__(descriptor)
        self._log_density = log_density
        self._grad = grad_log_density

    def log_density_ambient(self, x: np.ndarray) -> float:
        return float(self._log_density(x))

    def grad_ambient(self, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self._grad(x), dtype=float)
        if g.shape != (self.descriptor.ambient_dim,):
            raise InvalidInput(f"gradient callback returned shape {g.shape}, expected ({self.descriptor.ambient_dim},)")
        return g


def make_target(descriptor: ManifoldDescriptor, family: str, **params) -> Target:
    key = str(family).strip().lower().replace("-", "_")
    logger.info(f"Entering make_target with family: {key} on {descriptor!r}")
    if key == "uniform":
        if params:
            raise InvalidInput(f"uniform target takes no parameters, got {sorted(params)}")
        return UniformTarget(descriptor)
    if key == "vmf":
        return VonMisesFisher(descriptor, **params)
    if key == "bingham_vmf":
        return BinghamVonMisesFisher(descriptor, **params)
    raise InvalidInput(f"unknown target family {family!r} (expected uniform, vmf or bingham_vmf)")


def log_density(t: Target, x) -> float:
    """Unnormalized log pi(x) at a point on the manifold."""
    return t.log_density_ambient(t.descriptor.check_point(x))


def grad_log_density(t: Target, x) -> np.ndarray:
    """Ambient gradient of log pi at x; the sampler applies the tangent projection."""
    return t.grad_ambient(t.descriptor.check_point(x))


def fd_gradient_check(t: Target, x, step: float = 1e-5) -> float:
    """Worst coordinate-wise error of grad_log_density against central differences.

    Errors are relative to max(1, |g_i|), so exactly-zero gradients report absolute error.
    """
    if step <= 0:
        raise InvalidInput(f"finite-difference step must be positive, got {step}")
    x = t.descriptor.check_point(x)
    g = t.grad_ambient(x)
    worst = 0.0
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        fd = (t.log_density_ambient(x + e) - t.log_density_ambient(x - e)) / (2.0 * step)
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    logger.debug(f"fd_gradient_check on {t.family}: worst relative error {worst:.3e}")
    return worst


def _vmf_weights(kappa: float, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    # rejection sampling of w = mu^T x (Wood 1994), vectorized in batches
    dim = d - 1
    b = dim / (np.sqrt(4.0 * kappa ** 2 + dim ** 2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dim * np.log(1.0 - x0 ** 2)
    out = np.empty(n)
    filled = 0
    while filled < n:
        batch = max(16, int(1.5 * (n - filled)))
        z = rng.beta(dim / 2.0, dim / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=batch)
        keep = w[kappa * w + dim * np.log(1.0 - x0 * w) - c >= np.log(u)]
        take = min(keep.shape[0], n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def sample_vmf(mu, kappa: float, n: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Draw n exact samples from vMF(mu, kappa) on S^{d-1}; returns an (n, d) array."""
    mu = np.asarray(mu, dtype=float)
    d = mu.shape[0]
    if d < 2 or abs(float(mu @ mu) - 1.0) > 1e-10:
        raise InvalidInput("sample_vmf needs a unit mean direction of length >= 2")
    if kappa < 0:
        raise InvalidInput(f"kappa must be >= 0, got {kappa}")
    rng = rng if rng is not None else np.random.default_rng()
    logger.info(f"Entering sample_vmf with d: {d}, kappa: {kappa}, n: {n}")
    if n == 0:
        return np.empty((0, d))
    if kappa == 0.0:
        z = rng.standard_normal((n, d))
        return z / np.linalg.norm(z, axis=1, keepdims=True)
    w = _vmf_weights(float(kappa), d, n, rng)
    # uniform directions orthogonal to mu
    z = rng.standard_normal((n, d))
    z -= np.outer(z @ mu, mu)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return w[:, None] * mu + np.sqrt(np.clip(1.0 - w ** 2, 0.0, None))[:, None] * z
