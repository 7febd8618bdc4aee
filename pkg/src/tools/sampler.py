"""Geodesic Monte Carlo with a positive semi-definite mass matrix.

One transition draws a velocity v ~ N(0, (Pi M Pi)^+), runs T split-integrator steps
(half kick, v -> v~ = (Pi M Pi)^(1/2) v, geodesic flow for time epsilon,
v~ -> v = ((Pi M Pi)^+)^(1/2) v~ at the new point, half kick) and accepts with
probability min(1, exp(e - e*)). The three variants differ only in the kick's
log-determinant term and in whether the energies carry log Det(Pi M Pi):

    ALG1     e = -log pi + log Det(Pi M Pi) + 1/2 v^T (Pi M Pi) v, kick term sign -1
    ALG2     e = -log pi + 1/2 v^T (Pi M Pi) v,                    kick term sign +1
    CLASSIC  e = -log pi + 1/2 v^T v, no log Det term, no v <-> v~ maps, M ignored

Under the APPENDIX_C sign convention both kick signs are flipped.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.state import ChainConfig, ChainOutput, SignConvention, TransitionRecord, Variant
from src.tools.manifold import MEMBERSHIP_TOL, ManifoldDescriptor, Sphere
from src.tools.target import Target
from src.utils.errors import DriftTooLarge, InvalidInput, NotPSD, NumericalFailure
from src.utils.linalg import (
    SpectralFactorization,
    as_symmetric,
    factorize,
    log_pseudo_det,
    pseudo_inverse,
    psd_inv_sqrt,
    psd_sqrt,
)
from src.utils.logger import get_logger
from src.utils.settings import settings

logger = get_logger(__name__)

# eigenvalues of Pi M Pi below this fraction of the largest are its null space
PROJECTED_RTOL = 1e-10
PSD_RTOL = 1e-10
LOGDET_FD_STEP = 1e-5


class MassMatrix:
    """Identity, diagonal or dense PSD mass matrix over the ambient coordinates."""

    IDENTITY = "identity"
    DIAGONAL = "diagonal"
    DENSE = "dense"

    def __init__(self, form: str, dim: int, matrix: Optional[np.ndarray] = None):
        self.form = form
        self.dim = int(dim)
        self._matrix = matrix

    @classmethod
    def identity(cls, dim: int) -> "MassMatrix":
        if int(dim) < 1:
            raise InvalidInput(f"mass matrix dimension must be >= 1, got {dim}")
        return cls(cls.IDENTITY, dim)

    @classmethod
    def diagonal(cls, values) -> "MassMatrix":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
            raise InvalidInput("diagonal mass needs a non-empty finite vector")
        cls._check_psd(values, "diagonal mass matrix")
        return cls(cls.DIAGONAL, values.shape[0], np.diag(values))

    @classmethod
    def dense(cls, matrix) -> "MassMatrix":
        sym = as_symmetric(matrix, name="dense mass matrix")
        cls._check_psd(np.linalg.eigvalsh(sym), "dense mass matrix")
        return cls(cls.DENSE, sym.shape[0], sym)

    @staticmethod
    def _check_psd(eigenvalues: np.ndarray, name: str) -> None:
        top = max(float(np.max(np.abs(eigenvalues))), 0.0)
        low = float(np.min(eigenvalues))
        if low < -PSD_RTOL * top:
            raise NotPSD(f"{name} has eigenvalue {low:.3e} (largest magnitude {top:.3e})")

    @property
    def is_identity(self) -> bool:
        return self.form == self.IDENTITY

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            return np.eye(self.dim)
        return self._matrix

    def __repr__(self) -> str:
        return f"MassMatrix(form={self.form!r}, dim={self.dim})"


class ProjectedMass:
    """Pi_x M Pi_x at one point with its pseudo-inverse, log pseudo-determinant and square roots.

    The identity mass short-circuits every quantity to Pi_x (log Det = 0) and applies
    them matrix-free, so the classic sampler never eigendecomposes anything.
    """

    def __init__(self, descriptor: ManifoldDescriptor, mass: MassMatrix, x: np.ndarray):
        self.descriptor = descriptor
        self.mass = mass
        self.x = x
        self.factorization: Optional[SpectralFactorization] = None
        if mass.is_identity:
            self._pi = None
            self.operator = None
            self.pseudo_inverse = None
            self.sqrt = None
            self.inv_sqrt = None
            self.log_det = 0.0
            return
        pi = descriptor.projection_matrix(x)
        op = pi @ mass.matrix @ pi
        self._pi = pi
        self.operator = 0.5 * (op + op.T)
        self.factorization = factorize(self.operator, rtol=PROJECTED_RTOL)
        self.pseudo_inverse = pseudo_inverse(self.factorization)
        self.log_det = log_pseudo_det(self.factorization)
        self.sqrt = psd_sqrt(self.factorization)
        self.inv_sqrt = psd_inv_sqrt(self.factorization)

    @property
    def is_identity(self) -> bool:
        return self.mass.is_identity

    @property
    def pi(self) -> np.ndarray:
        if self._pi is None:
            self._pi = self.descriptor.projection_matrix(self.x)
        return self._pi

    @property
    def rank(self) -> int:
        if self.factorization is None:
            return self.descriptor.tangent_dim
        return self.factorization.rank

    def dense(self, name: str) -> np.ndarray:
        """One of 'operator', 'pseudo_inverse', 'sqrt', 'inv_sqrt' as a dense matrix."""
        if name not in ("operator", "pseudo_inverse", "sqrt", "inv_sqrt"):
            raise InvalidInput(f"unknown projected-mass quantity {name!r}")
        if self.is_identity:
            return self.pi.copy()
        return getattr(self, name)

    def pinv_dot(self, y: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return self.descriptor.tangent_project(self.x, y)
        return self.pseudo_inverse @ y

    def sqrt_dot(self, v: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return self.descriptor.tangent_project(self.x, v)
        return self.sqrt @ v

    def inv_sqrt_dot(self, v: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return self.descriptor.tangent_project(self.x, v)
        return self.inv_sqrt @ v

    def operator_dot(self, v: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return self.descriptor.tangent_project(self.x, v)
        return self.operator @ v

    def quad(self, v: np.ndarray) -> float:
        """v^T (Pi M Pi) v; for the identity mass and tangent v this is v^T v."""
        if self.is_identity:
            return float(v @ v)
        return float(v @ (self.operator @ v))


def projected_mass(m: ManifoldDescriptor, mass: MassMatrix, x: np.ndarray) -> ProjectedMass:
    if mass.dim != m.ambient_dim:
        raise InvalidInput(f"mass matrix is {mass.dim}x{mass.dim} but {m!r} has {m.ambient_dim} ambient coordinates")
    return ProjectedMass(m, mass, x)


# ------------------------
# log pseudo-determinant gradient
# ------------------------
def _log_det_at(m: ManifoldDescriptor, mass: MassMatrix, y: np.ndarray) -> float:
    # log Det(Pi M Pi) along the reprojection extension: Pi is taken at the frame of y
    pi = m.projection_matrix(y)
    op = pi @ mass.matrix @ pi
    return log_pseudo_det(factorize(0.5 * (op + op.T), rtol=PROJECTED_RTOL))


def fd_grad_log_pseudo_det(m: ManifoldDescriptor, mass: MassMatrix, x: np.ndarray,
                           step: float = LOGDET_FD_STEP) -> np.ndarray:
    """Central differences of log Det(Pi M Pi) in every ambient coordinate."""
    if step <= 0:
        raise InvalidInput(f"finite-difference step must be positive, got {step}")
    grad = np.empty(m.ambient_dim)
    for i in range(m.ambient_dim):
        e = np.zeros(m.ambient_dim)
        e[i] = step
        grad[i] = (_log_det_at(m, mass, x + e) - _log_det_at(m, mass, x - e)) / (2.0 * step)
    return grad


def grad_log_pseudo_det(m: ManifoldDescriptor, mass: MassMatrix, x: np.ndarray,
                        pm: Optional[ProjectedMass] = None) -> np.ndarray:
    """Gradient of log Det(Pi_x M Pi_x).

    Sphere: closed form -2 (Pi M Pi)^+ Pi M x. Stiefel: central finite differences
    projected onto the tangent space, since only tangential changes of x stay on V(d, s).
    Exactly zero for the identity mass (Det of a projection is 1 everywhere).
    """
    if mass.is_identity:
        return np.zeros(m.ambient_dim)
    if isinstance(m, Sphere):
        pm = pm if pm is not None else projected_mass(m, mass, x)
        return -2.0 * (pm.pseudo_inverse @ (pm.pi @ (mass.matrix @ x)))
    return m.tangent_project(x, fd_grad_log_pseudo_det(m, mass, x))


def _log_det_term(pm: ProjectedMass) -> np.ndarray:
    # (Pi M Pi)^+ Pi M x, i.e. -1/2 grad log Det
    return -0.5 * grad_log_pseudo_det(pm.descriptor, pm.mass, pm.x, pm=pm)


def kick_sign(variant: Variant, convention: SignConvention) -> float:
    sign = -1.0 if variant is Variant.ALG1 else 1.0
    if convention is SignConvention.APPENDIX_C:
        sign = -sign
    return sign


# ------------------------
# integrator pieces
# ------------------------
def draw_velocity(pm: ProjectedMass, rng: np.random.Generator) -> np.ndarray:
    """v = ((Pi M Pi)^+)^(1/2) z with z standard normal in the ambient space."""
    z = rng.standard_normal(pm.descriptor.ambient_dim)
    return pm.inv_sqrt_dot(z)


def kick(variant: Variant, pm: ProjectedMass, v: np.ndarray, grad: np.ndarray,
         half_step: float, convention: SignConvention = SignConvention.AS_WRITTEN) -> np.ndarray:
    """v + (eps/2) (Pi M Pi)^+ (grad log pi + sigma (Pi M Pi)^+ Pi M x); CLASSIC uses v + (eps/2) Pi grad."""
    if half_step == 0.0:
        return v.copy()
    variant = Variant.parse(variant)
    if variant is Variant.CLASSIC:
        return v + half_step * pm.descriptor.tangent_project(pm.x, grad)
    force = grad
    if not pm.is_identity:
        force = grad + kick_sign(variant, convention) * _log_det_term(pm)
    return v + half_step * pm.pinv_dot(force)


def energy(variant: Variant, pm: ProjectedMass, x: np.ndarray, v: np.ndarray, target: Target) -> float:
    """Collected energy e of the acceptance step (log Det enters only for ALG1)."""
    variant = Variant.parse(variant)
    e = -target.log_density_ambient(x) + 0.5 * pm.quad(v)
    if variant is Variant.ALG1:
        e += pm.log_det
    return e


def hamiltonian(variant: Variant, pm: ProjectedMass, x: np.ndarray, v: np.ndarray, target: Target) -> float:
    """Uncollected Hamiltonian h: -log pi + 1/2 log Det (ALG1) or - 1/2 log Det (ALG2) + 1/2 v^T (Pi M Pi) v."""
    variant = Variant.parse(variant)
    h = -target.log_density_ambient(x) + 0.5 * pm.quad(v)
    if variant is Variant.ALG1:
        h += 0.5 * pm.log_det
    elif variant is Variant.ALG2:
        h -= 0.5 * pm.log_det
    return h


def to_momentum(pm: ProjectedMass, v: np.ndarray) -> np.ndarray:
    """p = (Pi M Pi) v, the cotangent counterpart of a velocity."""
    return pm.operator_dot(v)


@dataclass
class LeapfrogState:
    x: np.ndarray
    v: np.ndarray
    pm: ProjectedMass
    grad: np.ndarray


def _effective_mass(variant: Variant, mass: MassMatrix) -> MassMatrix:
    if variant is Variant.CLASSIC and not mass.is_identity:
        return MassMatrix.identity(mass.dim)
    return mass


def init_state(variant: Variant, x: np.ndarray, v: np.ndarray, target: Target, mass: MassMatrix) -> LeapfrogState:
    m = target.descriptor
    pm = projected_mass(m, _effective_mass(Variant.parse(variant), mass), x)
    return LeapfrogState(x=x, v=v, pm=pm, grad=target.grad_ambient(x))


def leapfrog_step(variant: Variant, state: LeapfrogState, epsilon: float, target: Target, mass: MassMatrix,
                  convention: SignConvention = SignConvention.AS_WRITTEN,
                  reproject: bool = False) -> LeapfrogState:
    """Half kick, v -> v~, geodesic flow for time epsilon, v~ -> v at the new point, half kick."""
    variant = Variant.parse(variant)
    m = target.descriptor
    mass = _effective_mass(variant, mass)
    half = 0.5 * epsilon

    v = kick(variant, state.pm, state.v, state.grad, half, convention)
    # with M = I both maps are Pi itself and v is already tangent
    v_tilde = v if variant is Variant.CLASSIC or state.pm.is_identity else state.pm.sqrt_dot(v)
    x_new, v_tilde = m.flow(state.x, v_tilde, epsilon)
    if reproject:
        x_new = m.reproject(x_new)
        v_tilde = m.tangent_project(x_new, v_tilde)

    pm_new = projected_mass(m, mass, x_new)
    grad_new = target.grad_ambient(x_new)
    v = v_tilde if variant is Variant.CLASSIC or pm_new.is_identity else pm_new.inv_sqrt_dot(v_tilde)
    v = kick(variant, pm_new, v, grad_new, half, convention)
    return LeapfrogState(x=x_new, v=v, pm=pm_new, grad=grad_new)


def integrate(variant: Variant, x: np.ndarray, v: np.ndarray, epsilon: float, n_leapfrog: int,
              target: Target, mass: MassMatrix,
              convention: SignConvention = SignConvention.AS_WRITTEN,
              reproject: bool = False,
              state: Optional[LeapfrogState] = None,
              path: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None) -> LeapfrogState:
    """Deterministic T-step map (x, v) -> (x_T, v_T). Appends every (x, v) to `path` when given."""
    if state is None:
        state = init_state(variant, x, v, target, mass)
    for step in range(int(n_leapfrog)):
        state = leapfrog_step(variant, state, epsilon, target, mass, convention, reproject)
        if path is not None:
            path.append((state.x.copy(), state.v.copy()))
    return state


def transition(x: np.ndarray, cfg: ChainConfig, target: Target, mass: MassMatrix,
               rng: np.random.Generator) -> Tuple[np.ndarray, TransitionRecord]:
    """One Metropolis-adjusted geodesic Monte Carlo transition from x.

    Returns:
        tuple: (next state of the chain, TransitionRecord). A rejected proposal returns x itself.
    """
    variant = cfg.variant
    m = target.descriptor
    failed = False
    drift = 0.0
    e = e_star = float("nan")
    speed_start = speed_end = float("nan")
    x_star = x

    try:
        state = init_state(variant, x, None, target, mass)
        v = draw_velocity(state.pm, rng)
        state.v = v
        speed_start = float(np.linalg.norm(v))
        e = energy(variant, state.pm, x, v, target)
        state = integrate(variant, x, v, cfg.epsilon, cfg.n_leapfrog, target, mass,
                          cfg.sign_convention, cfg.reproject_each_step, state=state)
        x_star = state.x
        speed_end = float(np.linalg.norm(state.v))
        e_star = energy(variant, state.pm, state.x, state.v, target)
        drift = m.constraint_violation(x_star)
        if not (np.isfinite(e) and np.isfinite(e_star) and np.all(np.isfinite(x_star))):
            raise NumericalFailure("non-finite energy or state along the trajectory")
    except DriftTooLarge:
        raise
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as err:
        logger.warning(f"Transition rejected after numerical failure: {err}")
        failed = True

    u = rng.uniform()
    accepted = (not failed) and (np.log(u) if u > 0.0 else -np.inf) < e - e_star
    record: TransitionRecord = {
        "energy": float(e),
        "proposed_energy": float(e_star),
        "accepted": bool(accepted),
        "failed": failed,
        "drift": float(drift),
        "speed_start": speed_start,
        "speed_end": speed_end,
    }
    return (x_star if accepted else x), record


def chain_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Independent stream for chain `chain_index`, identical to SeedSequence(seed).spawn(k)[chain_index]."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chain_index),)))


def run_chain(cfg: ChainConfig, target: Target, mass: MassMatrix, x0,
              chain_index: int = 0, drift_limit: Optional[float] = None) -> ChainOutput:
    """Burn in, then keep every `thin`-th of n_samples * thin transitions.

    Raises:
        DriftTooLarge: the state drifts off the manifold beyond `drift_limit` while
            reprojection is disabled.
    """
    m = target.descriptor
    limit = settings.drift_limit if drift_limit is None else float(drift_limit)
    logger.info(f"Entering run_chain with chain_index: {chain_index}, variant: {cfg.variant.value}, "
                f"epsilon: {cfg.epsilon}, n_leapfrog: {cfg.n_leapfrog}, n_samples: {cfg.n_samples}, "
                f"n_burnin: {cfg.n_burnin}, manifold: {m!r}, target: {target.family}, mass: {mass.form}")
    if cfg.variant is Variant.CLASSIC and not mass.is_identity:
        logger.warning("CLASSIC variant ignores the supplied mass matrix and uses the identity")
    x = m.check_point(x0).copy()
    rng = chain_rng(cfg.seed, chain_index)

    samples = np.empty((cfg.n_samples, m.ambient_dim))
    records: List[TransitionRecord] = []
    max_drift = m.constraint_violation(x)
    reprojections = 0
    total = cfg.n_burnin + cfg.n_samples * cfg.thin
    kept = 0

    for it in range(total):
        x, record = transition(x, cfg, target, mass, rng)
        drift = m.constraint_violation(x)
        max_drift = max(max_drift, drift)
        if cfg.reproject_each_step:
            if drift > MEMBERSHIP_TOL:
                x = m.reproject(x)
                reprojections += 1
        elif drift > limit:
            logger.error(f"Chain {chain_index} drifted off {m!r} at transition {it}: violation {drift:.3e}")
            raise DriftTooLarge(drift, limit)

        past_burnin = it - cfg.n_burnin
        if past_burnin >= 0 and (past_burnin + 1) % cfg.thin == 0:
            samples[kept] = x
            records.append(record)
            kept += 1

    out = ChainOutput(samples=samples, records=records, chain_index=chain_index,
                      max_drift=max_drift, reprojections=reprojections)
    logger.info(f"Chain {chain_index} finished: {out.n_samples} samples, acceptance rate {out.acceptance_rate:.3f}, "
                f"max drift {max_drift:.3e}")
    return out
