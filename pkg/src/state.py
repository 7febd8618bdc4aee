from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TypedDict, Optional, List, Dict, Any

import numpy as np

from src.utils.errors import InvalidInput


class Variant(str, Enum):
    ALG1 = "alg1"        # momentum derivation, log Det kept in both energies
    ALG2 = "alg2"        # velocity derivation, log Det cancels
    CLASSIC = "classic"  # original geodesic Monte Carlo (M = I semantics)

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidInput(f"unknown variant {value!r} (expected one of {[v.value for v in cls]})")


class SignConvention(str, Enum):
    AS_WRITTEN = "as_written"    # ALG1 subtracts, ALG2 adds (PiMPi)^+ Pi M x
    APPENDIX_C = "appendix_c"    # both signs flipped, following the log Det gradient

    @classmethod
    def parse(cls, value) -> "SignConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidInput(f"unknown sign convention {value!r} (expected one of {[v.value for v in cls]})")


def _as_int(value, name: str) -> int:
    # JSON numbers like 100.0 are accepted when integral
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise InvalidInput(f"{name} must be an integer, got {value!r}")
    if isinstance(value, (float, np.floating)) and not float(value).is_integer():
        raise InvalidInput(f"{name} must be an integer, got {value!r}")
    return int(value)


def _as_float(value, name: str) -> float:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise InvalidInput(f"{name} must be a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ChainConfig:
    variant: Variant = Variant.CLASSIC
    epsilon: float = 0.1
    n_leapfrog: int = 10
    n_samples: int = 1000
    n_burnin: int = 0
    thin: int = 1
    seed: int = 0
    sign_convention: SignConvention = SignConvention.AS_WRITTEN
    reproject_each_step: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "sign_convention", SignConvention.parse(self.sign_convention))
        object.__setattr__(self, "epsilon", _as_float(self.epsilon, "epsilon"))
        for name in ("n_leapfrog", "n_samples", "n_burnin", "thin", "seed"):
            object.__setattr__(self, name, _as_int(getattr(self, name), name))
        if not isinstance(self.reproject_each_step, (bool, np.bool_)):
            raise InvalidInput(f"reproject_each_step must be true or false, got {self.reproject_each_step!r}")
        object.__setattr__(self, "reproject_each_step", bool(self.reproject_each_step))
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise InvalidInput(f"epsilon must be a finite non-negative step size, got {self.epsilon}")
        if self.n_leapfrog < 1:
            raise InvalidInput(f"n_leapfrog must be >= 1, got {self.n_leapfrog}")
        if self.n_samples < 0 or self.n_burnin < 0:
            raise InvalidInput("n_samples and n_burnin must be >= 0")
        if self.thin < 1:
            raise InvalidInput(f"thin must be >= 1, got {self.thin}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInput(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def with_overrides(self, **changes) -> "ChainConfig":
        return replace(self, **changes)


# Stores the bookkeeping of one Metropolis transition
class TransitionRecord(TypedDict):
    energy: float            # e at the start of the trajectory
    proposed_energy: float   # e* at its end
    accepted: bool
    failed: bool             # numerical failure turned into a rejection
    drift: float             # constraint violation of the proposal
    speed_start: float       # |v| after the velocity draw
    speed_end: float         # |v| after the last half kick


@dataclass
class ChainOutput:
    samples: np.ndarray                       # (n_samples, ambient_dim)
    records: List[TransitionRecord] = field(default_factory=list)
    chain_index: int = 0
    max_drift: float = 0.0
    reprojections: int = 0

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(1 for r in self.records if r["accepted"]) / len(self.records)


@dataclass(frozen=True)
class RunConfig:
    manifold: Dict[str, Any]
    target: Dict[str, Any]
    mass: Dict[str, Any]
    sampler: ChainConfig
    output: str
    n_chains: int = 1
    source: Optional[str] = None  # path of the config file, when loaded from disk
    x0: Optional[List[Any]] = None
