"""Post-hoc chain statistics: ESS, moment summaries and z-scores against oracle samples."""
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from src.state import ChainOutput
from src.utils.data_handler import coordinate_columns, samples_frame
from src.utils.errors import InsufficientSamples, InvalidInput
from src.utils.logger import get_logger
from src.utils.settings import settings

logger = get_logger(__name__)

MIN_SERIES_LENGTH = 10


def autocorrelation(series: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation at lags 0..n-1 via zero-padded FFT."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    x = x - x.mean()
    f = np.fft.rfft(x, n=2 * n)
    acov = np.fft.irfft(f * np.conjugate(f), n=2 * n)[:n] / n
    if acov[0] <= 0.0:
        return np.zeros(n)
    return acov / acov[0]


def is_degenerate(series: np.ndarray) -> bool:
    x = np.asarray(series, dtype=float)
    return bool(np.all(x == x[0]))


def ess(series) -> float:
    """Effective sample size n / (1 + 2 sum rho_k), truncated by the initial positive sequence rule.

    Consecutive autocorrelation pairs rho_{2k} + rho_{2k+1} are summed while positive.
    A constant series is degenerate and gets ESS 1. The result lies in (0, n].
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise InvalidInput(f"ess expects a 1-d series, got shape {x.shape}")
    n = x.shape[0]
    if n < MIN_SERIES_LENGTH:
        raise InsufficientSamples(f"ess needs at least {MIN_SERIES_LENGTH} values, got {n}")
    if is_degenerate(x):
        logger.warning("ess: constant series is degenerate, reporting ESS = 1")
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for k in range(n // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1.0 / n)
    return float(min(n, n / tau))


def _moment_stats(samples: np.ndarray):
    # per-coordinate means / second moments with ESS-adjusted squared standard errors
    means = samples.mean(axis=0)
    squares = samples ** 2
    seconds = squares.mean(axis=0)
    mean_se2 = np.empty(samples.shape[1])
    second_se2 = np.empty(samples.shape[1])
    for j in range(samples.shape[1]):
        mean_se2[j] = samples[:, j].var() / ess(samples[:, j])
        second_se2[j] = squares[:, j].var() / ess(squares[:, j])
    return means, seconds, mean_se2, second_se2


def _z(diff: np.ndarray, se2: np.ndarray) -> np.ndarray:
    diff = np.asarray(diff, dtype=float)
    se = np.sqrt(np.asarray(se2, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0.0, diff / np.where(se > 0.0, se, 1.0), np.where(diff == 0.0, 0.0, np.inf * np.sign(diff)))
    return z


@dataclass(frozen=True)
class OracleComparison:
    mean_z: np.ndarray
    second_moment_z: np.ndarray
    resultant_z: float

    @property
    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.mean_z)), np.max(np.abs(self.second_moment_z)), abs(self.resultant_z)))

    def passed(self, threshold: Optional[float] = None) -> bool:
        limit = settings.z_threshold if threshold is None else threshold
        return self.max_abs_z < limit


def compare_to_oracle(samples, oracle_samples) -> OracleComparison:
    """z-scores of coordinate means, second moments and resultant length, sampler minus oracle."""
    a = np.asarray(samples, dtype=float)
    b = np.asarray(oracle_samples, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidInput("compare_to_oracle needs two non-empty (n, dim) sample arrays")
    if a.shape[1] != b.shape[1]:
        raise InvalidInput(f"sample dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    logger.info(f"Entering compare_to_oracle with {a.shape[0]} samples vs {b.shape[0]} oracle samples")
    ma, sa, ma_se2, sa_se2 = _moment_stats(a)
    mb, sb, mb_se2, sb_se2 = _moment_stats(b)

    # resultant length |mean| by the delta method along the mean direction
    ra, rb = float(np.linalg.norm(ma)), float(np.linalg.norm(mb))
    ua = ma / ra if ra > 0 else np.zeros_like(ma)
    ub = mb / rb if rb > 0 else np.zeros_like(mb)
    r_se2 = float(ua ** 2 @ ma_se2 + ub ** 2 @ mb_se2)

    return OracleComparison(
        mean_z=_z(ma - mb, ma_se2 + mb_se2),
        second_moment_z=_z(sa - sb, sa_se2 + sb_se2),
        resultant_z=float(_z(np.array([ra - rb]), np.array([r_se2]))[0]),
    )


@dataclass(frozen=True)
class ChainSummary:
    n_samples: int
    acceptance_rate: float
    mean: np.ndarray
    second_moment: np.ndarray
    resultant_length: float
    ess: np.ndarray
    degenerate: np.ndarray   # per coordinate: the series is constant
    max_drift: float
    failed_transitions: int

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        for key in ("mean", "second_moment", "ess"):
            out[key] = [float(v) for v in out[key]]
        out["degenerate"] = [bool(v) for v in out["degenerate"]]
        return out


def summary_from_frame(frame: pd.DataFrame) -> ChainSummary:
    """Summary of one chain's sample table (the in-memory or on-disk sample file)."""
    cols = coordinate_columns(frame)
    # C-contiguous so column reductions are bit-identical for in-memory and parsed frames
    samples = np.ascontiguousarray(frame[cols].to_numpy(dtype=float))
    n = samples.shape[0]
    if n == 0:
        nan = np.full(len(cols), np.nan)
        return ChainSummary(0, 0.0, nan, nan.copy(), float("nan"), nan.copy(), np.zeros(len(cols), dtype=bool), 0.0, 0)
    mean = samples.mean(axis=0)
    degenerate = np.array([is_degenerate(samples[:, j]) for j in range(samples.shape[1])], dtype=bool)
    if n >= MIN_SERIES_LENGTH:
        ess_values = np.array([ess(samples[:, j]) for j in range(samples.shape[1])])
    else:
        logger.warning(f"summary: {n} samples is too few for ESS")
        ess_values = np.full(samples.shape[1], np.nan)
    return ChainSummary(
        n_samples=n,
        acceptance_rate=float(frame["accepted"].astype(bool).mean()),
        mean=mean,
        second_moment=(samples ** 2).mean(axis=0),
        resultant_length=float(np.linalg.norm(mean)),
        ess=ess_values,
        degenerate=degenerate,
        max_drift=float(frame["drift"].max()),
        failed_transitions=int(frame["failed"].astype(bool).sum()),
    )


def summarize(output: ChainOutput) -> ChainSummary:
    return summary_from_frame(samples_frame(output))
