"""Run configuration: JSON parsing, schema checks and construction of the sampling objects."""
import json
import re
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.state import ChainConfig, RunConfig
from src.tools.manifold import ManifoldDescriptor, make_manifold
from src.tools.sampler import MassMatrix
from src.tools.target import Target, make_target
from src.utils.data_handler import load_matrix_file
from src.utils.errors import ConfigError, GeodesicMCError
from src.utils.logger import get_logger

logger = get_logger(__name__)

TOP_LEVEL_KEYS = {"manifold", "target", "mass", "sampler", "output", "n_chains", "x0"}
MANIFOLD_KEYS = {"kind", "d", "s"}
MASS_KEYS = {"form", "values", "file"}
SAMPLER_KEYS = {"variant", "epsilon", "n_leapfrog", "n_samples", "n_burnin", "thin", "seed",
                "sign_convention", "reproject_each_step"}
TARGET_KEYS = {
    "uniform": set(),
    "vmf": {"kappa", "mu"},
    "bingham_vmf": {"C", "A", "B"},
}


def _dotted(section: str, name: str) -> str:
    return name if section == "<root>" else f"{section}.{name}"


def _require_mapping(value: Any, key: str, source: Optional[str]) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be an object", source=source, key=None if key == "<root>" else key)
    return value


def _check_keys(section: Dict[str, Any], allowed: set, key: str, source: Optional[str]) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in '{key}' (allowed: {sorted(allowed)})",
                          source=source, key=_dotted(key, unknown[0]))


def locate_key(text: str, key: str) -> Optional[Tuple[int, int]]:
    """1-based (line, column) of the last segment of a dotted key path in JSON text.

    Each segment is searched after the previous one, so "sampler.seed" lands inside the
    sampler object. None when a segment is not found.
    """
    pos = 0
    for part in key.split("."):
        found = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
        if found is None:
            return None
        pos = found.start()
    line = text.count("\n", 0, pos) + 1
    column = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, column


def parse_run_config(raw: Dict[str, Any], source: Optional[str] = None) -> RunConfig:
    """Validate a decoded config document and build a RunConfig."""
    raw = _require_mapping(raw, "<root>", source)
    _check_keys(raw, TOP_LEVEL_KEYS, "<root>", source)
    for key in ("manifold", "target", "sampler"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'", source=source)

    manifold = _require_mapping(raw["manifold"], "manifold", source)
    _check_keys(manifold, MANIFOLD_KEYS, "manifold", source)
    target = _require_mapping(raw["target"], "target", source)
    family = str(target.get("family", "")).strip().lower().replace("-", "_")
    if family not in TARGET_KEYS:
        raise ConfigError(f"'target.family' must be one of {sorted(TARGET_KEYS)}, got {target.get('family')!r}",
                          source=source, key="target.family" if "family" in target else "target")
    _check_keys(target, TARGET_KEYS[family] | {"family"}, "target", source)
    mass = _require_mapping(raw.get("mass", {"form": "identity"}), "mass", source)
    _check_keys(mass, MASS_KEYS, "mass", source)

    sampler_raw = _require_mapping(raw["sampler"], "sampler", source)
    _check_keys(sampler_raw, SAMPLER_KEYS, "sampler", source)
    try:
        sampler = ChainConfig(**sampler_raw)
    except (TypeError, ValueError, GeodesicMCError) as e:
        raise ConfigError(f"'sampler': {e}", source=source, key="sampler")
    if sampler.epsilon <= 0.0:
        raise ConfigError(f"'sampler.epsilon' must be > 0, got {sampler.epsilon}", source=source,
                          key="sampler.epsilon")

    n_chains = raw.get("n_chains", 1)
    if isinstance(n_chains, bool) or not isinstance(n_chains, int) or n_chains < 1:
        raise ConfigError(f"'n_chains' must be a positive integer, got {n_chains!r}", source=source,
                          key="n_chains")

    return RunConfig(
        manifold=dict(manifold),
        target=dict(target, family=family),
        mass=dict(mass),
        sampler=sampler,
        output=str(raw.get("output", "")),
        n_chains=n_chains,
        source=source,
        x0=raw.get("x0"),
    )


def load_run_config(path: str) -> RunConfig:
    """Read a JSON run config. Syntax errors, and schema errors tied to a key, carry line and column."""
    logger.info(f"Entering load_run_config with path: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", source=path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, source=path, line=e.lineno, column=e.colno)
    try:
        return parse_run_config(raw, source=path)
    except ConfigError as e:
        where = locate_key(text, e.key) if e.key and e.line is None else None
        if where is None:
            raise
        raise ConfigError(e.message, source=path, line=where[0], column=where[1], key=e.key) from None


def _resolve(path: str, source: Optional[str]) -> str:
    if os.path.isabs(path) or source is None:
        return path
    return os.path.join(os.path.dirname(os.path.abspath(source)), path)


def build_manifold(cfg: RunConfig) -> ManifoldDescriptor:
    section = cfg.manifold
    try:
        return make_manifold(section.get("kind", ""), int(section.get("d", 0)), int(section.get("s", 1)))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'manifold': {e}", source=cfg.source)


def build_target(cfg: RunConfig, m: ManifoldDescriptor) -> Target:
    params = {k: v for k, v in cfg.target.items() if k != "family"}
    if cfg.target["family"] == "bingham_vmf":
        params = {"c": params.get("C"), "a": params.get("A"), "b": params.get("B")}
        if any(v is None for v in params.values()):
            raise ConfigError("'target': bingham_vmf needs C, A and B", source=cfg.source)
    try:
        return make_target(m, cfg.target["family"], **params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'target': {e}", source=cfg.source)


def build_mass(cfg: RunConfig, m: ManifoldDescriptor) -> MassMatrix:
    section = cfg.mass
    form = str(section.get("form", "identity")).strip().lower()
    n = m.ambient_dim
    try:
        if form == MassMatrix.IDENTITY:
            mass = MassMatrix.identity(n)
        elif form == MassMatrix.DIAGONAL:
            mass = MassMatrix.diagonal(section.get("values"))
        elif form == MassMatrix.DENSE:
            if "file" in section:
                matrix = load_matrix_file(_resolve(str(section["file"]), cfg.source))
            elif "values" in section:
                matrix = np.asarray(section["values"], dtype=float)
            else:
                raise ConfigError("'mass': dense form needs 'values' or 'file'", source=cfg.source)
            mass = MassMatrix.dense(matrix)
        else:
            raise ConfigError(f"'mass.form' must be identity, diagonal or dense, got {form!r}", source=cfg.source)
    except ConfigError:
        raise
    except (TypeError, ValueError, GeodesicMCError) as e:
        raise ConfigError(f"'mass': {e}", source=cfg.source)
    if mass.dim != n:
        raise ConfigError(f"'mass' is {mass.dim}x{mass.dim} but the manifold has {n} ambient coordinates", source=cfg.source)
    return mass


def build_initial_point(cfg: RunConfig, m: ManifoldDescriptor) -> np.ndarray:
    """Configured x0, or the canonical point (first s columns of the identity)."""
    if cfg.x0 is None:
        return np.eye(m.d, m.s).ravel(order="F")
    try:
        return m.check_point(np.asarray(cfg.x0, dtype=float))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'x0': {e}", source=cfg.source)


def build_run(cfg: RunConfig) -> Tuple[ManifoldDescriptor, Target, MassMatrix, np.ndarray]:
    m = build_manifold(cfg)
    return m, build_target(cfg, m), build_mass(cfg, m), build_initial_point(cfg, m)
