"""Run orchestration: chains dispatched over a thread pool, per-chain sample files, a run summary."""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

from src.state import ChainOutput, RunConfig
from src.tools.diagnostics import summarize, summary_from_frame
from src.tools.sampler import run_chain
from src.utils.config_loader import build_run, load_run_config
from src.utils.data_handler import read_samples, write_samples, write_summary
from src.utils.logger import get_logger
from src.utils.settings import settings

logger = get_logger(__name__)

SUMMARY_FILE = "summary.json"


def chain_file(output_dir: str, chain_index: int) -> str:
    return os.path.join(output_dir, f"chain_{chain_index}.csv")


def apply_overrides(cfg: RunConfig, seed: Optional[int] = None, output: Optional[str] = None) -> RunConfig:
    """CLI flags take precedence over the config file, which takes precedence over settings."""
    sampler = cfg.sampler if seed is None else cfg.sampler.with_overrides(seed=int(seed))
    out_dir = output or cfg.output or settings.output_dir
    return RunConfig(
        manifold=cfg.manifold,
        target=cfg.target,
        mass=cfg.mass,
        sampler=sampler,
        output=out_dir,
        n_chains=cfg.n_chains,
        source=cfg.source,
        x0=cfg.x0,
    )


def run_chains(cfg: RunConfig, threads: Optional[int] = None) -> List[ChainOutput]:
    """Run cfg.n_chains independent chains, at most `threads` at a time. Results are ordered by chain index."""
    m, target, mass, x0 = build_run(cfg)
    workers = max(1, min(int(threads or settings.threads), cfg.n_chains))
    logger.info(f"Entering run_chains with n_chains: {cfg.n_chains}, threads: {workers}, manifold: {m!r}")

    def _one(index: int) -> ChainOutput:
        return run_chain(cfg.sampler, target, mass, x0, chain_index=index)

    if workers == 1:
        return [_one(i) for i in range(cfg.n_chains)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, range(cfg.n_chains)))


def cmd_sample(config_path: str, seed: Optional[int] = None, threads: Optional[int] = None,
               output: Optional[str] = None) -> Dict[str, Any]:
    """Load a run config, sample every chain and write chain_<i>.csv files plus summary.json.

    Returns:
        dict: the summary document that was written.
    """
    logger.info(f"Entering cmd_sample with config_path: {config_path}")
    cfg = apply_overrides(load_run_config(config_path), seed=seed, output=output)
    outputs = run_chains(cfg, threads=threads)

    chains = []
    for out in outputs:
        path = write_samples(chain_file(cfg.output, out.chain_index), out)
        entry = summarize(out).to_dict()
        entry.update({"chain_index": out.chain_index, "file": os.path.basename(path),
                      "reprojections": out.reprojections})
        chains.append(entry)

    summary = {
        "config": os.path.abspath(config_path),
        "manifold": dict(cfg.manifold),
        "target": cfg.target["family"],
        "mass": cfg.mass.get("form", "identity"),
        "variant": cfg.sampler.variant.value,
        "sign_convention": cfg.sampler.sign_convention.value,
        "epsilon": cfg.sampler.epsilon,
        "n_leapfrog": cfg.sampler.n_leapfrog,
        "seed": cfg.sampler.seed,
        "chains": chains,
    }
    write_summary(os.path.join(cfg.output, SUMMARY_FILE), summary)
    logger.info(f"cmd_sample wrote {len(chains)} chain file(s) to {cfg.output}")
    return summary


def cmd_diagnose(sample_path: str, output: Optional[str] = None) -> Dict[str, Any]:
    """Recompute the summary of a saved sample file; writes it as JSON when `output` is given."""
    logger.info(f"Entering cmd_diagnose with sample_path: {sample_path}")
    summary = summary_from_frame(read_samples(sample_path)).to_dict()
    summary["file"] = os.path.abspath(sample_path)
    if output:
        write_summary(output, summary)
    return summary
