"""Knowledge ablation: one training run per augmentation mode, same seed and split."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..backbones import MODES
from ..errors import ConfigError, DataError
from .config import RunConfig
from .training import train

log = logging.getLogger(__name__)


@dataclass
class AblationTable:
    backbone: str
    reports: dict  # mode -> MetricsReport, in the order the modes were given

    def auc(self, mode):
        return self.reports[mode].auc

    def to_records(self):
        return [{"backbone": self.backbone, "mode": m, "auc": r.auc, "logloss": r.logloss,
                 "best_epoch": r.best_epoch, "train_s": r.timings.get("train_s"),
                 "test_hash": r.test_hash}
                for m, r in self.reports.items()]


def mode_checkpoint(path, mode):
    p = Path(path)
    return str(p.with_name(f"{p.stem}.{mode}{p.suffix}"))


def _run_one(args):
    cfg, save = args
    return cfg.mode, train(cfg, save=save).report


def run_ablation(cfg: RunConfig, modes=MODES, workers=1, save=True, tables=None):
    """Train ``cfg`` once per mode and return an AblationTable.

    Each mode writes its own checkpoint (``model.<mode>.ckpt``). Runs are
    independent, so ``workers > 1`` spreads them over processes. ``tables``
    optionally passes preloaded (train, test) SampleTables to serial runs.
    """
    modes = list(modes)
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise ConfigError(f"ablation modes must be a non-empty subset of {MODES}, got {modes}")
    if len(set(modes)) != len(modes):
        raise ConfigError(f"duplicate ablation modes: {modes}")
    cfgs = [cfg.replace(mode=m, checkpoint_path=mode_checkpoint(cfg.checkpoint_path, m))
            for m in modes]
    if workers > 1 and tables is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_one, [(c, save) for c in cfgs]))
    else:
        train_t, test_t = tables if tables is not None else (None, None)
        results = {}
        for c in cfgs:
            log.info("ablation: %s mode=%s", c.backbone, c.mode)
            results[c.mode] = train(c, train_t, test_t, save=save).report
    hashes = {r.test_hash for r in results.values()}
    if len(hashes) != 1:
        raise DataError("ablation runs saw different test sets")
    return AblationTable(cfg.backbone, {m: results[m] for m in modes})
