"""Per-batch inference latency of the base backbone vs. KAR with an in-line
adaptor vs. KAR reading prestored augmented vectors.

Batches are resolved to arrays before timing, so data loading is excluded.
Variants are interleaved batch by batch to spread drift and cache effects
evenly across them.
"""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..backbones import Batch, PrestoredKAR
from ..dataset import load_samples
from ..errors import DataError
from ..nn import Tensor, no_grad
from .config import RunConfig
from .training import checkpoint_config, load_knowledge_tables, load_model

log = logging.getLogger(__name__)

VARIANTS = ("base", "kar_with_adaptor", "kar_prestored")


@dataclass
class BenchRow:
    variant: str
    batches: int
    batch_size: int
    mean_s: float
    std_s: float
    median_s: float
    min_s: float
    ratio_to_base: float = float("nan")

    def to_dict(self):
        return asdict(self)


@dataclass
class BenchTable:
    rows: list
    backbone: str
    batch_size: int

    def row(self, variant):
        for r in self.rows:
            if r.variant == variant:
                return r
        raise KeyError(variant)

    def to_records(self):
        return [dict(r.to_dict(), backbone=self.backbone) for r in self.rows]


def _require(path, what):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} checkpoint not found: {path}")
    return path


def build_variants(cfg: RunConfig, meta, aug=None):
    """Return {variant: model} for the benchmark.

    ``aug`` optionally supplies (user_aug, item_aug); otherwise the prestored
    vectors come from ``cfg.aug_path`` when it exists, else they are computed
    once here from the adaptor (same values the export stage would write).
    """
    base, _, _ = load_model(_require(cfg.base_checkpoint_path, "base model"))
    kar_path = _require(cfg.checkpoint_path, "KAR model")
    kar_cfg = checkpoint_config(kar_path)
    user_reps, item_reps, _ = load_knowledge_tables(kar_cfg.replace(reps_path=cfg.reps_path), meta)
    if kar_cfg.mode == "none":
        raise DataError(f"KAR checkpoint {kar_path} has no adaptor (mode 'none')")
    kar, _, _ = load_model(kar_path, user_reps, item_reps)
    if aug is None:
        aug_path = Path(cfg.aug_path)
        if aug_path.exists():
            from .stages import load_augmented

            aug = load_augmented(aug_path, meta, kar.backbone.cfg.roles)
        else:
            with no_grad():
                aug = (
                    None if user_reps is None else
                    kar.adaptor.forward_kind(Tensor(user_reps), "preference").data,
                    None if item_reps is None else
                    kar.adaptor.forward_kind(Tensor(item_reps), "item_factual").data,
                )
    prestored = PrestoredKAR(kar.backbone, *aug)
    return {"base": base, "kar_with_adaptor": kar, "kar_prestored": prestored}


def time_variants(models, batches, warmup_batches=(), repeats=1):
    """Interleaved timing. Returns {variant: list of per-batch seconds}."""
    times = {v: [] for v in models}
    names = list(models)
    with no_grad():
        for b in warmup_batches:
            for v in names:
                models[v](b)
        for rep in range(repeats):
            for i, b in enumerate(batches):
                # rotate the starting variant so none always runs first
                k = (i + rep) % len(names)
                for v in names[k:] + names[:k]:
                    t0 = time.perf_counter()
                    models[v](b)
                    times[v].append(time.perf_counter() - t0)
    return times


def summarize(times, batch_size):
    rows = []
    for v, ts in times.items():
        rows.append(BenchRow(v, len(ts), batch_size, statistics.fmean(ts),
                             statistics.pstdev(ts), statistics.median(ts), min(ts)))
    base = next((r for r in rows if r.variant == "base"), None)
    if base is not None:
        for r in rows:
            r.ratio_to_base = r.mean_s / base.mean_s
    return rows


def make_batches(table, batch_size, n_batches, seed=0):
    """``n_batches`` full batches from ``table``, cycling through a shuffled order."""
    if len(table) == 0:
        raise DataError("cannot benchmark on an empty sample table")
    rng = np.random.default_rng(seed)
    need = batch_size * n_batches
    order = np.concatenate([rng.permutation(len(table))
                            for _ in range(-(-need // len(table)))])[:need]
    return [Batch.from_table(table, order[i * batch_size:(i + 1) * batch_size])
            for i in range(n_batches)]


def bench_inference(cfg: RunConfig, variants=VARIANTS, test_table=None, models=None):
    """Mean per-batch wall time of each variant over ``cfg.bench_batches`` batches."""
    if test_table is None:
        test_path = Path(cfg.test_path)
        if not test_path.exists():
            raise DataError(f"sample file not found: {test_path}")
        test_table = load_samples(test_path)
    models = models or build_variants(cfg, test_table.meta)
    models = {v: models[v] for v in variants}
    batches = make_batches(test_table, cfg.batch_size, cfg.bench_batches + cfg.bench_warmup,
                           cfg.seed)
    warm, timed = batches[:cfg.bench_warmup], batches[cfg.bench_warmup:]
    times = time_variants(models, timed, warm, repeats=cfg.bench_repeats)
    rows = summarize(times, cfg.batch_size)
    for r in rows:
        log.info("%-18s mean %.3f ms  std %.3f ms  x%.3f", r.variant, 1e3 * r.mean_s,
                 1e3 * r.std_s, r.ratio_to_base)
    backbone = models[variants[0]].backbone.cfg.kind
    return BenchTable(rows, backbone, cfg.batch_size)
