from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..adaptor import HybridAdaptor
from ..backbones import BackboneConfig, Batch, KARModel, build_backbone
from ..dataset import load_samples
from ..encoding import RepresentationCache
from ..errors import DataError, NumericError
from ..nn import Adam, Checkpoint, bce_loss, load_checkpoint, no_grad, save_checkpoint
from .config import RunConfig
from .metrics import auc, logloss

log = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    auc: float
    logloss: float
    best_epoch: int
    epochs: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    test_hash: str = ""
    mode: str = "none"
    backbone: str = "din"

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: KARModel
    report: MetricsReport
    checkpoint_path: Path | None = None


def backbone_config(cfg: RunConfig, meta):
    return BackboneConfig(
        kind=cfg.backbone, vocab_sizes=list(meta["vocab_sizes"]), embed_dim=cfg.embed_dim,
        mlp=cfg.mlp, cross_layers=cfg.cross_layers, attention=cfg.attention, mode=cfg.mode,
        aug_dim=cfg.aug_dim, item_field=meta.get("item_field", 5),
        category_field=meta.get("category_field", 6), rating_vocab=meta.get("rating_vocab", 6),
    )


def load_knowledge_tables(cfg: RunConfig, meta):
    """(user_reps, item_reps, m) aligned with the sample file's entity lists."""
    roles = backbone_config(cfg, meta).roles
    if not roles:
        return None, None, None
    path = Path(cfg.reps_path)
    if not path.exists():
        raise DataError(f"mode {cfg.mode!r} needs the representation cache, not found: {path}")
    cache = RepresentationCache(path)
    user_reps = cache.matrix(meta["users"], "preference") if "reasoning" in roles else None
    item_reps = cache.matrix(meta["items"], "item_factual") if "fact" in roles else None
    return user_reps, item_reps, cache.dim


def build_model(cfg: RunConfig, meta, user_reps=None, item_reps=None, m=None):
    bcfg = backbone_config(cfg, meta)
    backbone = build_backbone(bcfg, seed=cfg.seed)
    adaptor = None
    if bcfg.roles:
        adaptor = HybridAdaptor.from_config(cfg.adaptor_config(m), np.random.default_rng(cfg.seed + 1))
    return KARModel(backbone, adaptor, user_reps, item_reps)


def predict(model, table, batch_size=2048):
    out = np.empty(len(table))
    with no_grad():
        for lo in range(0, len(table), batch_size):
            idx = np.arange(lo, min(lo + batch_size, len(table)))
            out[idx] = model(Batch.from_table(table, idx)).data
    return out


def evaluate(model, table, batch_size=2048):
    preds = predict(model, table, batch_size)
    return auc(preds, table.labels), logloss(preds, table.labels)


def model_state(model):
    sections = {"backbone": model.backbone.state_dict()}
    if model.adaptor is not None:
        sections["adaptor"] = model.adaptor.state_dict()
    return sections


def save_model(path, model, cfg: RunConfig, meta, m=None, extra=None, optimizer=None):
    sections = model_state(model)
    if optimizer is not None:
        sections["optimizer"] = optimizer.state_dict()
    metadata = {
        "config": cfg.to_dict(),
        "vocab_sizes": list(meta["vocab_sizes"]),
        "field_names": list(meta.get("field_names", [])),
        "item_field": meta.get("item_field", 5),
        "category_field": meta.get("category_field", 6),
        "rating_vocab": meta.get("rating_vocab", 6),
        "m": m,
        "adaptor": model.adaptor.config() if model.adaptor is not None else None,
        **(extra or {}),
    }
    path = save_checkpoint(path, Checkpoint(sections, metadata))
    manifest = {
        "backbone": cfg.backbone,
        "mode": cfg.mode,
        "embed_dim": cfg.embed_dim,
        "aug_dim": cfg.aug_dim,
        "m": m,
        "checkpoint": path.name,
        "adaptor_section": "adaptor" if model.adaptor is not None else None,
        "adaptor_variant": cfg.adaptor if model.adaptor is not None else None,
    }
    path.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _config_from_metadata(md):
    return RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in md["config"].items()})


def checkpoint_config(path):
    """The RunConfig a checkpoint was trained with."""
    return _config_from_metadata(load_checkpoint(path).metadata)


def load_model(path, user_reps=None, item_reps=None):
    """Rebuild a KARModel (and its RunConfig) from a checkpoint.

    Modes with augmentation need the matching knowledge tables.
    """
    ckpt = load_checkpoint(path)
    md = ckpt.metadata
    cfg = _config_from_metadata(md)
    meta = {k: md[k] for k in ("vocab_sizes", "field_names", "item_field", "category_field",
                               "rating_vocab")}
    roles = backbone_config(cfg, meta).roles
    if "reasoning" not in roles:
        user_reps = None
    if "fact" not in roles:
        item_reps = None
    model = build_model(cfg, meta, user_reps, item_reps, md.get("m"))
    model.backbone.load_state_dict(ckpt.sections["backbone"])
    if model.adaptor is not None:
        model.adaptor.load_state_dict(ckpt.sections["adaptor"])
    return model, cfg, ckpt


def train(cfg: RunConfig, train_table=None, test_table=None, save=True):
    """Joint training of backbone (+ adaptor) with Adam on mean BCE.

    Early-stops when test AUC fails to improve for ``cfg.patience`` epochs
    and restores the best epoch's parameters.
    """
    t_start = time.perf_counter()
    if train_table is None:
        train_table = _load_table(cfg.train_path)
    if test_table is None:
        test_table = _load_table(cfg.test_path)
    if cfg.train_limit:
        train_table = train_table.head(cfg.train_limit)
    meta = train_table.meta
    user_reps, item_reps, m = load_knowledge_tables(cfg, meta)
    model = build_model(cfg, meta, user_reps, item_reps, m)
    params = list(model.backbone.named_parameters("backbone."))
    if model.adaptor is not None:
        params += list(model.adaptor.named_parameters("adaptor."))
    opt = Adam(params, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed + 2)

    report = MetricsReport(auc=float("nan"), logloss=float("nan"), best_epoch=-1,
                           test_hash=test_table.identity_hash(), mode=cfg.mode,
                           backbone=cfg.backbone)
    best_state, best_auc, stale = model_state(model), -np.inf, 0
    train_s = eval_s = 0.0
    ckpt_path = Path(cfg.checkpoint_path)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_table))
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = Batch.from_table(train_table, idx)
            opt.zero_grad()
            loss = bce_loss(model(batch), batch.labels.astype(np.float64))
            value = loss.item()
            if not np.isfinite(value):
                _restore(model, best_state)
                if save:
                    save_model(ckpt_path, model, cfg, meta, m, {"aborted_epoch": epoch})
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}; "
                    f"last good checkpoint written to {ckpt_path}" if save else
                    f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}")
            loss.backward()
            opt.step()
            losses.append(value)
        t1 = time.perf_counter()
        test_auc, test_ll = evaluate(model, test_table, cfg.eval_batch_size)
        t2 = time.perf_counter()
        train_s += t1 - t0
        eval_s += t2 - t1
        report.batch_losses.append(losses)
        report.epochs.append({"epoch": epoch, "train_logloss": float(np.mean(losses)),
                              "test_auc": test_auc, "test_logloss": test_ll,
                              "seconds": t1 - t0})
        log.info("epoch %d: train %.5f  test auc %.5f logloss %.5f", epoch,
                 np.mean(losses), test_auc, test_ll)
        if test_auc > best_auc:
            best_auc, stale = test_auc, 0
            best_state = model_state(model)
            report.auc, report.logloss, report.best_epoch = test_auc, test_ll, epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    _restore(model, best_state)
    report.timings = {"train_s": train_s, "eval_s": eval_s,
                      "total_s": time.perf_counter() - t_start}
    path = None
    if save:
        path = save_model(ckpt_path, model, cfg, meta, m,
                          {"best_epoch": report.best_epoch, "auc": report.auc,
                           "logloss": report.logloss})
    return TrainResult(model, report, path)


def _restore(model, sections):
    model.backbone.load_state_dict(sections["backbone"])
    if model.adaptor is not None:
        model.adaptor.load_state_dict(sections["adaptor"])


def _load_table(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"sample file not found: {path}")
    return load_samples(path)
