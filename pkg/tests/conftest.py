import sys
from pathlib import Path

import numpy as np
import pytest

from kar.dataset import load_movielens, prepare_dataset
from kar.pipeline import synthetic


@pytest.fixture(scope="session")
def ml_dir(tmp_path_factory):
    """A small corpus in the MovieLens-1M file layout."""
    out = tmp_path_factory.mktemp("ml")
    return synthetic.movielens_like(out, seed=3, n_users=120, n_items=150, n_ratings=6000)


@pytest.fixture(scope="session")
def ml_tables(ml_dir):
    interactions, users, movies = load_movielens(ml_dir)
    split, vocab = prepare_dataset(interactions, users, movies, 0.9, 0, 30)
    return split, vocab


@pytest.fixture(scope="session")
def knowledge_data(tmp_path_factory):
    """Synthetic set whose labels depend on knowledge-only latent factors."""
    out = tmp_path_factory.mktemp("knowledge")
    return synthetic.knowledge_dataset(out, seed=0, n_users=150, n_items=50, per_user=20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_config(root, data_dir, **changes):
    """A RunConfig with every path under ``root`` and desk-sized model widths."""
    from kar.pipeline.config import RunConfig

    root = Path(root)
    cfg = RunConfig(
        data_dir=str(data_dir), vocab_path=str(root / "vocab.json"),
        prompts_path=str(root / "prompts.jsonl"), knowledge_path=str(root / "knowledge.jsonl"),
        train_path=str(root / "train.bin"), test_path=str(root / "test.bin"),
        reps_path=str(root / "reps.karv"), aug_path=str(root / "aug.karv"),
        checkpoint_path=str(root / "model.ckpt"), base_checkpoint_path=str(root / "base.ckpt"),
        report_dir=str(root / "report"), embed_dim=8, mlp=(16, 8), attention=(8,),
        cross_layers=2, aug_dim=8, n_shared=1, n_pref=2, n_item=2, expert_hidden=(16, 8),
        encoder_dim=16, epochs=1, batch_size=128, workers=2, lr=3e-3,
        bench_batches=5, bench_warmup=1, bench_repeats=1,
    )
    return cfg.replace(**changes)


@pytest.fixture(scope="session")
def workspace(ml_dir, tmp_path_factory):
    """Offline stages run once: samples, prompts, knowledge, representations."""
    from kar.pipeline import stages

    cfg = small_config(tmp_path_factory.mktemp("work"), ml_dir)
    stages.prepare_data(cfg)
    stages.gen_prompts(cfg)
    stages.gen_knowledge(cfg)
    stages.encode(cfg)
    return cfg


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    ran = {int(r.nodeid.split("::")[-1][6:8]) for key in ("passed", "failed", "error")
           for r in terminalreporter.stats.get(key, []) if "test_acceptance.py::test_c" in r.nodeid}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        terminalreporter.write_line(mod.VERDICTS.get(n, f"criterion {n:>2}: FAIL  (no verdict: errored)"))
