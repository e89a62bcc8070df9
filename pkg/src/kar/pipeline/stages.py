"""Offline stages: data preparation, prompt rendering, knowledge generation,
encoding, and export of augmented vectors.

Each stage reads its inputs from paths in a RunConfig and writes its outputs
to paths in the same config, so stages can run as separate CLI invocations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..adaptor import AugmentedVector
from ..dataset import group_by_user, load_movielens, prepare_dataset, save_samples
from ..encoding import (
    HashTokenEncoder,
    PrecomputedEncoder,
    RepresentationCache,
    prestore,
    prestore_augmented,
    represent,
)
from ..errors import ConfigError, DataError
from ..nn import Tensor, no_grad
from ..prompting import (
    HTTPChatClient,
    KnowledgeStore,
    PromptKind,
    PromptRequest,
    RetryPolicy,
    ScenarioFactors,
    StubLLM,
    build_item_prompt,
    build_preference_prompt,
    elicit_factors,
    generate_many,
)
from ..prompting.templates import PRESET_FACTORS
from .config import RunConfig

log = logging.getLogger(__name__)

SCENARIO_DESCRIPTIONS = {"movie": "movie", "news": "news article"}


def _read_movielens(cfg):
    try:
        return load_movielens(cfg.data_dir)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None


def _ensure_parent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return Path(path)


@dataclass
class PrepareResult:
    n_train: int
    n_test: int
    n_users: int
    n_items: int


def prepare_data(cfg: RunConfig):
    """ratings/users/movies -> train.bin, test.bin, vocab.json."""
    interactions, users, movies = _read_movielens(cfg)
    samples, vocab = prepare_dataset(interactions, users, movies, cfg.split_ratio, cfg.seed,
                                     cfg.max_history)
    save_samples(_ensure_parent(cfg.train_path), samples.train)
    save_samples(_ensure_parent(cfg.test_path), samples.test)
    _ensure_parent(cfg.vocab_path).write_text(json.dumps(vocab.to_json()) + "\n")
    meta = samples.train.meta
    return PrepareResult(len(samples.train), len(samples.test), len(meta["users"]),
                         len(meta["items"]))


def make_llm(cfg: RunConfig, factors=None):
    if cfg.llm == "stub":
        return StubLLM(factors.factors if factors is not None else PRESET_FACTORS.get(
            cfg.scenario, PRESET_FACTORS["movie"]))
    return HTTPChatClient(cfg.llm_url, cfg.llm_model)


def scenario_factors(cfg: RunConfig, llm=None):
    """Config override, else the scenario preset, else ask the LLM."""
    override = cfg.factor_override()
    if override:
        return ScenarioFactors(cfg.scenario, tuple(override))
    if cfg.scenario in PRESET_FACTORS:
        return ScenarioFactors.preset(cfg.scenario)
    if llm is None:
        raise ConfigError(f"no preset factors for scenario {cfg.scenario!r}; set 'factors'")
    return elicit_factors(SCENARIO_DESCRIPTIONS.get(cfg.scenario, cfg.scenario), llm,
                          scenario=cfg.scenario)


def ask_factors(cfg: RunConfig):
    """The elicit-factors stage: always queries the LLM, then applies any override."""
    llm = make_llm(cfg)
    return elicit_factors(SCENARIO_DESCRIPTIONS.get(cfg.scenario, cfg.scenario), llm,
                          scenario=cfg.scenario, override=cfg.factor_override())


def _history_entry(rec, movies):
    movie = movies.get(rec.item_id, {})
    title = movie.get("title", f"item {rec.item_id}")
    genres = movie.get("genres") or ["unknown"]
    return title, "/".join(genres), rec.rating


def build_prompts(interactions, users, movies, factors: ScenarioFactors, max_history=30):
    """One preference prompt per user and one item prompt per item.

    A user's prompt lists their *earliest* ``max_history`` interactions, a
    long-term profile that changes rarely and can be generated once.
    """
    requests = []
    for uid, recs in sorted(group_by_user(interactions).items(), key=lambda kv: _key(kv[0])):
        hist = [_history_entry(r, movies) for r in recs[:max_history]]
        requests.append(build_preference_prompt(users.get(uid, {}), hist, factors, entity_id=uid))
    items = sorted({r.item_id for r in interactions}, key=_key)
    for iid in items:
        movie = movies.get(iid, {"title": f"item {iid}"})
        requests.append(build_item_prompt(movie, factors, entity_id=iid))
    return requests


def _key(s):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


def save_prompts(path, requests):
    path = _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        for r in requests:
            fh.write(json.dumps({"entity_id": r.entity_id, "kind": r.kind.value,
                                 "prompt_hash": r.prompt_hash, "text": r.rendered_text},
                                ensure_ascii=False) + "\n")
    return path


def load_prompts(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"prompt file not found: {path}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(PromptRequest(PromptKind(obj["kind"]), obj["entity_id"], obj["text"]))
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path}: line {line_no}: bad prompt record ({exc})") from None
    return out


def gen_prompts(cfg: RunConfig):
    interactions, users, movies = _read_movielens(cfg)
    factors = scenario_factors(cfg)
    requests = build_prompts(interactions, users, movies, factors, cfg.max_history)
    save_prompts(cfg.prompts_path, requests)
    return requests


def gen_knowledge(cfg: RunConfig, llm=None, policy=None):
    """Generate knowledge for every prompt; already-cached prompts are skipped.

    Failures are logged, successes are kept, and a DataError is raised at the
    end so a rerun resumes where this one stopped.
    """
    requests = load_prompts(cfg.prompts_path)
    llm = llm or make_llm(cfg, scenario_factors(cfg))
    policy = policy or RetryPolicy(max_retries=cfg.max_retries)
    store = KnowledgeStore(_ensure_parent(cfg.knowledge_path))
    records, failures = generate_many(requests, llm, store, policy, workers=cfg.workers,
                                      on_error="skip")
    if failures:
        raise DataError(f"knowledge generation failed for {len(failures)} of {len(requests)} "
                        f"prompts (first: {failures[0][0].kind.value} {failures[0][0].entity_id}: "
                        f"{failures[0][1]}); rerun to retry")
    return records


def make_encoder(cfg: RunConfig):
    if cfg.encoder == "hash":
        return HashTokenEncoder(dim=cfg.encoder_dim, seed=cfg.seed)
    if not cfg.encoder_path:
        raise ConfigError("encoder 'precomputed' needs encoder_path")
    return PrecomputedEncoder(cfg.encoder_path)


def encode(cfg: RunConfig, encoder=None):
    """Knowledge store -> aggregated representations -> reps cache."""
    path = Path(cfg.knowledge_path)
    if not path.exists():
        raise DataError(f"knowledge store not found: {path}")
    store = KnowledgeStore(path)
    if len(store) == 0:
        raise DataError(f"knowledge store is empty: {path}")
    encoder = encoder or make_encoder(cfg)
    reps = [represent(rec.text, encoder, cfg.aggregation, rec.entity_id, rec.kind)
            for rec in sorted(store, key=lambda r: (r.kind, _key(r.entity_id)))]
    prestore(reps, _ensure_parent(cfg.reps_path))
    return RepresentationCache(cfg.reps_path)


def export_augmented(cfg: RunConfig):
    """Run the trained adaptor once over every user and item and prestore the
    resulting augmented vectors, so inference can skip the adaptor."""
    from ..dataset import load_samples
    from .training import checkpoint_config, load_knowledge_tables, load_model

    ckpt = Path(cfg.checkpoint_path)
    if not ckpt.exists():
        raise DataError(f"checkpoint not found: {ckpt}")
    meta = load_samples(cfg.train_path).meta
    run_cfg = checkpoint_config(ckpt)
    if run_cfg.mode == "none":
        raise ConfigError(f"checkpoint {ckpt} was trained with mode 'none'; nothing to export")
    user_reps, item_reps, _ = load_knowledge_tables(run_cfg.replace(reps_path=cfg.reps_path), meta)
    model, _, _ = load_model(ckpt, user_reps, item_reps)
    vectors = []
    with no_grad():
        if user_reps is not None:
            out = model.adaptor.forward_kind(Tensor(user_reps), "preference").data
            vectors += [AugmentedVector(v, "reasoning", u) for u, v in zip(meta["users"], out)]
        if item_reps is not None:
            out = model.adaptor.forward_kind(Tensor(item_reps), "item_factual").data
            vectors += [AugmentedVector(v, "fact", i) for i, v in zip(meta["items"], out)]
    prestore_augmented(vectors, _ensure_parent(cfg.aug_path))
    return RepresentationCache(cfg.aug_path)


def load_augmented(path, meta, roles):
    """(user_aug, item_aug) arrays aligned with the sample file's entity lists."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"augmented-vector cache not found: {path}")
    cache = RepresentationCache(path)
    user_aug = cache.matrix(meta["users"], "reasoning") if "reasoning" in roles else None
    item_aug = cache.matrix(meta["items"], "fact") if "fact" in roles else None
    return user_aug, item_aug
