"""Synthetic data generators.

``knowledge_dataset`` builds a CTR set whose labels depend on latent user and
item factors that the categorical features do not reveal for unseen users;
the factors are exposed only through "knowledge" representations written to
a vector cache. ``movielens_like`` writes a corpus in the MovieLens-1M file
format for offline end-to-end runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dataset import RawInteraction, prepare_dataset, save_samples
from ..encoding import KnowledgeRepresentation, prestore

ML_GENRES = [
    "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary",
    "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi",
    "Thriller", "War", "Western",
]
ML_AGES = ["1", "18", "25", "35", "45", "50", "56"]
ML_AGE_P = [0.037, 0.183, 0.347, 0.197, 0.091, 0.082, 0.063]


@dataclass
class SyntheticPaths:
    train: Path
    test: Path
    reps: Path


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def knowledge_dataset(out_dir, seed=0, n_users=800, n_items=200, per_user=30, latent=4,
                      m=16, strength=2.0, rep_noise=0.1, max_history=30, split_ratio=0.9):
    """Labels follow sigmoid(strength * <u, v> + item bias).

    Users' latent u and items' latent v are written as m-dim knowledge
    representations (random linear maps plus noise). Item ids, genres and user
    attributes are independent of u and v.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    U = rng.standard_normal((n_users, latent)) / np.sqrt(latent)
    V = rng.standard_normal((n_items, latent))
    item_bias = rng.normal(0.0, 0.5, n_items)
    A = rng.standard_normal((m, latent))
    B = rng.standard_normal((m, latent))

    users = {str(u): {"gender": rng.choice(["M", "F"]), "age": str(rng.choice(ML_AGES)),
                      "occupation": str(rng.integers(0, 21)), "zip": f"{rng.integers(0, 100):02d}"}
             for u in range(n_users)}
    movies = {str(i): {"title": f"item {i}", "genres": [ML_GENRES[rng.integers(len(ML_GENRES))]]}
              for i in range(n_items)}
    interactions = []
    for u in range(n_users):
        items = rng.choice(n_items, size=per_user, replace=False)
        p = _sigmoid(strength * (V[items] @ U[u]) + item_bias[items])
        y = rng.random(per_user) < p
        ratings = np.where(y, rng.integers(4, 6, per_user), rng.integers(1, 4, per_user))
        t0 = int(rng.integers(0, 10_000))
        for k, (it, r) in enumerate(zip(items, ratings)):
            interactions.append(RawInteraction(str(u), str(it), int(r), t0 + 10 * k))

    samples, _ = prepare_dataset(interactions, users, movies, split_ratio, seed, max_history)
    train_path = save_samples(out_dir / "train.bin", samples.train)
    test_path = save_samples(out_dir / "test.bin", samples.test)
    reps = [KnowledgeRepresentation(A @ U[u] + rep_noise * rng.standard_normal(m), str(u), "preference")
            for u in range(n_users)]
    reps += [KnowledgeRepresentation(B @ V[i] + rep_noise * rng.standard_normal(m), str(i), "item_factual")
             for i in range(n_items)]
    reps_path = out_dir / "reps.karv"
    prestore(reps, reps_path)
    return SyntheticPaths(train_path, test_path, reps_path)


def movielens_like(out_dir, seed=0, n_users=6040, n_items=3706, n_ratings=1_000_209,
                   latent=8, min_per_user=20):
    """Write ratings.dat / users.dat / movies.dat in the MovieLens-1M layout.

    Ratings come from a biased latent-factor model (global mean 3.68, user
    and item offsets, 8 latent factors, Gaussian noise), rounded and clipped
    to 1..5. Scales are set so the marginals resemble MovieLens-1M: about 57%
    of ratings are 4 or 5, and the interaction term's std is 0.33. Item popularity is long-tailed and every user has at least
    ``min_per_user`` ratings. The total is ``n_ratings`` unless a user's
    share would exceed ``n_items``, in which case it is capped.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if n_ratings < n_users * min_per_user or min_per_user > n_items:
        raise ValueError("n_ratings must cover min_per_user ratings for every user, "
                         "and min_per_user must not exceed n_items")
    activity = rng.lognormal(0.0, 1.1, n_users)
    counts = min_per_user + rng.multinomial(n_ratings - n_users * min_per_user,
                                            activity / activity.sum())
    counts = np.minimum(counts, n_items)  # the heaviest users may lose a few ratings
    pop = (np.arange(n_items) + 10.0) ** -0.9
    pop = pop[rng.permutation(n_items)]
    pop /= pop.sum()

    b_u = rng.normal(0.0, 0.45, n_users)
    b_i = rng.normal(0.0, 0.55, n_items)
    U = rng.normal(0.0, 0.35, (n_users, latent))
    V = rng.normal(0.0, 0.35, (n_items, latent))
    # interaction term std 0.33: the usual bias-only vs. factor-model RMSE gap on ML-1M
    scale = 0.33 / np.sqrt(latent * 0.35**4)

    lines = []
    for u in range(n_users):
        items = rng.choice(n_items, size=counts[u], replace=False, p=pop)
        score = 3.68 + b_u[u] + b_i[items] + scale * (V[items] @ U[u]) + rng.normal(0, 0.8, len(items))
        ratings = np.clip(np.rint(score), 1, 5).astype(int)
        ts = 956_703_932 + int(rng.integers(0, 60_000_000)) + np.cumsum(
            np.floor(rng.exponential(90.0, len(items))).astype(int))
        for it, r, t in zip(items, ratings, ts):
            lines.append(f"{u + 1}::{it + 1}::{r}::{t}\n")
    (out_dir / "ratings.dat").write_text("".join(lines), encoding="latin-1")

    user_lines = []
    for u in range(n_users):
        g = "M" if rng.random() < 0.717 else "F"
        age = rng.choice(ML_AGES, p=ML_AGE_P)
        occ = rng.integers(0, 21)
        zip_code = f"{rng.integers(0, 100_000):05d}"
        user_lines.append(f"{u + 1}::{g}::{age}::{occ}::{zip_code}\n")
    (out_dir / "users.dat").write_text("".join(user_lines), encoding="latin-1")

    movie_lines = []
    for i in range(n_items):
        k = int(rng.integers(1, 4))
        genres = "|".join(rng.choice(ML_GENRES, size=k, replace=False))
        year = int(rng.integers(1919, 2001))
        movie_lines.append(f"{i + 1}::Synthetic Title {i + 1} ({year})::{genres}\n")
    (out_dir / "movies.dat").write_text("".join(movie_lines), encoding="latin-1")
    return out_dir
