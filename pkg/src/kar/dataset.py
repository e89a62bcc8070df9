"""MovieLens-1M ingestion: parsing, label binarization, user-level split,
vocabularies and behaviour-history sample assembly.

Samples are stored columnar (numpy arrays) because a full ML-1M run has a
million of them; ``SampleTable[i]`` gives a per-sample ``Sample`` view.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SplitError

FIELDS = ("user_id", "gender", "age", "occupation", "zip", "item_id", "genre")
USER_FIELDS = ("gender", "age", "occupation", "zip")
ITEM_FIELD = FIELDS.index("item_id")
CATEGORY_FIELD = FIELDS.index("genre")
RATING_VOCAB = 6  # 0 = padding, 1..5 = ratings
DEFAULT_MAX_HISTORY = 30

AGE_GROUPS = {
    "1": "under 18", "18": "18-24", "25": "25-34", "35": "35-44",
    "45": "45-49", "50": "50-55", "56": "56 or older",
}
OCCUPATIONS = [
    "other", "academic/educator", "artist", "clerical/admin", "college/grad student",
    "customer service", "doctor/health care", "executive/managerial", "farmer",
    "homemaker", "K-12 student", "lawyer", "programmer", "retired", "sales/marketing",
    "scientist", "self-employed", "technician/engineer", "tradesman/craftsman",
    "unemployed", "writer",
]


@dataclass(frozen=True, slots=True)
class RawInteraction:
    user_id: str
    item_id: str
    rating: int
    timestamp: int


@dataclass(frozen=True)
class Sample:
    fields: tuple
    history: tuple  # ((item_idx, category_idx, rating), ...) oldest first
    label: int


def _parse_int(token, what, line_no, raw):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"non-integer {what} {token!r}", line_no, raw) from None


def parse_interactions(path):
    """Read a ``UserID::MovieID::Rating::Timestamp`` ratings file."""
    path = Path(path)
    out = []
    with open(path, encoding="latin-1") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ParseError(f"expected 4 '::'-separated fields, got {len(parts)}", line_no, line)
            user = _parse_int(parts[0], "user id", line_no, line)
            item = _parse_int(parts[1], "item id", line_no, line)
            rating = _parse_int(parts[2], "rating", line_no, line)
            ts = _parse_int(parts[3], "timestamp", line_no, line)
            if not 1 <= rating <= 5:
                raise ParseError(f"rating {rating} outside [1, 5]", line_no, line)
            if ts < 0:
                raise ParseError(f"negative timestamp {ts}", line_no, line)
            out.append(RawInteraction(str(user), str(item), rating, ts))
    return out


def parse_users(path):
    """``UserID::Gender::Age::Occupation::Zip-code`` -> {user_id: profile dict}."""
    users = {}
    with open(path, encoding="latin-1") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("::")
            if len(parts) != 5:
                raise ParseError(f"expected 5 fields in users file, got {len(parts)}", line_no, line)
            users[parts[0]] = dict(zip(USER_FIELDS, parts[1:]))
    return users


def parse_movies(path):
    """``MovieID::Title::Genre|Genre`` -> {item_id: {"title", "genres"}}."""
    movies = {}
    with open(path, encoding="latin-1") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("::")
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields in movies file, got {len(parts)}", line_no, line)
            movies[parts[0]] = {"title": parts[1], "genres": parts[2].split("|")}
    return movies


def binarize_rating(rating):
    if not 1 <= rating <= 5:
        raise ValueError(f"rating {rating} outside [1, 5]")
    return 1 if rating >= 4 else 0


@dataclass
class DatasetSplit:
    train: object
    test: object
    assignment: dict = field(default_factory=dict)  # user_id -> "train" | "test"

    @property
    def train_users(self):
        return {u for u, s in self.assignment.items() if s == "train"}

    @property
    def test_users(self):
        return {u for u, s in self.assignment.items() if s == "test"}


def split_by_user(interactions, split_ratio=0.9, seed=0):
    if not 0.0 < split_ratio < 1.0:
        raise SplitError(f"split_ratio must lie in (0, 1), got {split_ratio}")
    users = sorted({r.user_id for r in interactions}, key=_user_sort_key)
    if len(users) < 2:
        raise SplitError(f"need at least 2 users to split, got {len(users)}")
    n_train = int(round(split_ratio * len(users)))
    n_train = min(max(n_train, 1), len(users) - 1)
    order = np.random.default_rng(seed).permutation(len(users))
    train_set = {users[i] for i in order[:n_train]}
    assignment = {u: ("train" if u in train_set else "test") for u in users}
    train = [r for r in interactions if r.user_id in train_set]
    test = [r for r in interactions if r.user_id not in train_set]
    return DatasetSplit(train, test, assignment)


def _user_sort_key(u):
    return (0, int(u), "") if u.isdigit() else (1, 0, u)


class FeatureVocabulary:
    """Per-field value -> index maps. Index 0 is reserved for unseen values."""

    def __init__(self, maps=None):
        self.maps = {name: dict(m) for name, m in (maps or {}).items()}

    @classmethod
    def build(cls, rows, field_names=FIELDS):
        maps = {name: {} for name in field_names}
        for row in rows:
            for name, value in zip(field_names, row):
                m = maps[name]
                if value not in m:
                    m[value] = len(m) + 1
        return cls(maps)

    def lookup(self, field_name, value):
        return self.maps[field_name].get(value, 0)

    def size(self, field_name):
        return len(self.maps[field_name]) + 1

    @property
    def sizes(self):
        return [self.size(n) for n in self.maps]

    @property
    def field_names(self):
        return list(self.maps)

    def to_json(self):
        return {name: sorted(m, key=m.get) for name, m in self.maps.items()}

    @classmethod
    def from_json(cls, obj):
        return cls({name: {v: i + 1 for i, v in enumerate(values)} for name, values in obj.items()})


def raw_feature_row(rec, users=None, movies=None):
    prof = (users or {}).get(rec.user_id, {})
    movie = (movies or {}).get(rec.item_id, {})
    genres = movie.get("genres") or ["unknown"]
    return (
        rec.user_id,
        prof.get("gender", "unknown"),
        prof.get("age", "unknown"),
        prof.get("occupation", "unknown"),
        prof.get("zip", "unknown"),
        rec.item_id,
        genres[0],
    )


def build_vocabulary(train_interactions, users=None, movies=None):
    return FeatureVocabulary.build(raw_feature_row(r, users, movies) for r in train_interactions)


def group_by_user(interactions):
    """user_id -> interactions sorted by timestamp (ties keep file order)."""
    by_user = defaultdict(list)
    for r in interactions:
        by_user[r.user_id].append(r)
    return {u: sorted(rs, key=lambda r: r.timestamp) for u, rs in by_user.items()}


class SampleTable:
    """Columnar samples.

    fields:      (N, F) int32 vocabulary indices
    history:     (N, L, 3) int32 (item, category, rating), right-aligned, 0-padded
    hist_len:    (N,) int32
    labels:      (N,) int32
    user_keys / item_keys: (N,) int32 positions in ``meta["users"]`` / ``meta["items"]``
    timestamps:  (N,) int64
    """

    COLUMNS = ("fields", "history", "hist_len", "labels", "user_keys", "item_keys", "timestamps")

    def __init__(self, fields, history, hist_len, labels, user_keys, item_keys, timestamps, meta):
        self.fields = fields
        self.history = history
        self.hist_len = hist_len
        self.labels = labels
        self.user_keys = user_keys
        self.item_keys = item_keys
        self.timestamps = timestamps
        self.meta = meta

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        n = int(self.hist_len[i])
        L = self.history.shape[1]
        hist = tuple(tuple(int(v) for v in row) for row in self.history[i, L - n:])
        return Sample(tuple(int(v) for v in self.fields[i]), hist, int(self.labels[i]))

    @property
    def max_history(self):
        return self.history.shape[1]

    @property
    def hist_mask(self):
        L = self.max_history
        return np.arange(L)[None, :] >= (L - self.hist_len)[:, None]

    def take(self, idx):
        idx = np.asarray(idx)
        return SampleTable(
            *(getattr(self, c)[idx] for c in self.COLUMNS), meta=self.meta
        )

    def head(self, n):
        return self.take(np.arange(min(n, len(self))))

    def identity_hash(self):
        """Content hash of which (user, item, label) rows the table holds."""
        h = hashlib.sha256()
        users = self.meta["users"]
        items = self.meta["items"]
        for u, it, y in zip(self.user_keys, self.item_keys, self.labels):
            h.update(f"{users[u]}|{items[it]}|{y};".encode())
        return h.hexdigest()


def build_samples(split, vocab, max_history=DEFAULT_MAX_HISTORY, users=None, movies=None):
    """Turn a user-level split of raw interactions into SampleTables.

    The history of an interaction is the user's own interactions with a
    strictly earlier timestamp, most recent ``max_history`` kept.
    """
    all_users = sorted(split.assignment, key=_user_sort_key)
    all_items = sorted({r.item_id for r in split.train} | {r.item_id for r in split.test},
                       key=_user_sort_key)
    meta = {
        "field_names": list(FIELDS),
        "vocab_sizes": [vocab.size(n) for n in FIELDS],
        "max_history": int(max_history),
        "rating_vocab": RATING_VOCAB,
        "item_field": ITEM_FIELD,
        "category_field": CATEGORY_FIELD,
        "users": all_users,
        "items": all_items,
    }
    user_pos = {u: i for i, u in enumerate(all_users)}
    item_pos = {it: i for i, it in enumerate(all_items)}
    tables = []
    for part in (split.train, split.test):
        tables.append(_assemble(part, vocab, max_history, users, movies, meta, user_pos, item_pos))
    return DatasetSplit(tables[0], tables[1], dict(split.assignment))


def _assemble(interactions, vocab, L, users, movies, meta, user_pos, item_pos):
    grouped = group_by_user(interactions)
    cols = {c: [] for c in SampleTable.COLUMNS}
    for user in sorted(grouped, key=_user_sort_key):
        recs = grouped[user]
        n = len(recs)
        rows = np.array(
            [[vocab.lookup(name, v) for name, v in zip(FIELDS, raw_feature_row(r, users, movies))]
             for r in recs],
            dtype=np.int32,
        )
        ts = np.array([r.timestamp for r in recs], dtype=np.int64)
        triples = np.stack(
            [rows[:, ITEM_FIELD], rows[:, CATEGORY_FIELD],
             np.array([r.rating for r in recs], dtype=np.int32)],
            axis=1,
        )
        # history of j ends before the first interaction sharing its timestamp
        end = np.searchsorted(ts, ts, side="left")
        idx = end[:, None] - L + np.arange(L)[None, :]
        valid = idx >= 0
        hist = np.where(valid[..., None], triples[np.clip(idx, 0, None)], 0).astype(np.int32)
        cols["fields"].append(rows)
        cols["history"].append(hist.reshape(n, L, 3))
        cols["hist_len"].append(np.minimum(end, L).astype(np.int32))
        cols["labels"].append(np.array([binarize_rating(r.rating) for r in recs], dtype=np.int32))
        cols["user_keys"].append(np.full(n, user_pos[user], dtype=np.int32))
        cols["item_keys"].append(np.array([item_pos[r.item_id] for r in recs], dtype=np.int32))
        cols["timestamps"].append(ts)
    F = len(FIELDS)
    empty = {
        "fields": np.zeros((0, F), np.int32), "history": np.zeros((0, L, 3), np.int32),
        "timestamps": np.zeros(0, np.int64),
    }
    arrays = {
        c: (np.concatenate(v) if v else empty.get(c, np.zeros(0, np.int32)))
        for c, v in cols.items()
    }
    return SampleTable(**arrays, meta=meta)


# --- on-disk sample file -------------------------------------------------
#
#   b"KARS"  u16 version  u32 header_len  header (UTF-8 JSON)
#   header: {"n": N, "F": F, "max_history": L, "vocab_sizes": [...], ...meta}
#   rows:   N x (F + 3L + 6) little-endian int32, column order
#           fields[F] hist_len history[L*3] label user_key item_key ts_lo ts_hi

SAMPLE_MAGIC = b"KARS"
SAMPLE_VERSION = 1


def sample_row_width(F, L):
    return F + 3 * L + 6


def save_samples(path, table: SampleTable):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    N, F = table.fields.shape
    L = table.max_history
    header = dict(table.meta, n=N, F=F, max_history=L,
                  columns=["fields", "hist_len", "history", "label", "user_key", "item_key",
                           "ts_lo", "ts_hi"])
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    ts = table.timestamps.astype("<i8").view("<i4").reshape(N, 2)
    rows = np.concatenate(
        [table.fields, table.hist_len[:, None], table.history.reshape(N, 3 * L),
         table.labels[:, None], table.user_keys[:, None], table.item_keys[:, None], ts],
        axis=1,
    ).astype("<i4")
    with open(path, "wb") as fh:
        fh.write(SAMPLE_MAGIC)
        fh.write(struct.pack("<HI", SAMPLE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(rows.tobytes())
    return path


def load_samples(path) -> SampleTable:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != SAMPLE_MAGIC or len(raw) < 10:
        raise ParseError(f"{path}: not a sample file")
    version, hlen = struct.unpack("<HI", raw[4:10])
    if version != SAMPLE_VERSION:
        raise ParseError(f"{path}: unsupported sample file version {version}")
    try:
        header = json.loads(raw[10:10 + hlen].decode("utf-8"))
        N, F, L = header["n"], header["F"], header["max_history"]
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{path}: bad sample file header ({exc})") from None
    body = raw[10 + hlen:]
    width = sample_row_width(F, L)
    if len(body) != 4 * N * width:
        raise ParseError(f"{path}: expected {N} rows of {width} int32 ({4 * N * width} bytes), "
                         f"found {len(body)} bytes")
    rows = np.frombuffer(body, dtype="<i4")
    rows = rows.reshape(N, width).astype(np.int32)
    c = 0
    fields = rows[:, c:c + F]; c += F
    hist_len = rows[:, c]; c += 1
    history = rows[:, c:c + 3 * L].reshape(N, L, 3); c += 3 * L
    labels = rows[:, c]; c += 1
    user_keys = rows[:, c]; c += 1
    item_keys = rows[:, c]; c += 1
    ts = np.ascontiguousarray(rows[:, c:c + 2]).view(np.int64).reshape(N)
    meta = {k: v for k, v in header.items() if k not in ("n", "F", "columns")}
    return SampleTable(fields.copy(), history.copy(), hist_len.copy(), labels.copy(),
                       user_keys.copy(), item_keys.copy(), ts.copy(), meta)


def load_movielens(data_dir):
    """Parse ratings.dat plus optional users.dat / movies.dat from a directory."""
    data_dir = Path(data_dir)
    ratings = data_dir / "ratings.dat"
    if not ratings.exists():
        raise FileNotFoundError(f"ratings file not found: {ratings}")
    interactions = parse_interactions(ratings)
    users = parse_users(data_dir / "users.dat") if (data_dir / "users.dat").exists() else {}
    movies = parse_movies(data_dir / "movies.dat") if (data_dir / "movies.dat").exists() else {}
    return interactions, users, movies


def prepare_dataset(interactions, users=None, movies=None, split_ratio=0.9, seed=0,
                    max_history=DEFAULT_MAX_HISTORY):
    split = split_by_user(interactions, split_ratio, seed)
    vocab = build_vocabulary(split.train, users, movies)
    samples = build_samples(split, vocab, max_history, users, movies)
    return samples, vocab
