"""Line-delimited JSON knowledge store and the generation driver."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .llm import EmptyKnowledgeError, RetryPolicy
from .templates import PromptKind, PromptRequest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnowledgeText:
    entity_id: str
    kind: str
    text: str
    provenance: str
    prompt_hash: str

    def to_json(self):
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)


class KnowledgeStore:
    """One record per (entity_id, kind).

    The file is append-only; a newer record for the same key replaces the
    older one on load. ``compact()`` rewrites the file with live records only.
    Reads are lock-free on a dict snapshot; writes are serialized.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._records = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = KnowledgeText(**json.loads(line))
                        self._records[(rec.entity_id, rec.kind)] = rec

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(list(self._records.values()))

    def get(self, entity_id, kind):
        return self._records.get((str(entity_id), PromptKind(kind).value))

    def put(self, rec: KnowledgeText):
        key = (rec.entity_id, rec.kind)
        with self._lock:
            old = self._records.get(key)
            if old == rec:
                return
            self._records[key] = rec
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(rec.to_json() + "\n")

    def compact(self):
        if not self.path:
            return
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for rec in self._records.values():
                    fh.write(rec.to_json() + "\n")
            tmp.replace(self.path)


def generate_knowledge(req: PromptRequest, llm, store: KnowledgeStore | None = None,
                       policy: RetryPolicy | None = None) -> KnowledgeText:
    """Return knowledge for ``req``, calling the LLM only on a cache miss."""
    policy = policy or RetryPolicy()
    phash = req.prompt_hash
    if store is not None:
        cached = store.get(req.entity_id, req.kind)
        if cached is not None and cached.prompt_hash == phash:
            return cached
    text = policy.run(lambda: llm.complete(req.rendered_text)).strip()
    if not text:
        raise EmptyKnowledgeError(f"LLM returned empty text for {req.kind.value} {req.entity_id!r}")
    rec = KnowledgeText(req.entity_id, req.kind.value, text,
                        getattr(llm, "provenance", "live_llm"), phash)
    if store is not None:
        store.put(rec)
    return rec


def generate_many(requests, llm, store, policy=None, workers=4, on_error="raise"):
    """Run ``generate_knowledge`` over many requests with bounded parallelism.

    Returns (records, failures); ``on_error="skip"`` collects failures instead
    of raising on the first one.
    """
    records, failures = [], []

    def one(req):
        try:
            return generate_knowledge(req, llm, store, policy), None
        except Exception as exc:  # noqa: BLE001 - reported to caller
            if on_error == "raise":
                raise
            return None, (req, exc)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for rec, fail in pool.map(one, requests):
            if rec is not None:
                records.append(rec)
            if fail is not None:
                log.error("generation failed for %s %s: %s", fail[0].kind.value,
                          fail[0].entity_id, fail[1])
                failures.append(fail)
    return records, failures
