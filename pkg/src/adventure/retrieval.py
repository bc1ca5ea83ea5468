"""Vector index over exercise nodes and history-aware retrieval.

Each exercise becomes one document (statement + concept name + hint labels +
level). The default embedder is a 64-dimension hashed bag of tokens
(FNV-1a 64 mod dimension, L2-normalised) so every ranking is bit-reproducible
offline; an HTTP embedder with the same vector contract can be swapped in for
production. Retrieval filters to the learner's practice language and the
current concept (or its successor), excludes already-solved exercises, and
renders the hits into the context block consumed by the feedback prompt.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .knowledge_graph import Exercise, KnowledgeGraph

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
FNV_MASK = (1 << 64) - 1

DEFAULT_DIM = 64

_TOKEN_RE = re.compile(r"[a-z0-9_]+")


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & FNV_MASK
    return h


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic hashed token-count embedder (the offline default)."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            return vec
        for token in tokens:
            vec[fnv1a64(token.encode("utf-8")) % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbedder:
    """External embedding endpoint honouring the same vector contract."""

    def __init__(self, url: str, dim: int, timeout_s: float = 30.0):
        self.url = url
        self.dim = dim
        self.timeout_s = timeout_s

    def embed(self, text: str) -> np.ndarray:
        import httpx

        resp = httpx.post(self.url, json={"texts": [text]}, timeout=self.timeout_s)
        resp.raise_for_status()
        vec = np.asarray(resp.json()["vectors"][0], dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"embedder returned dimension {vec.shape}, expected {self.dim}")
        return vec


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0 by convention when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class DocMetadata:
    concept_id: str
    language_id: str
    level: str


@dataclass(frozen=True)
class RetrievalHit:
    exercise_id: str
    score: float
    metadata: DocMetadata


@dataclass
class VectorIndex:
    ids: list[str] = field(default_factory=list)
    vectors: list[np.ndarray] = field(default_factory=list)
    metadata: list[DocMetadata] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, exercise_id: str, vector: np.ndarray, meta: DocMetadata) -> None:
        if exercise_id in self.ids:
            raise ValueError(f"duplicate document id {exercise_id!r}")
        self.ids.append(exercise_id)
        self.vectors.append(np.asarray(vector, dtype=np.float64))
        self.metadata.append(meta)

    def to_bytes(self) -> bytes:
        parts = ["\x1f".join(self.ids).encode("utf-8")]
        parts.extend(vec.tobytes() for vec in self.vectors)
        return b"\x1e".join(parts)


def document_text(exercise: Exercise, kg: KnowledgeGraph) -> str:
    """Text serialized into the vector store for one exercise node."""
    concept = kg.concepts.get(exercise.concept_id)
    lines = [exercise.statements["en"]]
    if concept is not None:
        lines.append(concept.name)
    for hint in exercise.hints:
        label = hint.concept
        if hint.points:
            label += ": " + ", ".join(hint.points)
        lines.append(label)
    lines.append(exercise.level.value)
    return "\n".join(lines)


def index_graph(kg: KnowledgeGraph, embedder: Embedder) -> VectorIndex:
    """One entry per exercise, in id order; deterministic for a given graph."""
    index = VectorIndex()
    for ex_id in sorted(kg.exercises):
        ex = kg.exercises[ex_id]
        meta = DocMetadata(
            concept_id=ex.concept_id, language_id=ex.language_id, level=ex.level.value
        )
        index.add(ex_id, embedder.embed(document_text(ex, kg)), meta)
    return index


def top_k(
    index: VectorIndex,
    query: np.ndarray,
    k: int,
    metadata_filter: Optional[Callable[[DocMetadata], bool]] = None,
    exclude: Optional[set[str]] = None,
) -> list[RetrievalHit]:
    """The k best-scoring entries passing the filter, sorted (score desc, id asc)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    excluded = exclude or set()
    hits = []
    for ex_id, vec, meta in zip(index.ids, index.vectors, index.metadata):
        if ex_id in excluded:
            continue
        if metadata_filter is not None and not metadata_filter(meta):
            continue
        hits.append(RetrievalHit(exercise_id=ex_id, score=cosine(vec, query), metadata=meta))
    hits.sort(key=lambda h: (-h.score, h.exercise_id))
    return hits[:k]


@dataclass(frozen=True)
class ReformulatedQuery:
    text: str
    used_llm: bool = False
    degraded: bool = False


def reformulate_query(chat_history: str, raw_query: str, llm, prompt_builder) -> ReformulatedQuery:
    """Turn a raw query into a standalone question via the LLM.

    With no history the raw query is already standalone, so the LLM is skipped.
    Transport failures degrade to the raw query rather than blocking feedback.
    """
    if not chat_history.strip():
        return ReformulatedQuery(text=raw_query)
    prompt = prompt_builder(chat_history, raw_query)
    try:
        text = llm.complete(prompt)
    except Exception:
        return ReformulatedQuery(text=raw_query, used_llm=True, degraded=True)
    return ReformulatedQuery(text=text.strip() or raw_query, used_llm=True)


@dataclass(frozen=True)
class RetrievalScope:
    """What part of the graph the learner is currently working in."""

    language_id: str
    concept_id: str
    next_concept_id: Optional[str]
    solved: frozenset[str]


def retrieve_context(
    index: VectorIndex,
    kg: KnowledgeGraph,
    scope: RetrievalScope,
    question_text: str,
    embedder: Embedder,
    k: int = 5,
) -> tuple[str, list[RetrievalHit]]:
    """Context block + hits for the feedback prompt.

    Candidates come from the learner's language and current concept (or the
    next one in the progression); solved exercises are excluded unless that
    would empty the pool, in which case re-practice candidates are allowed.
    """
    allowed_concepts = {scope.concept_id}
    if scope.next_concept_id is not None:
        allowed_concepts.add(scope.next_concept_id)

    def in_scope(meta: DocMetadata) -> bool:
        return meta.language_id == scope.language_id and meta.concept_id in allowed_concepts

    query = embedder.embed(question_text)
    hits = top_k(index, query, k, metadata_filter=in_scope, exclude=set(scope.solved))
    if not hits:
        hits = top_k(index, query, k, metadata_filter=in_scope)
    return render_context_block(hits, kg), hits


def render_context_block(hits: Sequence[RetrievalHit], kg: KnowledgeGraph) -> str:
    """Three lines per hit, blank-line separated, in rank order."""
    blocks = []
    for hit in hits:
        ex = kg.exercises[hit.exercise_id]
        points = [p for hint in ex.hints for p in hint.points]
        blocks.append(
            "\n".join(
                [
                    f"Question ID: {ex.id}",
                    f"Content: {ex.statements['en']}",
                    f"Level: {ex.level.value}; Hints: {', '.join(points)}",
                ]
            )
        )
    return "\n\n".join(blocks)
