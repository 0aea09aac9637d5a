"""Scoring and ranking of source files for a query report.

Two score components per query: a similar-report transfer score built on
TF-IDF cosine, and a cosine in the learned representation space. They are
min-max normalized per query and blended with a single weight alpha.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import BowVector, Vocabulary, bow_vectorize
from .embeddings import EmbeddingTable, embed_tokens
from .errors import ValidationError
from .network import TypedNode
from .regularizer import RepresentationModel

logger = logging.getLogger(__name__)


@dataclass
class QueryResult:
    """Top-k ranking for one query: (path, combined score), scores non-increasing."""

    query_id: str
    ranking: list[tuple[str, float]]

    def paths(self) -> list[str]:
        return [path for path, _ in self.ranking]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


def cosine_bow(a: BowVector, b: BowVector) -> float:
    """Cosine over sparse TF-IDF vectors; 0.0 when either is empty."""
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    small, large = (a.entries, b.entries) if len(a.entries) <= len(b.entries) else (b.entries, a.entries)
    dot = math.fsum(w * large[i] for i, w in sorted(small.items()) if i in large)
    return dot / (na * nb)


def bow_file_scores(
    query_bow: BowVector,
    train_bows: Mapping[str, BowVector],
    fix_links: Mapping[str, Sequence[str]],
    universe: Iterable[str],
) -> dict[str, float]:
    """Transfer similar-report similarity to the files those reports fixed.

    score(file) = sum over training reports r fixing it of
    cos(query, r) / |files fixed by r|. Files never fixed score 0.
    """
    scores = {path: 0.0 for path in sorted(universe)}
    for rid, bow in train_bows.items():
        files = fix_links.get(rid, ())
        if not files:
            continue
        sim = cosine_bow(query_bow, bow)
        if sim == 0.0:
            continue
        share = sim / len(files)
        for path in files:
            if path in scores:
                scores[path] += share
    return scores


def netreg_file_scores(
    query_tokens: Sequence[str],
    model: RepresentationModel,
    table: EmbeddingTable,
    vocab: Vocabulary,
) -> dict[str, float]:
    """Cosine between the embedded query and each file's learned vector.

    The query is embedded as the TF-IDF-weighted mean of its in-table
    tokens, with weights taken under the training vocabulary (tokens the
    vocabulary does not know weigh 0). A query that embeds to zero scores
    every file 0 and logs a warning.
    """
    weights = {t: 0.0 for t in set(query_tokens)}
    query_bow = bow_vectorize(query_tokens, vocab)
    for idx, w in query_bow.entries.items():
        weights[vocab.term_of(idx)] = w
    query_vec, oov = embed_tokens(query_tokens, weights, table)
    files = sorted(n for n in model.vectors if n.kind == "S")
    if not np.any(query_vec):
        logger.warning(
            "query embeds to the zero vector (%d OOV tokens); all file scores are 0", oov
        )
        return {node.key: 0.0 for node in files}
    return {node.key: cosine(query_vec, model.vectors[node]) for node in files}


def minmax_normalize(scores: Mapping[str, float]) -> dict[str, float]:
    """Scale scores to [0, 1] per query; a constant map normalizes to all zeros."""
    if not scores:
        return {}
    values = scores.values()
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return {key: 0.0 for key in scores}
    span = hi - lo
    return {key: (value - lo) / span for key, value in scores.items()}


def combine_and_rank(
    bow_scores: Mapping[str, float],
    model_scores: Mapping[str, float],
    alpha: float,
    k: int,
    query_id: str = "",
) -> QueryResult:
    """Blend the two normalized components and return the top-k files.

    final = (1 - alpha) * bow + alpha * model, both min-max normalized over
    this query's universe. Ties are broken by ascending path. At alpha=0
    the ranking equals ordering by the raw bow component alone.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha!r}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k!r}")
    if set(bow_scores) != set(model_scores):
        raise ValidationError("score maps cover different file universes")
    bow_n = minmax_normalize(bow_scores)
    model_n = minmax_normalize(model_scores)
    final = {
        path: (1.0 - alpha) * bow_n[path] + alpha * model_n[path] for path in bow_n
    }
    ordered = sorted(final.items(), key=lambda item: (-item[1], item[0]))
    return QueryResult(query_id=query_id, ranking=ordered[:k])
