"""Ranking metrics: Hits@n, average precision at n, Spearman correlation."""

from __future__ import annotations

import numpy as np

from .errors import UndefinedCorrelationError, ValidationError


def _paths(ranked):
    return ranked.paths() if hasattr(ranked, "paths") else list(ranked)


def hits_at_n(ranked, p1, n) -> int:
    """1 if ``p1`` is among the first ``n`` entries of ``ranked``, else 0."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return int(p1 in _paths(ranked)[:n])


def average_precision_at_n(ranked, relevant, n) -> float:
    """Sum of precision@i over relevant hits in the top ``n``, over ``min(|relevant|, n)``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    relevant = set(relevant)
    if not relevant:
        raise ValidationError("relevant set must be non-empty")
    hits = 0
    total = 0.0
    for i, p in enumerate(_paths(ranked)[:n], 1):
        if p in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), n)


def fractional_ranks(values):
    """1-based ranks with ties sharing the average of the positions they span."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a, b) -> float:
    """Spearman's rank correlation with average ranks for ties.

    Raises :class:`UndefinedCorrelationError` when either input is constant.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValidationError("spearman needs two equal-length sequences of length >= 2")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("spearman inputs must be finite")
    ra = fractional_ranks(a) - (len(a) + 1) / 2.0
    rb = fractional_ranks(b) - (len(b) + 1) / 2.0
    den = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if den == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant ranking")
    return float(np.clip(np.dot(ra, rb) / den, -1.0, 1.0))
