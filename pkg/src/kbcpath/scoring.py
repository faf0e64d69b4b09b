"""Path scoring and ranking.

``predrank`` sums the prediction ranks of the two hops (lower is better),
``cosine`` sums the cosine similarities of adjacent entity embeddings (higher
is better), and the ``baseline`` ignores predictions altogether, picking the
mid entities most similar to both endpoints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .builder import CandidateGraph, enumerate_one_hop_paths
from .errors import ValidationError
from .graph import KnowledgeGraph
from .mining import Path


class Scorer(str, enum.Enum):
    PREDRANK = "predrank"
    COSINE = "cosine"
    BASELINE = "baseline"

    @property
    def ascending(self):
        return self is Scorer.PREDRANK


class Hop(NamedTuple):
    pred_rank: int | None
    cosine: float | None


class ScoredPath(NamedTuple):
    path: Path
    score: float
    scorer: Scorer
    hops: tuple  # (Hop, Hop)
    rank: int = 0


@dataclass(frozen=True)
class RankedPathList:
    pair: tuple
    scorer: Scorer
    entries: tuple

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def paths(self):
        return [e.path for e in self.entries]


def cosine(u, v):
    """Cosine similarity; 0 when either vector is all zeros."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def score_from_hops(hops, scorer):
    scorer = Scorer(scorer)
    if scorer is Scorer.PREDRANK:
        return float(hops[0].pred_rank + hops[1].pred_rank)
    return hops[0].cosine + hops[1].cosine


def _pred_hops(p: Path, cg: CandidateGraph):
    e1, e2 = cg.edge(p.source, p.mid), cg.edge(p.mid, p.target)
    if e1 is None or e2 is None:
        raise ValidationError(f"path {p} has a hop missing from the candidate graph")
    return e1.pred_rank, e2.pred_rank


def _cos_hops(p: Path, model):
    emb = model.entity_embedding
    return cosine(emb(p.source), emb(p.mid)), cosine(emb(p.mid), emb(p.target))


def score_predrank(p: Path, cg: CandidateGraph):
    r1, r2 = _pred_hops(p, cg)
    return float(r1 + r2)


def score_cosine(p: Path, model):
    c1, c2 = _cos_hops(p, model)
    return c1 + c2


def _sort_key(entry: ScoredPath):
    p = entry.path
    s = entry.score if entry.scorer.ascending else -entry.score
    return s, p.mid, p.rel1, p.rel2


def _finish(pair, scorer, scored):
    scored.sort(key=_sort_key)
    return RankedPathList(pair, scorer, tuple(e._replace(rank=i) for i, e in enumerate(scored, 1)))


def rank_paths(paths, scorer, cg: CandidateGraph | None = None, model=None) -> RankedPathList:
    """Score every path and order them (ascending for predrank, descending otherwise).

    Ties go to the smaller mid-entity id, then smaller relation ids.
    Hop records carry whatever of (prediction rank, cosine) the inputs allow.
    """
    scorer = Scorer(scorer)
    if scorer is Scorer.PREDRANK and cg is None:
        raise ValidationError("predrank scoring needs the candidate graph")
    if scorer is not Scorer.PREDRANK and model is None:
        raise ValidationError(f"{scorer.value} scoring needs the model")
    scored = []
    for p in paths:
        ranks = _pred_hops(p, cg) if cg is not None else (None, None)
        coss = _cos_hops(p, model) if model is not None else (None, None)
        hops = (Hop(ranks[0], coss[0]), Hop(ranks[1], coss[1]))
        scored.append(ScoredPath(p, score_from_hops(hops, scorer), scorer, hops))
    pair = (cg.source, cg.target) if cg is not None else (
        (paths[0].source, paths[0].target) if paths else (None, None))
    return _finish(pair, scorer, scored)


def rank_candidate_paths(cg: CandidateGraph, scorer, model) -> RankedPathList:
    return rank_paths(enumerate_one_hop_paths(cg), scorer, cg=cg, model=model)


def baseline_rank(model, g: KnowledgeGraph, e1, e2, query_types, k) -> RankedPathList:
    """Paths through the ``k`` mids most cosine-similar to both endpoints.

    Mids are restricted to the middle types of the query types fitting the
    pair; relations are the smallest matching relation ids.  Model
    predictions are not consulted, so the result does not depend on any
    prediction depth.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    e1, e2 = g.check_entity(e1), g.check_entity(e2)
    t1, t2 = g.entity_type(e1), g.entity_type(e2)
    mid_types = sorted({qt[1] for qt in query_types if (qt[0], qt[2]) in ((t1, t2), (t2, t1))})
    cos1 = model.cosine_matrix_row(e1)
    cos2 = model.cosine_matrix_row(e2)
    total = cos1 + cos2
    cand = np.flatnonzero(np.isin(g.entity_types, mid_types))
    cand = cand[(cand != e1) & (cand != e2)]
    order = cand[np.lexsort((cand, -total[cand]))]

    scored = []
    for x in order.tolist():
        if len(scored) == k:
            break
        tx = g.entity_type(x)
        r1s, r2s = g.relations_between(t1, tx), g.relations_between(tx, t2)
        if not r1s or not r2s:
            continue
        c1, c2 = float(cos1[x]), float(cos2[x])
        hops = (Hop(None, c1), Hop(None, c2))
        scored.append(ScoredPath(Path(e1, r1s[0], x, r2s[0], e2), c1 + c2, Scorer.BASELINE, hops))
    return _finish((e1, e2), Scorer.BASELINE, scored)


def format_ranked(ranked_lists, g: KnowledgeGraph, header_comments=()):
    """Rows ``src tgt rank score scorer rel1 mid rel2`` for each ranked list."""
    S, R = g.entity_surfaces, g.relation_names
    lines = [f"# {c}" for c in header_comments]
    lines.append("# src\ttgt\trank\tscore\tscorer\trel1\tmid\trel2")
    for rl in ranked_lists:
        for e in rl.entries:
            p = e.path
            lines.append("\t".join((S[p.source], S[p.target], str(e.rank), repr(float(e.score)),
                                    e.scorer.value, R[p.rel1], S[p.mid], R[p.rel2])))
    return "".join(line + "\n" for line in lines)
