"""Path recovery (Hits@n / MAP@n) and known-path ranking (Spearman) experiments."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .builder import build_candidate_graph, relations_for_query
from .errors import UndefinedCorrelationError
from .graph import KnowledgeGraph
from .metrics import average_precision_at_n, fractional_ranks, hits_at_n, spearman
from .mining import GroundTruthSet, LeaveOneOutSplit
from .model import Hyperparams, train
from .scoring import Scorer, baseline_rank, rank_candidate_paths

log = logging.getLogger(__name__)

EXP1_SCORERS = (Scorer.PREDRANK, Scorer.COSINE, Scorer.BASELINE)


class PredictionCache:
    """Wraps a model so repeated queries at smaller depths reuse one deep query."""

    def __init__(self, model, depth):
        self.model = model
        self.depth = depth
        self._cache = {}

    def predict_tails(self, e, r, n):
        if n > self.depth:
            return self.model.predict_tails(e, r, n)
        key = (e, r)
        if key not in self._cache:
            self._cache[key] = self.model.predict_tails(e, r, self.depth)
        return self._cache[key][:n]

    predict_heads = predict_tails

    def __getattr__(self, name):
        return getattr(self.model, name)


def _pmap(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- experiment 1 --------------------------------------------------------------------


@dataclass
class Exp1Report:
    n_preds: tuple
    cutoffs: tuple
    n_pairs: int
    hits: dict = field(default_factory=dict)  # (n_pred, scorer, cutoff) -> fraction
    map: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for n_pred in self.n_preds:
            for scorer in EXP1_SCORERS:
                for metric, table in (("hits", self.hits), ("map", self.map)):
                    for c in self.cutoffs:
                        out.append(("exp1", n_pred, scorer.value, metric, c,
                                    table[n_pred, scorer, c]))
        return out

    def table(self):
        cut = sorted(self.cutoffs, reverse=True)
        head = ["#Pred", "Scoring"] + [f"{m}@{c}" for c in cut for m in ("Hits", "MAP")]
        lines = ["  ".join(f"{h:>9}" for h in head)]
        names = {Scorer.PREDRANK: "predrank", Scorer.COSINE: "cosine", Scorer.BASELINE: "baseline"}
        for n_pred in self.n_preds:
            for scorer in EXP1_SCORERS:
                vals = []
                for c in cut:
                    vals += [self.hits[n_pred, scorer, c], self.map[n_pred, scorer, c]]
                cells = [str(n_pred), names[scorer]] + [f"{v:.3f}" for v in vals]
                lines.append("  ".join(f"{x:>9}" for x in cells))
        return "\n".join(lines) + "\n"


def _exp1_pair(model, g, pair, n_preds, cutoffs):
    cached = PredictionCache(model, max(n_preds))
    rels = relations_for_query((g.entity_type(pair.source), g.entity_type(pair.target)),
                               pair.query_types, g)
    relevant = set(pair.paths)
    p1 = pair.top_path
    out = {}
    for n_pred in n_preds:
        cg = build_candidate_graph(cached, g, pair.source, pair.target, pair.query_types, n_pred,
                                   relations=rels)
        for scorer in (Scorer.PREDRANK, Scorer.COSINE):
            ranked = rank_candidate_paths(cg, scorer, model)
            for c in cutoffs:
                out[n_pred, scorer, c] = (hits_at_n(ranked, p1, c),
                                          average_precision_at_n(ranked, relevant, c))
    base = baseline_rank(model, g, pair.source, pair.target, pair.query_types, max(cutoffs))
    for n_pred in n_preds:
        for c in cutoffs:
            out[n_pred, Scorer.BASELINE, c] = (hits_at_n(base, p1, c),
                                               average_precision_at_n(base, relevant, c))
    return out


def evaluate_experiment1(model, g: KnowledgeGraph, gt: GroundTruthSet, n_preds=(100, 300, 500),
                         cutoffs=(1, 10, 25, 100), threads=1) -> Exp1Report:
    """Hits@n of each pair's top path and MAP@n of all its ground-truth paths."""
    n_preds, cutoffs = tuple(n_preds), tuple(cutoffs)
    per_pair = _pmap(lambda pr: _exp1_pair(model, g, pr, n_preds, cutoffs), gt.pairs, threads)
    report = Exp1Report(n_preds, cutoffs, len(per_pair))
    for key in (per_pair[0] if per_pair else {}):
        report.hits[key] = float(np.mean([r[key][0] for r in per_pair]))
        report.map[key] = float(np.mean([r[key][1] for r in per_pair]))
    if not per_pair:
        for n_pred in n_preds:
            for scorer in EXP1_SCORERS:
                for c in cutoffs:
                    report.hits[n_pred, scorer, c] = report.map[n_pred, scorer, c] = 0.0
    return report


def run_experiment1(g: KnowledgeGraph, gt: GroundTruthSet, split: LeaveOneOutSplit,
                    hp: Hyperparams, n_preds=(100, 300, 500), cutoffs=(1, 10, 25, 100),
                    threads=1, backend=None):
    """Train on the leave-one-out training set and evaluate path recovery.

    Returns ``(report, model)``.
    """
    model = train(split.train_graph(g), hp, backend=backend)
    return evaluate_experiment1(model, g, gt, n_preds, cutoffs, threads), model


# -- experiment 2 --------------------------------------------------------------------


@dataclass
class Exp2Cohort:
    min_paths: int
    pairs: int  # pairs in the ground truth with at least min_paths paths
    coverage: int  # of those, pairs entering the correlation averages
    uncovered: int
    rs_pt: float
    rs_pr: float
    rs_tr: float


@dataclass
class Exp2Report:
    n_pred: int
    scorer: Scorer
    cohorts: list = field(default_factory=list)
    scatter: list = field(default_factory=list)  # (src, tgt, R_t, R_p, R_r) per known path

    def rows(self):
        out = []
        for c in self.cohorts:
            for metric, v in (("coverage", c.coverage), ("uncovered", c.uncovered),
                              ("rs_Rp_Rt", c.rs_pt), ("rs_Rp_Rr", c.rs_pr),
                              ("rs_Rt_Rr", c.rs_tr)):
                out.append(("exp2", self.n_pred, self.scorer.value, metric, c.min_paths, v))
        return out

    def table(self):
        lines = [f"{'#Paths':>7}  {'Coverage':>8}  {'Rank pair':>9}  {'r_s':>7}"]
        for c in self.cohorts:
            for i, (name, v) in enumerate((("Rp-Rt", c.rs_pt), ("Rp-Rr", c.rs_pr),
                                           ("Rt-Rr", c.rs_tr))):
                lead = (f">={c.min_paths}", str(c.coverage)) if i == 0 else ("", "")
                lines.append(f"{lead[0]:>7}  {lead[1]:>8}  {name:>9}  {v:7.3f}")
        return "\n".join(lines) + "\n"


@dataclass
class _PairResult:
    k: int
    covered: bool
    rs: tuple | None  # (pt, pr, tr)
    scatter: list


def relative_ranks(ranked_paths, known_paths):
    """Positions (1-based) of ``known_paths`` when only they are kept from ``ranked_paths``.

    Returns ``None`` if any known path is absent.
    """
    pos = {p: i for i, p in enumerate(ranked_paths)}
    if any(p not in pos for p in known_paths):
        return None
    order = sorted(range(len(known_paths)), key=lambda j: pos[known_paths[j]])
    out = np.empty(len(known_paths))
    out[order] = np.arange(1, len(known_paths) + 1)
    return out


def _exp2_pair(model, g, pair, n_pred, scorer, perm):
    cg = build_candidate_graph(model, g, pair.source, pair.target, pair.query_types, n_pred)
    ranked = rank_candidate_paths(cg, scorer, model)
    known = pair.paths
    r_t = fractional_ranks(-np.asarray(pair.frequencies, dtype=np.float64))
    r_r = r_t[perm]
    r_p = relative_ranks(ranked.paths(), known)
    if r_p is None:
        return _PairResult(len(known), False, None, [])
    scatter = [(pair.source, pair.target, float(a), float(b), float(c))
               for a, b, c in zip(r_t, r_p, r_r)]
    try:
        rs = (spearman(r_p, r_t), spearman(r_p, r_r), spearman(r_t, r_r))
    except UndefinedCorrelationError:
        rs = None
    return _PairResult(len(known), True, rs, scatter)


def evaluate_experiment2(model, g: KnowledgeGraph, gt: GroundTruthSet, n_pred=1500,
                         cohorts=(10, 20), perm_seed=0, scorer=Scorer.COSINE,
                         threads=1) -> Exp2Report:
    """Spearman correlation of model-relative ranks against ground truth and permutations.

    Per pair one seeded permutation of the ground-truth ranks serves as the
    random control; coefficients are averaged per cohort.
    """
    scorer = Scorer(scorer)
    rng = np.random.default_rng(perm_seed)
    perms = [rng.permutation(len(pair.ranked_paths)) for pair in gt.pairs]
    results = _pmap(lambda ip: _exp2_pair(model, g, gt.pairs[ip], n_pred, scorer, perms[ip]),
                    range(len(gt.pairs)), threads)
    report = Exp2Report(n_pred, scorer)
    for res in results:
        report.scatter.extend(res.scatter)
    for threshold in cohorts:
        members = [r for r in results if r.k >= threshold]
        if not members:
            log.warning("cohort >=%d paths is empty; omitted", threshold)
            continue
        used = [r.rs for r in members if r.covered and r.rs is not None]
        uncovered = sum(not r.covered for r in members)
        mean = (lambda i: float(np.mean([u[i] for u in used]))) if used else (lambda i: float("nan"))
        report.cohorts.append(Exp2Cohort(threshold, len(members), len(used), uncovered,
                                         mean(0), mean(1), mean(2)))
    return report


def run_experiment2(g: KnowledgeGraph, gt: GroundTruthSet, hp: Hyperparams, n_pred=1500,
                    cohorts=(10, 20), perm_seed=0, scorer=Scorer.COSINE, threads=1,
                    backend=None):
    """Train on the full graph, then evaluate known-path ranking. Returns ``(report, model)``."""
    model = train(g, hp, backend=backend)
    return evaluate_experiment2(model, g, gt, n_pred, cohorts, perm_seed, scorer, threads), model


def format_report_rows(rows, header_comments=()):
    lines = [f"# {c}" for c in header_comments]
    lines.append("# experiment\tn_pred\tscorer\tmetric\tcutoff\tvalue")
    for row in rows:
        *head, value = row
        v = repr(float(value)) if isinstance(value, float) else str(value)
        lines.append("\t".join(map(str, head)) + "\t" + v)
    return "".join(line + "\n" for line in lines)


def format_scatter(report: Exp2Report, g: KnowledgeGraph, header_comments=()):
    S = g.entity_surfaces
    lines = [f"# {c}" for c in header_comments]
    lines.append("# src\ttgt\tR_t\tR_p\tR_r")
    for s, t, a, b, c in report.scatter:
        lines.append(f"{S[s]}\t{S[t]}\t{a}\t{b}\t{c}")
    return "".join(line + "\n" for line in lines)
