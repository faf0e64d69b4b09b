"""Seeded synthetic corpora of document-tagged triples with planted path structure.

Entities of a handful of types belong to latent topics.  Background documents
mention a few entities of one topic and link them into a small tree; planted
documents repeat ``e1 - m - e2`` chains for chosen entity pairs, with the
number of repetitions decreasing with the mid entity's attachment to the
pair's topic.  The result has a realistic mix of frequent and rare 1-hop
paths without needing an external corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TripleRecord
from .model import Hyperparams

DEFAULT_TYPES = ("Anatomy", "Disease", "Drug", "Gene", "Phenotype")
EXP1_QUERY_TYPES = ("Gene-Drug-Disease", "Gene-Phenotype-Disease", "Drug-Phenotype-Disease",
                    "Anatomy-Phenotype-Disease")
EXP2_QUERY_TYPES = EXP1_QUERY_TYPES + ("Disease-Drug-Anatomy", "Anatomy-Gene-Drug")

# Settings sized for the default 500-entity corpus.  Every type has only 100
# entities, so prediction depths of 100 or more return every type-compatible
# candidate; the path-recovery grid is scaled down accordingly.
DESK_HYPERPARAMS = Hyperparams(dim=64, epochs=40, learning_rate=0.005, batch_size=128,
                               dropout_rate=0.5, l2_weight=1e-4, neg_rate=0.25, seed=0)
DESK_N_PREDS = (10, 25, 50)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    types: tuple = DEFAULT_TYPES
    entities_per_type: int = 100
    topics: int = 8
    target_triples: int = 20000
    doc_size: tuple = (3, 6)
    cross_topic: float = 0.1
    planted_pairs: int = 60
    planted_mids: tuple = (12, 30)
    max_frequency: int = 12
    query_types: tuple = EXP2_QUERY_TYPES
    same_type_relations: tuple = DEFAULT_TYPES


def relation_name(a, b):
    a, b = sorted((a, b))
    return f"{a}_{b}"


def generate(cfg: SynthConfig = SynthConfig()):
    """Return ``list[(doc_id, TripleRecord)]`` for the configured corpus."""
    rng = np.random.default_rng(cfg.seed)
    n_types = len(cfg.types)
    n_ent = n_types * cfg.entities_per_type
    etype = np.repeat(np.arange(n_types), cfg.entities_per_type)
    surface = [f"{cfg.types[t]}{i % cfg.entities_per_type:03d}" for i, t in enumerate(etype)]
    topic = rng.integers(cfg.topics, size=n_ent)
    # how strongly an entity sticks to its own topic; drives planted frequencies
    affinity = rng.beta(2.0, 2.0, size=n_ent)
    popularity = rng.lognormal(0.0, 0.75, size=n_ent)

    def weights_for(k):
        w = popularity * np.where(topic == k, 0.2 + affinity, cfg.cross_topic / cfg.topics)
        return w / w.sum()

    topic_weights = [weights_for(k) for k in range(cfg.topics)]
    rows = []
    seen = set()
    same_type = set(cfg.same_type_relations)

    def emit(doc, a, b):
        if a == b or (etype[a] == etype[b] and cfg.types[etype[a]] not in same_type):
            return
        rec = TripleRecord(surface[a], cfg.types[etype[a]],
                           relation_name(cfg.types[etype[a]], cfg.types[etype[b]]),
                           surface[b], cfg.types[etype[b]], 1)
        rows.append((doc, rec))
        seen.add((min(a, b), max(a, b)))

    # planted pairs first, so the corpus size target accounts for them
    qts = [tuple(cfg.types.index(x) for x in q.split("-")) for q in cfg.query_types]
    lo, hi = cfg.planted_mids
    for p in range(cfg.planted_pairs):
        s_t, m_t, t_t = qts[p % len(qts)]
        k = int(rng.integers(cfg.topics))
        w = topic_weights[k]
        s = int(rng.choice(np.flatnonzero(etype == s_t), p=_norm(w[etype == s_t])))
        t = int(rng.choice(np.flatnonzero(etype == t_t), p=_norm(w[etype == t_t])))
        pool = np.flatnonzero(etype == m_t)
        n_mid = min(int(rng.integers(lo, hi + 1)), len(pool))
        if n_mid < 2:
            continue
        mids = rng.choice(pool, size=n_mid, replace=False, p=_norm(w[pool]))
        strength = w[mids] * rng.lognormal(0.0, 0.3, size=n_mid)
        mids = mids[np.argsort(-strength, kind="stable")]
        for j, m in enumerate(mids.tolist()):
            freq = max(2, int(round(cfg.max_frequency * np.exp(-1.5 * j / n_mid))))
            for rep in range(freq):
                doc = f"P{p:04d}-{j:03d}-{rep:02d}"
                emit(doc, s, m)
                emit(doc, m, t)
                extra = int(rng.choice(n_ent, p=w))
                emit(doc, m if rng.random() < 0.5 else s, extra)

    d = 0
    lo_sz, hi_sz = cfg.doc_size
    while len(seen) < cfg.target_triples:
        k = int(rng.integers(cfg.topics))
        size = int(rng.integers(lo_sz, hi_sz + 1))
        ents = rng.choice(n_ent, size=size, replace=False, p=topic_weights[k])
        doc = f"D{d:07d}"
        for j in range(1, size):
            options = [x for x in ents[:j].tolist()
                       if etype[x] != etype[ents[j]] or cfg.types[etype[x]] in same_type]
            if options:
                emit(doc, int(ents[j]), options[int(rng.integers(len(options)))])
        d += 1
    return rows


def _norm(w):
    return w / w.sum()


def format_doc_triples(rows):
    return "".join(f"{doc}\t{r.head}\t{r.head_type}\t{r.relation}\t{r.tail}\t{r.tail_type}\n"
                   for doc, r in rows)
