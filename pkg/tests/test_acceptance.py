"""Acceptance suite: one test per criterion, each reporting a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py`` (lines go to stdout).
Criteria 5 and 6 train six desk-scale models and take several minutes.
"""

from __future__ import annotations

import functools
import math
import os
import sys
import tempfile

import numpy as np
import pytest

from kbcpath import kernels, synth
from kbcpath.builder import (SOURCE, TARGET, CandidateEdge, CandidateGraph, build_candidate_graph,
                             enumerate_one_hop_paths)
from kbcpath.cli import main as cli_main
from kbcpath.experiments import evaluate_experiment1, evaluate_experiment2
from kbcpath.graph import KnowledgeGraph, TripleRecord
from kbcpath.metrics import average_precision_at_n, fractional_ranks, hits_at_n, spearman
from kbcpath.mining import (Path, build_ground_truth, doc_triples_from_records,
                            make_leave_one_out, mine_one_hop_paths, parse_query_type)
from kbcpath.model import (Batch, Hyperparams, PARAM_NAMES, init_params, loss_and_grads, train)
from kbcpath.scoring import Scorer

SEEDS = (0, 1, 2)
EXP1_N_PRED = 25  # middle of the desk grid, where the MAP comparison is made
RESULTS = {}


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS[num] = line
    return ok, line


# -- shared synthetic runs -----------------------------------------------------------


@functools.lru_cache(maxsize=None)
def corpus(seed):
    rows = synth.generate(synth.SynthConfig(seed=seed))
    g, docs = doc_triples_from_records(rows)
    return g, mine_one_hop_paths(docs, g)


@functools.lru_cache(maxsize=None)
def exp1_run(seed):
    g, paths = corpus(seed)
    qts = [parse_query_type(q, g) for q in synth.EXP1_QUERY_TYPES]
    gt = build_ground_truth(paths, g, qts, min_freq=2, min_paths=2, max_pairs=50)
    split = make_leave_one_out(g, gt, seed)
    hp = Hyperparams(**{**vars(synth.DESK_HYPERPARAMS), "seed": seed})
    model = train(split.train_graph(g), hp)
    return g, gt, model


@functools.lru_cache(maxsize=None)
def exp2_run(seed):
    g, paths = corpus(seed)
    qts = [parse_query_type(q, g) for q in synth.EXP2_QUERY_TYPES]
    gt = build_ground_truth(paths, g, qts, min_freq=2, min_paths=10, max_pairs=30)
    hp = Hyperparams(**{**vars(synth.DESK_HYPERPARAMS), "seed": seed})
    return g, gt, train(g, hp)


# -- criterion 1: metric oracles -----------------------------------------------------


def brute_hits(ranked, p1, n):
    for i in range(min(n, len(ranked))):
        if ranked[i] == p1:
            return 1
    return 0


def brute_ap(ranked, relevant, n):
    top = ranked[:n]
    total = 0.0
    for k in range(1, len(top) + 1):
        if top[k - 1] in relevant:
            total += sum(1 for x in top[:k] if x in relevant) / k
    return total / min(len(relevant), n)


def brute_tied_ranks(x):
    return [sum(1 for y in x if y < v) + (sum(1 for y in x if y == v) + 1) / 2 for v in x]


def brute_spearman_tied(a, b):
    ra, rb = brute_tied_ranks(a), brute_tied_ranks(b)
    ma, mb = sum(ra) / len(ra), sum(rb) / len(rb)
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


def brute_spearman_d2(a, b):
    n = len(a)
    ra, rb = brute_tied_ranks(a), brute_tied_ranks(b)
    d2 = sum((x - y) ** 2 for x, y in zip(ra, rb))
    return 1 - 6 * d2 / (n * (n * n - 1))


def criterion_1():
    rng = np.random.default_rng(2024)
    worst = {"hits": 0, "ap": 0.0, "rs_d2": 0.0, "rs_tied": 0.0}
    for _ in range(1000):
        n_items = int(rng.integers(1, 51))
        ranked = rng.permutation(60)[:n_items].tolist()
        p1 = int(rng.integers(60))
        n = int(rng.integers(1, 60))
        worst["hits"] = max(worst["hits"], abs(hits_at_n(ranked, p1, n) - brute_hits(ranked, p1, n)))
    for _ in range(1000):
        n_items = int(rng.integers(1, 51))
        ranked = rng.permutation(60)[:n_items].tolist()
        relevant = set(rng.choice(60, size=int(rng.integers(1, 20)), replace=False).tolist())
        n = int(rng.integers(1, 60))
        worst["ap"] = max(worst["ap"], abs(average_precision_at_n(ranked, relevant, n)
                                           - brute_ap(ranked, relevant, n)))
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        a, b = rng.permutation(n).tolist(), rng.permutation(n).tolist()
        worst["rs_d2"] = max(worst["rs_d2"], abs(spearman(a, b) - brute_spearman_d2(a, b)))
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 51))
        a = rng.integers(0, max(2, n // 3), n).tolist()
        b = rng.integers(0, max(2, n // 3), n).tolist()
        if len(set(a)) < 2 or len(set(b)) < 2:
            continue
        worst["rs_tied"] = max(worst["rs_tied"], abs(spearman(a, b) - brute_spearman_tied(a, b)))
        done += 1
    ok = worst["hits"] == 0 and max(worst["ap"], worst["rs_d2"], worst["rs_tied"]) <= 1e-12
    return report(1, ok, "max abs err " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


# -- criterion 2: enumeration vs exhaustive search -----------------------------------


def criterion_2():
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(500):
        n_edges = int(rng.integers(0, 201))
        n_vertices = int(rng.integers(3, 120))
        s, t = 0, 1
        seen, edges = set(), []
        for _ in range(n_edges):
            a = s if rng.random() < 0.5 else t
            b = int(rng.integers(2, n_vertices))
            if (a, b) not in seen:
                seen.add((a, b))
                edges.append(CandidateEdge(a, b, int(rng.integers(8)), int(rng.integers(1, 100)),
                                           0.0, SOURCE if a == s else TARGET))
        cg = CandidateGraph(s, t, edges)
        brute = []
        for x in range(n_vertices):
            hop1 = [e for e in edges if {e.a, e.b} == {s, x}]
            hop2 = [e for e in edges if {e.a, e.b} == {t, x}]
            if x not in (s, t) and hop1 and hop2:
                brute.append(Path(s, hop1[0].relation, x, hop2[0].relation, t))
        bad += enumerate_one_hop_paths(cg) != brute
    return report(2, bad == 0, f"{bad} mismatches over 500 graphs")


# -- criterion 3: gradients vs central differences -----------------------------------


def criterion_3():
    worst = 0.0
    for draw in range(20):
        rng = np.random.default_rng(100 + draw)
        n_ent, n_rel, dim, b, k = 9, 3, 8, 6, 5
        params = init_params(n_ent, n_rel, dim, rng)
        params["entity_scale"] = rng.normal(1, 0.3, dim)
        params["relation_scale"] = rng.normal(1, 0.3, dim)
        params["combine_bias"] = rng.normal(0, 0.2, dim)
        params["projection_bias"] = rng.normal(0, 0.5, 1)
        cand = np.stack([rng.choice(n_ent, k, replace=False) for _ in range(b)]).astype(np.int64)
        labels = np.zeros((b, k))
        labels[:, 0] = 1
        batch = Batch(rng.integers(n_ent, size=b).astype(np.int64),
                      rng.integers(n_rel, size=b).astype(np.int64), cand, labels,
                      np.ones((b, k)), np.ones((b, dim)))
        for backend in kernels.available_backends():
            _, analytic = loss_and_grads(params, batch, 1e-4, backend)
            for name in PARAM_NAMES:
                arr = params[name]
                num = np.zeros_like(arr)
                for i in np.ndindex(arr.shape):
                    old = arr[i]
                    arr[i] = old + 1e-5
                    lp, _ = loss_and_grads(params, batch, 1e-4, backend)
                    arr[i] = old - 1e-5
                    lm, _ = loss_and_grads(params, batch, 1e-4, backend)
                    arr[i] = old
                    num[i] = (lp - lm) / 2e-5
                a = analytic[name]
                rel = np.linalg.norm(a - num) / max(np.linalg.norm(a), np.linalg.norm(num), 1e-12)
                worst = max(worst, rel)
    return report(3, worst < 1e-4, f"max relative error {worst:.2e} (20 draws, "
                                   f"backends {', '.join(kernels.available_backends())})")


# -- criterion 4: single-fact recovery ------------------------------------------------


def criterion_4():
    g = KnowledgeGraph.from_records([TripleRecord("A", "Gene", "Disease_Gene", "B", "Disease", 1)],
                                    extra_entities=[(f"D{i:02d}", "Disease") for i in range(20)])
    m = train(g, Hyperparams(dim=8, epochs=200, learning_rate=0.01, seed=0))
    top = m.predict_tails(g.entity_id("A"), g.relation_id("Disease_Gene"), 1)[0]
    ok = top.entity == g.entity_id("B") and top.rank == 1
    return report(4, ok, f"predict_tails(A, r, 1) -> {g.entity_surfaces[top.entity]} "
                         f"(score {top.score:.3f})")


# -- criterion 5: synthetic path recovery --------------------------------------------


def criterion_5():
    per_seed = []
    for seed in SEEDS:
        g, gt, model = exp1_run(seed)
        assert len(gt) == 50, len(gt)
        rep = evaluate_experiment1(model, g, gt, synth.DESK_N_PREDS, (10,))
        per_seed.append(rep)
    mean = lambda table, n, s: float(np.mean([getattr(r, table)[n, s, 10] for r in per_seed]))
    grid = []
    for n in synth.DESK_N_PREDS:
        grid.append(f"n_pred={n}: Hits@10 cos={mean('hits', n, Scorer.COSINE):.3f} "
                    f"base={mean('hits', n, Scorer.BASELINE):.3f} "
                    f"MAP@10 cos={mean('map', n, Scorer.COSINE):.3f} "
                    f"pred={mean('map', n, Scorer.PREDRANK):.3f}")
    n = EXP1_N_PRED
    hits_ok = mean("hits", n, Scorer.COSINE) > mean("hits", n, Scorer.BASELINE)
    map_ok = mean("map", n, Scorer.COSINE) >= mean("map", n, Scorer.PREDRANK)
    detail = (f"judged at n_pred={n}: cosine Hits@10 > baseline {'yes' if hits_ok else 'no'}, "
              f"cosine MAP@10 >= predrank {'yes' if map_ok else 'no'} | " + "; ".join(grid))
    return report(5, hits_ok and map_ok, detail)


# -- criterion 6: synthetic known-path ranking ---------------------------------------


def criterion_6():
    pt, pr, covered = [], [], []
    for seed in SEEDS:
        g, gt, model = exp2_run(seed)
        assert len(gt) >= 30 and all(len(p.ranked_paths) >= 10 for p in gt.pairs)
        rep = evaluate_experiment2(model, g, gt, n_pred=1500, cohorts=(10,), perm_seed=seed)
        c = rep.cohorts[0]
        pt.append(c.rs_pt)
        pr.append(c.rs_pr)
        covered.append(c.coverage)
    margin = float(np.mean(pt) - np.mean(pr))
    # permutation control on a fixed 20-path frequency list (with ties)
    freqs = np.array([12, 11, 11, 9, 8, 8, 8, 7, 6, 5, 5, 4, 4, 3, 3, 3, 2, 2, 2, 2])
    r_t = fractional_ranks(-freqs)
    rng = np.random.default_rng(99)
    control = float(np.mean([spearman(r_t, r_t[rng.permutation(20)]) for _ in range(1000)]))
    ok = margin >= 0.1 and -0.05 <= control <= 0.05
    return report(6, ok, f"mean r_s(Rp,Rt)={np.mean(pt):.3f} r_s(Rp,Rr)={np.mean(pr):.3f} "
                         f"margin={margin:.3f} (need >= 0.1); pairs used per seed {covered}; "
                         f"MC control mean r_s(Rt,Rr)={control:+.4f}")


# -- criterion 7: monotonicity in n_pred ---------------------------------------------


def criterion_7():
    g, gt, model = exp2_run(SEEDS[0])
    qts = [parse_query_type(q, g) for q in synth.EXP2_QUERY_TYPES]
    rng = np.random.default_rng(5)
    violations = 0
    sizes = []
    for _ in range(20):
        qt = qts[int(rng.integers(len(qts)))]
        e1 = int(rng.choice(np.flatnonzero(g.entity_types == qt.first)))
        e2 = int(rng.choice(np.flatnonzero(g.entity_types == qt.last)))
        sets = [set(enumerate_one_hop_paths(build_candidate_graph(model, g, e1, e2, [qt], n)))
                for n in (100, 300, 500)]
        violations += not (sets[0] <= sets[1] <= sets[2])
        sizes.append(tuple(len(s) for s in sets))
    return report(7, violations == 0, f"{violations} violations over 20 pairs; "
                                      f"path counts e.g. {sizes[:3]}")


# -- criterion 8: byte-identical CLI re-runs -----------------------------------------


def _snapshot(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def _cli_session(root):
    s = os.path.join(root, "s")
    run = lambda *a: cli_main(["--threads", "1", *map(str, a)])
    codes = [run("synth", "--seed", 4, "--entities-per-type", 30, "--target-triples", 2500,
                 "--planted-pairs", 12, "-o", s)]
    for name in ("exp1.cfg", "exp2.cfg"):
        p = os.path.join(s, name)
        with open(p) as fh:
            text = fh.read().replace("epochs = 40", "epochs = 5")
        with open(p, "w") as fh:
            fh.write(text)
    j = lambda *parts: os.path.join(s, *parts)
    codes += [
        run("ingest", j("triples.tsv"), "-o", j("graph.bin")),
        run("mine", j("docs.tsv"), "--query-types", j("query_types_exp1.txt"), "--max-pairs", 10,
            "--graph-out", j("docs.graph"), "-o", j("gt.tsv")),
        run("split", j("docs.graph"), j("gt.tsv"), "--seed", 4, "-o", j("split")),
        run("train", j("split", "train.graph"), "--config", j("exp1.cfg"), "--epochs", 5,
            "-o", j("model.bin")),
    ]
    with open(j("gt.tsv")) as fh:
        src, tgt = next(line for line in fh if not line.startswith("#")).split("\t")[:2]
    for scorer in ("predrank", "cosine", "baseline"):
        codes.append(run("build", j("model.bin"), j("docs.graph"), "--pair", src, tgt,
                         "--query-types", j("query_types_exp1.txt"), "--n-pred", 20,
                         "--scorer", scorer, "-o", j(f"ranked_{scorer}.tsv")))
    codes += [run("eval-exp1", j("exp1.cfg")), run("eval-exp2", j("exp2.cfg"))]
    return codes


def criterion_8():
    with tempfile.TemporaryDirectory() as root:
        codes1 = _cli_session(root)
        first = _snapshot(root)
        codes2 = _cli_session(root)
        second = _snapshot(root)
    differing = sorted(k for k in first if first[k] != second.get(k))
    ok = set(codes1 + codes2) == {0} and not differing and first.keys() == second.keys()
    return report(8, ok, f"{len(first)} output files over 10 commands, {len(differing)} differ"
                         + (f": {differing}" if differing else "")
                         + ("" if set(codes1 + codes2) == {0} else f"; exit codes {codes1}"))


# -- criterion 9: baseline independent of n_pred -------------------------------------


def criterion_9():
    g, gt, model = exp1_run(SEEDS[0])
    cutoffs = (1, 10, 25, 100)
    rep = evaluate_experiment1(model, g, gt, (100, 300, 500), cutoffs)
    rows = {n: [(rep.hits[n, Scorer.BASELINE, c], rep.map[n, Scorer.BASELINE, c]) for c in cutoffs]
            for n in (100, 300, 500)}
    ok = rows[100] == rows[300] == rows[500]
    return report(9, ok, f"baseline (Hits, MAP) at cutoffs {cutoffs}: {rows[100]} "
                         f"{'identical' if ok else 'DIFFER'} across n_pred 100/300/500")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]
SLOW = {5, 6, 7, 9}


@pytest.mark.parametrize("num", [
    pytest.param(i, id=f"criterion_{i}", marks=[pytest.mark.slow] if i in SLOW else [])
    for i in range(1, 10)])
def test_criterion(num):
    ok, line = CRITERIA[num - 1]()
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for fn in CRITERIA:
        ok, line = fn()
        print(line, flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
