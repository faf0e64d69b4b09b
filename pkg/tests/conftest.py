import io

import numpy as np
import pytest

from kbcpath.graph import KnowledgeGraph, TripleRecord

TYPES = ("Anatomy", "Disease", "Drug", "Gene", "Phenotype")

# 6 rows, one duplicated (Gene1-Drug1): 5 distinct triples, 6 entities, 3 relation types
SIX_ROWS = """\
# a comment line
Gene1\tGene\tDrug_Gene\tDrug1\tDrug\t2
Drug1\tDrug\tDrug_Gene\tGene1\tGene\t3
Gene1\tGene\tDisease_Gene\tDis1\tDisease
Gene2\tGene\tDisease_Gene\tDis1\tDisease\t4
Drug2\tDrug\tDisease_Drug\tDis2\tDisease
Gene2\tGene\tDrug_Gene\tDrug2\tDrug\t1
"""


def random_records(rng, n_triples, n_per_type=8, types=TYPES):
    """Random type-consistent records (duplicates allowed, no self-loops)."""
    out = []
    while len(out) < n_triples:
        ta, tb = rng.choice(len(types), size=2)
        a, b = int(rng.integers(n_per_type)), int(rng.integers(n_per_type))
        if ta == tb and a == b:
            continue
        A, B = types[ta], types[tb]
        rel = "_".join(sorted((A, B)))
        out.append(TripleRecord(f"{A}{a}", A, rel, f"{B}{b}", B, int(rng.integers(1, 5))))
    return out


def random_graph(seed, n_triples=100, n_per_type=8):
    rng = np.random.default_rng(seed)
    return KnowledgeGraph.from_records(random_records(rng, n_triples, n_per_type))


@pytest.fixture
def six_row_text():
    return io.StringIO(SIX_ROWS)


@pytest.fixture(scope="session")
def graph100():
    return random_graph(7, 100)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
