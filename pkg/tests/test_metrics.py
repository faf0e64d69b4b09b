import numpy as np
import pytest
from scipy import stats

from kbcpath.errors import UndefinedCorrelationError, ValidationError
from kbcpath.metrics import average_precision_at_n, fractional_ranks, hits_at_n, spearman


def test_hits_examples():
    ranked = list("abcdefghijklmnop")
    assert all(hits_at_n(ranked, "a", n) == 1 for n in (1, 5, 100))
    assert all(hits_at_n(ranked, "z", n) == 0 for n in (1, 5, 100))
    assert hits_at_n(ranked, "k", 10) == 0 and hits_at_n(ranked, "k", 25) == 1
    with pytest.raises(ValidationError):
        hits_at_n(ranked, "a", 0)


def test_ap_examples():
    assert average_precision_at_n(["r1", "x", "r2"], {"r1", "r2"}, 3) == pytest.approx(5 / 6)
    assert average_precision_at_n(["r1", "r2", "x"], {"r1", "r2"}, 3) == 1.0
    assert average_precision_at_n(["x", "y"], {"r1"}, 2) == 0.0
    with pytest.raises(ValidationError):
        average_precision_at_n(["x"], set(), 2)


def test_spearman_examples():
    assert spearman([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == 1.0
    assert spearman([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == -1.0
    # sum d^2 = 4, so 1 - 6*4 / (5 * 24) = 0.8
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        spearman([1, 2], [1, 2, 3])


def test_fractional_ranks_ties():
    assert fractional_ranks([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]
    assert fractional_ranks([]).tolist() == []


def test_spearman_matches_scipy_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 30))
        a = rng.integers(0, 6, n).astype(float)
        b = rng.integers(0, 6, n).astype(float)
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            continue
        assert spearman(a, b) == pytest.approx(stats.spearmanr(a, b).statistic, abs=1e-12)
        assert spearman(a, b) == spearman(b, a)
        assert -1 <= spearman(a, b) <= 1


def test_permutation_control_mean_near_zero():
    base = fractional_ranks(-np.arange(20, 0, -1))
    rng = np.random.default_rng(123)
    vals = [spearman(base, base[rng.permutation(20)]) for _ in range(1000)]
    assert abs(np.mean(vals)) <= 0.05
