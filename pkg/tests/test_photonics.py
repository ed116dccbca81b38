import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homnet.errors import ConstraintViolation, RangeViolation, UsageError
from homnet.models import MixtureModel, forward_mixture, random_mixture
from homnet.photonics import (
    STUDY_FIELDS,
    binomial_halfwidth,
    hoeffding_budget,
    m_independence_study,
    sample_shots,
    sample_tracked,
    study_to_csv,
    worst_case_model,
)

R2 = 1 / math.sqrt(2)


def test_perfect_overlap_never_coincides():
    m = MixtureModel([[1.0, 0.0]], [1.0])
    for seed in range(5):
        exp = sample_shots(m, np.array([1.0, 0.0]), 1000, seed)
        assert exp.coincidences == 0
        assert exp.estimate_f == 1.0


def test_orthogonal_input_is_half():
    m = MixtureModel([[1.0, 0.0]], [1.0])
    exp = sample_shots(m, np.array([0.0, 1.0]), 10_000, seed=3)
    assert abs(exp.estimate_f) < 0.05
    assert 0 <= exp.coincidences <= exp.n_shots
    assert exp.estimate_f == 1 - 2 * exp.frequency


def test_mixture_half_estimate():
    m = MixtureModel(np.eye(2), [0.5, 0.5])
    x = np.array([R2, R2])
    assert forward_mixture(m, x) == pytest.approx(0.5)
    hits = [abs(sample_shots(m, x, 100_000, seed).estimate_f - 0.5) <= 0.01 for seed in range(200)]
    assert np.mean(hits) >= 0.95


def test_single_shot_estimate():
    m = MixtureModel(np.eye(2), [0.5, 0.5])
    for seed in range(10):
        assert sample_shots(m, np.array([R2, R2]), 1, seed).estimate_f in (-1.0, 1.0)


def test_seed_determinism():
    m = random_mixture(np.random.default_rng(0), 8, 3)
    x = np.ones(8) / math.sqrt(8)
    a = sample_shots(m, x, 5000, seed=42)
    b = sample_shots(m, x, 5000, seed=42)
    assert a.coincidences == b.coincidences
    assert a.coincidences != sample_shots(m, x, 5000, seed=43).coincidences


def test_sample_shots_rejects_bad_input():
    with pytest.raises(ConstraintViolation):
        sample_shots(MixtureModel([[2.0, 0.0]], [1.0]), np.array([1.0, 0.0]), 10, 0)
    with pytest.raises(UsageError):
        sample_shots(MixtureModel([[1.0, 0.0]], [1.0]), np.array([1.0, 0.0]), 0, 0)


def test_unbiasedness():
    rng = np.random.default_rng(8)
    m = random_mixture(rng, 6, 4)
    x = rng.normal(size=6)
    x /= np.linalg.norm(x)
    f = forward_mixture(m, x)
    est = np.array([sample_shots(m, x, 10_000, seed).estimate_f for seed in range(500)])
    sem = est.std(ddof=1) / math.sqrt(est.size)
    assert abs(est.mean() - f) < 3 * sem


def test_half_width_covers_truth():
    rng = np.random.default_rng(2)
    m = random_mixture(rng, 5, 3)
    x = rng.normal(size=5)
    x /= np.linalg.norm(x)
    f = forward_mixture(m, x)
    runs = [sample_shots(m, x, 100_000, seed) for seed in range(200)]
    cover = np.mean([abs(r.estimate_f - f) <= r.half_width for r in runs])
    assert 0.9 <= cover <= 1.0


def test_binomial_halfwidth():
    assert binomial_halfwidth(0.25, 400) == pytest.approx(0.043301, abs=1e-6)
    assert binomial_halfwidth(0.0, 17) == 0.0
    assert binomial_halfwidth(0.5, 100) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(RangeViolation):
        binomial_halfwidth(1.5, 10)
    with pytest.raises(RangeViolation):
        binomial_halfwidth(0.5, 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.integers(1, 10**7))
def test_halfwidth_bounded_by_inverse_sqrt(freq, n):
    assert binomial_halfwidth(freq, n) <= 1 / math.sqrt(n) + 1e-15


def test_hoeffding_examples():
    assert hoeffding_budget(0.1, 0.05).n_required == 185
    # ln(2/delta) = 1
    assert hoeffding_budget(0.5, 2 / math.e).n_required == 2
    # ln(2/delta) = 2
    assert hoeffding_budget(0.5, 2 / math.e**2).n_required == 4
    assert hoeffding_budget(0.02, 0.05).n_required == 4612
    for eps, delta in [(0, 0.1), (1, 0.1), (0.1, 0), (0.1, 1), (0.1, 2)]:
        with pytest.raises(RangeViolation):
            hoeffding_budget(eps, delta)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_budget_monotone(e1, e2, d1, d2):
    n = lambda e, d: hoeffding_budget(e, d).n_required
    lo, hi = sorted((e1, e2))
    assert n(hi, d1) <= n(lo, d1)
    lo, hi = sorted((d1, d2))
    assert n(e1, hi) <= n(e1, lo)


def test_worst_case_design():
    rng = np.random.default_rng(0)
    for M in (1, 2, 7, 64):
        model, x = worst_case_model(M, 16, rng)
        model.check_constraints()
        p = (1 - (model.hidden @ x) ** 2) / 2
        assert p.mean() == pytest.approx(0.25, abs=1e-12)
        assert p.min() >= -1e-12 and p.max() <= 0.5 + 1e-12
        assert forward_mixture(model, x) == pytest.approx(0.5, abs=1e-12)


def test_m_independence_study_spread():
    rows = m_independence_study([2, 64], 0.02, 0.05, repeats=200, seed=1)
    assert [r["M"] for r in rows] == [2, 64]
    assert all(r["n"] == 4612 for r in rows)
    ratio = rows[1]["std_est"] / rows[0]["std_est"]
    assert 0.8 <= ratio <= 1.25
    for r in rows:
        assert abs(r["mean_est"] - r["f"]) < 4 * r["std_est"] / math.sqrt(200)
        # coincidence-rate coverage is what the budget guarantees
        assert r["coverage_p"] >= 0.95


def test_m_independence_single_repeat():
    rows = m_independence_study([2, 16, 64], 0.1, 0.05, repeats=1, seed=0)
    assert len(rows) == 3
    assert all(math.isnan(r["std_est"]) for r in rows)
    text = study_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(STUDY_FIELDS)
    assert len(lines) == 4
    assert all(line.split(",")[3] == "nan" for line in lines[1:])


def test_tracked_mode_costs_M_times_more():
    rows = m_independence_study([4], 0.1, 0.05, repeats=3, seed=0, mode="tracked")
    assert rows[0]["n"] == 4 * 185
    model, x = worst_case_model(4, 8, np.random.default_rng(1))
    est, shots = sample_tracked(model, x, 50_000, seed=0)
    assert shots == 200_000
    assert abs(est - forward_mixture(model, x)) < 0.02
    with pytest.raises(UsageError):
        m_independence_study([2], 0.1, 0.05, repeats=1, seed=0, mode="psychic")
    with pytest.raises(UsageError):
        m_independence_study([2], 0.1, 0.05, repeats=0, seed=0)
