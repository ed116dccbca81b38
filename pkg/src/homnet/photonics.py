"""Shot-level emulation of the coincidence measurement and its statistics.

Each shot draws one hidden pattern from the mixture and then a Bernoulli
coincidence with probability ``(C - <x, W_i>^2) / 2``. The pattern index is
never recorded (agnostic sampling), so the estimator of ``f`` is simply
``C - 2 * coincidences / n`` whatever the number of neurons.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation, RangeViolation, UsageError
from .models import MixtureModel, forward_mixture


@dataclass
class ShotExperiment:
    """Tally of one simulated measurement run.

    ``half_width`` is the approximate 95% half-width on the ``f`` scale,
    i.e. twice the binomial half-width of the coincidence frequency.
    """

    n_shots: int
    coincidences: int
    seed: object
    estimate_f: float
    half_width: float
    C: float = 1.0

    @property
    def frequency(self):
        return self.coincidences / self.n_shots

    @property
    def p_half_width(self):
        return binomial_halfwidth(self.frequency, self.n_shots)


@dataclass
class PhotonBudget:
    epsilon: float
    delta: float
    n_required: int


def binomial_halfwidth(freq, n):
    """``2 sqrt(freq (1 - freq) / n)``, roughly a 95% interval."""
    if not 0.0 <= freq <= 1.0:
        raise RangeViolation(f"frequency {freq} outside [0, 1]")
    if n < 1:
        raise RangeViolation("n must be >= 1")
    return 2.0 * math.sqrt(freq * (1.0 - freq) / n)


def hoeffding_budget(epsilon, delta):
    """Shots needed so the coincidence rate is within epsilon w.p. 1 - delta."""
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise RangeViolation("epsilon and delta must lie in (0, 1)")
    raw = math.log(2.0 / delta) / (2.0 * epsilon**2)
    # absorb one-ulp rounding so exact integers are not bumped up
    n = math.ceil(raw - 1e-9 * max(1.0, raw))
    return PhotonBudget(epsilon, delta, max(n, 1))


def _component_probs(m):
    """Per-pattern coincidence probabilities and mixture weights."""
    m.check_constraints()
    W, probs = m.mixture()
    return W, np.clip(probs, 0.0, None)


def sample_shots(m, x, n, seed, C=None):
    """Simulate ``n`` agnostic shots of mixture model ``m`` on input ``x``."""
    if n < 1:
        raise UsageError("n must be >= 1")
    C = m.C if C is None else C
    W, probs = _component_probs(m)
    x = np.asarray(x, dtype=np.float64)
    p_i = (C - (W @ x) ** 2) / 2.0
    if np.any(p_i < -1e-12) or np.any(p_i > 1 + 1e-12):
        raise ConstraintViolation("coincidence probabilities outside [0, 1]")
    p_i = np.clip(p_i, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    which = rng.choice(W.shape[0], size=n, p=probs / probs.sum())
    hits = rng.random(n) < p_i[which]
    k = int(hits.sum())
    freq = k / n
    return ShotExperiment(n, k, seed, C - 2.0 * freq, 2.0 * binomial_halfwidth(freq, n), C)


def sample_tracked(m, x, n_per_component, seed, C=None):
    """Estimate ``f`` with one separate experiment per pattern.

    Costs ``M * n_per_component`` shots; returns ``(estimate_f, total_shots)``.
    """
    C = m.C if C is None else C
    W, probs = _component_probs(m)
    x = np.asarray(x, dtype=np.float64)
    p_i = np.clip((C - (W @ x) ** 2) / 2.0, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    freqs = rng.binomial(n_per_component, p_i) / n_per_component
    return C - 2.0 * float(probs @ freqs), W.shape[0] * n_per_component


def worst_case_model(M, N, rng):
    """Mixture with uniform weights and per-pattern coincidence probabilities
    evenly spread over [0, 1/2], plus a matching unit input.

    Every M shares the same mean coincidence rate 1/4, so runs with
    different M are directly comparable.
    """
    if N < 2:
        raise UsageError("worst-case design needs N >= 2")
    x = rng.normal(size=N)
    x /= np.linalg.norm(x)
    p = np.linspace(0.0, 0.5, M) if M > 1 else np.array([0.25])
    s = 1.0 - 2.0 * p
    perp = rng.normal(size=(M, N))
    perp -= np.outer(perp @ x, x)
    perp /= np.linalg.norm(perp, axis=1, keepdims=True)
    W = np.sqrt(s)[:, None] * x + np.sqrt(1.0 - s)[:, None] * perp
    model = MixtureModel(W, np.full(M, 1.0 / M), track_K=False)
    return model, x


STUDY_FIELDS = ("M", "n", "mean_est", "std_est", "coverage")


def m_independence_study(M_values, epsilon, delta, repeats, seed, mode="agnostic", N=16):
    """Spread and coverage of the ``f`` estimator as the mixture size grows.

    The number of shots is fixed by :func:`hoeffding_budget` for every M
    (per pattern in ``tracked`` mode). Returns one dict per M with keys
    ``M, n, mean_est, std_est, coverage``; ``std_est`` is NaN when
    ``repeats < 2``. Also reports ``f`` (exact) and ``coverage_p``, the
    fraction of runs whose coincidence-rate estimate is within epsilon.
    """
    if repeats < 1:
        raise UsageError("repeats must be >= 1")
    if mode not in ("agnostic", "tracked"):
        raise UsageError(f"unknown mode {mode!r}")
    budget = hoeffding_budget(epsilon, delta)
    rows = []
    for M in M_values:
        design_rng = np.random.default_rng([seed, M])
        model, x = worst_case_model(int(M), N, design_rng)
        f = forward_mixture(model, x)
        est = np.empty(repeats)
        for r in range(repeats):
            stream = np.random.SeedSequence([seed, int(M), r])
            if mode == "agnostic":
                est[r] = sample_shots(model, x, budget.n_required, stream).estimate_f
                shots = budget.n_required
            else:
                est[r], shots = sample_tracked(model, x, budget.n_required, stream)
        err = np.abs(est - f)
        rows.append({
            "M": int(M),
            "n": shots,
            "mean_est": float(est.mean()),
            "std_est": float(est.std(ddof=1)) if repeats > 1 else math.nan,
            "coverage": float(np.mean(err <= epsilon)),
            "coverage_p": float(np.mean(err / 2.0 <= epsilon)),
            "f": f,
        })
    return rows


def study_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STUDY_FIELDS)
    for row in rows:
        writer.writerow([row["M"], row["n"]] + [
            "nan" if math.isnan(row[k]) else repr(row[k]) for k in STUDY_FIELDS[2:]
        ])
    return buf.getvalue()
