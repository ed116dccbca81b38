"""Forward passes of the four classifiers and their output post-processing.

All forwards accept either a single feature vector of shape ``(N,)`` or a
batch of shape ``(B, N)`` and return a float or a ``(B,)`` array to match.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConstraintViolation, DataError, LengthMismatch, RangeViolation
from .statevec import (
    NORM_TOL,
    coincidence_general,
    density_from_mixture,
    density_from_superposition,
)

CHECKPOINT_SCHEMA = 1

PROJECTION = "projection"
WEIGHTNORM = "weightnorm"
MODES = (PROJECTION, WEIGHTNORM)


def _abs_grad(w):
    return np.sign(w)


def _sigmoid_grad(w):
    s = expit(w)
    return s * (1.0 - s)


def _relu(w):
    return np.maximum(w, 0.0)


def _relu_grad(w):
    return (w > 0).astype(np.float64)


# positivity maps for the output weights: name -> (P, P')
POSITIVITY = {
    "abs": (np.abs, _abs_grad),
    "sigmoid": (expit, _sigmoid_grad),
    "relu": (_relu, _relu_grad),
}


def _check_positivity(name):
    if name not in POSITIVITY:
        raise ValueError(f"unknown positivity map {name!r}; choose from {sorted(POSITIVITY)}")


@dataclass
class MixtureModel:
    """Mixture of M pure hidden patterns weighted by ``out_weights``.

    In projection mode the constraints are restored by
    :func:`homnet.learn.project_constraints`; with ``track_K`` the output
    weights are only kept non-negative and their sum ``K`` rescales the
    response before the sigmoid. In weight-normalized mode the forward
    itself divides each row by its norm and maps the weights through the
    positivity map before normalizing them.
    """

    hidden: np.ndarray
    out_weights: np.ndarray
    bias: float = 0.0
    track_K: bool = True
    C: float = 1.0
    positivity_map: str = "abs"
    mode: str = PROJECTION

    kind = "mixture"

    def __post_init__(self):
        self.hidden = np.array(self.hidden, dtype=np.float64, ndmin=2)
        self.out_weights = np.array(self.out_weights, dtype=np.float64, ndmin=1)
        self.bias = float(self.bias)
        if self.out_weights.shape != (self.hidden.shape[0],):
            raise LengthMismatch(
                f"{self.out_weights.size} output weights for {self.hidden.shape[0]} neurons"
            )
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        _check_positivity(self.positivity_map)

    @property
    def M(self):
        return self.hidden.shape[0]

    @property
    def N(self):
        return self.hidden.shape[1]

    @property
    def K(self):
        if self.mode == PROJECTION and self.track_K:
            return float(self.out_weights.sum())
        return 1.0

    def mixture(self):
        """Effective ``(unit patterns, probabilities)`` seen by the optics."""
        W, w = self.hidden, self.out_weights
        if self.mode == WEIGHTNORM:
            pw = POSITIVITY[self.positivity_map][0](w)
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            return W / norms, pw / pw.sum()
        if self.track_K:
            return W, w / w.sum()
        return W, w

    def check_constraints(self, tol=NORM_TOL):
        """Raise ConstraintViolation unless the effective mixture is physical."""
        W, probs = self.mixture()
        norms = np.linalg.norm(W, axis=1)
        if not np.all(np.isfinite(probs)) or np.any(probs < -tol):
            raise ConstraintViolation("mixture probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > tol:
            raise ConstraintViolation(f"mixture probabilities sum to {probs.sum():.12g}")
        if np.any(np.abs(norms - 1.0) > tol):
            raise ConstraintViolation("hidden patterns must have unit norm")

    def copy(self):
        return MixtureModel(
            self.hidden.copy(), self.out_weights.copy(), self.bias, self.track_K,
            self.C, self.positivity_map, self.mode,
        )


@dataclass
class SuperpositionModel:
    """Coherent superposition of hidden patterns with real amplitudes."""

    hidden: np.ndarray
    out_weights: np.ndarray
    bias: float = 0.0
    C: float = 1.0

    kind = "superposition"
    mode = WEIGHTNORM

    def __post_init__(self):
        self.hidden = np.array(self.hidden, dtype=np.float64, ndmin=2)
        self.out_weights = np.array(self.out_weights, dtype=np.float64, ndmin=1)
        self.bias = float(self.bias)
        if self.out_weights.shape != (self.hidden.shape[0],):
            raise LengthMismatch(
                f"{self.out_weights.size} amplitudes for {self.hidden.shape[0]} neurons"
            )

    @property
    def M(self):
        return self.hidden.shape[0]

    @property
    def N(self):
        return self.hidden.shape[1]

    @property
    def K(self):
        return 1.0

    def effective_pattern(self):
        """The collapsed single pattern ``v = sum_i w_i W_i``."""
        return self.out_weights @ self.hidden

    def copy(self):
        return SuperpositionModel(self.hidden.copy(), self.out_weights.copy(), self.bias, self.C)


@dataclass
class ClassicalModel:
    """Classical shallow net with square activation and a tuned sigmoid."""

    hidden: np.ndarray
    out_weights: np.ndarray
    bias: float = 0.0
    constrained: bool = False
    positivity_map: str = "abs"

    kind = "classical"
    mode = PROJECTION
    track_K = False
    C = 1.0

    def __post_init__(self):
        self.hidden = np.array(self.hidden, dtype=np.float64, ndmin=2)
        self.out_weights = np.array(self.out_weights, dtype=np.float64, ndmin=1)
        self.bias = float(self.bias)
        if self.out_weights.shape != (self.hidden.shape[0],):
            raise LengthMismatch(
                f"{self.out_weights.size} output weights for {self.hidden.shape[0]} neurons"
            )
        _check_positivity(self.positivity_map)

    @property
    def M(self):
        return self.hidden.shape[0]

    @property
    def N(self):
        return self.hidden.shape[1]

    @property
    def K(self):
        return 1.0

    def copy(self):
        return ClassicalModel(
            self.hidden.copy(), self.out_weights.copy(), self.bias,
            self.constrained, self.positivity_map,
        )


def _batch(x, n):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != n:
        raise LengthMismatch(f"inputs have shape {np.shape(x)}, model expects {n} features")
    return X, single


def _out(v, single):
    return float(v[0]) if single else v


def overlaps(W, X):
    """Matrix of inner products ``<x_b, W_i>``, shape (B, M)."""
    return X @ W.T


def mixture_response(m, x):
    """Pre-sigmoid argument ``K f + beta`` of the mixture network."""
    X, single = _batch(x, m.N)
    A = overlaps(m.hidden, X)
    if m.mode == WEIGHTNORM:
        P = POSITIVITY[m.positivity_map][0]
        pw = P(m.out_weights)
        t = A**2 / np.sum(m.hidden**2, axis=1)
        xi = t @ (pw / pw.sum()) + m.bias
    else:
        # K f = sum_i w_i <x, W_i>^2 whether or not w is normalized
        xi = (A**2) @ m.out_weights + m.bias
    return _out(xi, single)


def forward_mixture(m, x):
    """Mixture response ``f = sum_i w_i <x, W_i>^2`` with normalized weights."""
    X, single = _batch(x, m.N)
    if m.mode == WEIGHTNORM:
        f = mixture_response(m, X) - m.bias
    else:
        f = (overlaps(m.hidden, X) ** 2) @ m.out_weights
        if m.track_K:
            K = m.K
            f = f / K if K != 0 else np.zeros_like(f)
    return _out(f, single)


def forward_superposition(m, x, normalize=True):
    """``f = (sum_i w_i <x, W_i>)^2``, divided by ``||sum_i w_i W_i||^2``.

    With ``normalize=False`` the raw coherent value is returned, which only
    equals the physical response when the superposition is already unit-norm.
    """
    X, single = _batch(x, m.N)
    v = m.effective_pattern()
    f = (X @ v) ** 2
    if normalize:
        f = f / (v @ v)
    return _out(f, single)


def superposition_response(m, x):
    return forward_superposition(m, x) + m.bias


def forward_single(W, x):
    """Single optical neuron ``<x, W>^2`` for unit-norm vectors."""
    W = np.asarray(W, dtype=np.float64)
    X, single = _batch(x, W.size)
    if abs(np.linalg.norm(W) - 1.0) > NORM_TOL:
        raise ConstraintViolation("neuron pattern must have unit norm")
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > NORM_TOL):
        raise ConstraintViolation("input must have unit norm")
    return _out((X @ W) ** 2, single)


def coincidence_prob(f, C=1.0):
    """Coincidence probability ``(C - f) / 2`` of a response ``f``."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < -1e-12) or np.any(f > C + 1e-12):
        raise RangeViolation(f"response must lie in [0, {C}]")
    p = (C - f) / 2.0
    return float(p) if p.ndim == 0 else p


def sigmoid(z):
    return expit(z)


def postprocess(f, beta, K=1.0):
    """``sigma(K f + beta)``."""
    return expit(K * np.asarray(f, dtype=np.float64) + beta)


TUNED_SLOPE = 11.0
TUNED_SHIFT = 5.5


def tuned_sigmoid(z):
    """``1 / (1 + exp(-11 z + 5.5))``, centered on z = 0.5."""
    return expit(TUNED_SLOPE * np.asarray(z, dtype=np.float64) - TUNED_SHIFT)


def classical_response(m, x):
    X, single = _batch(x, m.N)
    z = (overlaps(m.hidden, X) ** 2) @ m.out_weights + m.bias
    return _out(z, single)


def forward_classical(m, x):
    z = classical_response(m, x)
    F = tuned_sigmoid(z)
    return float(F) if np.ndim(F) == 0 else F


def predict(F, threshold=0.5):
    """Class decision; ties at the threshold go to class 1."""
    F = np.asarray(F)
    c = (F >= threshold).astype(np.int64)
    return int(c) if c.ndim == 0 else c


def predict_proba(model, x):
    """Post-processed output F in (0, 1) for any model kind."""
    if model.kind == "mixture":
        F = expit(mixture_response(model, x))
    elif model.kind == "superposition":
        F = expit(superposition_response(model, x))
    elif model.kind == "classical":
        F = forward_classical(model, x)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    return float(F) if np.ndim(F) == 0 else F


# --- checkpoints -----------------------------------------------------------


def model_to_dict(model):
    d = {
        "schema_version": CHECKPOINT_SCHEMA,
        "model_kind": model.kind,
        "M": model.M,
        "N": model.N,
        "hidden": model.hidden.reshape(-1).tolist(),
        "out_weights": model.out_weights.tolist(),
        "bias": model.bias,
        "track_K": bool(getattr(model, "track_K", False)),
        "positivity_map": getattr(model, "positivity_map", None),
        "C": float(model.C),
        "mode": model.mode,
    }
    if model.kind == "classical":
        d["constrained"] = model.constrained
    return d


def model_from_dict(d):
    if d.get("schema_version") != CHECKPOINT_SCHEMA:
        raise DataError(f"unsupported checkpoint schema {d.get('schema_version')!r}")
    M, N = int(d["M"]), int(d["N"])
    hidden = np.array(d["hidden"], dtype=np.float64)
    if hidden.size != M * N or len(d["out_weights"]) != M:
        raise DataError("checkpoint arrays do not match declared M and N")
    hidden = hidden.reshape(M, N)
    kind = d["model_kind"]
    if kind == "mixture":
        return MixtureModel(
            hidden, d["out_weights"], d["bias"], d["track_K"], d["C"],
            d["positivity_map"], d.get("mode", PROJECTION),
        )
    if kind == "superposition":
        return SuperpositionModel(hidden, d["out_weights"], d["bias"], d["C"])
    if kind == "classical":
        return ClassicalModel(
            hidden, d["out_weights"], d["bias"], d.get("constrained", False),
            d.get("positivity_map") or "abs",
        )
    raise DataError(f"unknown model kind {kind!r}")


def save_checkpoint(model, path):
    # json writes floats with repr, which round-trips exactly
    text = json.dumps(model_to_dict(model), sort_keys=True)
    Path(path).write_text(text + "\n")


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise DataError("checkpoint not found", path=path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed checkpoint: {exc}", path=path) from exc
    return model_from_dict(d)


# --- physics oracle --------------------------------------------------------


def random_mixture(rng, N, M):
    W = rng.normal(size=(M, N))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    w = rng.dirichlet(np.ones(M))
    return MixtureModel(W, w, track_K=False)


def random_superposition(rng, N, M):
    W = rng.normal(size=(M, N))
    w = rng.normal(size=M)
    w /= np.linalg.norm(w @ W)
    return SuperpositionModel(W, w)


def oracle_check(trials=1000, seed=0, max_N=32, max_M=8):
    """Largest gap between each model's ``(1 - f) / 2`` and the density-matrix
    coincidence formula over random valid instances."""
    rng = np.random.default_rng(seed)
    worst = {"mixture": 0.0, "superposition": 0.0}
    for _ in range(trials):
        N = int(rng.integers(2, max_N + 1))
        M = int(rng.integers(1, max_M + 1))
        x = rng.normal(size=N)
        x /= np.linalg.norm(x)
        mix = random_mixture(rng, N, M)
        p = coincidence_general(x, density_from_mixture(mix.hidden, mix.out_weights))
        worst["mixture"] = max(worst["mixture"], abs(p - (1.0 - forward_mixture(mix, x)) / 2))
        sup = random_superposition(rng, N, M)
        p = coincidence_general(x, density_from_superposition(sup.hidden, sup.out_weights))
        gap = abs(p - (1.0 - forward_superposition(sup, x)) / 2)
        worst["superposition"] = max(worst["superposition"], gap)
    return worst
