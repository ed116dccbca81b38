"""Loss, analytic gradients, optimizers and the training loop.

Every gradient routine takes a single example ``x`` of shape ``(N,)`` or a
batch ``(B, N)`` with labels ``y`` and returns the *mean* gradient of the
binary cross-entropy over the batch, i.e. the summand of the mini-batch
update ``theta -= eta / |B| * sum_s grad H_s`` (before Adam rescaling).
"""

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import DataError, EmptySet, ModeMismatch, ShapeMismatch, UsageError
from .models import (
    POSITIVITY,
    PROJECTION,
    TUNED_SHIFT,
    TUNED_SLOPE,
    WEIGHTNORM,
    ClassicalModel,
    MixtureModel,
    SuperpositionModel,
    _batch,
    predict,
    predict_proba,
)

log = logging.getLogger(__name__)

BCE_CLIP = 1e-7

MODEL_KINDS = ("mixture", "superposition", "classical")


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 1000
    learning_rate: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    mode: str = PROJECTION
    model_kind: str = "mixture"
    neurons: int = 2
    track_K: bool = True
    positivity_map: str = "abs"
    C: float = 1.0
    optimizer: str = "adam"
    constrained: bool = False
    project_every: str = "step"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.epochs < 0:
            raise UsageError("epochs must be >= 0")
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise UsageError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise UsageError("Adam betas must lie in [0, 1)")
        if self.neurons < 1:
            raise UsageError("neurons must be >= 1")
        if self.mode not in (PROJECTION, WEIGHTNORM):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.model_kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {self.model_kind!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise UsageError(f"unknown optimizer {self.optimizer!r}")
        if self.project_every not in ("epoch", "step"):
            raise UsageError("project_every must be 'epoch' or 'step'")
        if self.positivity_map not in POSITIVITY:
            raise UsageError(f"unknown positivity map {self.positivity_map!r}")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class GradientSet:
    d_hidden: np.ndarray
    d_out: np.ndarray
    d_bias: float

    def as_list(self):
        return [self.d_hidden, self.d_out, np.asarray(self.d_bias)]

    def max_abs(self):
        return max(np.max(np.abs(a)) for a in self.as_list())


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


def bce(y, F):
    """Binary cross-entropy with F clipped to [1e-7, 1 - 1e-7]."""
    F = np.clip(np.asarray(F, dtype=np.float64), BCE_CLIP, 1.0 - BCE_CLIP)
    y = np.asarray(y, dtype=np.float64)
    H = -y * np.log(F) - (1.0 - y) * np.log1p(-F)
    return float(H) if H.ndim == 0 else H


def loss(model, x, y):
    return float(np.mean(bce(y, predict_proba(model, x))))


def _labels(y, B):
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.shape != (B,):
        raise ShapeMismatch(f"{y.size} labels for {B} examples")
    return y


# The gradients use dH/dxi = F - y, the derivative of the unclipped loss;
# clipping only keeps the logarithm finite.


def grad_projection_mode(m, x, y):
    if m.kind != "mixture" or m.mode != PROJECTION:
        raise ModeMismatch("grad_projection_mode needs a mixture model in projection mode")
    X, _ = _batch(x, m.N)
    B = X.shape[0]
    y = _labels(y, B)
    A = X @ m.hidden.T
    S = A**2
    g = expit(S @ m.out_weights + m.bias) - y
    d_out = (g @ S) / B
    d_hidden = 2.0 * ((g[:, None] * A).T @ X) * m.out_weights[:, None] / B
    return GradientSet(d_hidden, d_out, float(g.mean()))


def grad_weightnorm_mixture(m, x, y):
    if m.kind != "mixture" or m.mode != WEIGHTNORM:
        raise ModeMismatch("grad_weightnorm_mixture needs a mixture model in weightnorm mode")
    X, _ = _batch(x, m.N)
    B = X.shape[0]
    y = _labels(y, B)
    P, dP = POSITIVITY[m.positivity_map]
    W, w = m.hidden, m.out_weights
    pw = P(w)
    total = pw.sum()
    q = pw / total
    n2 = np.sum(W**2, axis=1)
    A = X @ W.T
    T = A**2 / n2
    f = T @ q
    g = expit(f + m.bias) - y
    # d f / d w_c = P'(w_c) / sum P * (t_c - f)
    d_out = dP(w) / total * (g @ (T - f[:, None])) / B
    # d f / d W_cd = 2 q_c / |W_c|^2 * (x_d a_c - W_cd t_c)
    proj = (g[:, None] * A).T @ X - W * (g @ T)[:, None]
    d_hidden = 2.0 * (q / n2)[:, None] * proj / B
    return GradientSet(d_hidden, d_out, float(g.mean()))


def grad_superposition(m, x, y):
    if m.kind != "superposition":
        raise ModeMismatch("grad_superposition needs a superposition model")
    X, _ = _batch(x, m.N)
    B = X.shape[0]
    y = _labels(y, B)
    W, w = m.hidden, m.out_weights
    v = w @ W
    T = v @ v
    u = X @ v
    f = u**2 / T
    g = expit(f + m.bias) - y
    A = X @ W.T
    Gw = W @ v
    # d f / d w_c = 2 / T * (u a_c - f <W_c, v>)
    d_out = 2.0 / T * ((g * u) @ A - (g @ f) * Gw) / B
    # d f / d W_cd = 2 w_c / T * (u x_d - f v_d)
    common = (g * u) @ X - (g @ f) * v
    d_hidden = 2.0 / T * np.outer(w, common) / B
    return GradientSet(d_hidden, d_out, float(g.mean()))


def grad_classical(m, x, y):
    if m.kind != "classical":
        raise ModeMismatch("grad_classical needs a classical model")
    X, _ = _batch(x, m.N)
    B = X.shape[0]
    y = _labels(y, B)
    A = X @ m.hidden.T
    S = A**2
    z = S @ m.out_weights + m.bias
    g = TUNED_SLOPE * (expit(TUNED_SLOPE * z - TUNED_SHIFT) - y)
    d_out = (g @ S) / B
    d_hidden = 2.0 * ((g[:, None] * A).T @ X) * m.out_weights[:, None] / B
    return GradientSet(d_hidden, d_out, float(g.mean()))


def gradients(model, x, y):
    if model.kind == "mixture":
        if model.mode == WEIGHTNORM:
            return grad_weightnorm_mixture(model, x, y)
        return grad_projection_mode(model, x, y)
    if model.kind == "superposition":
        return grad_superposition(model, x, y)
    return grad_classical(model, x, y)


def finite_diff(loss_fn, params, h=1e-6):
    """Central finite-difference gradient of ``loss_fn`` at ``params``.

    ``params`` is an array of any shape; it is perturbed one entry at a time
    on a private copy.
    """
    theta = np.array(params, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat, gflat = theta.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = loss_fn(theta)
        flat[k] = orig - h
        down = loss_fn(theta)
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * h)
    return grad


def model_finite_diff(model, x, y, h=1e-6):
    """Finite-difference GradientSet of the mean loss of ``model`` on (x, y)."""

    def block(name):
        def fn(theta):
            probe = model.copy()
            setattr(probe, name, theta if name != "bias" else float(theta[0]))
            return loss(probe, x, y)

        return fn

    return GradientSet(
        finite_diff(block("hidden"), model.hidden, h),
        finite_diff(block("out_weights"), model.out_weights, h),
        float(finite_diff(block("bias"), np.array([model.bias]), h)[0]),
    )


# --- initialization and constraints ---------------------------------------


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def glorot_bounds(M, N):
    return math.sqrt(6.0 / (N + M)), math.sqrt(6.0 / (M + 1))


def glorot_init(M, N, seed, constrain=True, positivity_map="abs", normalize_out=True):
    """Glorot-uniform hidden (M, N) and output (M,) weights.

    With ``constrain`` the rows are normalized and the output weights mapped
    through the positivity map (and, with ``normalize_out``, onto the simplex).
    """
    if M < 1 or N < 1:
        raise UsageError("M and N must be >= 1")
    rng = _rng(seed)
    hb, ob = glorot_bounds(M, N)
    hidden = rng.uniform(-hb, hb, size=(M, N))
    out = rng.uniform(-ob, ob, size=M)
    if constrain:
        hidden = _normalize_rows(hidden, rng, hb)
        out = POSITIVITY[positivity_map][0](out)
        if normalize_out:
            out = _to_simplex(out)
    return hidden, out


def _normalize_rows(W, rng, bound):
    W = np.array(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=1)
    for i in np.flatnonzero(norms == 0):
        log.warning("hidden row %d collapsed to zero; re-drawing it", i)
        while norms[i] == 0:
            W[i] = rng.uniform(-bound, bound, size=W.shape[1])
            norms[i] = np.linalg.norm(W[i])
    return W / norms[:, None]


def _to_simplex(w):
    total = w.sum()
    if total <= 0:
        log.warning("output weights summed to zero; resetting to uniform")
        return np.full_like(w, 1.0 / w.size)
    return w / total


def project_constraints(m, rng=None):
    """Restore unit rows and non-negative, optionally normalized, output weights.

    Returns a new model; ``m`` is left untouched.
    """
    rng = _rng(0 if rng is None else rng)
    out = m.copy()
    hb, _ = glorot_bounds(m.M, m.N)
    out.hidden = _normalize_rows(m.hidden, rng, hb)
    w = POSITIVITY[m.positivity_map][0](m.out_weights)
    if not getattr(m, "track_K", False):
        w = _to_simplex(w)
    out.out_weights = w
    return out


def _needs_projection(model):
    if model.kind == "mixture":
        return model.mode == PROJECTION
    if model.kind == "classical":
        return model.constrained
    return False


def init_model(cfg, N, rng):
    M = cfg.neurons
    if cfg.model_kind == "mixture":
        hidden, out = glorot_init(
            M, N, rng, positivity_map=cfg.positivity_map, normalize_out=True
        )
        return MixtureModel(
            hidden, out, 0.0, cfg.track_K, cfg.C, cfg.positivity_map, cfg.mode
        )
    if cfg.model_kind == "superposition":
        hidden, out = glorot_init(M, N, rng, constrain=False)
        hidden /= np.linalg.norm(hidden, axis=1, keepdims=True)
        return SuperpositionModel(hidden, out, 0.0, cfg.C)
    hidden, out = glorot_init(
        M, N, rng, constrain=cfg.constrained, positivity_map=cfg.positivity_map
    )
    return ClassicalModel(hidden, out, 0.0, cfg.constrained, cfg.positivity_map)


# --- optimizers -----------------------------------------------------------


class Adam:
    """Adam with bias-corrected moments over a list of parameter arrays."""

    def __init__(self, lr=0.03, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        """Return updated copies of ``params`` given matching ``grads``."""
        if len(params) != len(grads) or any(
            np.shape(p) != np.shape(g) for p, g in zip(params, grads)
        ):
            raise ShapeMismatch("parameter and gradient shapes differ")
        if self.m is None:
            self.m = [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]
            self.v = [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]
        elif any(np.shape(p) != mi.shape for p, mi in zip(params, self.m)):
            raise ShapeMismatch("parameter shapes changed between steps")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        new = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g**2
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            new.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return new


class SGD:
    def __init__(self, lr=0.03):
        self.lr = lr

    def step(self, params, grads):
        if any(np.shape(p) != np.shape(g) for p, g in zip(params, grads)):
            raise ShapeMismatch("parameter and gradient shapes differ")
        return [p - self.lr * g for p, g in zip(params, grads)]


def adam_step(state, params, grads):
    """Functional wrapper: one Adam update of ``params`` using ``state``."""
    return state.step(params, grads)


def _make_optimizer(cfg):
    if cfg.optimizer == "sgd":
        return SGD(cfg.learning_rate)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)


def _get_params(model):
    return [model.hidden, model.out_weights, np.asarray(model.bias)]


def _set_params(model, params):
    model.hidden, model.out_weights = params[0], params[1]
    model.bias = float(params[2])


# --- training and evaluation ----------------------------------------------


def evaluate(model, X, y):
    """Mean BCE and accuracy of ``model`` on a labeled set."""
    X = np.asarray(X)
    if X.size == 0 or len(y) == 0:
        raise EmptySet("cannot evaluate on an empty set")
    F = predict_proba(model, X)
    y = np.asarray(y)
    return float(np.mean(bce(y, F))), float(np.mean(predict(F) == y))


def train(split, cfg, model=None, callback=None):
    """Train a model on ``split`` and return ``(model, history)``.

    ``history`` holds one EpochRecord per epoch. Initialization, batch
    shuffling and any re-drawn hidden rows all come from one generator
    seeded with ``cfg.seed``, so identical inputs give identical runs.
    """
    X, y = split.X_train, split.y_train
    if len(y) == 0:
        raise EmptySet("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = init_model(cfg, X.shape[1], rng)
    opt = _make_optimizer(cfg)
    project = _needs_projection(model)
    history = []
    n = len(y)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads = gradients(model, X[idx], y[idx])
            _set_params(model, opt.step(_get_params(model), grads.as_list()))
            if project and cfg.project_every == "step":
                model = project_constraints(model, rng)
        if project and cfg.project_every == "epoch":
            model = project_constraints(model, rng)
        tr_loss, tr_acc = evaluate(model, X, y)
        if len(split.y_test):
            te_loss, te_acc = evaluate(model, split.X_test, split.y_test)
        else:
            te_loss, te_acc = math.nan, math.nan
        rec = EpochRecord(epoch, tr_loss, tr_acc, te_loss, te_acc)
        history.append(rec)
        log.debug("epoch %d: %s", epoch, rec)
        if callback is not None:
            callback(rec, model)
    return model, history


def best_test_accuracy(history):
    return max((r.test_acc for r in history), default=math.nan)


HISTORY_FIELDS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc")


def history_to_csv(history):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_FIELDS)
    for r in history:
        writer.writerow([r.epoch] + [repr(float(getattr(r, k))) for k in HISTORY_FIELDS[1:]])
    return buf.getvalue()


def write_history(history, path):
    Path(path).write_text(history_to_csv(history))


def read_history(path):
    path = Path(path)
    if not path.exists():
        raise DataError("history file not found", path=path)
    rows = list(csv.reader(path.read_text().splitlines()))
    if not rows or tuple(rows[0]) != HISTORY_FIELDS:
        raise DataError(f"history header must be {','.join(HISTORY_FIELDS)}", path=path)
    history = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            history.append(EpochRecord(int(row[0]), *map(float, row[1:5])))
        except (ValueError, IndexError) as exc:
            raise DataError(f"malformed history row {lineno}: {row}", path=path) from exc
    if not history:
        raise DataError("history has no rows", path=path)
    return history


# --- gradient oracle suite ------------------------------------------------

GRADCHECK_CASES = ("mixture-projection", "mixture-weightnorm", "superposition", "classical")

ABS_TOL = 1e-4
REL_TOL = 1e-5
REL_FLOOR = 1e-2


def random_instance(case, rng, max_N=16, max_M=4, max_B=3):
    """Random model and labeled mini-batch for gradient checking.

    Instances whose output falls inside the loss clipping band are
    re-drawn: there the clipped loss is flat and no gradient can match.
    """
    while True:
        model, X, y = _draw_instance(case, rng, max_N, max_M, max_B)
        F = np.atleast_1d(predict_proba(model, X))
        if np.all((F > 10 * BCE_CLIP) & (F < 1.0 - 10 * BCE_CLIP)):
            return model, X, y


def _draw_instance(case, rng, max_N, max_M, max_B):
    N = int(rng.integers(2, max_N + 1))
    M = int(rng.integers(1, max_M + 1))
    B = int(rng.integers(1, max_B + 1))
    X = rng.normal(size=(B, N))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = rng.integers(0, 2, size=B)
    W = rng.normal(size=(M, N))
    bias = float(rng.normal(scale=0.5))
    if case == "mixture-projection":
        track = bool(rng.integers(0, 2))
        W = W / np.linalg.norm(W, axis=1, keepdims=True) * rng.uniform(0.5, 1.5, size=(M, 1))
        w = rng.uniform(0.05, 1.0, size=M)
        model = MixtureModel(W, w, bias, track_K=track, mode=PROJECTION)
    elif case == "mixture-weightnorm":
        pmap = ("abs", "sigmoid", "relu")[int(rng.integers(0, 3))]
        w = rng.normal(size=M)
        if pmap == "relu":
            # stay away from the kink and keep at least one active weight
            w = np.where(np.abs(w) < 0.1, 0.1 * np.sign(w + 1e-300), w)
            w[0] = abs(w[0]) + 0.1
        elif pmap == "abs":
            w = np.where(np.abs(w) < 0.05, 0.05, w)
        model = MixtureModel(W, w, bias, track_K=False, positivity_map=pmap, mode=WEIGHTNORM)
    elif case == "superposition":
        model = SuperpositionModel(W, rng.normal(size=M), bias)
    elif case == "classical":
        W = W / np.sqrt(N)
        model = ClassicalModel(W, rng.normal(scale=0.5, size=M), bias * 0.2)
    else:
        raise UsageError(f"unknown gradient-check case {case!r}")
    return model, X, y


def compare_gradients(analytic, numeric, abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """Per-block max deviations and whether every entry is within tolerance."""
    out = {}
    ok = True
    names = ("hidden", "out_weights", "bias")
    for name, a, n in zip(names, analytic.as_list(), numeric.as_list()):
        a, n = np.asarray(a), np.asarray(n)
        diff = np.abs(a - n)
        allowed = np.maximum(abs_tol, rel_tol * np.abs(n))
        # relative deviation is only meaningful away from zero entries
        big = np.abs(n) >= REL_FLOOR
        rel = diff[big] / np.abs(n[big])
        out[name] = {"max_abs": float(diff.max()), "max_rel": float(rel.max(initial=0.0))}
        ok &= bool(np.all(diff <= allowed))
    return out, ok


def gradient_check(case, trials=100, seed=0, h=1e-6, grad_fn=None):
    """Run the finite-difference oracle over random instances of ``case``.

    Returns a report dict with per-block maximum deviations and ``passed``.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    grad_fn = grad_fn or gradients
    rng = np.random.default_rng(seed)
    worst = {k: {"max_abs": 0.0, "max_rel": 0.0} for k in ("hidden", "out_weights", "bias")}
    failures = 0
    for _ in range(trials):
        model, X, y = random_instance(case, rng)
        dev, ok = compare_gradients(grad_fn(model, X, y), model_finite_diff(model, X, y, h))
        failures += not ok
        for k, d in dev.items():
            worst[k]["max_abs"] = max(worst[k]["max_abs"], d["max_abs"])
            worst[k]["max_rel"] = max(worst[k]["max_rel"], d["max_rel"])
    return {"case": case, "trials": trials, "failures": failures, "passed": failures == 0,
            "blocks": worst}
