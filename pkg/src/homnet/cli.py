"""Command-line entry point: ``homnet <command> [options]``.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 numeric or constraint
error. Errors are reported on stderr as one line, ``error[CODE]: message``.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataio, learn, models, photonics, svgplot
from .errors import HomnetError, UsageError

log = logging.getLogger("homnet")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _classes(text):
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--classes expects 'a,b', got {text!r}") from None
    return a, b


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


# --- commands --------------------------------------------------------------


def cmd_prepare(args):
    data_dir = args.data_dir or os.environ.get("HOMNET_DATA_DIR")
    if not data_dir:
        raise UsageError("--data-dir not given and HOMNET_DATA_DIR is unset")
    a, b = _classes(args.classes) if args.classes else dataio.DEFAULT_TASKS[args.dataset]
    items = dataio.load_dataset(args.dataset, data_dir)
    split = dataio.make_binary_task(items, a, b, args.seed, name=args.dataset)
    manifest = dataio.save_split(split, args.out, extra={"data_dir": str(data_dir)})
    _print_json(manifest)
    return 0


def _train_config(args):
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    overrides = {
        "model_kind": args.model,
        "neurons": args.neurons,
        "epochs": args.epochs,
        "batch_size": args.batch,
        "learning_rate": args.lr,
        "mode": args.mode,
        "seed": args.seed,
        "positivity_map": args.positivity,
        "optimizer": args.optimizer,
        "project_every": args.project_every,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_track_k:
        base["track_K"] = False
    if args.constrained:
        base["constrained"] = True
    return learn.TrainConfig.from_dict(base)


def cmd_train(args):
    cfg = _train_config(args)
    split = dataio.load_split(args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    model, history = learn.train(split, cfg)
    ckpt, hist, conf = out / "checkpoint.json", out / "history.csv", out / "config.json"
    models.save_checkpoint(model, ckpt)
    learn.write_history(history, hist)
    conf.write_text(cfg.to_json() + "\n")
    manifest = {
        "config": json.loads(cfg.to_json()),
        "task": {"dataset": split.task[0], "classes": list(split.task[1])},
        "split": str(args.split),
        "split_sha256": _sha256(args.split),
        "outputs": str(out),
        "started": started,
        "finished": _now(),
        "hashes": {"checkpoint": _sha256(ckpt), "history": _sha256(hist)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if history:
        print(f"final test accuracy {history[-1].test_acc:.4f}; "
              f"best test accuracy {learn.best_test_accuracy(history):.4f}")
    else:
        print("no epochs run; wrote initialized model")
    return 0


def _examples(split, which):
    if which == "train":
        return split.X_train, split.y_train
    return split.X_test, split.y_test


def cmd_eval(args):
    model = models.load_checkpoint(args.checkpoint)
    split = dataio.load_split(args.split)
    X, y = _examples(split, args.which)
    if X.shape[0] and X.shape[1] != model.N:
        raise models.LengthMismatch(f"split has {X.shape[1]} features, model expects {model.N}")
    loss, acc = learn.evaluate(model, X, y)
    _print_json({"loss": loss, "accuracy": acc, "n_examples": int(len(y))})
    return 0


def cmd_shots(args):
    model = models.load_checkpoint(args.checkpoint)
    if model.kind != "mixture":
        raise UsageError("shot emulation needs a mixture checkpoint")
    split = dataio.load_split(args.split)
    X, y = _examples(split, args.which)
    if not 0 <= args.image < len(y):
        raise UsageError(f"--image {args.image} out of range [0, {len(y)})")
    x = X[args.image]
    exp = photonics.sample_shots(model, x, args.n, args.seed)
    f = models.forward_mixture(model, x)
    F_est = float(models.postprocess(exp.estimate_f, model.bias, model.K))
    _print_json({
        "n_shots": exp.n_shots,
        "coincidences": exp.coincidences,
        "seed": args.seed,
        "estimate_f": exp.estimate_f,
        "f": f,
        "half_width": exp.half_width,
        "predicted_class": models.predict(F_est),
        "analytic_class": models.predict(models.predict_proba(model, x)),
        "label": int(y[args.image]),
    })
    return 0


def cmd_budget(args):
    b = photonics.hoeffding_budget(args.epsilon, args.delta)
    print("epsilon,delta,n_required")
    print(f"{b.epsilon!r},{b.delta!r},{b.n_required}")
    return 0


def cmd_mstudy(args):
    rows = photonics.m_independence_study(
        _int_list(args.m_list), args.epsilon, args.delta, args.repeats, args.seed, args.mode
    )
    text = photonics.study_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    for r in rows:
        print(f"# M={r['M']}: f={r['f']:.6f} coverage={r['coverage']:.3f} "
              f"coverage_p={r['coverage_p']:.3f}", file=sys.stderr)
    return 0


_GRAD_CASES = {
    "mixture": {"projection": "mixture-projection", "weightnorm": "mixture-weightnorm"},
    "superposition": {None: "superposition"},
    "classical": {None: "classical"},
}


def _gradcheck_cases(model, mode):
    if model == "all":
        return list(learn.GRADCHECK_CASES)
    table = _GRAD_CASES[model]
    if model == "mixture":
        return [table[mode]] if mode else list(table.values())
    return list(table.values())


def cmd_gradcheck(args, grad_fn=None):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    ok = True
    for case in _gradcheck_cases(args.model, args.mode):
        rep = learn.gradient_check(case, args.trials, args.seed, grad_fn=grad_fn)
        status = "PASS" if rep["passed"] else "FAIL"
        blocks = " ".join(
            f"{k}:abs={v['max_abs']:.2e},rel={v['max_rel']:.2e}" for k, v in rep["blocks"].items()
        )
        print(f"{status} {case} trials={rep['trials']} failures={rep['failures']} {blocks}")
        ok &= rep["passed"]
    return 0 if ok else 4


def cmd_oracle(args):
    worst = models.oracle_check(args.trials, args.seed)
    ok = True
    for kind, gap in worst.items():
        passed = gap <= args.tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {kind} max_gap={gap:.3e} tol={args.tol:g}")
    return 0 if ok else 4


def _history_label(path):
    manifest = Path(path).with_name("manifest.json")
    if manifest.exists():
        cfg = json.loads(manifest.read_text()).get("config", {})
        if "neurons" in cfg:
            return f"M={cfg['neurons']}", cfg["neurons"]
    return Path(path).stem, None


def cmd_plot(args):
    runs = []
    labels = args.labels.split(",") if args.labels else None
    if labels and len(labels) != len(args.history):
        raise UsageError("--labels needs one entry per --history file")
    for k, path in enumerate(args.history):
        hist = learn.read_history(path)
        if labels:
            label = labels[k]
            key = int(label[2:]) if label.startswith("M=") and label[2:].isdigit() else None
        else:
            label, key = _history_label(path)
        runs.append((key, k, label, hist))
    # legend in increasing M; unlabeled runs keep input order at the end
    runs.sort(key=lambda r: (r[0] is None, r[0] if r[0] is not None else 0, r[1]))
    svg = svgplot.history_svg([(label, hist) for _, _, label, hist in runs])
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser():
    p = _Parser(prog="homnet", description="Optical shallow-network simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="parse raw files into a binary task split")
    s.add_argument("--dataset", required=True, choices=sorted(dataio.DEFAULT_TASKS))
    s.add_argument("--classes", help="class pair 'a,b' (default: the benchmark pair)")
    s.add_argument("--data-dir", help="raw data directory (default $HOMNET_DATA_DIR)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="train a model on a prepared split")
    s.add_argument("--split", required=True)
    s.add_argument("--config", help="JSON file with TrainConfig fields")
    s.add_argument("--model", choices=learn.MODEL_KINDS)
    s.add_argument("--neurons", "-M", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--mode", choices=models.MODES)
    s.add_argument("--seed", type=int)
    s.add_argument("--positivity", choices=sorted(models.POSITIVITY))
    s.add_argument("--optimizer", choices=("adam", "sgd"))
    s.add_argument("--project-every", choices=("epoch", "step"),
                   help="when to restore the constraints in projection mode (default: step)")
    s.add_argument("--no-track-k", action="store_true", help="renormalize w instead of tracking K")
    s.add_argument("--constrained", action="store_true", help="constrain the classical model")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--which", choices=("test", "train"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("shots", help="emulate photon shots for one image")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--which", choices=("test", "train"), default="test")
    s.add_argument("--image", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_shots)

    s = sub.add_parser("budget", help="Hoeffding photon budget")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.set_defaults(func=cmd_budget)

    s = sub.add_parser("mstudy", help="estimator spread versus number of neurons")
    s.add_argument("--epsilon", type=float, default=0.02)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--repeats", type=int, default=200)
    s.add_argument("--m-list", default="2,16,64,256")
    s.add_argument("--mode", choices=("agnostic", "tracked"), default="agnostic")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_mstudy)

    s = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    s.add_argument("--model", choices=("all",) + learn.MODEL_KINDS, default="all")
    s.add_argument("--mode", choices=models.MODES)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("oracle", help="model forwards vs the density-matrix formula")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("plot", help="SVG history plot")
    s.add_argument("--history", nargs="+", required=True)
    s.add_argument("--labels", help="comma-separated legend labels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except HomnetError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.code}]: {msg}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error[DATA]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 3
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error[NUMERIC]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
