"""Train a two-neuron optical classifier on synthetic 'rings vs bars' images.

The images are written as MNIST-format IDX files, so the same pipeline
used on the real datasets (parse, pad to 32x32, L2-normalize, 85:15 split)
runs end to end.

Run: python demos/02_train_toy.py
"""

import tempfile
from pathlib import Path

import numpy as np

from homnet import dataio, learn

rng = np.random.default_rng(0)
yy, xx = np.mgrid[:28, :28]
r = np.hypot(yy - 13.5, xx - 13.5)


def image(kind):
    if kind == 0:
        img = np.exp(-((r - rng.uniform(6, 10)) ** 2) / 3)
    else:
        img = np.exp(-((xx - 13.5 - rng.uniform(-4, 4)) ** 2) / 3) * (np.abs(yy - 13.5) < 10)
    return np.clip((img + rng.uniform(0, 0.15, img.shape)) * 255, 0, 255).astype(np.uint8)


labels = rng.integers(0, 2, 1200).astype(np.uint8)
images = np.stack([image(k) for k in labels])

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "mnist"
    root.mkdir()
    dataio.write_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
                     images[:1000], labels[:1000])
    dataio.write_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte",
                     images[1000:], labels[1000:])
    split = dataio.make_binary_task(dataio.load_dataset("mnist", tmp), 0, 1, seed=0, name="toy")

print(f"train {len(split.y_train)}  test {len(split.y_test)}  features {split.dim}")

trained = {}
for kind in ("mixture", "classical"):
    cfg = learn.TrainConfig(epochs=30, batch_size=100, neurons=2, model_kind=kind, seed=1)
    trained[kind], history = learn.train(split, cfg)
    print(f"{kind:9s} epoch 1 loss {history[0].train_loss:.3f} -> epoch 30 loss "
          f"{history[-1].train_loss:.3f}, best test acc {learn.best_test_accuracy(history):.3f}")

# The trained optical patterns are unit-norm vectors over the 32x32 pixels.
print("optical row norms:", np.linalg.norm(trained["mixture"].hidden, axis=1))
