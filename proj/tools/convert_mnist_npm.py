#!/usr/bin/env python3
"""Convert the `mnist` npm package (cazala/mnist, MIT) into IDX files.

The package embeds ~10k genuine MNIST training digits as JSON arrays of
pixel intensities (byte/255 rounded to 3 decimals). We recover the exact
byte values, make a deterministic 75/25 per-digit train/test split, and
write the four standard IDX files.

Usage:
    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 tools/convert_mnist_npm.py package/src/digits data/mnist
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np

TRAIN_FRACTION = 0.75
SHUFFLE_SEED = 0


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n = images.shape[0]
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    src = Path(sys.argv[1])
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)

    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        flat = json.load(open(src / f"{digit}.json"))["data"]
        pixels = np.asarray(flat, dtype=np.float64).reshape(-1, 784)
        bytes_ = np.rint(pixels * 255.0)
        assert np.abs(bytes_ - pixels * 255.0).max() < 0.5
        bytes_ = bytes_.astype(np.uint8)
        n_train = int(round(TRAIN_FRACTION * bytes_.shape[0]))
        train_x.append(bytes_[:n_train])
        train_y.append(np.full(n_train, digit))
        test_x.append(bytes_[n_train:])
        test_y.append(np.full(bytes_.shape[0] - n_train, digit))

    rng = np.random.RandomState(SHUFFLE_SEED)
    for xs, ys, tag in [(train_x, train_y, "train"), (test_x, test_y, "test")]:
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        perm = rng.permutation(x.shape[0])
        x, y = x[perm], y[perm]
        write_idx_images(out / f"{tag}-images-idx3-ubyte", x)
        write_idx_labels(out / f"{tag}-labels-idx1-ubyte", y)
        print(f"{tag}: {x.shape[0]} examples")


if __name__ == "__main__":
    main()
