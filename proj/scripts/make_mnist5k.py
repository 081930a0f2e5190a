"""Build a small MNIST stand-in from the 5000-sample CSV shipped in the mlxtend wheel.

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist5k.py /tmp/mlx/mlxtend-*.whl data/mnist5k

Writes IDX files (same layout as the official MNIST release) with a
stratified 400/100 per-class train/test split, shuffled with a fixed seed.
"""

import argparse
import gzip
import io
import struct
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_samples(source: Path) -> tuple[np.ndarray, np.ndarray]:
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as z:
            raw = z.read(MEMBER)
    else:
        raw = source.read_bytes()
    text = gzip.decompress(raw).decode()
    table = np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :784], table[:, 784]
    assert pixels.min() >= 0 and pixels.max() <= 255
    return pixels.astype(np.uint8).reshape(-1, 28, 28), labels.astype(np.uint8)


def write_idx(path: Path, images: np.ndarray, labels: np.ndarray, stem: str) -> None:
    with open(path / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(path / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("source", type=Path, help="mlxtend wheel or mnist_5k.csv.gz")
    ap.add_argument("out", type=Path)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20181)
    args = ap.parse_args()

    images, labels = read_samples(args.source)
    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = rng.permutation(np.flatnonzero(labels == c))
        test_idx.extend(idx[: args.test_per_class])
        train_idx.extend(idx[args.test_per_class:])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out, images[train_idx], labels[train_idx], "train")
    write_idx(args.out, images[test_idx], labels[test_idx], "t10k")
    print(f"train {len(train_idx)}  test {len(test_idx)}  -> {args.out}")


if __name__ == "__main__":
    main()
