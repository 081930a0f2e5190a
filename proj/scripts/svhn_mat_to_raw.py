#!/usr/bin/env python3
"""Convert SVHN cropped-digit .mat files into 3073-byte records.

Output layout matches CIFAR-10 binary batches: one label byte, then the
1024 R, 1024 G and 1024 B bytes in row-major order. SVHN marks digit 0 as
label 10; it is written as 0.

    python scripts/svhn_mat_to_raw.py train_32x32.mat svhn_train.bin
"""
import argparse
import sys

import numpy as np


def convert(mat_path, out_path, limit=None):
    from scipy.io import loadmat

    m = loadmat(mat_path)
    x, y = m["X"], m["y"].reshape(-1)
    if x.shape[:3] != (32, 32, 3):
        raise SystemExit(f"{mat_path}: unexpected X shape {x.shape}")
    n = x.shape[3] if limit is None else min(limit, x.shape[3])
    labels = np.where(y[:n] == 10, 0, y[:n]).astype(np.uint8)
    if labels.max() > 9:
        raise SystemExit(f"{mat_path}: label out of range")
    # (32, 32, 3, N) -> (N, 3, 32, 32)
    planes = np.transpose(x[..., :n], (3, 2, 0, 1)).astype(np.uint8)
    records = np.concatenate([labels[:, None], planes.reshape(n, -1)], axis=1)
    records.tofile(out_path)
    return n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mat")
    ap.add_argument("out")
    ap.add_argument("--limit", type=int, default=None)
    a = ap.parse_args(argv)
    n = convert(a.mat, a.out, a.limit)
    print(f"wrote {n} records to {a.out}")


if __name__ == "__main__":
    sys.exit(main())
