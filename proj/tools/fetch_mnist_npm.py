#!/usr/bin/env python3
"""Build an MNIST subset in IDX format from the `mnist` npm package.

The npm package ships 10,000 real MNIST digits as JSON (pixel values in [0, 1],
three decimals). This script splits them per class into train/test and writes
the four standard IDX files (gzip compressed) so the regular MNIST loader can
read them:

    train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz

Usage:
    tools/fetch_mnist_npm.py --out data/mnist [--package-dir DIR] [--test-share 0.2]

Without --package-dir the package is fetched with `npm pack mnist@1.1.0`.
"""

import argparse
import gzip
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile


def load_digits(package_dir: pathlib.Path):
    digits = {}
    for d in range(10):
        with open(package_dir / "src" / "digits" / f"{d}.json") as fh:
            flat = json.load(fh)["data"]
        if len(flat) % 784:
            raise ValueError(f"digit file {d}.json is not a multiple of 784 values")
        digits[d] = [flat[i:i + 784] for i in range(0, len(flat), 784)]
    return digits


def write_idx_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            fh.write(bytes(min(255, max(0, round(v * 255))) for v in img))


def write_idx_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--package-dir")
    ap.add_argument("--test-share", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        if args.package_dir:
            pkg = pathlib.Path(args.package_dir)
        else:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            with tarfile.open(pathlib.Path(tmp) / "mnist-1.1.0.tgz") as tf:
                tf.extractall(tmp)
            pkg = pathlib.Path(tmp) / "package"
        digits = load_digits(pkg)

    rng = random.Random(args.seed)
    train, test = [], []
    for d, imgs in digits.items():
        order = list(range(len(imgs)))
        rng.shuffle(order)
        n_test = round(len(imgs) * args.test_share)
        test += [(imgs[i], d) for i in order[:n_test]]
        train += [(imgs[i], d) for i in order[n_test:]]
    rng.shuffle(train)
    rng.shuffle(test)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte.gz", [x for x, _ in train])
    write_idx_labels(out / "train-labels-idx1-ubyte.gz", [y for _, y in train])
    write_idx_images(out / "t10k-images-idx3-ubyte.gz", [x for x, _ in test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte.gz", [y for _, y in test])
    print(f"wrote {len(train)} train / {len(test)} test digits to {out}")


if __name__ == "__main__":
    main()
