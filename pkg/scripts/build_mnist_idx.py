"""Build IDX files from the MNIST digits bundled in the npm ``mnist`` package.

The sandbox cannot reach the usual MNIST mirrors, but the npm registry is
available and ``mnist@1.1.0`` ships 10000 MNIST digits as JSON (pixels stored
as ``round(p / 255, 3)``, so the 8-bit values are recovered exactly).

Usage::

    npm pack mnist@1.1.0
    python scripts/build_mnist_idx.py mnist-1.1.0.tgz data/mnist

Writes a deterministic 9000/1000 train/test split as gzipped IDX files.
"""
import argparse
import gzip
import io
import json
import struct
import tarfile
from pathlib import Path

import numpy as np


def read_digits(tgz_path):
    images, labels = [], []
    with tarfile.open(tgz_path) as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            values = np.asarray(json.load(member)["data"], dtype=np.float64)
            pixels = np.rint(values.reshape(-1, 784) * 255.0)
            # every stored value is within rounding distance of a k/255
            assert np.abs(pixels / 255.0 - values.reshape(-1, 784)).max() < 6e-4
            images.append(pixels.astype(np.uint8))
            labels.append(np.full(len(pixels), digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx(path, array):
    buf = io.BytesIO()
    if array.ndim == 3:
        buf.write(struct.pack(">IIII", 0x803, *array.shape))
    else:
        buf.write(struct.pack(">II", 0x801, len(array)))
    buf.write(array.tobytes())
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(buf.getvalue())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("tarball")
    parser.add_argument("outdir")
    parser.add_argument("--test-count", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    images, labels = read_digits(args.tarball)
    order = np.random.default_rng(args.seed).permutation(len(images))
    images, labels = images[order].reshape(-1, 28, 28), labels[order]
    n_test = args.test_count
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", images[:-n_test])
    write_idx(out / "train-labels-idx1-ubyte.gz", labels[:-n_test])
    write_idx(out / "t10k-images-idx3-ubyte.gz", images[-n_test:])
    write_idx(out / "t10k-labels-idx1-ubyte.gz", labels[-n_test:])
    print(f"wrote {len(images) - n_test} train / {n_test} test digits to {out}")


if __name__ == "__main__":
    main()
