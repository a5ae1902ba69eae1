#!/usr/bin/env python3
"""Build a small MNIST subset in gzipped IDX format.

Source: the MIT-licensed `mnist` npm package (10,000 MNIST digits stored as
per-class JSON arrays of pixel/255 values rounded to three decimals).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset

The first 500 images of each digit form the training split and the next 100
form the test split (5,000 / 1,000 images, disjoint). Training rows are
shuffled with a fixed seed so that the file order is not class-sorted.
"""
import gzip
import json
import os
import random
import struct
import sys

TRAIN_PER_CLASS = 500
TEST_PER_CLASS = 100


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(bytes(payload))


def main(src, dst):
    train, test = [], []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            data = json.load(f)["data"]
        n = len(data) // 784
        assert n >= TRAIN_PER_CLASS + TEST_PER_CLASS
        images = [
            [int(round(x * 255)) for x in data[i * 784:(i + 1) * 784]] for i in range(n)
        ]
        train += [(img, digit) for img in images[:TRAIN_PER_CLASS]]
        test += [(img, digit) for img in images[TRAIN_PER_CLASS:TRAIN_PER_CLASS + TEST_PER_CLASS]]
    random.Random(20170101).shuffle(train)
    os.makedirs(dst, exist_ok=True)
    for name, rows in (("train", train), ("test", test)):
        pixels = [p for img, _ in rows for p in img]
        labels = [lbl for _, lbl in rows]
        write_idx(os.path.join(dst, f"{name}-images-idx3-ubyte.gz"), 0x803, (len(rows), 28, 28), pixels)
        write_idx(os.path.join(dst, f"{name}-labels-idx1-ubyte.gz"), 0x801, (len(rows),), labels)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
