#!/usr/bin/env python3
"""Write a 10k-digit MNIST subset as IDX files.

Source: the `mnist` npm package (10,000 MNIST digits stored as JSON arrays of
28x28 intensities in [0, 1], three decimals). Intensities are mapped back to
bytes with round(v * 255). The digits are shuffled with a fixed seed and split
into train (first --train) and test (rest).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_subset_from_npm.py package/src/digits data/mnist
"""
import argparse
import json
import random
import struct
from pathlib import Path


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        data = json.load(open(Path(args.digits_dir) / f"{digit}.json"))["data"]
        assert len(data) % 784 == 0
        for i in range(0, len(data), 784):
            pix = [min(255, max(0, round(v * 255))) for v in data[i:i + 784]]
            samples.append((pix, digit))
    random.Random(args.seed).shuffle(samples)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = samples[:args.train], samples[args.train:]
    write_images(out / "train-images-idx3-ubyte", [s[0] for s in train])
    write_labels(out / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_images(out / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_labels(out / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"wrote {len(train)} train / {len(test)} test digits to {out}")


if __name__ == "__main__":
    main()
