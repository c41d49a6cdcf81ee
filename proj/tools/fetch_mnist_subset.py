#!/usr/bin/env python3
# Copyright 2026 The LayerScope Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds a 10k-digit MNIST subset in IDX format.

The npm package `mnist` bundles 10,000 real MNIST digits as JSON floats
rounded to three decimals. Rounding x * 255 recovers the original bytes
exactly (the rounding error is at most 0.13 grey levels). Digits are
shuffled with a fixed seed, then split 8,000 train / 2,000 test.

Usage: fetch_mnist_subset.py OUT_DIR [--package-dir DIR]
"""

import argparse
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile

SIDE = 28
TRAIN_COUNT = 8000


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def load_digits(package_dir):
    samples = []
    for digit in range(10):
        raw = json.loads((package_dir / "src" / "digits" / f"{digit}.json").read_text())["data"]
        count = len(raw) // (SIDE * SIDE)
        for i in range(count):
            pixels = raw[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            samples.append(([min(255, max(0, round(v * 255))) for v in pixels], digit))
    return samples


def fetch_package(workdir):
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    tgz = next(pathlib.Path(workdir).glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(workdir)
    return pathlib.Path(workdir) / "package"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir")
    parser.add_argument("--package-dir", help="already-unpacked npm mnist package")
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        package_dir = pathlib.Path(args.package_dir) if args.package_dir else fetch_package(tmp)
        samples = load_digits(package_dir)

    random.Random(20190318).shuffle(samples)
    train, test = samples[:TRAIN_COUNT], samples[TRAIN_COUNT:]
    write_idx_images(out / "train-images-idx3-ubyte", [s[0] for s in train])
    write_idx_labels(out / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_idx_images(out / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", [s[1] for s in test])

    descriptor = {
        "name": "mnist-8k",
        "format": "idx",
        "train_images": "train-images-idx3-ubyte",
        "train_labels": "train-labels-idx1-ubyte",
        "test_images": "t10k-images-idx3-ubyte",
        "test_labels": "t10k-labels-idx1-ubyte",
    }
    (out / "dataset.json").write_text(json.dumps(descriptor, indent=2) + "\n")
    print(f"wrote {len(train)} train / {len(test)} test digits to {out}")


if __name__ == "__main__":
    main()
