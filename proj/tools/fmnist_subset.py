#!/usr/bin/env python3
# Copyright 2026 The H-FL Simulator Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the Fashion-MNIST idx-ubyte subset used by the acceptance suite.

The images come from the `fashion-mnist` npm package, which ships the
70k images grouped per class as JSON arrays of 784 bytes. We draw a
class-balanced, disjoint train/test split with a fixed seed and write the
standard idx files (magic 0x803 for images, 0x801 for labels).

    python3 tools/fmnist_subset.py --out data/fmnist
    python3 tools/fmnist_subset.py --package /path/to/extracted/package --out ...
"""

import argparse
import json
import os
import struct
import subprocess
import tarfile
import tempfile

import numpy as np


def fetch_package(workdir):
    subprocess.run(["npm", "pack", "fashion-mnist@1.1.0"], cwd=workdir,
                   check=True, stdout=subprocess.DEVNULL)
    with tarfile.open(os.path.join(workdir, "fashion-mnist-1.1.0.tgz")) as tar:
        tar.extractall(workdir)
    return os.path.join(workdir, "package")


def write_idx(prefix, images, labels):
    with open(prefix + "-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with open(prefix + "-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--package", help="extracted npm package directory")
    parser.add_argument("--out", required=True)
    parser.add_argument("--train-per-class", type=int, default=1000)
    parser.add_argument("--test-per-class", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2021)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        package = args.package or fetch_package(tmp)
        train_x, train_y, test_x, test_y = [], [], [], []
        for label in range(10):
            with open(os.path.join(package, "src", "clothes", f"{label}.json")) as f:
                # Class 0 carries two empty trailing records.
                data = np.asarray([x for x in json.load(f)["data"] if len(x) == 784],
                                  dtype=np.uint8)
            order = rng.permutation(len(data))
            ntr, nte = args.train_per_class, args.test_per_class
            train_x.append(data[order[:ntr]])
            test_x.append(data[order[ntr:ntr + nte]])
            train_y += [label] * ntr
            test_y += [label] * nte

    os.makedirs(args.out, exist_ok=True)
    for name, xs, ys in (("train", train_x, train_y), ("test", test_x, test_y)):
        images = np.concatenate(xs)
        labels = np.asarray(ys)
        perm = rng.permutation(len(labels))
        write_idx(os.path.join(args.out, name), images[perm], labels[perm])
        print(f"{name}: {len(labels)} examples")


if __name__ == "__main__":
    main()
