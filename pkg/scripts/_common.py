"""Shared setup for the experiment scripts: data loading and a cached classifier."""

import argparse
import os
from pathlib import Path

from hdcadv.classifier import HDCClassifier
from hdcadv.harness.mnist import load_mnist_idx


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--data-dir", default=os.environ.get("HDCADV_MNIST", "data/mnist"))
    p.add_argument("--out", default="runs/experiments")
    p.add_argument("--dimension", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    return p


def load(args):
    d = Path(args.data_dir)
    train = load_mnist_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte", "train")
    test = load_mnist_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte", "test")
    return train, test


def classifier(args, train, seed=None):
    seed = args.seed if seed is None else seed
    cache = Path(args.out) / f"classifier_d{args.dimension}_s{seed}"
    if (cache / "memory.hdc").exists():
        return HDCClassifier.load(cache)
    clf = HDCClassifier.fit(train.images, train.labels, args.dimension, seed)
    clf.save(cache)
    return clf
