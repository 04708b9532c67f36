"""Adversarial training, re-indexing retraining and the moving-target ensemble."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import HDCClassifier, train
from .harness.pgm import read_pgm, write_pgm
from .hdc import MajorityRule

log = logging.getLogger(__name__)


@dataclass
class AdversarialEntry:
    original: np.ndarray
    adversarial: np.ndarray
    true_label: int
    fooled_label: int


@dataclass
class AdversarialSet:
    entries: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, original, adversarial, true_label: int, fooled_label: int):
        if fooled_label == true_label:
            raise ValueError("an adversarial entry must have been misclassified when created")
        self.entries.append(AdversarialEntry(np.asarray(original, np.uint8).copy(),
                                             np.asarray(adversarial, np.uint8).copy(),
                                             int(true_label), int(fooled_label)))

    @property
    def adversarial_images(self) -> np.ndarray:
        return np.stack([e.adversarial for e in self.entries])

    @property
    def true_labels(self) -> np.ndarray:
        return np.array([e.true_label for e in self.entries], dtype=np.int64)

    @classmethod
    def from_campaign(cls, report, dataset) -> AdversarialSet:
        adv = cls()
        for r in report.records:
            if r.success:
                adv.add(dataset.images[r.index], report.adversarial[r.index], r.digit, r.adv_label)
        return adv

    def save(self, directory):
        """One PGM pair per entry plus ``manifest.csv`` (id, labels, file names)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "manifest.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "true_label", "fooled_label", "original", "adversarial"])
            for i, e in enumerate(self.entries):
                orig, adv = f"{i:05d}_original.pgm", f"{i:05d}_adversarial.pgm"
                write_pgm(d / orig, e.original)
                write_pgm(d / adv, e.adversarial)
                w.writerow([i, e.true_label, e.fooled_label, orig, adv])

    @classmethod
    def load(cls, directory) -> AdversarialSet:
        d = Path(directory)
        adv = cls()
        with open(d / "manifest.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                adv.add(read_pgm(d / row["original"]), read_pgm(d / row["adversarial"]),
                        int(row["true_label"]), int(row["fooled_label"]))
        return adv


def adversarial_training(images, labels, adv: AdversarialSet, classifier: HDCClassifier,
                         rule: MajorityRule | None = None) -> HDCClassifier:
    """Retrain on clean data plus adversarial images under their true labels, same basis."""
    if len(adv) == 0:
        log.warning("empty adversarial set: plain retraining")
        aug_images, aug_labels = images, np.asarray(labels)
    else:
        aug_images = np.concatenate([np.asarray(images), adv.adversarial_images])
        aug_labels = np.concatenate([np.asarray(labels, dtype=np.int64), adv.true_labels])
    rule = rule or MajorityRule.fmr(classifier.rule.fmr_sign)
    mem = train(aug_images, aug_labels, classifier.pos, classifier.val, rule,
                np.random.default_rng(classifier.seed), classifier.memory.k, classifier.encoder)
    mem.metadata["adversarial_samples"] = len(adv)
    return classifier.with_memory(mem)


def reindex_retrain(images, labels, new_seed: int, dim: int, rule: MajorityRule | None = None,
                    existing_seeds=()) -> HDCClassifier:
    """A fresh random indexing of the same training data."""
    if new_seed in set(existing_seeds):
        raise ValueError(f"seed {new_seed} collides with an existing classifier")
    return HDCClassifier.fit(images, labels, dim, new_seed, rule)


class ClassifierEnsemble:
    """Classifiers with pairwise distinct seeds; one is drawn per query."""

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        seeds = [m.seed for m in members]
        if len(set(seeds)) != len(seeds):
            raise ValueError("ensemble member seeds must be pairwise distinct")
        self.members = members

    def __len__(self):
        return len(self.members)

    def classify(self, img, rng):
        return moving_target_classify(self, img, rng)[:2]


def moving_target_classify(ens: ClassifierEnsemble, img, rng: np.random.Generator):
    """``(label, distances, member index)`` from a uniformly drawn member."""
    if len(ens.members) == 0:
        raise ValueError("empty ensemble")
    i = int(rng.integers(len(ens.members)))
    label, d = ens.members[i].classify(img, rng)
    return label, d, i


def residual_asr(adv: AdversarialSet, target, rng=None) -> float:
    """Fraction of adversarial images the target still assigns a wrong label."""
    if len(adv) == 0:
        raise ValueError("residual ASR of an empty adversarial set is undefined")
    wrong = 0
    for e in adv.entries:
        label = target.classify(e.adversarial, rng)[0]
        wrong += label != e.true_label
    return wrong / len(adv)


def benign_accuracy(classifier, images, labels, rng=None) -> float:
    return classifier.accuracy(images, labels, rng)
