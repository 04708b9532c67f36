"""Attack campaigns over MNIST test images and the RMR per-image accuracy study.

Report files written to the output directory:

``report.json``
    ``config`` (full echo), ``master_seed``, ``flags`` and ``aggregates``:
    per-digit attempted/successes/asr, ``average_asr`` (mean of per-digit
    ASR over attempted digits), ``overall_asr``, and min/q1/median/q3/max of
    queries, L0, L2 and Linf over successful attacks.
``records.csv``
    One row per attacked image, columns :data:`RECORD_FIELDS`.
``progress.jsonl``
    Completed records (with adversarial pixels) for resuming a campaign.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..attack import AttackConfig, run_attack
from ..classifier import HDCClassifier, per_image_accuracy
from ..oracle import FunctionOracle
from .mnist import Dataset
from .pgm import dump_image_pgm, dump_perturbation_pgm

log = logging.getLogger(__name__)


@dataclass
class AttackRecord:
    index: int
    digit: int
    success: bool
    adv_label: int
    queries: int
    queries_search: int
    queries_adjust: int
    l0: int
    l2: float
    linf: float
    l0_before_adjust: int
    l2_before_adjust: float
    linf_before_adjust: float
    generations: int


RECORD_FIELDS = [f.name for f in fields(AttackRecord)]
_INT_FIELDS = {"index", "digit", "adv_label", "queries", "queries_search", "queries_adjust", "l0",
               "l0_before_adjust", "generations"}


class ReportError(ValueError):
    pass


def image_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Per-image stream keyed on (master, image index) so adding images never perturbs others."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, index, stream]))


def _quartiles(values) -> dict | None:
    if len(values) == 0:
        return None
    q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
    return dict(zip(["min", "q1", "median", "q3", "max"], (float(v) for v in q)))


def aggregate(records: list[AttackRecord]) -> dict:
    per_digit = {}
    for r in records:
        d = per_digit.setdefault(str(r.digit), {"attempted": 0, "successes": 0})
        d["attempted"] += 1
        d["successes"] += int(r.success)
    for d in per_digit.values():
        d["asr"] = d["successes"] / d["attempted"]
    per_digit = dict(sorted(per_digit.items(), key=lambda kv: int(kv[0])))
    ok = [r for r in records if r.success]
    return {
        "per_digit": per_digit,
        "attempted": len(records),
        "successes": len(ok),
        "average_asr": float(np.mean([d["asr"] for d in per_digit.values()])) if per_digit else None,
        "overall_asr": len(ok) / len(records) if records else None,
        "queries": _quartiles([r.queries for r in ok]),
        "queries_search": _quartiles([r.queries_search for r in ok]),
        "l0": _quartiles([r.l0 for r in ok]),
        "l2": _quartiles([r.l2 for r in ok]),
        "linf": _quartiles([r.linf for r in ok]),
    }


@dataclass
class CampaignReport:
    records: list
    config: dict
    master_seed: int
    flags: list
    adversarial: dict  # image index -> adversarial pixels (successes only)

    @property
    def aggregates(self) -> dict:
        return aggregate(self.records)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"config": self.config, "master_seed": self.master_seed, "flags": self.flags,
               "aggregates": self.aggregates}
        (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        with open(out / "records.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for r in self.records:
                w.writerow([repr(v) if isinstance(v, float) else int(v) if isinstance(v, bool) else v
                            for v in asdict(r).values()])

    @classmethod
    def load(cls, out_dir) -> CampaignReport:
        """Read a report back; aggregates must recompute exactly from the records."""
        out = Path(out_dir)
        doc = json.loads((out / "report.json").read_text())
        records = []
        with open(out / "records.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(AttackRecord(**{
                    k: (bool(int(v)) if k == "success" else int(v) if k in _INT_FIELDS else float(v))
                    for k, v in row.items()}))
        report = cls(records, doc["config"], doc["master_seed"], doc["flags"], {})
        if report.aggregates != doc["aggregates"]:
            raise ReportError(f"{out}: aggregates do not match per-image records")
        return report


def config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def select_targets(dataset: Dataset, classifier: HDCClassifier, per_digit: int, master_seed: int,
                   digits=range(10), rmr_rounds: int = 100, rmr_threshold: float = 1.0):
    """Pick up to ``per_digit`` correctly classified images per digit in a seeded random order.

    Under FMR correctness is one deterministic classification; under RMR an
    image qualifies when its per-image accuracy reaches ``rmr_threshold``.
    Returns ``(targets, flags)`` with targets a list of (index, digit).
    """
    order = np.random.default_rng(np.random.SeedSequence([master_seed, 2**31 - 1])).permutation(len(dataset))
    wanted = {int(d): [] for d in digits}
    for idx in order:
        d = int(dataset.labels[idx])
        if d not in wanted or len(wanted[d]) >= per_digit:
            continue
        if classifier.rule.is_random:
            rng = image_rng(master_seed, int(idx), 3)
            ok = per_image_accuracy(dataset.images[idx], d, classifier.memory, classifier.pos, classifier.val,
                                    rmr_rounds, rng, classifier.rule, classifier.encoder) >= rmr_threshold
        else:
            ok = classifier.classify(dataset.images[idx])[0] == d
        if ok:
            wanted[d].append(int(idx))
        if all(len(v) >= per_digit for v in wanted.values()):
            break
    flags = [f"digit {d}: only {len(v)} of {per_digit} correctly classified images available"
             for d, v in wanted.items() if len(v) < per_digit]
    targets = [(i, d) for d in sorted(wanted) for i in wanted[d]]
    return targets, flags


def attack_one(dataset: Dataset, classifier: HDCClassifier, config: AttackConfig, master_seed: int, index: int):
    x = dataset.images[index]
    t0 = int(dataset.labels[index])
    query_rng = image_rng(master_seed, index, 1)
    oracle = FunctionOracle(lambda img: classifier.classify(img, query_rng))
    res = run_attack(x, t0, oracle, config, image_rng(master_seed, index, 0))
    before = res.norms_before_adjust or res.norms
    rec = AttackRecord(index, t0, res.success, -1 if res.adversarial_label is None else res.adversarial_label,
                       res.queries_used, res.queries_search, res.queries_adjust, *res.norms, *before,
                       res.generations_run)
    return rec, res


def run_attack_campaign(dataset: Dataset, classifier: HDCClassifier, config: AttackConfig, per_digit: int,
                        master_seed: int, out_dir=None, jobs: int = 1, digits=range(10),
                        dump_images: bool = False, extra_config: dict | None = None,
                        on_record=None) -> CampaignReport:
    """Attack ``per_digit`` correctly classified test images of each digit.

    With ``out_dir`` set, every finished record is appended to
    ``progress.jsonl``; rerunning with the same configuration skips them.
    """
    cfg = {"attack": config.to_dict(), "per_digit": per_digit, "digits": [int(d) for d in digits],
           "rule": classifier.rule.variant.value, "fmr_sign": classifier.rule.fmr_sign,
           "classifier_seed": classifier.seed, "dataset_checksum": dataset.checksum, **(extra_config or {})}
    targets, flags = select_targets(dataset, classifier, per_digit, master_seed, digits) if per_digit > 0 else ([], [])
    if not targets:
        flags.append("empty campaign: ASR undefined")

    done: dict[int, tuple] = {}
    progress = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        progress = out / "progress.jsonl"
        digest = config_digest({"cfg": cfg, "seed": master_seed})
        if progress.exists():
            for line in progress.read_text().splitlines():
                item = json.loads(line)
                if item.get("digest") == digest:
                    adv = np.frombuffer(bytes.fromhex(item["adversarial"]), dtype=np.uint8)
                    done[item["record"]["index"]] = (AttackRecord(**item["record"]), adv)
        lock = threading.Lock()

    def work(target):
        index, _ = target
        if index in done:
            return done[index]
        rec, res = attack_one(dataset, classifier, config, master_seed, index)
        if progress is not None:
            line = json.dumps({"digest": digest, "record": asdict(rec), "adversarial": res.adversarial.tobytes().hex()})
            with lock:
                with open(progress, "a") as fh:
                    fh.write(line + "\n")
        if on_record:
            on_record(rec)
        return rec, res.adversarial

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, targets))
    else:
        results = [work(t) for t in targets]

    records = [r for r, _ in results]
    adversarial = {r.index: adv for r, adv in results if r.success}
    report = CampaignReport(records, cfg, master_seed, flags, adversarial)
    if out_dir is not None:
        report.write(out_dir)
        if dump_images:
            img_dir = Path(out_dir) / "images"
            img_dir.mkdir(exist_ok=True)
            for r, adv in results:
                x = dataset.images[r.index]
                dump_image_pgm(x, img_dir / f"{r.index:05d}_benign.pgm")
                dump_perturbation_pgm(x, adv, img_dir / f"{r.index:05d}_noise.pgm", rescale=True)
                dump_image_pgm(adv, img_dir / f"{r.index:05d}_adversarial.pgm")
    return report


def run_rmr_accuracy_study(dataset: Dataset, classifier: HDCClassifier, rounds: int, n_samples: int,
                           master_seed: int, out_path=None) -> dict:
    """Per-image accuracy distribution over a seeded random sample of images."""
    rng = np.random.default_rng(master_seed)
    idx = np.sort(rng.choice(len(dataset), size=min(n_samples, len(dataset)), replace=False))
    acc = np.array([
        per_image_accuracy(dataset.images[i], int(dataset.labels[i]), classifier.memory, classifier.pos,
                           classifier.val, rounds, image_rng(master_seed, int(i), 4), classifier.rule,
                           classifier.encoder)
        for i in idx])
    levels, counts = np.unique(acc, return_counts=True)
    study = {
        "rounds": rounds,
        "n_images": int(idx.size),
        "rule": classifier.rule.variant.value,
        "fraction_perfect": float(np.mean(acc == 1.0)),
        "fraction_at_most_0.05": float(np.mean(acc <= 0.05)),
        "mean_accuracy": float(acc.mean()) if acc.size else None,
        "pmf": {repr(float(l)): int(c) / int(idx.size) for l, c in zip(levels, counts)},
        "indices": idx.tolist(),
        "accuracies": acc.tolist(),
    }
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "label", "per_image_accuracy"])
            for i, a in zip(idx, acc):
                w.writerow([int(i), int(dataset.labels[i]), repr(float(a))])
    return study
