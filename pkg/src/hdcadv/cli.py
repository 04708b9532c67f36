"""``hdcadv`` command line: train, classify, attack, campaign, defend.

Exit codes: 0 success, 2 configuration error, 3 I/O or format error,
4 campaign that finished with zero successful attacks.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .attack import Mode, run_attack
from .classifier import HDCClassifier
from .config import ConfigError, RunConfig, build_config
from .container import ContainerError
from .defense import (
    AdversarialSet,
    ClassifierEnsemble,
    adversarial_training,
    reindex_retrain,
    residual_asr,
)
from .harness.campaign import image_rng, run_attack_campaign
from .harness.mnist import IDXError, load_mnist_idx
from .harness.pgm import PGMError, dump_image_pgm, dump_perturbation_pgm, read_pgm
from .hdc import MajorityRule
from .oracle import FunctionOracle

log = logging.getLogger("hdcadv")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NO_SUCCESS = 4

# flag -> config field
_FLAGS = {
    "seed": "seed", "out": "out_dir", "dimension": "dimension", "rule": "rule", "fmr_sign": "fmr_sign",
    "data_dir": "data_dir", "train_limit": "train_limit", "artifacts": "artifacts", "jobs": "jobs",
    "per_digit": "per_digit", "digits": "digits", "budget": "attack.query_budget", "mode": "attack.mode",
    "c": "attack.c", "strategy": "defense", "adversarial_set": "adversarial_set",
}


def _rule(cfg: RunConfig) -> MajorityRule:
    return MajorityRule(cfg.rule, cfg.fmr_sign)


def _echo(cfg: RunConfig, name: str):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _train_set(cfg: RunConfig):
    ds = load_mnist_idx(cfg.path("train_images"), cfg.path("train_labels"), "train")
    return ds.head(cfg.train_limit) if cfg.train_limit else ds


def _test_set(cfg: RunConfig):
    return load_mnist_idx(cfg.path("test_images"), cfg.path("test_labels"), "test")


def _load_classifier(cfg: RunConfig) -> HDCClassifier:
    d = cfg.artifacts_dir
    if not (d / "memory.hdc").exists():
        raise FileNotFoundError(f"no trained classifier in {d}; run `hdcadv train` first")
    return HDCClassifier.load(d, _rule(cfg))


def cmd_train(cfg: RunConfig) -> int:
    ds = _train_set(cfg)
    t = time.perf_counter()
    clf = HDCClassifier.fit(ds.images, ds.labels, cfg.dimension, cfg.seed, _rule(cfg))
    clf.save(cfg.artifacts_dir)
    summary = {"seed": cfg.seed, "dimension": cfg.dimension, "train_images": len(ds),
               "dataset_checksum": ds.checksum, "class_counts": clf.memory.metadata["class_counts"]}
    (cfg.artifacts_dir / "train_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"trained D={cfg.dimension} seed={cfg.seed} on {len(ds)} images in {time.perf_counter() - t:.1f}s")
    for k, n in enumerate(summary["class_counts"]):
        print(f"  class {k}: {n} samples")
    print(f"artifacts: {cfg.artifacts_dir}")
    return 0


def cmd_classify(cfg: RunConfig, args) -> int:
    clf = _load_classifier(cfg)
    if args.pgm:
        img = read_pgm(args.pgm)
    else:
        img = _test_set(cfg).images[args.index]
    rng = np.random.default_rng(cfg.seed)
    label, dist = clf.classify(img, rng)
    print(f"label {label}")
    print("distances " + " ".join(f"{d:.6f}" for d in dist))
    return 0


def cmd_attack(cfg: RunConfig, args) -> int:
    clf = _load_classifier(cfg)
    test = _test_set(cfg)
    x, t0 = test.images[args.index], int(test.labels[args.index])
    out = Path(cfg.out_dir) / f"attack_{args.index:05d}"
    out.mkdir(parents=True, exist_ok=True)
    if clf.classify(x, np.random.default_rng(cfg.seed))[0] != t0:
        print(f"image {args.index} (digit {t0}) is not correctly classified; skipped")
        (out / "skipped.json").write_text(json.dumps({"index": args.index, "digit": t0}) + "\n")
        return 0
    modes = [Mode(m) for m in args.modes.split(",")] if args.modes else [cfg.attack.mode]
    results = []
    for mode in modes:
        for rep in range(args.repeats):
            acfg = type(cfg.attack)(**{**cfg.attack.to_dict(), "mode": mode})
            query_rng = image_rng(cfg.seed, args.index, 1 + 10 * rep)
            oracle = FunctionOracle(lambda img: clf.classify(img, query_rng))
            res = run_attack(x, t0, oracle, acfg, image_rng(cfg.seed, args.index, 10 * rep))
            tag = f"{mode.value}_r{rep}"
            dump_image_pgm(x, out / f"{tag}_benign.pgm")
            dump_perturbation_pgm(x, res.adversarial, out / f"{tag}_noise.pgm", rescale=True)
            dump_image_pgm(res.adversarial, out / f"{tag}_adversarial.pgm")
            rec = {k: v for k, v in asdict(res).items() if k != "adversarial"}
            rec.update(mode=mode.value, repeat=rep, index=args.index, digit=t0)
            results.append(rec)
            print(f"{tag}: success={res.success} label={res.adversarial_label} queries={res.queries_used} "
                  f"L0={res.norms[0]} L2={res.norms[1]:.3f} Linf={res.norms[2]:.3f}")
    (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return 0


def _campaign(cfg: RunConfig, clf, test, out_dir):
    return run_attack_campaign(test, clf, cfg.attack, cfg.per_digit, cfg.seed, out_dir, cfg.jobs, cfg.digits,
                               cfg.dump_images)


def cmd_campaign(cfg: RunConfig) -> int:
    clf = _load_classifier(cfg)
    report = _campaign(cfg, clf, _test_set(cfg), Path(cfg.out_dir) / "campaign")
    agg = report.aggregates
    print(f"attacked {agg['attempted']} images, {agg['successes']} successes, average ASR {agg['average_asr']}")
    for d, s in agg["per_digit"].items():
        print(f"  digit {d}: ASR {s['asr']:.3f} ({s['successes']}/{s['attempted']})")
    for flag in report.flags:
        print(f"  note: {flag}")
    if agg["attempted"] and agg["successes"] == 0:
        return EXIT_NO_SUCCESS
    return 0


def cmd_defend(cfg: RunConfig) -> int:
    clf = _load_classifier(cfg)
    test, train_ds = _test_set(cfg), _train_set(cfg)
    out = Path(cfg.out_dir) / f"defense_{cfg.defense}"
    out.mkdir(parents=True, exist_ok=True)
    if cfg.adversarial_set:
        adv = AdversarialSet.load(cfg.adversarial_set)
    else:
        report = _campaign(cfg, clf, test, Path(cfg.out_dir) / "campaign")
        adv = AdversarialSet.from_campaign(report, test)
        adv.save(Path(cfg.out_dir) / "adversarial_set")
    if len(adv) == 0:
        print("no adversarial samples to evaluate")
        return EXIT_NO_SUCCESS
    rng = np.random.default_rng(cfg.seed)
    bench = test.head(cfg.benign_eval_limit)
    doc = {"strategy": cfg.defense, "adversarial_samples": len(adv),
           "asr_original": residual_asr(adv, clf, rng),
           "benign_accuracy_original": clf.accuracy(bench.images, bench.labels, rng)}
    if cfg.defense == "advtrain":
        new = adversarial_training(train_ds.images, train_ds.labels, adv, clf)
        doc["residual_asr"] = residual_asr(adv, new, rng)
        doc["benign_accuracy_after"] = new.accuracy(bench.images, bench.labels, rng)
        new.save(out / "classifier")
    elif cfg.defense == "reindex":
        seed = cfg.reindex_seed if cfg.reindex_seed is not None else cfg.seed + 1
        new = reindex_retrain(train_ds.images, train_ds.labels, seed, cfg.dimension, _rule(cfg), [clf.seed])
        doc["reindex_seed"] = seed
        doc["transfer_asr"] = residual_asr(adv, new, rng)
        doc["benign_accuracy_after"] = new.accuracy(bench.images, bench.labels, rng)
        new.save(out / "classifier")
    else:
        members = [clf] + [reindex_retrain(train_ds.images, train_ds.labels, cfg.seed + k, cfg.dimension,
                                           _rule(cfg), [clf.seed]) for k in range(1, cfg.ensemble_size)]
        ens = ClassifierEnsemble(members)
        doc["ensemble_size"] = len(ens)
        doc["ensemble_asr"] = residual_asr(adv, ens, rng)
        doc["benign_accuracy_after"] = float(np.mean([ens.classify(x, rng)[0] == y
                                                      for x, y in zip(bench.images, bench.labels)]))
    (out / "defense.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for k, v in doc.items():
        print(f"{k}: {v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any field, e.g. attack.c=0.01 (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--dimension", type=int)
    common.add_argument("--rule", choices=["FMR", "RMR"])
    common.add_argument("--fmr-sign", type=int, choices=[-1, 1])
    common.add_argument("--data-dir", help="directory holding the MNIST IDX files")
    common.add_argument("--train-limit", type=int, help="train on the first N training images")
    common.add_argument("--artifacts", help="trained classifier directory (default OUT/classifier)")
    common.add_argument("--jobs", type=int, help="worker threads for campaigns")
    common.add_argument("--per-digit", type=int)
    common.add_argument("--digits", help="comma-separated digits to attack")
    common.add_argument("--budget", help="per-image query budget")
    common.add_argument("--mode", choices=[m.value for m in Mode])
    common.add_argument("--c", help="regularization weight")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hdcadv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="build basis memories and train the associative memory")
    c = sub.add_parser("classify", parents=[common], help="classify one image")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--pgm", help="binary PGM image")
    src.add_argument("--index", type=int, help="MNIST test-set index")
    a = sub.add_parser("attack", parents=[common], help="attack one test image")
    a.add_argument("--index", type=int, required=True)
    a.add_argument("--modes", help="comma-separated modes to sweep (default: the configured mode)")
    a.add_argument("--repeats", type=int, default=1)
    sub.add_parser("campaign", parents=[common], help="attack N correctly classified images per digit")
    d = sub.add_parser("defend", parents=[common], help="evaluate a defense")
    d.add_argument("--strategy", choices=["advtrain", "reindex", "ensemble"])
    d.add_argument("--adversarial-set", help="existing adversarial set directory")
    return p


def resolve(args) -> RunConfig:
    overrides = {}
    for flag, key in _FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v if isinstance(v, (int, float)) else str(v)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides.setdefault(k.strip(), v.strip())
    cfg = build_config(args.config, overrides)
    if cfg.seed is None:
        cfg.seed = secrets.randbits(32)
        print(f"no seed given; using generated seed {cfg.seed}")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _echo(cfg, args.command)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "classify":
            return cmd_classify(cfg, args)
        if args.command == "attack":
            return cmd_attack(cfg, args)
        if args.command == "campaign":
            return cmd_campaign(cfg)
        return cmd_defend(cfg)
    except (OSError, IDXError, PGMError, ContainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
