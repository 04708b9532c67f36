"""Attack campaign, then adversarial training, re-indexing and a moving-target ensemble."""

import json
from pathlib import Path

import numpy as np

from _common import classifier, load, parser
from hdcadv.attack import AttackConfig
from hdcadv.defense import AdversarialSet, ClassifierEnsemble, adversarial_training, residual_asr
from hdcadv.harness.campaign import run_attack_campaign


def main():
    p = parser(__doc__)
    p.add_argument("--per-digit", type=int, default=30)
    p.add_argument("--budget", type=int, default=20_000)
    p.add_argument("--ensemble", type=int, default=4)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    train, test = load(args)
    clf = classifier(args, train)
    out = Path(args.out)
    report = run_attack_campaign(test, clf, AttackConfig(query_budget=args.budget), args.per_digit, args.seed,
                                 out / "campaign", jobs=args.jobs)
    adv = AdversarialSet.from_campaign(report, test)
    adv.save(out / "adversarial_set")
    bench = test.head(2000)
    doc = {"average_asr": report.aggregates["average_asr"], "adversarial_samples": len(adv),
           "benign_accuracy": clf.accuracy(bench.images, bench.labels)}
    hardened = adversarial_training(train.images, train.labels, adv, clf)
    doc["advtrain_residual_asr"] = residual_asr(adv, hardened)
    doc["advtrain_benign_accuracy"] = hardened.accuracy(bench.images, bench.labels)
    members = [clf] + [classifier(args, train, args.seed + k) for k in range(1, args.ensemble)]
    doc["reindex_transfer_asr"] = [residual_asr(adv, m) for m in members[1:]]
    rng = np.random.default_rng(args.seed)
    doc["ensemble_asr"] = residual_asr(adv, ClassifierEnsemble(members), rng)
    (out / "defenses.json").write_text(json.dumps(doc, indent=2) + "\n")
    for k, v in doc.items():
        print(f"{k}: {v}")


if __name__ == "__main__":
    main()
