"""Per-image accuracy distribution under random-majority inference (histogram as CSV)."""

import json
from pathlib import Path

from _common import classifier, load, parser
from hdcadv.classifier import HDCClassifier
from hdcadv.harness.campaign import run_rmr_accuracy_study
from hdcadv.hdc import MajorityRule


def main():
    p = parser(__doc__)
    p.add_argument("--images", type=int, default=500)
    p.add_argument("--rounds", type=int, default=100)
    args = p.parse_args()
    train, test = load(args)
    base = classifier(args, train)
    out = Path(args.out)
    for rule in (MajorityRule.rmr(), MajorityRule.fmr()):
        clf = HDCClassifier(base.pos, base.val, base.memory, rule, base.seed)
        name = rule.variant.value.lower()
        study = run_rmr_accuracy_study(test, clf, args.rounds, args.images, args.seed, out / f"accuracy_{name}.csv")
        summary = {k: study[k] for k in ("rule", "rounds", "n_images", "fraction_perfect", "fraction_at_most_0.05",
                                         "mean_accuracy", "pmf")}
        (out / f"accuracy_{name}.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"{name}: perfect {summary['fraction_perfect']:.3f}, "
              f"<=0.05 {summary['fraction_at_most_0.05']:.3f}, mean {summary['mean_accuracy']:.3f}")


if __name__ == "__main__":
    main()
