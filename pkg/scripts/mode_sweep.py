"""GA vs GA-CGC vs GA-CGC-PA on a handful of test images: L0/L2/Linf and query counts."""

import csv
from pathlib import Path

import numpy as np

from _common import classifier, load, parser
from hdcadv.attack import AttackConfig, Mode, run_attack
from hdcadv.harness.pgm import dump_image_pgm, dump_perturbation_pgm
from hdcadv.oracle import FunctionOracle


def main():
    p = parser(__doc__)
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--budget", type=int, default=20_000)
    args = p.parse_args()
    train, test = load(args)
    clf = classifier(args, train)
    out = Path(args.out) / "mode_sweep"
    out.mkdir(parents=True, exist_ok=True)
    picks = [i for i in range(len(test)) if clf.classify(test.images[i])[0] == test.labels[i]][:args.images]
    rows = []
    for i in picks:
        x, t0 = test.images[i], int(test.labels[i])
        for rep in range(args.repeats):
            for mode in Mode:
                res = run_attack(x, t0, FunctionOracle(clf.classify), AttackConfig(mode=mode, query_budget=args.budget),
                                 np.random.default_rng([args.seed, i, rep]))
                rows.append([i, t0, rep, mode.value, int(res.success), res.queries_used, *res.norms])
                if rep == 0 and res.success:
                    dump_image_pgm(res.adversarial, out / f"{i:05d}_{mode.value}_adversarial.pgm")
                    dump_perturbation_pgm(x, res.adversarial, out / f"{i:05d}_{mode.value}_noise.pgm", rescale=True)
        dump_image_pgm(x, out / f"{i:05d}_benign.pgm")
    with open(out / "mode_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "digit", "repeat", "mode", "success", "queries", "l0", "l2", "linf"])
        w.writerows(rows)
    for mode in Mode:
        ok = [r for r in rows if r[3] == mode.value and r[4]]
        if ok:
            med = np.median(np.array([r[6:] for r in ok], float), axis=0)
            print(f"{mode.value:10s} successes {len(ok):3d}  median L0 {med[0]:.0f}  L2 {med[1]:.3f}  Linf {med[2]:.3f}")


if __name__ == "__main__":
    main()
