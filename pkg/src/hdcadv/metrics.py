"""Perturbation size measures shared by the attack and the experiment harness."""

import numpy as np

PIXEL_MAX = 255


def perturbation_norms(x, x_adv) -> tuple[int, float, float]:
    """(changed-pixel count, L2, Linf); L2 and Linf use pixels scaled to [0, 1]."""
    diff = (np.asarray(x_adv, dtype=float) - np.asarray(x, dtype=float)).ravel() / PIXEL_MAX
    return int(np.count_nonzero(diff)), float(np.linalg.norm(diff)), float(np.abs(diff).max(initial=0.0))
