"""Grey-box genetic attack: plain GA, critical-gene crossover, perturbation adjustment.

Only :mod:`hdcadv.oracle` and :mod:`hdcadv.metrics` are imported from this
package; the attacker never touches hypervectors or memories, only labels
and distance vectors.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .metrics import PIXEL_MAX, perturbation_norms
from .oracle import BudgetedOracle, ClassifierOracle, QueryBudgetExceeded

log = logging.getLogger(__name__)

SIDE = 28
N_GENES = SIDE * SIDE


class Mode(str, enum.Enum):
    GA = "GA"
    GA_CGC = "GA_CGC"
    GA_CGC_PA = "GA_CGC_PA"


@dataclass
class AttackConfig:
    population: int = 6
    rho: float = 0.05
    sigma_max: float = 76.5
    beta: float = 0.0
    epsilon: float = 0.001
    c: float = 0.001
    reg_norm: str = "l2"
    max_iter: int = 10**9
    query_budget: int = 100_000
    mode: Mode = Mode.GA_CGC_PA
    pool: int = 2
    blend_delta: float = 1e-6

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.validate()

    def validate(self):
        checks = [
            ("population", self.population >= 2, "must be >= 2"),
            ("rho", 0.0 <= self.rho <= 1.0, "must lie in [0, 1]"),
            ("sigma_max", self.sigma_max > 0, "must be > 0"),
            ("beta", 0.0 <= self.beta <= 1.0, "must lie in [0, 1]"),
            ("epsilon", self.epsilon > 0, "must be > 0"),
            ("c", self.c >= 0, "must be >= 0"),
            ("reg_norm", self.reg_norm in ("l0", "l2", "linf"), "must be one of l0, l2, linf"),
            ("max_iter", self.max_iter >= 1, "must be >= 1"),
            ("query_budget", self.query_budget >= 0, "must be >= 0"),
            ("pool", self.pool >= 1 and SIDE % self.pool == 0, f"must divide {SIDE}"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ValueError(f"attack.{name} {why} (got {getattr(self, name)!r})")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass
class Genome:
    values: np.ndarray
    fitness: float | None = None
    label: int | None = None


@dataclass
class AttackResult:
    success: bool
    adversarial: np.ndarray
    adversarial_label: int | None
    queries_used: int
    queries_search: int
    queries_adjust: int
    norms: tuple[int, float, float]
    generations_run: int
    fitness_trace: list[float] = field(default_factory=list)
    norms_before_adjust: tuple[int, float, float] | None = None


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half up to integer pixels and clip to [0, 255]."""
    return np.clip(np.floor(np.asarray(values, dtype=float) + 0.5), 0, PIXEL_MAX).astype(np.uint8)


def objective_g(f, t0: int, epsilon: float) -> float:
    """Margin of the true class over the nearest wrong class, floored at -epsilon."""
    f = np.asarray(f, dtype=float)
    if f.size < 2:
        raise ValueError("objective needs at least two classes")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    wrong = np.delete(f, t0)
    return max(float(wrong.min() - f[t0]), -epsilon)


def regularizer(q: np.ndarray, original: np.ndarray, norm: str) -> float:
    l0, l2, linf = perturbation_norms(original, q)
    return {"l0": float(l0), "l2": l2, "linf": linf}[norm]


def fitness(candidate: Genome, original, t0: int, oracle: ClassifierOracle, config: AttackConfig) -> float:
    """Negated regularized objective; one oracle query, cached on the genome."""
    q = quantize(candidate.values)
    label, f = oracle.query(q)
    reg = config.c * regularizer(q, original, config.reg_norm) if config.c else 0.0
    candidate.fitness = -(objective_g(f, t0, config.epsilon) + reg)
    candidate.label = label
    return candidate.fitness


def init_population(x, config: AttackConfig, rng: np.random.Generator, genes=None) -> list[Genome]:
    """N noisy copies of ``x``; noise U(-sigma_max, sigma_max) on ``genes`` (default: all)."""
    x = np.asarray(x, dtype=float).ravel()
    idx = np.arange(x.size) if genes is None else np.asarray(genes, dtype=np.int64)
    pop = []
    for _ in range(config.population):
        v = x.copy()
        v[idx] = np.clip(v[idx] + rng.uniform(-config.sigma_max, config.sigma_max, idx.size), 0, PIXEL_MAX)
        pop.append(Genome(v))
    return pop


def selection_probabilities(fitnesses) -> np.ndarray:
    f = np.asarray(fitnesses, dtype=float)
    if f.size == 0:
        raise ValueError("no fitness values")
    if not np.all(np.isfinite(f)):
        raise ValueError("fitness values must be finite")
    e = np.exp(f - f.max())
    return e / e.sum()


def critical_gene_mask(child, beta: float = 0.0, pool: int = 2) -> tuple[np.ndarray, bool]:
    """Indices whose pooled, up-sampled, min-max normalized |value| exceeds ``beta``.

    Returns ``(indices, degenerate)``; a constant image yields no indices and
    ``degenerate=True``.
    """
    if SIDE % pool:
        raise ValueError(f"pool size {pool} does not divide {SIDE}")
    img = np.abs(np.asarray(child, dtype=float)).reshape(SIDE, SIDE)
    pooled = img.reshape(SIDE // pool, pool, SIDE // pool, pool).max(axis=(1, 3))
    up = np.repeat(np.repeat(pooled, pool, axis=0), pool, axis=1).ravel()
    lo, hi = up.min(), up.max()
    if hi == lo:
        return np.empty(0, dtype=np.int64), True
    return np.flatnonzero((up - lo) / (hi - lo) > beta), False


def blend_weight(f1: float, f2: float, delta: float = 1e-6) -> float:
    """Share of the fitter parent, from fitnesses shifted to be positive.

    Fitnesses are usually negative, so both are shifted by ``-min + delta``
    before taking ``f1 / (f1 + f2)``; the result is 0.5 for equal fitnesses
    and above 0.5 whenever ``f1 > f2``.
    """
    shift = -min(f1, f2) + delta
    a, b = f1 + shift, f2 + shift
    return a / (a + b)


def crossover_critical(p1: Genome, p2: Genome, f1: float, f2: float, mask, config: AttackConfig,
                       rng: np.random.Generator) -> Genome:
    if f1 < f2:
        p1, p2, f1, f2 = p2, p1, f2, f1
    child = p1.values.copy()
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        log.debug("empty critical mask; child is a copy of the fitter parent")
        return Genome(child)
    p = blend_weight(f1, f2, config.blend_delta)
    child[mask] = p * p1.values[mask] + (1 - p) * p2.values[mask]
    hit = rng.random(mask.size) < config.rho
    noise = rng.uniform(-config.sigma_max, config.sigma_max, mask.size)
    child[mask] += np.where(hit, noise, 0.0)
    return Genome(np.clip(child, 0, PIXEL_MAX))


def crossover_uniform_all(p1: Genome, p2: Genome, f1: float, f2: float, config: AttackConfig,
                          rng: np.random.Generator) -> Genome:
    return crossover_critical(p1, p2, f1, f2, np.arange(p1.values.size), config, rng)


def perturbation_adjustment(x, x_adv, t0: int, oracle: ClassifierOracle, adv_label: int | None = None):
    """Walk each changed pixel back from its original value towards the adversarial one.

    Pixels are visited in ascending index order; for each, values from the
    original to the adversarial one are tried in unit steps and the first
    still-misclassified value is kept.  If the query budget runs out mid-walk,
    the current pixel is put back to its adversarial value (the last state
    known to be misclassified) and the sweep stops.

    Returns ``(image, label)`` where label is from the last fooling query.
    """
    x = np.asarray(x, dtype=np.uint8).ravel()
    out = np.asarray(x_adv, dtype=np.uint8).ravel().copy()
    label = adv_label
    for p in np.flatnonzero(out != x):
        v_ori, v_adv = int(x[p]), int(out[p])
        step = 1 if v_adv > v_ori else -1
        try:
            for v in range(v_ori, v_adv + step, step):
                out[p] = v
                got, _ = oracle.query(out)
                if got != t0:
                    label = got
                    break
        except QueryBudgetExceeded:
            out[p] = v_adv
            break
    return out, label


def run_attack(x, t0: int, oracle: ClassifierOracle, config: AttackConfig, rng: np.random.Generator) -> AttackResult:
    """Run one non-targeted attack on ``x`` (true label ``t0``).

    Query accounting: one verification query on ``x``, N fitness queries per
    generation, plus perturbation-adjustment queries in GA_CGC_PA mode; all
    are charged against ``config.query_budget``.
    """
    x = np.asarray(x, dtype=np.uint8).ravel()
    budgeted = BudgetedOracle(oracle, config.query_budget)
    critical = config.mode is not Mode.GA

    def result(success, adv, label, generations, trace, search, before=None):
        used = budgeted.query_count
        return AttackResult(success, adv, label, used, search, used - search,
                            perturbation_norms(x, adv), generations, trace, before)

    try:
        label0, f0 = budgeted.query(x)
    except QueryBudgetExceeded:
        return result(False, x.copy(), None, 0, [], 0)
    if label0 != t0:
        trace = [-objective_g(f0, t0, config.epsilon)]
        return result(True, x.copy(), label0, 1, trace, budgeted.query_count)

    init_genes = critical_gene_mask(x, config.beta, config.pool)[0] if critical else None
    pop = init_population(x, config, rng, init_genes)
    trace: list[float] = []
    elite = Genome(x.astype(float), -objective_g(f0, t0, config.epsilon), label0)
    generations = 0
    for _ in range(config.max_iter):
        try:
            for g in pop:
                fitness(g, x, t0, budgeted, config)
        except QueryBudgetExceeded:
            break
        generations += 1
        fits = np.array([g.fitness for g in pop])
        elite = pop[int(np.argmax(fits))]
        trace.append(float(elite.fitness))
        if elite.label != t0:
            break
        probs = selection_probabilities(fits)
        nxt = [Genome(elite.values.copy())]
        for _ in range(config.population - 1):
            i, j = rng.choice(config.population, size=2, replace=False, p=probs)
            p1, p2 = pop[i], pop[j]
            if critical:
                fitter = p1 if p1.fitness >= p2.fitness else p2
                mask, degenerate = critical_gene_mask(fitter.values, config.beta, config.pool)
                if degenerate:
                    log.debug("degenerate critical mask at generation %d", generations)
                child = crossover_critical(p1, p2, p1.fitness, p2.fitness, mask, config, rng)
            else:
                child = crossover_uniform_all(p1, p2, p1.fitness, p2.fitness, config, rng)
            nxt.append(child)
        pop = nxt

    adv = quantize(elite.values)
    search = budgeted.query_count
    if elite.label == t0:
        return result(False, adv, elite.label, generations, trace, search)
    if config.mode is Mode.GA_CGC_PA:
        before = perturbation_norms(x, adv)
        adj, label = perturbation_adjustment(x, adv, t0, budgeted, elite.label)
        return result(True, adj, label, generations, trace, search, before)
    return result(True, adv, elite.label, generations, trace, search)
