import ast
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import hdcadv.attack as attack_mod
from hdcadv.attack import (
    AttackConfig,
    Genome,
    Mode,
    blend_weight,
    critical_gene_mask,
    crossover_critical,
    crossover_uniform_all,
    fitness,
    init_population,
    objective_g,
    perturbation_adjustment,
    quantize,
    run_attack,
    selection_probabilities,
)
from hdcadv.metrics import perturbation_norms
from hdcadv.oracle import BudgetedOracle, FunctionOracle, QueryBudgetExceeded


class TableOracle(FunctionOracle):
    """Fixed answer for every query; records what it was asked."""

    def __init__(self, label, f):
        self.seen = []
        super().__init__(lambda img: (self.seen.append(np.array(img)), (label, f))[1])


def brightness_oracle(threshold):
    # label 1 once total brightness passes the threshold, distances shaped to match
    def fn(img):
        s = float(np.asarray(img, float).sum())
        margin = (s - threshold) / 1e5
        return (1 if margin > 0 else 0), np.array([0.5 + margin, 0.5 - margin, 0.6])
    return FunctionOracle(fn)


def test_objective_g_examples():
    assert objective_g([0.3, 0.5, 0.4], 0, 0.001) == pytest.approx(0.1)
    assert objective_g([0.5, 0.3], 0, 0.001) == -0.001
    with pytest.raises(ValueError):
        objective_g([0.1], 0, 0.001)
    with pytest.raises(ValueError):
        objective_g([0.1, 0.2], 0, 0.0)


def test_fitness_hand_computed():
    x = np.zeros(4, np.uint8)
    cand = Genome(np.array([1.0, 0, 0, 0]))
    oracle = TableOracle(0, np.array([0.0, 0.5]))
    cfg = AttackConfig(c=0.05)
    f = fitness(cand, x, 0, oracle, cfg)
    # g = 0.5 - 0 = 0.5; L2 of one unit pixel change = 1/255
    assert f == pytest.approx(-(0.5 + 0.05 / 255), abs=1e-15)
    assert cand.label == 0 and oracle.query_count == 1


def test_fitness_regularizer_norms():
    x = np.zeros(4, np.uint8)
    oracle = TableOracle(0, np.array([0.0, 0.5]))
    cand = np.array([255.0, 51, 0, 0])
    for norm, reg in [("l0", 2.0), ("l2", math.hypot(1.0, 0.2)), ("linf", 1.0)]:
        f = fitness(Genome(cand), x, 0, oracle, AttackConfig(c=1.0, reg_norm=norm))
        assert f == pytest.approx(-(0.5 + reg))


def test_quantize_rounds_half_up_and_clips():
    assert quantize(np.array([0.5, 1.49, 254.5, -3, 300])).tolist() == [1, 1, 255, 0, 255]


def test_config_validation_names_field():
    with pytest.raises(ValueError, match="attack.population"):
        AttackConfig(population=1)
    with pytest.raises(ValueError, match="attack.pool"):
        AttackConfig(pool=3)
    with pytest.raises(ValueError, match="attack.reg_norm"):
        AttackConfig(reg_norm="l1")
    with pytest.raises(ValueError):
        AttackConfig(mode="bogus")


def test_init_population_vanishing_noise_and_range():
    x = np.random.default_rng(0).integers(0, 256, 784).astype(np.uint8)
    pop = init_population(x, AttackConfig(sigma_max=1e-9), np.random.default_rng(1))
    assert len(pop) == 6
    for g in pop:
        assert np.array_equal(quantize(g.values), x)
    pop = init_population(x, AttackConfig(sigma_max=500), np.random.default_rng(2))
    for g in pop:
        assert g.values.min() >= 0 and g.values.max() <= 255


def test_init_population_noise_is_uniform():
    x = np.full(784, 128, np.uint8)
    cfg = AttackConfig(population=13, sigma_max=76.5)  # 13*784 > 10^4 samples, none clipped
    pop = init_population(x, cfg, np.random.default_rng(3))
    dev = np.concatenate([g.values - 128 for g in pop])
    assert stats.kstest(dev, stats.uniform(-76.5, 153).cdf).pvalue > 0.01


def test_init_population_restricted_genes():
    x = np.zeros(784, np.uint8)
    pop = init_population(x, AttackConfig(), np.random.default_rng(4), genes=[3, 5])
    for g in pop:
        assert np.flatnonzero(g.values).tolist() in ([3, 5], [3], [5], [])


def test_selection_probabilities_examples():
    assert np.allclose(selection_probabilities([-2.0] * 4), 0.25, atol=1e-15)
    p = selection_probabilities([0.0, math.log(3)])
    assert abs(p[0] - 0.25) <= 1e-12 and abs(p[1] - 0.75) <= 1e-12
    with pytest.raises(ValueError):
        selection_probabilities([0.0, float("nan")])
    with pytest.raises(ValueError):
        selection_probabilities([])


# fitness = -(g + c*reg) with g in [-eps, 1]; +-50 covers any sane c
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-50, 50))
def test_selection_probabilities_properties(f, shift):
    p = selection_probabilities(f)
    assert np.all(p > 0) and abs(p.sum() - 1) <= 1e-12
    q = selection_probabilities([v + shift for v in f])
    assert np.all(np.abs(p - q) <= 1e-12)


def test_mask_degenerate_and_block():
    idx, degenerate = critical_gene_mask(np.zeros(784))
    assert degenerate and idx.size == 0
    img = np.zeros(784)
    img[[294, 295, 322, 323]] = 255  # rows 10-11, cols 14-15: one aligned 2x2 block
    idx, degenerate = critical_gene_mask(img, 0.0, 2)
    assert not degenerate and idx.tolist() == [294, 295, 322, 323]


def test_mask_single_pixel_claims_its_pool_block():
    img = np.zeros(784)
    img[29] = 10  # row 1, col 1
    assert critical_gene_mask(img)[0].tolist() == [0, 1, 28, 29]


def test_mask_beta_and_pool():
    img = np.zeros(784)
    img[0], img[783] = 255, 100
    assert critical_gene_mask(img, 0.5, 2)[0].tolist() == [0, 1, 28, 29]
    assert critical_gene_mask(img, 0.0, 4)[0].size == 32
    with pytest.raises(ValueError):
        critical_gene_mask(img, 0.0, 5)


def test_blend_weight():
    assert blend_weight(-0.3, -0.3) == 0.5
    assert 0.5 < blend_weight(-0.1, -0.2) <= 1.0
    assert blend_weight(-0.1, -0.2) == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=200)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_blend_weight_favors_fitter(f1, f2):
    p = blend_weight(max(f1, f2), min(f1, f2))
    assert 0.5 <= p <= 1.0


def genomes(seed):
    rng = np.random.default_rng(seed)
    return Genome(rng.uniform(0, 255, 784)), Genome(rng.uniform(0, 255, 784))


def test_crossover_equal_parents():
    a, _ = genomes(0)
    child = crossover_critical(a, a, -0.1, -0.5, np.arange(784), AttackConfig(rho=0.0), np.random.default_rng(0))
    assert np.allclose(child.values, a.values)


def test_crossover_equal_fitness_gives_midpoints():
    a, b = genomes(1)
    mask = np.arange(100)
    child = crossover_critical(a, b, -0.2, -0.2, mask, AttackConfig(rho=0.0), np.random.default_rng(0))
    assert np.allclose(child.values[:100], (a.values[:100] + b.values[:100]) / 2)
    assert np.array_equal(child.values[100:], a.values[100:])


def test_crossover_swaps_so_fitter_parent_dominates():
    a, b = genomes(2)
    cfg = AttackConfig(rho=0.0)
    c1 = crossover_critical(a, b, -0.5, -0.1, np.arange(784), cfg, np.random.default_rng(0))
    c2 = crossover_critical(b, a, -0.1, -0.5, np.arange(784), cfg, np.random.default_rng(0))
    assert np.array_equal(c1.values, c2.values)
    assert np.abs(c1.values - b.values).mean() < np.abs(c1.values - a.values).mean()


def test_crossover_rho_zero_deterministic():
    a, b = genomes(3)
    cfg = AttackConfig(rho=0.0)
    c1 = crossover_critical(a, b, -0.1, -0.2, np.arange(50), cfg, np.random.default_rng(1))
    c2 = crossover_critical(a, b, -0.1, -0.2, np.arange(50), cfg, np.random.default_rng(99))
    assert np.array_equal(c1.values, c2.values)


def test_crossover_empty_mask_copies_fitter():
    a, b = genomes(4)
    child = crossover_critical(a, b, -0.9, -0.1, [], AttackConfig(), np.random.default_rng(0))
    assert np.array_equal(child.values, b.values)


def test_mutation_confined_to_mask_and_clipped():
    a, b = genomes(5)
    mask = np.arange(10, 60)
    child = crossover_critical(a, b, -0.1, -0.2, mask, AttackConfig(rho=1.0, sigma_max=500), np.random.default_rng(0))
    outside = np.setdiff1d(np.arange(784), mask)
    assert np.array_equal(child.values[outside], a.values[outside])
    assert child.values.min() >= 0 and child.values.max() <= 255


def test_uniform_all_equals_full_mask():
    a, b = genomes(6)
    cfg = AttackConfig()
    u = crossover_uniform_all(a, b, -0.1, -0.3, cfg, np.random.default_rng(5))
    c = crossover_critical(a, b, -0.1, -0.3, np.arange(784), cfg, np.random.default_rng(5))
    assert np.array_equal(u.values, c.values)
    same = crossover_uniform_all(a, a, -0.1, -0.3, AttackConfig(rho=0.0), np.random.default_rng(5))
    assert np.allclose(same.values, a.values)


def test_pa_identity_zero_queries():
    x = np.arange(784) % 256
    oracle = TableOracle(1, np.array([0.6, 0.4]))
    out, _ = perturbation_adjustment(x, x, 0, oracle)
    assert np.array_equal(out, x) and oracle.query_count == 0


def test_pa_full_revert_when_harmless():
    # misclassified as long as pixel 0 stays bright; pixel 5's change is irrelevant
    def fn(img):
        return (1 if img[0] >= 200 else 0), np.zeros(2)
    oracle = FunctionOracle(fn)
    x = np.zeros(784, np.uint8)
    adv = x.copy()
    adv[0], adv[5] = 250, 40
    out, label = perturbation_adjustment(x, adv, 0, oracle, 1)
    assert out[5] == 0 and out[0] == 200 and label == 1
    assert oracle.query_count == 201 + 1
    assert perturbation_norms(x, out)[0] <= perturbation_norms(x, adv)[0]


def test_pa_budget_exhaustion_reverts_current_pixel():
    def fn(img):
        return (1 if img[0] >= 200 else 0), np.zeros(2)
    x = np.zeros(784, np.uint8)
    adv = x.copy()
    adv[0] = 250
    out, _ = perturbation_adjustment(x, adv, 0, BudgetedOracle(FunctionOracle(fn), 50), 1)
    assert out[0] == 250


def test_attack_seal():
    src = Path(attack_mod.__file__).read_text()
    imported = set()
    for node in ast.walk(ast.parse(src)):
        if isinstance(node, ast.ImportFrom):
            imported.add(("." * node.level) + (node.module or ""))
        elif isinstance(node, ast.Import):
            imported.update(a.name for a in node.names)
    local = {m for m in imported if m.startswith(".") or m.startswith("hdcadv")}
    assert local <= {".metrics", ".oracle"}
    for mod in ("metrics", "oracle"):
        tree = ast.parse((Path(attack_mod.__file__).parent / f"{mod}.py").read_text())
        assert not [n for n in ast.walk(tree) if isinstance(n, ast.ImportFrom) and n.level > 0]


def test_attack_on_mock_oracle_counts_queries():
    x = np.zeros(784, np.uint8)
    x[300:420] = 90
    for mode in Mode:
        oracle = brightness_oracle(threshold=float(x.sum()) + 1500)
        res = run_attack(x, 0, oracle, AttackConfig(mode=mode, query_budget=5000, c=0.0), np.random.default_rng(0))
        assert res.success
        assert res.queries_used == oracle.query_count
        assert res.queries_search == 1 + 6 * res.generations_run
        assert res.queries_adjust == (res.queries_used - res.queries_search)
        if mode is not Mode.GA_CGC_PA:
            assert res.queries_adjust == 0
        assert oracle.query(res.adversarial)[0] != 0


def test_already_misclassified():
    oracle = TableOracle(3, np.array([0.5, 0.5, 0.5, 0.1]))
    x = np.zeros(784, np.uint8)
    res = run_attack(x, 0, oracle, AttackConfig(), np.random.default_rng(0))
    assert res.success and res.generations_run == 1 and res.queries_used == 1
    assert np.array_equal(res.adversarial, x) and res.norms == (0, 0.0, 0.0)


def test_zero_budget_and_hopeless_budget():
    oracle = TableOracle(0, np.array([0.1, 0.5]))
    x = np.zeros(784, np.uint8)
    res = run_attack(x, 0, oracle, AttackConfig(query_budget=0), np.random.default_rng(0))
    assert not res.success and res.queries_used == 0 and oracle.query_count == 0
    res = run_attack(x, 0, oracle, AttackConfig(query_budget=40), np.random.default_rng(0))
    assert not res.success and res.queries_used <= 40
    assert res.generations_run == 6 and len(res.fitness_trace) == 6


def test_max_iter_cap():
    oracle = TableOracle(0, np.array([0.1, 0.5]))
    res = run_attack(np.zeros(784, np.uint8), 0, oracle, AttackConfig(max_iter=3), np.random.default_rng(0))
    assert not res.success and res.generations_run == 3 and res.queries_used == 1 + 18


def test_queried_images_are_valid():
    oracle = TableOracle(0, np.array([0.1, 0.5]))
    x = np.random.default_rng(0).integers(0, 256, 784).astype(np.uint8)
    run_attack(x, 0, oracle, AttackConfig(max_iter=5, mode="GA", sigma_max=300), np.random.default_rng(0))
    for img in oracle.seen:
        assert img.dtype == np.uint8 and img.shape == (784,)


def test_toy_attack_reproducible(toy_classifier, toy_test_set):
    images, labels = toy_test_set
    x, t0 = images[0], int(labels[0])
    outs = []
    for _ in range(2):
        oracle = FunctionOracle(lambda img: toy_classifier.classify(img))
        outs.append(run_attack(x, t0, oracle, AttackConfig(query_budget=600, c=0.01), np.random.default_rng(3)))
    a, b = outs
    assert a.success == b.success and a.queries_used == b.queries_used
    assert np.array_equal(a.adversarial, b.adversarial) and a.fitness_trace == b.fitness_trace


def test_budgeted_oracle_raises():
    o = BudgetedOracle(TableOracle(0, np.zeros(2)), 2)
    o.query(np.zeros(3))
    o.query(np.zeros(3))
    assert o.remaining == 0
    with pytest.raises(QueryBudgetExceeded):
        o.query(np.zeros(3))
    assert o.query_count == 2
