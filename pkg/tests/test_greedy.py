import itertools
import math

import pytest

from conftest import independent_model
from tsa.exact import opt_fully_adaptive, opt_one_sided_adaptive
from tsa.greedy import (GreedyOneSidedPolicy, SamplingConfig,
                        cointoss_exact_value, cointoss_fully_adaptive,
                        exact_greedy_value, phi_min, sample_count,
                        sampling_side_selector)
from tsa.instances import (MNL, Instance, generate_random_instance,
                           tight_instance)
from tsa.policies import exact_value_deterministic_adaptive, monte_carlo


def test_greedy_1x1(unit_1x1):
    assert exact_greedy_value(unit_1x1, "C") == pytest.approx(0.25)


def test_greedy_prop1_closed_form():
    for n in (2, 3, 4):
        inst = tight_instance("prop1", n)
        assert exact_greedy_value(inst, "C") == pytest.approx(1 - (1 - 1 / n) ** n)


def test_greedy_zero_demand_suppliers_shows_empty():
    inst = Instance(2, 2, (MNL((1.0, 1.0)),) * 2, (MNL((0.0, 0.0)),) * 2)
    pol = GreedyOneSidedPolicy(inst, "C")
    from tsa.policies import PolicyState

    action = pol.action(PolicyState.initial(inst))
    assert action.assortment == frozenset()
    assert exact_greedy_value(inst, "C") == 0.0


def test_greedy_policy_matches_exact_evaluator():
    for seed in range(4):
        inst = generate_random_instance(2, 2, seed=seed)
        tree = exact_value_deterministic_adaptive(inst, GreedyOneSidedPolicy(inst, "C"))
        fast = exact_greedy_value(inst, "C")
        assert tree == pytest.approx(fast, abs=1e-12)


def test_greedy_order_independent_when_responder_demand_modular():
    # Independent-demand suppliers make every marginal order-free.
    probs = [[0.3, 0.2, 0.15], [0.1, 0.25, 0.2], [0.2, 0.1, 0.3]]
    inst = Instance(3, 3,
                    tuple(MNL((0.8, 1.1, 0.5)) for _ in range(3)),
                    tuple(independent_model(p) for p in probs))
    vals = {exact_greedy_value(inst, "C", order=list(perm))
            for perm in itertools.permutations(range(3))}
    assert max(vals) - min(vals) <= 1e-9


def test_theorem4_half_of_opt():
    for seed in range(8):
        for (n, m) in ((2, 2), (3, 3), (2, 4)):
            inst = generate_random_instance(n, m, seed=seed)
            for side in ("C", "S"):
                g = exact_greedy_value(inst, side)
                oa = opt_one_sided_adaptive(inst, side).value
                assert g >= 0.5 * oa - 1e-9


def test_theorem5_quarter_of_opt_fa():
    for seed in range(8):
        inst = generate_random_instance(3, 3, seed=seed)
        fa = opt_fully_adaptive(inst).value
        assert cointoss_exact_value(inst) >= 0.25 * fa - 1e-9


def test_lemma3_supplier_greedy_beats_beta_sum():
    inst = tight_instance("lemma3", 2)
    beta = [1 - math.exp(-1.0), 2 * (1 - math.exp(-0.5))]
    assert exact_greedy_value(inst, "S") >= sum(beta) - 1e-9


def test_phi_min_examples():
    inst = Instance(2, 2, (MNL((1.0, 1.0)),) * 2, (MNL((1.0, 1.0)),) * 2)
    assert phi_min(inst) == pytest.approx(0.5)
    inst2 = Instance(1, 2, (MNL((0.25, 1.0)),), (MNL((1.0,)), MNL((1.0,))))
    assert phi_min(inst2) == pytest.approx(0.2)
    zero = Instance(1, 1, (MNL((0.0,)),), (MNL((0.0,)),))
    assert phi_min(zero) is None


def test_sample_count_examples():
    assert sample_count(SamplingConfig(epsilon=1.0, delta=2 / math.e), 1.0) == 3
    assert sample_count(SamplingConfig(epsilon=0.1, delta=0.05), 0.5) == 2214
    t1 = sample_count(SamplingConfig(epsilon=0.2, delta=0.1), 0.5)
    t2 = sample_count(SamplingConfig(epsilon=0.1, delta=0.1), 0.5)
    assert t1 * 4 - 4 <= t2 <= t1 * 4 + 4


def test_sample_count_needs_positive_phi_min():
    with pytest.raises(ValueError):
        sample_count(SamplingConfig(), 0.0)


def test_selector_picks_better_side_on_prop1():
    inst = tight_instance("prop1", 2)
    pol = sampling_side_selector(inst, SamplingConfig(runs_override=300), seed=5)
    assert pol.metadata["side"] == "C"  # 0.75 beats 0.5
    assert pol.metadata["runs"] == 300
    assert pol.metadata["heuristic_T"]


def test_selector_derived_runs_and_determinism():
    inst = Instance(1, 1, (MNL((3.0,)),), (MNL((3.0,)),))
    cfg = SamplingConfig(epsilon=0.5, delta=0.5)
    a = sampling_side_selector(inst, cfg, seed=2)
    b = sampling_side_selector(inst, cfg, seed=2)
    assert a.metadata == b.metadata
    assert not a.metadata["heuristic_T"]
    assert a.metadata["runs"] == sample_count(cfg, phi_min(inst))


def test_selector_symmetric_instance_value_identical():
    inst = Instance(2, 2, (MNL((1.0, 1.0)),) * 2, (MNL((1.0, 1.0)),) * 2)
    assert exact_greedy_value(inst, "C") == pytest.approx(exact_greedy_value(inst, "S"))


def test_cointoss_exact_values(unit_1x1):
    assert cointoss_exact_value(unit_1x1) == pytest.approx(0.25)
    assert cointoss_exact_value(tight_instance("prop1", 2)) == pytest.approx(0.625)


def test_cointoss_seed_determinism():
    inst = generate_random_instance(2, 2, seed=0)
    a = cointoss_fully_adaptive(inst, seed=4)
    b = cointoss_fully_adaptive(inst, seed=4)
    assert a.metadata == b.metadata
    sides = {cointoss_fully_adaptive(inst, seed=s).metadata["side"] for s in range(30)}
    assert sides == {"C", "S"}


def test_constrained_greedy_half_of_constrained_opt():
    for seed in range(4):
        for k in (1, 2):
            base = generate_random_instance(3, 3, seed=seed)
            inst = Instance(3, 3, base.customer_models, base.supplier_models,
                            (k,) * 3, (k,) * 3)
            g = exact_greedy_value(inst, "C")
            oa = opt_one_sided_adaptive(inst, "C").value
            assert g >= 0.5 * oa - 1e-9


def test_greedy_respects_initiating_budget():
    base = generate_random_instance(3, 3, seed=1)
    inst = Instance(3, 3, base.customer_models, base.supplier_models,
                    (1,) * 3, (None,) * 3)
    pol = GreedyOneSidedPolicy(inst, "C")
    res = monte_carlo(inst, pol, runs=20, seed=0)  # contract checks run inside
    assert 0.0 <= res.mean <= 3.0
