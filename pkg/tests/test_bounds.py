import io
import math

import pytest

from tsa.bounds import (gap_report, independent_objective_from_tau,
                        lp_relaxation_onesided, reports_to_csv, ub_fa, ub_oa)
from tsa.errors import SizeRefusalError, UnsupportedOracleError
from tsa.exact import (opt_fully_adaptive, opt_one_sided_adaptive,
                       opt_one_sided_static)
from tsa.instances import (MNL, Instance, generate_random_instance,
                           tight_instance)

E_RATIO = math.e / (math.e - 1.0)


def test_relaxation_1x1(unit_1x1):
    rel = lp_relaxation_onesided(unit_1x1, "C")
    assert rel.value == pytest.approx(0.25, abs=1e-9)
    assert rel.tau[(0, frozenset({0}))] == pytest.approx(1.0)
    assert rel.lam[(0, frozenset({0}))] == pytest.approx(0.5)
    assert rel.distribution_residual() <= 1e-8


def test_relaxation_upper_bounds_opt_oa():
    for seed in range(20):
        inst = generate_random_instance(3, 3, seed=seed)
        rel = lp_relaxation_onesided(inst, "C")
        oa = opt_one_sided_adaptive(inst, "C").value
        assert rel.value >= oa - 1e-6


def test_relaxation_within_correlation_gap_of_os():
    for seed in range(20):
        inst = generate_random_instance(3, 3, seed=seed)
        rel = lp_relaxation_onesided(inst, "C")
        os_c = opt_one_sided_static(inst, "C")
        assert rel.value <= E_RATIO * os_c + 1e-6


def test_correlation_gap_of_independent_distribution():
    for seed in range(10):
        inst = generate_random_instance(3, 3, seed=seed)
        rel = lp_relaxation_onesided(inst, "C")
        ind = independent_objective_from_tau(inst, rel)
        assert ind >= (1 - 1 / math.e) * rel.value - 1e-9


def test_relaxation_size_refusal():
    inst = generate_random_instance(7, 2, seed=0)
    with pytest.raises(SizeRefusalError):
        lp_relaxation_onesided(inst, "C")


def test_constrained_relaxation_uses_fk():
    base = generate_random_instance(2, 2, seed=3)
    inst = Instance(2, 2, base.customer_models, base.supplier_models, (1, 1), (1, 1))
    rel = lp_relaxation_onesided(inst, "C", constrained=True)
    oa = opt_one_sided_adaptive(inst, "C").value
    assert rel.value >= oa - 1e-6
    for (_, s) in rel.tau:
        assert len(s) <= 1


def test_ub_oa_examples(unit_1x1):
    assert ub_oa(unit_1x1) >= 0.25 - 1e-9
    zero = Instance(1, 1, (MNL((0.0,)),), (MNL((0.0,)),))
    assert ub_oa(zero) == pytest.approx(0.0, abs=1e-9)


def test_ub_oa_upper_bounds_opt():
    for seed in range(8):
        inst = generate_random_instance(3, 3, seed=seed)
        oa = max(opt_one_sided_adaptive(inst, "C").value,
                 opt_one_sided_adaptive(inst, "S").value)
        assert ub_oa(inst) >= oa - 1e-6


def test_ub_fa_examples(unit_1x1):
    assert ub_fa(unit_1x1) == pytest.approx(0.5, abs=1e-9)
    zero = Instance(1, 1, (MNL((0.0,)),), (MNL((0.0,)),))
    assert ub_fa(zero) == pytest.approx(0.0, abs=1e-9)


def test_ub_fa_upper_bounds_opt():
    for seed in range(8):
        inst = generate_random_instance(3, 3, seed=seed)
        fa = opt_fully_adaptive(inst).value
        assert ub_fa(inst) >= fa - 1e-6


def test_bounds_require_mnl():
    inst = tight_instance("prop1", 2)
    with pytest.raises(UnsupportedOracleError):
        ub_oa(inst)
    with pytest.raises(UnsupportedOracleError):
        ub_fa(inst)


def test_gap_report_prop1_ratio():
    rep = gap_report(tight_instance("prop1", 4), "prop1-4")
    expect = 4 * (1 - (3 / 4) ** 4)
    assert rep.ratios["OPT_OS/OPT_FS"] == pytest.approx(expect, abs=1e-9)
    assert expect == pytest.approx(2.734375)


def test_gap_report_verdicts_pass_on_random_battery():
    for seed in range(4):
        rep = gap_report(generate_random_instance(2, 2, seed=seed), f"r{seed}")
        for name, verdict in rep.verdicts.items():
            assert verdict is not False, name


def test_gap_report_availability_mirrors_caps():
    rep = gap_report(generate_random_instance(5, 5, seed=0), "big",
                     with_algs=False, with_bounds=True)
    assert rep.quantities["OPT_FS"] is None     # nm = 25 > 20
    assert rep.quantities["OPT_OS"] is None     # sides > 4
    assert rep.quantities["OPT_FA"] is None     # n+m = 10 > 8
    assert rep.quantities["OPT_OA"] is not None  # sides <= 8
    assert rep.quantities["UB_FA"] is not None
    assert rep.ratios["OPT_FA/OPT_OA"] is None


def test_csv_round_trip_shape():
    reps = [gap_report(generate_random_instance(2, 2, seed=s), f"i{s}") for s in range(2)]
    buf = io.StringIO()
    reports_to_csv(reps, buf)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == 3
    header = lines[0].split(",")
    assert header[0] == "label"
    assert all(len(line.split(",")) == len(header) for line in lines[1:])
