import numpy as np
import pytest

from noma_coc.channel import generate_topology
from noma_coc.errors import ConfigurationError
from noma_coc.metrics import (
    SCHEMES,
    evaluate_scheme,
    jain_fairness,
    runtime_bench,
    violation_cdf,
)


def test_jain_reference_values():
    assert jain_fairness([4.0, 4.0, 4.0, 4.0], 4) == pytest.approx(1.0)
    assert jain_fairness([4.0, 0.0], 2) == pytest.approx(0.5)
    # eight served equally plus two unserved
    assert jain_fairness([3.0] * 8, 10) == pytest.approx(0.8)
    assert jain_fairness([0.0, 0.0], 2) == 0.0
    with pytest.raises(ConfigurationError):
        jain_fairness([1.0, 2.0], 1)


def test_no_oc_failed_users_get_zero():
    sc = generate_topology(2, 4, 2, seed=0)
    rep = evaluate_scheme(sc, "No_OC")
    assert rep.failed_se == [0.0, 0.0]
    assert rep.avg_failed_se == 0.0
    assert rep.served == len(sc.users) - 2
    assert rep.worst_violation == 0.0


def test_lc_noc_beats_no_oc_fairness_and_opt_dominates():
    sc = generate_topology(2, 4, 2, seed=1)
    no_oc = evaluate_scheme(sc, "No_OC")
    lc = evaluate_scheme(sc, "LC_NOC")
    opt = evaluate_scheme(sc, "OPT_NOC")
    assert lc.jain > no_oc.jain
    assert sum(opt.failed_se) >= sum(lc.failed_se) - 1e-9
    assert lc.worst_violation <= 1e-6
    assert opt.worst_violation <= 1e-6
    assert lc.time_association > 0.0 and lc.time_power > 0.0


def test_evaluate_scheme_guards():
    sc = generate_topology(2, 4, 2, seed=0)
    with pytest.raises(ConfigurationError):
        evaluate_scheme(sc, "bogus")
    with pytest.raises(ConfigurationError):
        evaluate_scheme(sc, "LC_NOC_DNN")  # needs a model
    assert "LC_NOC_DNN" in SCHEMES


def test_violation_cdf_masses():
    sc = generate_topology(2, 4, 2, seed=2)
    lc = evaluate_scheme(sc, "LC_NOC")
    cdf = violation_cdf([lc], sc.params.s_min)
    assert len(cdf) == len(lc.connected_se)
    assert np.all(cdf <= 1e-6)  # exact solver: mass entirely at 0
    # an all-zero "predictor" puts all mass at 1.0
    zero = type(lc)(**{**vars(lc), "connected_se": [0.0, 0.0]})
    assert np.all(violation_cdf([zero], sc.params.s_min) == 1.0)


def test_runtime_bench_rows():
    rows = runtime_bench([(2, 4, 2), (3, 4, 3)], repetitions=1, seed=0)
    assert len(rows) == 2
    assert rows[0]["opt_enumerations"] == 12  # P(4, 2)
    assert rows[1]["opt_enumerations"] == 120  # P(6, 3)
    for row in rows:
        assert row["assoc_median_s"] > 0.0
        assert row["solve_median_s"] > 0.0
        assert row["opt_extrapolated_s"] == pytest.approx(
            row["opt_enumerations"] * row["solve_median_s"]
        )
