import math

import pytest

import hitlab

DIMENSION = """
[experiment]
kind = dimension
system = doubling
seed = 7

[dimension]
observable = dist:0.5
ladder = dyadic:3:12
samples = 1000
"""


def test_catalog_lists_systems():
    text = hitlab.catalog()
    for sid in ("doubling", "cat", "rotation:golden", "rotation:liouville", "mp:0.5"):
        assert sid in text


def test_exact_orbit():
    assert hitlab.orbit("doubling", [0.375], 1) == [0.75]
    assert hitlab.orbit("cat", [0.5, 0.5], 1) == [0.5, 0.0]


def test_hitting_time_censoring():
    tau, censored = hitlab.hitting_time("rotation:0.25", [0.1], "dist:0", 0.05, 100)
    assert censored and tau == 100


def test_dimension_of_a_disc():
    d = hitlab.estimate_dimension("cat", "dist:0.3,0.6", [2.0**-k for k in range(3, 10)], seed=1)
    assert d["exact"]
    assert abs(d["slope"] - 2.0) < 0.05


def test_run_and_report_roundtrip():
    result = hitlab.run(DIMENSION, workers=1)
    assert result["schema_version"] == hitlab.SCHEMA_VERSION
    assert abs(result["summary"]["dimension"]["slope"] - 1.0) < 0.02
    again = hitlab.run(DIMENSION, workers=2)
    assert again["data"] == result["data"]
    assert "Sublevel dimension" in hitlab.report([result])


def test_config_errors_carry_the_field():
    with pytest.raises(hitlab.HitlabError) as info:
        hitlab.run(DIMENSION.replace("dyadic:3:12", "0.5,0.01,0.005,0.001"))
    assert "dimension.ladder" in str(info.value)


def test_return_curve_is_close_to_exponential():
    c = hitlab.return_curve("doubling", "dist:0.375", 2.0**-8, seed=3, count=2000)
    assert c["g"][0] == 1.0
    assert c["exp_law_distance"] < 0.1
    assert math.isclose(c["kac_product"], 1.0, abs_tol=0.1)


def test_rank_and_selftest():
    assert hitlab.jacobian_rank("linear:[[1,0],[2,0]]", 2, [0.3, 0.6]) == 1
    assert all(passed for _, passed, _ in hitlab.selftest())
