import io
import json

import jsonschema
import numpy as np
import pytest
from scipy import stats

from qtazrp_lab.cli import identity_suite, parse_q, report_schema, run
from qtazrp_lab.errors import EXIT_CROSS_CHECK, EXIT_OK, EXIT_VALIDATION
from qtazrp_lab.montecarlo import PUBLISHED_TABLE


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def invoke_json(*argv):
    code, text = invoke(*argv)
    return code, json.loads(text) if text else None


def by_method(payload):
    return {r["method"]: r for r in payload["results"]}


def test_parse_q_reads_decimals_exactly():
    assert str(parse_q("0.6")) == "3/5"
    assert str(parse_q("3/10")) == "3/10"


def test_cdf_exact_and_header():
    code, payload = invoke_json("cdf", "--x=0,0,0", "--y=0,1,3", "--q", "0.6", "--t", "2")
    assert code == EXIT_OK
    assert payload["results"][0]["method"] == "exact"
    assert payload["results"][0]["value"] == pytest.approx(0.0695753, abs=5e-8)
    header = payload["header"]
    assert header["query"]["q"] == "3/5"
    assert header["query"]["x"] == [0, 0, 0]
    assert header["defaults"]["seed"] == 20240607
    assert payload["checks"] == []


def test_cdf_all_methods_cross_check():
    code, payload = invoke_json("cdf", "--x=0,0", "--y=1,1", "--q", "1/2", "--t", "1", "--mode", "all", "--samples", "20000")
    assert code == EXIT_OK
    results = by_method(payload)
    assert set(results) == {"exact", "path-decomposition", "contour", "mc"}
    assert results["mc"]["samples"] == 20000
    assert {c["name"] for c in payload["checks"]} == {"mc-within-sigmas", "max-pairwise-discrepancy"}
    assert all(c["pass"] for c in payload["checks"])


def test_cdf_all_skips_contour_for_unequal_starts():
    code, payload = invoke_json("cdf", "--x=0,-1", "--y=1,1", "--q", "0.4", "--t", "1", "--mode", "all", "--samples", "5000")
    assert code == EXIT_OK
    assert "contour" not in by_method(payload)


def test_hitprob_symbolic_and_numeric():
    code, payload = invoke_json("hitprob", "--x=0,-1,-2", "--y=1,3,2", "--symbolic")
    assert code == EXIT_OK
    (result,) = payload["results"]
    assert result["value"] is None
    assert "7168" in result["symbolic"]
    code, payload = invoke_json("hitprob", "--x=0,-1,-2", "--y=1,3,2", "--q", "0.6")
    assert code == EXIT_OK
    assert 0 < payload["results"][0]["value"] < 1
    assert invoke("hitprob", "--x=0,0", "--y=1,1", "--mode", "contour")[0] == EXIT_VALIDATION


def test_duality_pairs_with_contour():
    code, payload = invoke_json("duality", "--k=1,1", "--M=2,1", "--q", "1/2", "--t", "1")
    assert code == EXIT_OK
    results = by_method(payload)
    assert results["exact"]["value"] == pytest.approx(results["contour"]["value"], abs=1e-8)
    assert payload["checks"][0]["name"] == "max-pairwise-discrepancy"


def test_qmoment_defaults_to_contour():
    code, payload = invoke_json("qmoment", "--k=1", "--M=3", "--q", "0.5", "--t", "1.5")
    assert code == EXIT_OK
    (result,) = payload["results"]
    assert result["method"] == "contour"
    assert result["value"] == pytest.approx(stats.poisson.cdf(2, 1.5), abs=1e-10)


def test_coarse_quadrature_fails_the_cross_check():
    code, payload = invoke_json("duality", "--k=1", "--M=2", "--q", "1/2", "--t", "1", "--nodes", "8")
    assert code == EXIT_CROSS_CHECK
    assert not payload["checks"][0]["pass"]


def test_shift_verify_negative_control():
    code, payload = invoke_json("shift-verify", "--x=0,-1,-2", "--y=1,3,4", "--x2=0,-1,-3", "--y2=1,3,3", "--t", "1")
    assert code == EXIT_OK
    (result,) = payload["results"]
    assert result["value"] == "hitting-inequality"
    first, second = result["symbolic"]
    assert first != second


def test_asymptotic_single_species():
    code, payload = invoke_json("asymptotic", "--sigma", "0.5", "--q", "0.5")
    assert code == EXIT_OK
    results = by_method(payload)
    assert results["limit"]["value"] == pytest.approx(stats.norm.cdf(0.5), abs=1e-9)
    assert results["limit-density"]["value"] == pytest.approx(0.8824969, abs=1e-6)


def test_simulate_at_time_zero():
    code, payload = invoke_json("simulate", "--x=0,-1", "--q", "0.5", "--t", "0")
    assert code == EXIT_OK
    assert payload["results"][0]["value"] == [0, -1]
    config = '{"n": 1, "particles": [{"site": 0, "species": 1, "count": 2}]}'
    code, payload = invoke_json("simulate", "--config", config, "--q", "0.5", "--t", "0")
    assert code == EXIT_OK
    assert payload["results"][0]["value"]["particles"] == [{"site": 0, "species": 1, "count": 2}]


def test_table_csv():
    code, text = invoke("table", "--format", "csv", "--samples", "50", "--seed", "3")
    assert code == EXIT_OK
    lines = text.strip().splitlines()
    assert lines[0] == "x,y-x,estimate,stderr,samples,seed"
    assert len(lines) - 1 == sum(v is not None for row in PUBLISHED_TABLE.values() for v in row)
    assert lines[1].endswith(",50,3")


@pytest.mark.parametrize("argv", [
    ["cdf", "--x=0,0,0", "--y=0,1,3", "--q", "0.6", "--t", "2"],
    ["cdf", "--x=0,0", "--y=1,1", "--q", "1/2", "--t", "1", "--mode", "all", "--samples", "20000"],
    ["hitprob", "--x=0,-1,-2", "--y=1,3,2", "--symbolic"],
    ["duality", "--k=1,1", "--M=2,1", "--q", "1/2", "--t", "1"],
    ["shift-verify", "--x=0,-1,-2", "--y=1,3,4", "--x2=0,-1,-3", "--y2=1,3,3", "--t", "1"],
    ["asymptotic", "--sigma", "0.5", "--q", "0.5"],
    ["simulate", "--x=0,-1", "--q", "0.5", "--t", "1"],
    ["table", "--samples", "20"],
])
def test_reports_match_the_schema(argv):
    code, payload = invoke_json(*argv)
    assert code == EXIT_OK
    jsonschema.validate(payload, report_schema())


def test_schema_rejects_malformed_reports():
    code, payload = invoke_json("qmoment", "--k=1", "--M=3", "--q", "0.5", "--t", "1.5")
    assert code == EXIT_OK
    schema = report_schema()
    for broken in (
        {k: v for k, v in payload.items() if k != "checks"},
        {**payload, "checks": [{"name": "x", "pass": "yes", "detail": ""}]},
        {**payload, "results": [{"value": 0.5}]},
    ):
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(broken, schema)


@pytest.mark.slow
def test_contour_identity_suite():
    code, payload = invoke_json("contour-check", "--q", "0.5", "--t", "1")
    assert code == EXIT_OK
    names = {c["name"] for c in payload["checks"]}
    assert {"offset-calibration", "symmetrization", "sum-I-equals-I-tilde", "I-J-relation", "J-recurrence"} <= names
    assert all(c["pass"] for c in payload["checks"])


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_identity_suite_at_random_parameters(seed):
    rng = np.random.default_rng(seed)
    q, t = float(rng.uniform(0.3, 0.8)), float(rng.uniform(0.5, 2.5))
    checks = identity_suite(q, t, rng)
    failed = [f"{c.name}: {c.detail}" for c in checks if not c.passed]
    assert not failed, f"q={q:.3f}, t={t:.3f}: {failed}"


@pytest.mark.parametrize("argv", [
    ["cdf", "--x=0,0", "--y=1,1", "--q", "1.5", "--t", "1"],
    ["cdf", "--x=0,0", "--y=1,1", "--q", "0.5"],
    ["cdf", "--x=0,0", "--y=1", "--q", "0.5", "--t", "1"],
    ["cdf", "--x=0,1", "--y=1,0", "--q", "0.5", "--t", "1"],
    ["cdf", "--x=0,0", "--y=1,1", "--q", "0.5", "--t", "1", "--format", "csv"],
    ["simulate", "--q", "0.5", "--t", "1"],
    ["qmoment", "--k=1,1", "--M=1,2", "--q", "0.5", "--t", "1"],
    ["frobnicate"],
])
def test_validation_errors_exit_2(argv):
    assert invoke(*argv)[0] == EXIT_VALIDATION
