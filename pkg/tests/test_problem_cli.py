import json
import math
import subprocess
import sys

import pytest

from chaingrade.cli import main
from chaingrade.corpus import EXAMPLES
from chaingrade.problem import SpecError, exit_code, format_result, parse_spec, run_spec, validate_spec


def run_text(text, **kw):
    return run_spec(parse_spec(text), json.loads(text), **kw)


def test_parse_minimal_rd_chain():
    spec = parse_spec('{"kind": "rd-chain", "F": [0, 1, 2], "G": [0, 1, 2]}')
    assert spec.kind == "rd-chain" and spec.F == [0.0, 1.0, 2.0]
    assert isinstance(spec.F[0], float)


def test_parse_missing_shape():
    with pytest.raises(SpecError) as err:
        parse_spec('{"kind": "rd-bundle", "F": {"variant": "natural"}}')
    assert err.value.category == "schema"
    assert err.value.path == "shape"


def test_parse_decreasing_anchor():
    with pytest.raises(SpecError) as err:
        parse_spec('{"kind": "solve-anchored", "n": 4, "anchors": [[2, 0.8], [4, 0.5]]}')
    assert err.value.category == "semantic"
    assert "monotonicity" in err.value.message


def test_parse_syntax_error_location():
    with pytest.raises(SpecError) as err:
        parse_spec('{"kind": "rd-chain",\n "F": [0, 1,]}')
    assert err.value.category == "syntax"
    assert "line 2" in err.value.message and "column" in err.value.message


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"kind": "rd-bundle", "shape": [2, 1.5], "F": {"variant": "natural"}}, "shape.1"),
        ({"kind": "rd-bundle", "shape": [1, 1], "F": {"variant": "tabulated", "values": [[0, 1], [1]]}}, "F.values"),
        ({"kind": "rd-bundle", "shape": [1, 1], "F": {"variant": "tabulated", "values": [[0, 1], [2, 1]]}}, "F"),
        ({"kind": "solve-linear", "n": 3, "M": 1, "coefficients": [1, 2, 3]}, "target"),
        ({"kind": "solve-height", "shape": [2], "M": 1, "coefficients": [1, 2]}, "<root>"),
        ({"kind": "nope"}, "kind"),
        ({"kind": "rd-chain", "F": [0, 1], "G": [0, 1], "extra": 1}, "extra"),
        ({"kind": "rd-chain", "F": [0, 2, 1], "G": [0, 1, 2]}, "F"),
    ],
)
def test_field_paths(doc, path):
    with pytest.raises(SpecError) as err:
        validate_spec(doc)
    assert err.value.path == path


def test_rd_bundle_separable_oracle():
    doc = run_spec(validate_spec(EXAMPLES["rd-bundle-separable.json"]))
    assert doc["status"] == "ok"
    assert doc["oracle"]["abs_diff"] <= 1e-10 and doc["oracle"]["agree"]


def test_infeasible_linear_document():
    doc = run_spec(validate_spec(EXAMPLES["solve-linear-infeasible.json"]))
    assert doc["status"] == "error"
    assert doc["error"]["message"].startswith("infeasible: target outside [min c, max c]")
    assert exit_code(doc) == 2


def test_check_properties_document():
    doc = run_spec(validate_spec(EXAMPLES["check-properties.json"]))
    assert doc["result"]["all_ok"]
    assert len(doc["result"]["checks"]) == 12
    assert exit_code(doc) == 0


def test_machine_round_trip():
    for name, spec in EXAMPLES.items():
        doc = run_spec(validate_spec(spec), spec)
        assert json.loads(format_result(doc, "machine")) == json.loads(json.dumps(doc)), name


def test_reals_have_17_digits():
    doc = run_spec(validate_spec(EXAMPLES["rd-chain-uniform.json"]))
    text = format_result(doc, "machine")
    assert '"value": 1.3862943611198906e+00' in text


def test_degenerate_human_and_exit():
    spec = {
        "kind": "rd-bundle", "shape": [1, 1], "F": {"variant": "natural"},
        "G": {"variant": "tabulated", "values": [[0, 0], [0, 1]], "mode": "weak"},
    }
    doc = run_spec(validate_spec(spec))
    assert doc["status"] == "degenerate"
    assert "-inf (degenerate)" in format_result(doc, "human")
    assert exit_code(doc) == 1
    assert "-Infinity" in format_result(doc, "machine")


def test_witness_rendering():
    spec = {"kind": "rd-bundle", "shape": [2, 2], "F": {"variant": "height", "values": [0, .1, .5, .6, 1]}}
    out = format_result(run_spec(validate_spec(spec)), "human")
    assert "steps: 1 1 2 2" in out


def test_solver_oracle_blocks():
    for name in ("solve-anchored.json", "solve-height.json", "solve-server-mix.json"):
        doc = run_spec(validate_spec(EXAMPLES[name]))
        assert doc["status"] == "ok", name
        assert doc["oracle"]["agree"] and doc["oracle"]["reference_dominated"]


def test_oracle_mode_all_solvers():
    for name, spec in EXAMPLES.items():
        if not spec["kind"].startswith("solve") or "infeasible" in name:
            continue
        spec = dict(spec, options={"oracle": True, "seed": 5})
        doc = run_spec(validate_spec(spec), samples=200)
        assert doc["status"] == "ok", (name, doc.get("oracle"))


def test_budget_env_var_maps_to_error(monkeypatch):
    monkeypatch.setenv("CHAINGRADE_ENUM_BUDGET", "3")
    spec = {"kind": "rd-bundle", "shape": [2, 2], "F": {"variant": "natural"}, "options": {"oracle": True}}
    doc = run_spec(validate_spec(spec))
    assert doc["status"] == "error" and "budget" in doc["error"]["message"]
    assert exit_code(doc) == 2


# -- command line -------------------------------------------------------------

@pytest.fixture
def corpus(tmp_path):
    assert main(["examples", "--out", str(tmp_path)]) == 0
    return tmp_path


def test_examples_command(corpus, capsys):
    files = sorted(p.name for p in corpus.iterdir())
    assert files == sorted(EXAMPLES)
    for name in files:
        assert main(["validate", str(corpus / name)]) == 0


@pytest.mark.parametrize(
    "spec, code",
    [
        ({"kind": "rd-chain", "F": [0, 1, 2], "G": [0, 1, 2]}, 0),
        ({"kind": "rd-chain", "F": [0, 1, 2], "G": [0, 0, 2]}, 1),
        ({"kind": "rd-chain", "F": [0, 2, 1], "G": [0, 1, 2]}, 2),
        ({"kind": "solve-linear", "n": 3, "M": 1, "coefficients": [1, 2, 3], "target": 9}, 2),
        ({"kind": "solve-linear", "n": 3, "M": 1, "coefficients": [1, 2, 3], "target": 3}, 0),
        ({"kind": "solve-unconstrained", "shape": [2], "m": 1, "M": 1}, 2),
        ({"kind": "check-properties", "shape": [2, 1], "F": {"variant": "natural"}}, 0),
        ({"kind": "rd-bundle", "shape": [2]}, 2),
    ],
)
def test_exit_code_matrix(tmp_path, capsys, spec, code):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    for mode in ("human", "machine"):
        assert main(["run", str(path), "--mode", mode]) == code
    capsys.readouterr()


def test_invalid_json_exit(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    assert main(["run", str(path)]) == 2
    assert main(["validate", str(path)]) == 2
    assert "syntax error" in capsys.readouterr().err


def test_flags_override_options(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"kind": "rd-bundle", "shape": [2, 1], "F": {"variant": "natural"}}))
    assert main(["run", str(path), "--oracle", "--mode", "machine", "--seed", "9", "--tolerance", "1e-8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["input"]["options"] == {"oracle": True, "tolerance": 1e-8, "seed": 9}
    assert doc["oracle"]["agree"]


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "discriminator" in json.dumps(schema)


def test_module_entry_point_is_deterministic(corpus):
    outputs = []
    for _ in range(2):
        proc = subprocess.run(
            [sys.executable, "-m", "chaingrade", "run", str(corpus / "solve-anchored.json"), "--mode", "machine"],
            capture_output=True, check=True,
        )
        outputs.append(proc.stdout)
    assert outputs[0] == outputs[1]
    assert math.isclose(json.loads(outputs[0])["result"]["objective"], 1.1935496041, abs_tol=1e-9)
