import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wpap.cli import main, to_jsonable, write_csv
from wpap.config import Expression, forcing_function, parse_config, scalar_function
from wpap.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_expression_arithmetic():
    f = scalar_function("3 + sin(t) + sin(sqrt(2) * t)")
    t = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(f(t), 3 + np.sin(t) + np.sin(np.sqrt(2) * t))
    assert scalar_function("2")(t).shape == t.shape


@pytest.mark.parametrize("text", [
    "__import__('os')", "t.real", "(lambda: 1)()", "open('x')", "'abc'",
    "t if t else 1", "[x for x in t]", "sin(t, out=t)", "z + 1", "u[t]",
])
def test_expression_rejects_unsafe_syntax(text):
    with pytest.raises(ValueError):
        Expression(text, ("t", "u"))


def test_forcing_vector_literal_and_indexing():
    g = forcing_function("[sin(t), u[0]] + 0.5 * u", 2)
    t = np.array([0.0, 1.0])
    V = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(g(t, V), [[0.5, 2.0], [np.sin(1) + 1.5, 5.0]])


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
@settings(max_examples=30, deadline=None)
def test_csv_floats_round_trip(xs):
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "x.csv")
        write_csv(path, ["v"], [(x,) for x in xs])
        with open(path) as fh:
            back = [float(line) for line in fh.read().splitlines()[1:]]
    assert back == xs


def test_jsonable_handles_special_values():
    out = to_jsonable({"a": np.float64(np.inf), "b": np.arange(2), "c": (1, np.bool_(True)),
                       "d": 1 + 2j})
    assert out == {"a": "inf", "b": [0, 1], "c": [1, True], "d": {"re": 1.0, "im": 2.0}}
    json.dumps(out)


def test_all_violations_reported(tmp_path):
    path = write(tmp_path, """
[run]
horizons = 20, 25, 30, 35
tol = -1
bogus = 3
[weight:w]
kind = cubic
[family]
form = constant
[mystery]
x = 1
""")
    with pytest.raises(ConfigError) as err:
        parse_config(path, "verify-dichotomy")
    text = "\n".join(err.value.violations)
    for needle in ("run.horizons", "run.tol", "run.bogus", "weight:w.kind", "family.A",
                   "mystery: unknown section"):
        assert needle in text
    assert len(err.value.violations) >= 6


def test_missing_sections_reported(tmp_path):
    path = write(tmp_path, "[run]\nseed = 1\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path, "test-pap0")
    assert any("weight" in v for v in err.value.violations)
    assert any("corpus" in v for v in err.value.violations)


def test_seed_override(tmp_path):
    path = write(tmp_path, "[run]\nseed = 1\n")
    assert parse_config(path, "heat-demo").seed == 1
    assert parse_config(path, "heat-demo", seed=9).seed == 9


def test_config_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, "[run]\nhorizons = 20, 25\n")
    assert main(["heat-demo", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert "run.horizons" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert main(["heat-demo", "--config", str(tmp_path / "nope.ini")]) == 2


def test_precondition_exit_code(tmp_path):
    path = write(tmp_path, "[family]\nA = [[0, 1], [-1, 0]]\n")
    assert main(["verify-dichotomy", "--config", path, "--out", str(tmp_path / "o")]) == 4


def test_gate_exit_code_and_override(tmp_path):
    text = """
[family]
A = [[-1]]
[problem]
K = 3
g = sin(t) + 0.6 * u
[solver]
T_out = 2
step = 0.05
"""
    path = write(tmp_path, text)
    assert main(["solve-mild", "--config", path, "--out", str(tmp_path / "a")]) == 4
    assert main(["solve-mild", "--config", path, "--out", str(tmp_path / "b"),
                 "--override-contraction-gate"]) == 0
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["override_contraction_gate"]
    assert any("contraction" in w for w in manifest["warnings"])


def test_divergence_exit_code(tmp_path):
    text = """
[family]
A = [[-1]]
[problem]
K = 3
g = sin(t) + 3 * u
[solver]
T_out = 2
step = 0.05
max_iters = 30
"""
    path = write(tmp_path, text)
    assert main(["solve-mild", "--config", path, "--out", str(tmp_path / "a"),
                 "--override-contraction-gate"]) == 3


def test_manifest_lists_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["fit-estimates", "--config", str(CONFIGS / "dichotomy.ini"),
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    names = sorted(f["path"] for f in manifest["files"])
    assert names == ["estimates.csv", "estimates.json"]
    assert set(manifest["versions"]) == {"wpap", "python", "numpy", "scipy"}
    fits = json.loads((out / "estimates.json").read_text())["fits"]
    assert all(f["rate_ok"] for f in fits.values())


def test_verify_dichotomy_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["verify-dichotomy", "--config", str(CONFIGS / "dichotomy.ini"),
                 "--out", str(out)]) == 0
    report = json.loads((out / "dichotomy.json").read_text())
    assert report["delta"] >= 1.0 and report["AT"]["passed"]
    rows = (out / "decay.csv").read_text().splitlines()
    assert rows[0] == "tau,stable_norm,unstable_norm" and len(rows) == 41


def test_test_pap0_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["test-pap0", "--config", str(CONFIGS / "test_pap0.ini"),
                 "--out", str(out)]) == 0
    dec = json.loads((out / "decisions.json").read_text())
    assert dec["decisions"]["decay"]["one"]["is_pap0"]
    assert not dec["decisions"]["sine"]["rho2"]["is_pap0"]
    assert all(t["agree"] for t in dec["transfers"])
    assert "random_ap_1" in dec["decisions"]
