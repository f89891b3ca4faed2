import json
from pathlib import Path

import pytest

from src.main import main

FIXTURES = Path(__file__).parent.parent / "fixtures"


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    return json.loads(Path(path).read_text())


def test_compute_sawtooth_reports_uniform_density(tmp_path):
    assert run("compute", FIXTURES / "sawtooth.json", "--grid", 1025, "-o", tmp_path) == 0
    report = read(tmp_path / "sawtooth.compute.json")
    assert report["schema"] == "ym/1"
    density = report["measures"]["density"]
    assert len(density["density"]) == 1025
    assert all(abs(v - 1.0) <= 1e-9 for v in density["density"])
    assert abs(density["total_mass"] - 1.0) <= 1e-9
    assert set(report["measures"]) == {"density", "pushforward"}
    header = (tmp_path / "sawtooth.density.csv").read_text().splitlines()[0]
    assert header == "y,cdf,density"


def test_compute_step_reports_atoms(tmp_path):
    assert run("compute", FIXTURES / "step.json", "-o", tmp_path) == 0
    atoms = read(tmp_path / "step.compute.json")["measures"]["atomic"]["atoms"]
    assert [atom["at"] for atom in atoms] == [1.0, 2.0]
    assert [atom["weight"] for atom in atoms] == pytest.approx([0.3, 0.7])


def test_compute_bad_spec_exits_2(tmp_path, caplog):
    assert run("compute", FIXTURES / "bad.json", "-o", tmp_path) == 2
    assert "partition.disjoint" in caplog.text
    assert not (tmp_path / "bad.compute.json").exists()


def test_missing_file_exits_3(tmp_path):
    assert run("compute", tmp_path / "nope.json", "-o", tmp_path) == 3


def test_parse_error_exits_4(tmp_path):
    spec = tmp_path / "broken.json"
    spec.write_text(json.dumps({"domain": [0, 1], "pieces": [{"interval": [0, 1], "expr": "2*"}]}))
    assert run("compute", spec, "-o", tmp_path) == 4


def test_compute_is_deterministic(tmp_path):
    run("compute", FIXTURES / "xsq.json", "-o", tmp_path / "a")
    run("compute", FIXTURES / "xsq.json", "-o", tmp_path / "b")
    first = (tmp_path / "a" / "xsq.compute.json").read_bytes()
    assert first == (tmp_path / "b" / "xsq.compute.json").read_bytes()


def test_verify_xsq_passes(tmp_path):
    code = run(
        "verify", FIXTURES / "xsq.json", "--tol", 1e-7, "--samples", 1_000_000, "--seed", 42,
        "--beta", "cos(y)", "-o", tmp_path,
    )
    assert code == 0
    report = read(tmp_path / "xsq.verify.json")
    assert report["passed"]
    betas = [entry["beta"] for entry in report["identity"]["density"]["entries"]]
    assert betas == ["1", "y", "y^2", "sin(y)", "exp(y)", "cos(y)"]
    assert all(ks["distance"] < 0.005 for ks in report["ks"].values())


def test_verify_tampered_density_names_normalization(tmp_path, caplog):
    assert run("verify", FIXTURES / "tampered.json", "-o", tmp_path) == 1
    report = read(tmp_path / "tampered.verify.json")
    assert report["failures"][0].startswith("density: normalization")
    assert "normalization" in caplog.text


def test_converge_oscillating_sawtooth(tmp_path):
    code = run(
        "converge", "--oscillate", FIXTURES / "sawtooth.json", "--levels", 6, "--depth", 4, "-o", tmp_path
    )
    assert code == 0
    report = read(tmp_path / "sawtooth.oscillate.converge.json")
    assert report["density"]["verdict"] == "consistent-with-convergence"
    assert all(s["residual"] <= 1e-9 for s in report["density"]["sets"])
    assert report["density"]["indices"] == [1, 2, 4, 8, 16, 32]
    assert report["equivalence"]["status"] == "equivalent"
    assert report["composition"]["levels"] == [1, 2, 4, 8, 16, 32]
    rows = (tmp_path / "sawtooth.oscillate.density.csv").read_text().splitlines()
    assert rows[0] == "set,1,2,4,8,16,32"
    assert len(rows) == 1 + 31 + 8


def test_converge_perturbed_directory(tmp_path):
    assert run("converge", FIXTURES / "sequence" / "perturbed", "--depth", 4, "-o", tmp_path) == 0
    equivalence = read(tmp_path / "perturbed.converge.json")["equivalence"]
    assert equivalence["status"] == "equivalent"
    assert equivalence["max_limit_difference"] <= 1e-6


def test_converge_concentration_directory_is_annotated(tmp_path):
    assert run("converge", FIXTURES / "sequence" / "concentration", "-o", tmp_path) == 0
    report = read(tmp_path / "concentration.converge.json")
    assert report["measure"]["verdict"] == "consistent-with-convergence"
    assert report["density"]["uniform_integrability"]["fired"]
    assert report["equivalence"]["status"] == "annotated"
    assert report["equivalence"]["annotations"]


def test_converge_needs_exactly_one_source(tmp_path):
    assert run("converge", "-o", tmp_path) == 4


def test_monotone_constant_passes(tmp_path):
    assert run("monotone", FIXTURES / "scenario" / "constant", "-o", tmp_path) == 0
    assert read(tmp_path / "constant.monotone.json")["scenario"]["passed"]


def test_monotone_crossing_reports_witness(tmp_path, caplog):
    assert run("monotone", FIXTURES / "scenario" / "crossing", "-o", tmp_path) == 1
    scenario = read(tmp_path / "crossing.monotone.json")["scenario"]
    assert scenario["witness"] == "[0,0.5]"
    assert "[0,0.5]" in caplog.text


def test_monotone_empty_directory_exits_4(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("monotone", empty, "-o", tmp_path) == 4


def write_function(path, expr, **extra):
    path.write_text(json.dumps({"domain": [0, 1], "pieces": [{"interval": [0, 1], "expr": expr}], **extra}))
    return path


@pytest.mark.parametrize("power", [10, 20])
def test_compute_flat_power(tmp_path, power):
    spec = write_function(tmp_path / f"power{power}.json", f"x^{power}")
    assert run("compute", spec, "-o", tmp_path) == 0
    measures = read(tmp_path / f"power{power}.compute.json")["measures"]
    assert set(measures) == {"density", "pushforward", "stieltjes"}
    assert abs(measures["density"]["total_mass"] - 1.0) <= 1e-9


def test_converge_oscillate_far_from_origin(tmp_path):
    spec = write_function(tmp_path / "shifted.json", "10000 + x")
    code = run(
        "converge", "--oscillate", spec, "--levels", 3, "--depth", 4, "--beta", "(y - 10000)^2", "-o", tmp_path
    )
    assert code == 0
    report = read(tmp_path / "shifted.oscillate.converge.json")
    assert len(report["density"]["sets"]) == 31 + 8
    assert report["equivalence"]["status"] == "equivalent"


@pytest.mark.parametrize("flags", [("--depth", -1), ("--levels", 0)])
def test_converge_rejects_bad_counts(tmp_path, flags):
    assert run("converge", "--oscillate", FIXTURES / "sawtooth.json", *flags, "-o", tmp_path) == 4


def test_converge_piecewise_constant_directory_runs_measure_side_only(tmp_path):
    directory = tmp_path / "steps"
    directory.mkdir()
    for k in range(1, 4):
        document = {
            "domain": [0, 1],
            "kind": "constant",
            "K": [0, 3],
            "pieces": [{"interval": [0, 0.3], "expr": "1"}, {"interval": [0.3, 1], "expr": "2"}],
        }
        (directory / f"c_{k}.json").write_text(json.dumps(document))
    assert run("converge", directory, "-o", tmp_path) == 0
    report = read(tmp_path / "steps.converge.json")
    assert report["density"] is None
    assert report["measure"]["verdict"] == "consistent-with-convergence"
    assert report["equivalence"]["status"] == "annotated"
    assert report["equivalence"]["verdicts"]["density"] == "not-applicable"
    assert not (tmp_path / "steps.density.csv").exists()
    assert (tmp_path / "steps.measure.csv").exists()


@pytest.mark.parametrize("argv", [("nonsense",), ("compute",), ("verify", "x.json", "--samples", "many")])
def test_usage_errors_exit_4(argv):
    assert run(*argv) == 4


@pytest.mark.parametrize(
    "argv, report",
    [
        (("verify", FIXTURES / "xsq.json", "--samples", 20_000, "--seed", 3), "xsq.verify.json"),
        (
            ("converge", "--oscillate", FIXTURES / "sawtooth.json", "--levels", 4, "--depth", 2),
            "sawtooth.oscillate.converge.json",
        ),
        (("monotone", FIXTURES / "scenario" / "crossing"), "crossing.monotone.json"),
    ],
)
def test_reruns_are_byte_identical(tmp_path, argv, report):
    run(*argv, "-o", tmp_path / "a")
    run(*argv, "-o", tmp_path / "b")
    assert (tmp_path / "a" / report).read_bytes() == (tmp_path / "b" / report).read_bytes()
