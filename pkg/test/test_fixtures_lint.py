from pathlib import Path

import pytest
import yaml

from src.errors import SpecError
from src.exprfn import validate
from src.specs import (
    SPEC_SUFFIXES,
    DensitySpec,
    FunctionSpec,
    load_directory,
    load_spec,
    parse_function_spec,
    read_document,
    sequence_index,
)

FIXTURES = Path(__file__).parent.parent / "fixtures"

# fixture -> (kind of document, passes structural validation)
FIXTURE_REGISTRY = {
    "identity.json": ("function", True),
    "xsq.json": ("function", True),
    "sawtooth.json": ("function", True),
    "oscillation3.yaml": ("function", True),
    "step.json": ("function", True),
    "constant.json": ("function", True),
    "bad.json": ("function", False),
    "tampered.json": ("density", True),
}


def test_every_fixture_is_registered():
    on_disk = sorted(p.name for p in FIXTURES.iterdir() if p.suffix in SPEC_SUFFIXES)
    missing = [name for name in on_disk if name not in FIXTURE_REGISTRY]
    assert not missing, f"Fixtures {missing} are not registered in FIXTURE_REGISTRY"


@pytest.mark.parametrize("name", sorted(FIXTURE_REGISTRY))
def test_fixture_loads_as_registered(name):
    kind, valid = FIXTURE_REGISTRY[name]
    spec = load_spec(FIXTURES / name)
    if kind == "density":
        assert isinstance(spec, DensitySpec)
        return
    assert isinstance(spec, FunctionSpec)
    report = validate(spec.function, spec.K)
    assert report.structurally_valid == valid, [c.name for c in report.failures]


def test_sequence_directories_are_ordered_by_index():
    perturbed = load_directory(FIXTURES / "sequence" / "perturbed")
    assert [sequence_index(spec, k) for k, spec in enumerate(perturbed)] == [10 ** (k + 1) for k in range(1, 9)]
    concentration = load_directory(FIXTURES / "sequence" / "concentration")
    assert [spec.index for spec in concentration] == [4**k for k in range(1, 9)]
    assert all(isinstance(spec, DensitySpec) for spec in concentration)


def test_scenario_directories_hold_single_increasing_pieces():
    for directory in ["crossing", "constant"]:
        for spec in load_directory(FIXTURES / "scenario" / directory):
            assert len(spec.function.pieces) == 1
            assert spec.function.pieces[0].direction == 1


def test_index_falls_back_to_file_name(tmp_path):
    (tmp_path / "u_7.yaml").write_text(
        yaml.safe_dump({"domain": [0, 1], "pieces": [{"interval": [0, 1], "expr": "x"}]})
    )
    (tmp_path / "notes.txt").write_text("ignored")
    specs = load_directory(tmp_path)
    assert len(specs) == 1
    assert sequence_index(specs[0], 0) == 7


def test_malformed_documents_raise_spec_error(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SpecError):
        read_document(broken)
    with pytest.raises(SpecError):
        parse_function_spec({"domain": [0, 1], "pieces": [{"interval": [0, 1]}]})
    with pytest.raises(SpecError):
        parse_function_spec({"domain": [0, 1], "kind": "smooth", "pieces": []})
    with pytest.raises(SpecError):
        parse_function_spec({"pieces": [{"interval": [0, 1], "expr": "x"}]})
