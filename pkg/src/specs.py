"""
Spec documents - function specs and density specs

Both kinds are plain JSON or YAML. Field extraction goes through the JMESPath
expressions in SPEC_FIELDS, so adding a field is one line here.

    {"domain": [a, b], "kind": "invertible" | "constant",
     "pieces": [{"interval": [a1, b1], "expr": "2*x"}, ...], "K": [c, d]}

    {"kind": "density", "K": [c, d], "density": "<expr in y>", "singular": [..]}
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import jmespath
import yaml

from .errors import SpecError
from .exprfn import PartitionedFunction
from .measures import AbsContMeasure, SupportInterval, density_measure
from .utils import logger

SPEC_SUFFIXES = (".json", ".yaml", ".yml")

SPEC_FIELDS = {
    "function": {
        "domain": "domain",
        "kind": "kind",
        "intervals": "pieces[*].interval",
        "exprs": "pieces[*].expr",
        "K": "K",
        "index": "index",
    },
    "density": {
        "K": "K",
        "density": "density",
        "singular": "singular",
        "index": "index",
    },
}

_NUMBER = re.compile(r"(\d+)")


@dataclass(frozen=True)
class FunctionSpec:
    path: Path
    function: PartitionedFunction
    K: Optional[SupportInterval] = None
    index: Optional[int] = None


@dataclass(frozen=True)
class DensitySpec:
    path: Path
    measure: AbsContMeasure
    index: Optional[int] = None

    @property
    def K(self) -> SupportInterval:
        return self.measure.support


Spec = Union[FunctionSpec, DensitySpec]


def read_document(path: Path) -> dict:
    """JSON or YAML by suffix; OSError propagates, malformed content raises SpecError"""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            document = json.loads(text)
        else:
            document = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise SpecError(f"{path}: not a valid {path.suffix.lstrip('.')} document: {e}") from e
    if not isinstance(document, dict):
        raise SpecError(f"{path}: top level must be a mapping")
    return document


def _extract(document: dict, kind: str) -> dict:
    return {name: jmespath.search(expression, document) for name, expression in SPEC_FIELDS[kind].items()}


def _pair(value, name: str, path: Path) -> Tuple[float, float]:
    try:
        lo, hi = value
        return float(lo), float(hi)
    except (TypeError, ValueError) as e:
        raise SpecError(f"{path}: '{name}' must be a pair of numbers, got {value!r}") from e


def _support(value, path: Path) -> Optional[SupportInterval]:
    if value is None:
        return None
    try:
        return SupportInterval(*_pair(value, "K", path))
    except ValueError as e:
        raise SpecError(f"{path}: {e}") from e


def _index(value, path: Path) -> Optional[int]:
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise SpecError(f"{path}: 'index' must be an integer, got {value!r}") from e


def parse_function_spec(document: dict, path: Path = Path("<memory>")) -> FunctionSpec:
    fields = _extract(document, "function")
    kind = fields["kind"] or "invertible"
    if kind not in ("invertible", "constant"):
        raise SpecError(f"{path}: unknown kind {kind!r}")
    if fields["domain"] is None:
        raise SpecError(f"{path}: missing 'domain'")
    intervals, exprs = fields["intervals"] or [], fields["exprs"] or []
    if len(intervals) != len(exprs) or any(e is None for e in exprs):
        raise SpecError(f"{path}: every piece needs an 'interval' and an 'expr'")
    pieces = [(_pair(interval, "interval", path), str(expr)) for interval, expr in zip(intervals, exprs)]
    function = PartitionedFunction.from_pieces(_pair(fields["domain"], "domain", path), pieces, kind)
    logger.debug(f"Loaded {kind} function with {len(pieces)} piece(s) from {path}")
    return FunctionSpec(path, function, _support(fields["K"], path), _index(fields["index"], path))


def parse_density_spec(document: dict, path: Path = Path("<memory>")) -> DensitySpec:
    fields = _extract(document, "density")
    support = _support(fields["K"], path)
    if support is None or not fields["density"]:
        raise SpecError(f"{path}: a density spec needs 'K' and 'density'")
    singular = [float(s) for s in fields["singular"] or []]
    measure = density_measure(str(fields["density"]), support, singular, label=path.stem)
    logger.debug(f"Loaded density {fields['density']} on {support.to_list()} from {path}")
    return DensitySpec(path, measure, _index(fields["index"], path))


def load_spec(path: Path) -> Spec:
    path = Path(path)
    document = read_document(path)
    match document.get("kind"):
        case "density":
            return parse_density_spec(document, path)
        case _:
            return parse_function_spec(document, path)


def _order_key(path: Path):
    numbers = _NUMBER.findall(path.stem)
    return (int(numbers[-1]) if numbers else float("inf"), path.name)


def load_directory(directory: Path) -> List[Spec]:
    """Spec files of a directory, ordered by the last number in their names"""
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    paths = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in SPEC_SUFFIXES),
        key=_order_key,
    )
    specs = [load_spec(p) for p in paths]
    logger.info(f"Loaded {len(specs)} spec(s) from {directory}")
    return specs


def sequence_index(spec: Spec, position: int) -> int:
    """Declared index, else the number in the file name, else the 1-based position"""
    if spec.index is not None:
        return spec.index
    numbers = _NUMBER.findall(spec.path.stem)
    return int(numbers[-1]) if numbers else position + 1
