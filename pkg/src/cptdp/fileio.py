"""YAML document loading and CSV/report emission for the CLI harness.

Documents are validated through the same pydantic payload models the
service consumes, so a file that loads is exactly a request body that
the service accepts.  Numeric CSV output uses repr round-tripping so no
digits are lost on re-parse.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import yaml
from pydantic import ValidationError

from cptdp.cpt import CptSpec, DiscreteDistribution
from cptdp.mdp import MarkovModel, validate_model
from cptdp.schemas import CptSpecModel, DistributionModel, GeneratorModel, MdpModel

__all__ = [
    "LoadError",
    "ModelDocument",
    "load_spec",
    "load_distribution",
    "load_model",
    "load_generator",
    "write_csv",
    "write_yaml",
]


class LoadError(ValueError):
    """A document failed schema validation; carries a field locator."""

    def __init__(self, path: str | Path, field: str, message: str):
        super().__init__(f"{path}: {field}: {message}")
        self.field = field


def _load_yaml(path: str | Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except FileNotFoundError:
        raise LoadError(path, "(file)", "not found")
    except yaml.YAMLError as exc:
        raise LoadError(path, "(syntax)", str(exc))


def _validated(path: str | Path, payload_cls, doc: Any):
    try:
        return payload_cls.model_validate(doc)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "(document)"
        raise LoadError(path, field, first["msg"])


def load_spec(path: str | Path) -> CptSpec:
    payload = _validated(path, CptSpecModel, _load_yaml(path))
    try:
        return payload.to_core()
    except ValueError as exc:
        raise LoadError(path, "(spec)", str(exc))


def load_distribution(path: str | Path) -> DiscreteDistribution:
    payload = _validated(path, DistributionModel, _load_yaml(path))
    try:
        return payload.to_core()
    except ValueError as exc:
        raise LoadError(path, "atoms", str(exc))


@dataclass(frozen=True)
class ModelDocument:
    model: MarkovModel
    initial_values: dict[str, float] | None
    payload: MdpModel


def load_model(path: str | Path, allow_invalid: bool = False) -> ModelDocument:
    """Load and validate a model document.

    Files failing structural validation are rejected unless
    ``allow_invalid`` is set (the override is mainly for probing broken
    models on purpose).
    """
    payload = _validated(path, MdpModel, _load_yaml(path))
    try:
        model = payload.to_core()
    except ValueError as exc:
        raise LoadError(path, "(model)", str(exc))
    if not allow_invalid:
        report = validate_model(model)
        if not report.ok:
            first = report.violations[0]
            raise LoadError(path, first.location, first.message)
    return ModelDocument(model=model, initial_values=payload.initial_values, payload=payload)


def load_generator(path: str | Path) -> GeneratorModel:
    return _validated(path, GeneratorModel, _load_yaml(path))


def _fmt(cell: Any) -> Any:
    if isinstance(cell, bool):
        return str(cell).lower()
    if isinstance(cell, float):
        return repr(cell)
    return cell


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])


def write_yaml(path: str | Path, doc: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
