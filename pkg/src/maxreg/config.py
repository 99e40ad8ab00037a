"""JSON run configuration: schema, defaults and loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from maxreg.harness import DEFAULT_GRIDS, F_KINDS, U0_CLASSES
from maxreg.pde import BUILDERS

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["example", "mesh_n", "tau", "p", "alpha"],
    "properties": {
        "example": {"enum": sorted(BUILDERS)},
        "mesh_n": {"type": "integer", "minimum": 2},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "alpha": {"type": "number", "minimum": 0},
        "beta_gamma": {
            "type": "array", "minItems": 2, "maxItems": 2,
            "items": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "u0_class": {"enum": list(U0_CLASSES)},
        "u0_seed": {"type": "integer"},
        "f_spec": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": list(F_KINDS)}, "seed": {"type": "integer"}},
        },
        "grids": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 2}},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gauss_order": {"type": "integer", "minimum": 1},
                "grading_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "panels": {"type": "integer", "minimum": 1},
            },
        },
        "mu_shift": {"type": "number", "minimum": 0},
        "output": {"type": "string", "minLength": 1},
    },
}


class ConfigError(ValueError):
    """Schema violation; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    example: str
    mesh_n: int
    tau: float
    p: float
    alpha: float
    beta_gamma: tuple[float, float] | None = None
    u0_class: str = "zero"
    u0_seed: int = 0
    f_kind: str = "random_smooth"
    f_seed: int = 0
    grids: tuple[int, ...] = DEFAULT_GRIDS
    quadrature: dict = field(default_factory=dict)
    mu_shift: float = 0.0
    output: str = "maxreg_report"

    def quadrature_kwargs(self) -> dict:
        q = self.quadrature
        out = {}
        if "gauss_order" in q:
            out["gauss_order"] = q["gauss_order"]
        if "grading_ratio" in q:
            out["grading_ratio"] = q["grading_ratio"]
        if "panels" in q:
            out["panels_per_interval"] = q["panels"]
        return out


def _field_of(err: jsonschema.ValidationError) -> str:
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        prefix = ".".join(str(x) for x in err.absolute_path)
        return ".".join(filter(None, [prefix, missing[0] if missing else ""]))
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        prefix = ".".join(str(x) for x in err.absolute_path)
        return ".".join(filter(None, [prefix, extra[0] if extra else ""]))
    return ".".join(str(x) for x in err.absolute_path) or "<root>"


def parse_config(doc: dict) -> RunConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"field '{_field_of(err)}': {err.message}")
    f_spec = doc.get("f_spec", {"kind": "random_smooth"})
    return RunConfig(
        example=doc["example"],
        mesh_n=doc["mesh_n"],
        tau=float(doc["tau"]),
        p=float(doc["p"]),
        alpha=float(doc["alpha"]),
        beta_gamma=tuple(doc["beta_gamma"]) if "beta_gamma" in doc else None,
        u0_class=doc.get("u0_class", "zero"),
        u0_seed=doc.get("u0_seed", 0),
        f_kind=f_spec["kind"],
        f_seed=f_spec.get("seed", 0),
        grids=tuple(doc.get("grids", DEFAULT_GRIDS)),
        quadrature=dict(doc.get("quadrature", {})),
        mu_shift=float(doc.get("mu_shift", 0.0)),
        output=doc.get("output", "maxreg_report"),
    )


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("field '<root>': config must be a JSON object")
    return parse_config(doc)
