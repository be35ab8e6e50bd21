"""Simulation parameters, validation and the JSON scenario format."""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

LAMBDA_TOL = 1e-12
MAX_DELTA = 65534  # division sizes are stored as uint16 and reach delta + 1


class DivisionType(enum.IntEnum):
    OLD = 0
    NEW = 1


class SelectionMode(str, enum.Enum):
    ARGMAX_IMPROVE = "ArgmaxImprove"
    LOGIT_SAMPLE = "LogitSample"


class InitSizePolicy(str, enum.Enum):
    ZERO = "Zero"
    UNIFORM_RANDOM = "UniformRandom"


class Topology(str, enum.Enum):
    PLANAR = "Planar"


class CellId(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class TypeParams:
    """Per-type distance decays, utility weights and maximum size."""

    alpha_mp: float = 0.5
    alpha_ap: float = 0.5
    alpha_cp: float = 0.5
    beta_mp: float = 1.0
    beta_ap: float = 0.5
    beta_cp: float = -1.0
    delta_max: int = 50


@dataclass(frozen=True)
class SimConfig:
    width: int = 50
    height: int = 50
    params_old: TypeParams = field(default_factory=TypeParams)
    params_new: TypeParams = field(
        default_factory=lambda: TypeParams(0.4, 0.4, 0.4, 1.0, 0.5, -1.0, 10)
    )
    phi: float = 0.1
    lambda1: float = 1.0 - 0.19 - 0.003
    lambda2: float = 0.19
    lambda3: float = 0.003
    selection_mode: SelectionMode = SelectionMode.ARGMAX_IMPROVE
    init_size_policy: InitSizePolicy = InitSizePolicy.UNIFORM_RANDOM
    initial_divisions: int = 2500
    steps: int = 210
    metric_distance: float = 10.0
    seed: int = 0
    topology: Topology = Topology.PLANAR

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def params(self, dtype: DivisionType) -> TypeParams:
        return self.params_new if dtype == DivisionType.NEW else self.params_old

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_lambdas(self, lambda2: float, lambda3: float) -> "SimConfig":
        """Set the two relocation probabilities; the stay probability absorbs the rest."""
        return self.replace(lambda1=1.0 - lambda2 - lambda3, lambda2=lambda2, lambda3=lambda3)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for key in ("selection_mode", "init_size_policy", "topology"):
            out[key] = getattr(self, key).value
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SimConfig":
        return config_from_dict(raw)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


class Violation(NamedTuple):
    code: str
    message: str


class ConfigError(ValueError):
    """Raised with the complete list of violations found in a config."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


_TYPE_FIELDS = {f.name for f in dataclasses.fields(TypeParams)}
_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SimConfig)}


def _type_params_from_dict(raw: Any, where: str) -> TypeParams:
    if not isinstance(raw, dict):
        raise ConfigError([Violation("SchemaError", f"{where} must be an object")])
    unknown = sorted(set(raw) - _TYPE_FIELDS)
    if unknown:
        raise ConfigError([Violation("UnknownKey", f"{where}: unknown keys {unknown}")])
    return TypeParams(**raw)


def config_from_dict(raw: dict[str, Any]) -> SimConfig:
    """Build a config from a JSON-style mapping. Unknown keys are rejected;
    missing keys take the defaults (the Model 4 base specification)."""
    if not isinstance(raw, dict):
        raise ConfigError([Violation("SchemaError", "config must be a JSON object")])
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError([Violation("UnknownKey", f"unknown keys {unknown}")])
    kw = dict(raw)
    for key in ("params_old", "params_new"):
        if key in kw:
            kw[key] = _type_params_from_dict(kw[key], key)
    try:
        if "selection_mode" in kw:
            kw["selection_mode"] = SelectionMode(kw["selection_mode"])
        if "init_size_policy" in kw:
            kw["init_size_policy"] = InitSizePolicy(kw["init_size_policy"])
        if "topology" in kw:
            kw["topology"] = Topology(kw["topology"])
    except ValueError as exc:
        raise ConfigError([Violation("SchemaError", str(exc))]) from None
    return SimConfig(**kw)


def load_config(path: str | Path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return validate_config(config_from_dict(raw))


def save_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.to_json() + "\n", encoding="utf-8")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def validate_config(raw: SimConfig) -> SimConfig:
    """Return ``raw`` unchanged if it is valid, else raise :class:`ConfigError`
    listing every violation."""
    errs: list[Violation] = []
    for name in ("width", "height", "initial_divisions", "steps"):
        value = getattr(raw, name)
        if not _is_int(value) or (value < 0 if name == "steps" else value <= 0):
            errs.append(Violation("NonPositiveInteger", f"{name}={value!r}"))

    for label, tp in (("old", raw.params_old), ("new", raw.params_new)):
        for name in ("alpha_mp", "alpha_ap", "alpha_cp"):
            value = getattr(tp, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                errs.append(Violation("NonPositiveAlpha", f"{name}({label})={value!r}"))
        for name in ("beta_mp", "beta_ap", "beta_cp"):
            value = getattr(tp, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                errs.append(Violation("NonFiniteBeta", f"{name}({label})={value!r}"))
        if not _is_int(tp.delta_max) or tp.delta_max < 1:
            errs.append(Violation("DeltaTooSmall", f"delta_max({label})={tp.delta_max!r}"))
        elif tp.delta_max > MAX_DELTA:
            errs.append(Violation("DeltaTooLarge", f"delta_max({label})={tp.delta_max} > {MAX_DELTA}"))

    if not (0.0 <= raw.phi <= 1.0):
        errs.append(Violation("PhiOutOfRange", f"phi={raw.phi!r}"))
    lambdas = (raw.lambda1, raw.lambda2, raw.lambda3)
    if any(not (0.0 <= lam <= 1.0) for lam in lambdas):
        errs.append(Violation("LambdaOutOfRange", f"lambdas={lambdas}"))
    if abs(sum(lambdas) - 1.0) > LAMBDA_TOL:
        errs.append(Violation("LambdaSumInvalid", f"lambda1+lambda2+lambda3={sum(lambdas)!r}"))
    if not (raw.metric_distance > 0):
        errs.append(Violation("NonPositiveDistance", f"metric_distance={raw.metric_distance!r}"))
    if not _is_int(raw.seed):
        errs.append(Violation("SchemaError", f"seed must be an integer, got {raw.seed!r}"))
    if (
        _is_int(raw.width) and _is_int(raw.height) and _is_int(raw.initial_divisions)
        and raw.initial_divisions > raw.width * raw.height
    ):
        errs.append(Violation(
            "TooManyInitialDivisions",
            f"{raw.initial_divisions} divisions on {raw.width}x{raw.height} cells",
        ))
    if errs:
        raise ConfigError(errs)
    return raw
