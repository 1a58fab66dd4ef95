"""Run configuration: a strict JSON schema with every default made explicit."""

from __future__ import annotations

import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import RMHopfError

COMMANDS = (
    "equilibria", "regime", "jacobian", "covariance", "lyapunov", "psd",
    "ellipse", "precursor", "simulate", "compare-closures", "sweep-k",
)
ClosureName = Literal["bernoulli", "effective", "split"]

_VALUE_ERRORS = {
    "greater_than", "greater_than_equal", "less_than", "less_than_equal",
    "value_error", "finite_number", "too_short", "too_long",
}


class SchemaError(RMHopfError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ConfigValueError(RMHopfError, ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class ModelBlock(_Strict):
    m: float = Field(gt=0)
    c: float = Field(gt=0)
    k: float = Field(gt=0)
    omega: float = Field(gt=0)
    e: float = Field(1.0, gt=0, le=1)


class StateBlock(_Strict):
    N: float = Field(ge=0)
    P: float = Field(ge=0)


class PsdGrid(_Strict):
    """Nonnegative angular-frequency grid; ``omega_max=None`` means 4x the spectral scale of J."""

    omega_min: float = Field(0.0, ge=0)
    omega_max: Optional[float] = Field(None, gt=0)
    n: int = Field(2001, ge=2)


class KGrid(_Strict):
    """Either explicit ``values`` or ``n`` points on ``[k_min, k_max]``.

    Missing bounds default to just above the feasibility limit and 0.99 k_H.
    """

    values: Optional[list[float]] = None
    k_min: Optional[float] = Field(None, gt=0)
    k_max: Optional[float] = Field(None, gt=0)
    n: int = Field(20, ge=1)

    @field_validator("values")
    @classmethod
    def _increasing(cls, v):
        if v is not None:
            if not v:
                raise ValueError("values must not be empty")
            if any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("values must be strictly increasing")
            if any(x <= 0 for x in v):
                raise ValueError("values must be positive")
        return v


class CompareBlock(_Strict):
    closures: tuple[ClosureName, ClosureName] = ("bernoulli", "split")


class SimulationBlock(_Strict):
    scheme: Literal["ssa", "diffusion", "ou"] = "ssa"
    viewpoint: Literal["open", "absorbed"] = "absorbed"
    t_end: float = Field(100.0, gt=0)
    dt: float = Field(1e-3, gt=0)
    burn_in: float = Field(0.0, ge=0)
    sample_stride: float = Field(0.1, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    n_replicates: int = Field(1, ge=1)
    initial_state: Optional[StateBlock] = None
    psd_segment_length: Optional[int] = Field(None, ge=2)
    psd_overlap: float = Field(0.5, ge=0, lt=1)

    @model_validator(mode="after")
    def _windows(self):
        if self.dt >= self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if self.burn_in >= self.t_end:
            raise ValueError("burn_in must be smaller than t_end")
        return self


class OutputBlock(_Strict):
    path: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class RunConfig(_Strict):
    command: Literal[COMMANDS]
    model: ModelBlock
    closure: ClosureName = "bernoulli"
    p: float = Field(0.95, gt=0, lt=1)
    d_sep: Optional[float] = Field(None, gt=0)
    state: Optional[StateBlock] = None
    psd_grid: PsdGrid = PsdGrid()
    k_grid: KGrid = KGrid()
    compare: CompareBlock = CompareBlock()
    simulation: SimulationBlock = SimulationBlock()
    output: OutputBlock = OutputBlock()

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _pointer(loc) -> str:
    return "".join(f"/{part}" for part in loc)


def validate_config(data) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        # model_validator errors point at the enclosing block
        pointer = _pointer(err["loc"])
        if err["type"] in _VALUE_ERRORS:
            raise ConfigValueError(pointer, err["msg"]) from None
        raise SchemaError(pointer, err["msg"]) from None


def parse_config(raw: bytes | str) -> RunConfig:
    """Validate a UTF-8 JSON document into a :class:`RunConfig`."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError("", f"config is not valid UTF-8: {exc}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("", "top level must be a JSON object")
    return validate_config(data)
