"""JSON run configuration (schema version 1)."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .kernel import Coefficients
from .quadrature import QuadratureSpec
from .stochastic import SpaceTimeGrid
from .weakform import TestFunction

OUTPUT_DIR_ENV = "SKEWHEAT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "skewheat-output"

SUITES = ("kernel-checks", "identity-scan", "mc-variance", "weak-equivalence", "refinement")


class ConfigError(ValueError):
    """Malformed or invalid run configuration; the message names the field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CoefficientsConfig(_Strict):
    a1: float = Field(gt=0, allow_inf_nan=False)
    a2: float = Field(gt=0, allow_inf_nan=False)
    rho1: float = Field(gt=0, allow_inf_nan=False)
    rho2: float = Field(gt=0, allow_inf_nan=False)

    def build(self) -> Coefficients:
        return Coefficients(self.a1, self.a2, self.rho1, self.rho2)


class GridConfig(_Strict):
    T: float = Field(gt=0, allow_inf_nan=False)
    L: float = Field(gt=0, allow_inf_nan=False)
    n_t: int = Field(ge=1)
    n_x: int = Field(ge=2)

    @field_validator("n_x")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("n_x must be even so no cell centre sits on the interface")
        return v

    def build(self) -> SpaceTimeGrid:
        return SpaceTimeGrid(self.T, self.L, self.n_t, self.n_x)


class SeedRange(_Strict):
    count: int = Field(ge=1)
    base: int = Field(default=0, ge=0)


class BumpConfig(_Strict):
    s0: float
    x0: float
    r_s: float = Field(gt=0)
    r_x: float = Field(gt=0)
    amplitude: float = 1.0

    def build(self) -> TestFunction:
        return TestFunction(self.s0, self.x0, self.r_s, self.r_x, self.amplitude)


class Tolerances(_Strict):
    quad_tol: float = Field(default=1e-10, gt=0)
    gaussian_reduction: float = Field(default=1e-14, gt=0)
    positivity: float = 0.0
    continuity: float = Field(default=1e-12, gt=0)
    derivative_fd: float = Field(default=1e-6, gt=0)
    rho_symmetry: float = Field(default=1e-12, gt=0)
    flux_jump: float = Field(default=1e-12, gt=0)
    pde_residual: float = Field(default=1e-4, gt=0)
    pde_order: float = Field(default=1.7, gt=0)
    semigroup: float = Field(default=1e-8, gt=0)
    normalization: float = Field(default=1e-8, gt=0)
    mc_se_homogeneous: float = Field(default=3.0, gt=0)
    mc_se_heterogeneous: float = Field(default=4.0, gt=0)
    weak_relative: float = Field(default=0.1, gt=0)
    weak_inversions: int = Field(default=1, ge=0)


class MonteCarloConfig(_Strict):
    replicates: int = Field(default=10_000, ge=2)
    eval_points: Optional[List[List[float]]] = None


class ScanConfig(_Strict):
    samples: int = Field(default=1000, ge=1)
    quadrature_samples: int = Field(default=100, ge=1)
    order_samples: int = Field(default=100, ge=1)
    seed: int = Field(default=2024, ge=0)


class RunConfig(_Strict):
    schema_version: Literal[1] = Field(alias="schema")
    coefficients: CoefficientsConfig
    grid: GridConfig
    seeds: Union[List[int], SeedRange] = Field(default_factory=lambda: SeedRange(count=10))
    test_functions: List[BumpConfig] = Field(default_factory=list)
    suites: List[Literal[SUITES]] = Field(default_factory=lambda: list(SUITES))  # type: ignore[valid-type]
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_dir: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    ladder: List[int] = Field(default_factory=lambda: [64, 128, 256, 512])
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)

    @field_validator("ladder")
    @classmethod
    def _nested(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("ladder must not be empty")
        for n in v:
            if n < 2 or n % 2:
                raise ValueError("ladder sizes must be even integers >= 2")
        for a, b in zip(v[:-1], v[1:]):
            if b <= a or b % a:
                raise ValueError("ladder sizes must increase, each dividing the next")
        return v

    def seed_list(self) -> list[int]:
        if isinstance(self.seeds, SeedRange):
            return list(range(self.seeds.base, self.seeds.base + self.seeds.count))
        return list(self.seeds)

    def bumps(self) -> list[TestFunction]:
        if self.test_functions:
            return [b.build() for b in self.test_functions]
        return [TestFunction.straddling(self.grid.T)]

    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(tol=self.tolerances.quad_tol)

    def resolve_output_dir(self, base: Path) -> Path:
        raw = self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
        path = Path(raw)
        return path if path.is_absolute() else base / path


def _line_of(text: str, loc: tuple) -> Optional[int]:
    pos, found = 0, False
    for key in loc:
        if not isinstance(key, str):
            continue
        idx = text.find(f'"{key}"', pos)
        if idx < 0:
            break
        pos, found = idx, True
    return text.count("\n", 0, pos) + 1 if found else None


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        messages = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            # drop union-branch tags pydantic inserts into the location
            field_path = ".".join(str(p) for p in loc if not (isinstance(p, str) and "[" in p))
            line = _line_of(text, loc)
            where = f" (line {line})" if line else ""
            messages.append(f"{field_path}: {err['msg']}{where}")
        raise ConfigError("; ".join(messages)) from exc
    try:
        for bump in cfg.bumps():
            bump.check_inside(cfg.grid.build())
    except ValueError as exc:
        raise ConfigError(f"test_functions: {exc}") from exc
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
