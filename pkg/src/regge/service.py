"""HTTP service exposing the validate/action/rp/observables commands.

The service is stateless: every request carries the complex document inline
and the full run configuration, and the response is the same report the CLI
writes to disk.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .action import default_ordering
from .files import DocumentError, parse_complex_document, parse_metric_document
from .geometry import NotRealizableError
from .mc import (AcceptanceFloorError, DegenerateWeightsError,
                 FeasibilityError)
from .runs import RunConfig, cmd_action, cmd_observables, cmd_rp, cmd_validate


class ReflectionModel(BaseModel):
    permutation: dict[int, int]
    k_plus_maximal: list[list[int]]


class ComplexModel(BaseModel):
    n: Optional[int] = None
    maximal_simplexes: list[list[int]]
    reflection: Optional[ReflectionModel] = None


class MetricModel(BaseModel):
    z: Union[dict[str, float], list[float]]


class ConfigFields(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    kappa: float = 10.0
    norm: Literal["sup", "l2"] = "sup"
    gamma: float = 1.0
    lam: float = Field(1.0, alias="lambda")
    samples: int = Field(10000, gt=0)
    seed: int = 0
    estimator: Literal["naive", "factorized"] = "naive"
    m_inner: int = Field(64, gt=0)
    n_z0: int = Field(1000, gt=0)
    delta: float = Field(0.01, gt=0)

    def to_config(self) -> RunConfig:
        return RunConfig(kappa=self.kappa, norm=self.norm, gamma=self.gamma,
                         lam=self.lam, samples=self.samples, seed=self.seed,
                         estimator=self.estimator, m_inner=self.m_inner,
                         n_z0=self.n_z0, delta=self.delta)


class ValidateRequest(ConfigFields):
    complex: ComplexModel
    metric: Optional[MetricModel] = None


class ActionRequest(ConfigFields):
    complex: ComplexModel
    metric: MetricModel


class RunRequest(ConfigFields):
    complex: ComplexModel


class Report(BaseModel):
    command: str
    config: dict
    results: dict
    version: str
    wall_time_s: float


app = FastAPI(title="regge", version=__version__,
              description="Regge-calculus geometry and reflection-positivity "
                          "checks on finite pseudomanifolds")


def _load(req) -> tuple:
    try:
        doc = parse_complex_document(
            req.complex.model_dump(exclude_none=True, by_alias=True))
    except DocumentError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    metric = None
    if getattr(req, "metric", None) is not None:
        try:
            metric = parse_metric_document(
                req.metric.model_dump(),
                default_ordering(doc.K, doc.reflection))
        except DocumentError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
    return doc, metric


def _run(fn):
    try:
        return fn()
    except (FeasibilityError, AcceptanceFloorError, DegenerateWeightsError,
            NotRealizableError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/validate", response_model=Report)
def validate(req: ValidateRequest):
    doc, metric = _load(req)
    report, _ok = _run(lambda: cmd_validate(doc, req.to_config(), metric))
    return report


@app.post("/action", response_model=Report)
def action(req: ActionRequest):
    doc, metric = _load(req)
    return _run(lambda: cmd_action(doc, metric, req.to_config()))


@app.post("/rp", response_model=Report)
def rp(req: RunRequest):
    doc, _ = _load(req)
    return _run(lambda: cmd_rp(doc, req.to_config()))


@app.post("/observables", response_model=Report)
def observables(req: RunRequest):
    doc, _ = _load(req)
    return _run(lambda: cmd_observables(doc, req.to_config()))
