"""Pydantic payload models: the wire format of the service and the file
format of the CLI are the same structured documents."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from cptdp.cpt import (
    CptSpec,
    DiscreteDistribution,
    IdentityUtility,
    IdentityWeighting,
    PowerUtility,
    ScaledUtility,
    TabulatedWeighting,
    TverskyKahnemanWeighting,
    UtilityFunction,
    WeightingFunction,
)
from cptdp.mdp import Discounted, MarkovModel, Outcome, Transient
from cptdp.bellman import SolveConfig


class WeightingModel(BaseModel):
    family: Literal["identity", "tversky_kahneman", "tabulated"]
    delta: float | None = None
    knots: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _complete(self) -> "WeightingModel":
        if self.family == "tversky_kahneman" and self.delta is None:
            raise ValueError("tversky_kahneman weighting requires 'delta'")
        if self.family == "tabulated" and not self.knots:
            raise ValueError("tabulated weighting requires 'knots'")
        return self

    def to_core(self) -> WeightingFunction:
        if self.family == "identity":
            return IdentityWeighting()
        if self.family == "tversky_kahneman":
            return TverskyKahnemanWeighting(self.delta)
        return TabulatedWeighting(tuple(tuple(k) for k in self.knots))

    @classmethod
    def from_core(cls, w: WeightingFunction) -> "WeightingModel":
        if isinstance(w, IdentityWeighting):
            return cls(family="identity")
        if isinstance(w, TverskyKahnemanWeighting):
            return cls(family="tversky_kahneman", delta=w.delta)
        if isinstance(w, TabulatedWeighting):
            return cls(family="tabulated", knots=[list(k) for k in w.knots])
        raise TypeError(f"unknown weighting {type(w).__name__}")


class UtilityModel(BaseModel):
    family: Literal["identity", "power", "scaled"]
    exponent: float | None = None
    factor: float | None = None
    base: "UtilityModel | None" = None

    @model_validator(mode="after")
    def _complete(self) -> "UtilityModel":
        if self.family == "power" and self.exponent is None:
            raise ValueError("power utility requires 'exponent'")
        if self.family == "scaled" and (self.factor is None or self.base is None):
            raise ValueError("scaled utility requires 'factor' and 'base'")
        return self

    def to_core(self) -> UtilityFunction:
        if self.family == "identity":
            return IdentityUtility()
        if self.family == "power":
            return PowerUtility(self.exponent)
        return ScaledUtility(self.base.to_core(), self.factor)

    @classmethod
    def from_core(cls, u: UtilityFunction) -> "UtilityModel":
        if isinstance(u, IdentityUtility):
            return cls(family="identity")
        if isinstance(u, PowerUtility):
            return cls(family="power", exponent=u.exponent)
        if isinstance(u, ScaledUtility):
            return cls(family="scaled", factor=u.factor, base=cls.from_core(u.base))
        raise TypeError(f"unknown utility {type(u).__name__}")


class CptSpecModel(BaseModel):
    reference_point: float = 0.0
    utility_gain: UtilityModel
    utility_loss: UtilityModel
    weighting_gain: WeightingModel
    weighting_loss: WeightingModel

    def to_core(self) -> CptSpec:
        return CptSpec(
            reference_point=self.reference_point,
            u_plus=self.utility_gain.to_core(),
            u_minus=self.utility_loss.to_core(),
            w_plus=self.weighting_gain.to_core(),
            w_minus=self.weighting_loss.to_core(),
        )

    @classmethod
    def from_core(cls, spec: CptSpec) -> "CptSpecModel":
        return cls(
            reference_point=spec.reference_point,
            utility_gain=UtilityModel.from_core(spec.u_plus),
            utility_loss=UtilityModel.from_core(spec.u_minus),
            weighting_gain=WeightingModel.from_core(spec.w_plus),
            weighting_loss=WeightingModel.from_core(spec.w_minus),
        )


class DistributionModel(BaseModel):
    atoms: list[tuple[float, float]]
    subnormalized: bool = False

    def to_core(self) -> DiscreteDistribution:
        return DiscreteDistribution(
            tuple(tuple(a) for a in self.atoms), subnormalized=self.subnormalized
        )

    @classmethod
    def from_core(cls, dist: DiscreteDistribution) -> "DistributionModel":
        return cls(atoms=[list(a) for a in dist.atoms], subnormalized=dist.subnormalized)


class OutcomeModel(BaseModel):
    disturbance: str
    mass: float
    next: str
    cost: float


class ModeModel(BaseModel):
    kind: Literal["discounted", "transient"]
    alpha: float | None = None
    absorbing: str | None = None

    @model_validator(mode="after")
    def _complete(self) -> "ModeModel":
        if self.kind == "discounted" and self.alpha is None:
            raise ValueError("discounted mode requires 'alpha'")
        if self.kind == "transient" and self.absorbing is None:
            raise ValueError("transient mode requires 'absorbing'")
        return self

    def to_core(self) -> Discounted | Transient:
        if self.kind == "discounted":
            return Discounted(self.alpha)
        return Transient(self.absorbing)


class MdpModel(BaseModel):
    """Markov control model document: states, mode, cost bound, and per
    state/action disturbance outcomes; optional starting value function."""

    states: list[str]
    mode: ModeModel
    cost_bound: float
    actions: dict[str, dict[str, list[OutcomeModel]]]
    initial_values: dict[str, float] | None = None

    def to_core(self) -> MarkovModel:
        feasible = {s: tuple(acts.keys()) for s, acts in self.actions.items()}
        outcomes = {
            (s, a): tuple(
                Outcome(o.disturbance, o.mass, o.next, o.cost) for o in rows
            )
            for s, acts in self.actions.items()
            for a, rows in acts.items()
        }
        return MarkovModel(
            states=tuple(self.states),
            feasible_actions=feasible,
            outcomes=outcomes,
            cost_bound=self.cost_bound,
            mode=self.mode.to_core(),
        )

    @classmethod
    def from_core(cls, model: MarkovModel, initial_values: dict[str, float] | None = None) -> "MdpModel":
        if isinstance(model.mode, Discounted):
            mode = ModeModel(kind="discounted", alpha=model.mode.alpha)
        else:
            mode = ModeModel(kind="transient", absorbing=model.mode.absorbing)
        actions: dict[str, dict[str, list[OutcomeModel]]] = {}
        for s in model.states:
            acts = {}
            for a in model.actions(s):
                acts[a] = [
                    OutcomeModel(
                        disturbance=o.disturbance, mass=o.mass, next=o.next_state, cost=o.cost
                    )
                    for o in model.outcomes[(s, a)]
                ]
            actions[s] = acts
        return cls(
            states=list(model.states),
            mode=mode,
            cost_bound=model.cost_bound,
            actions=actions,
            initial_values=initial_values,
        )


class SolveConfigModel(BaseModel):
    tol: float = 1e-9
    max_iter: int = 1000
    simplex_resolution: int = 10
    refine_steps: int = 2
    deterministic_only: bool = False

    def to_core(self) -> SolveConfig:
        return SolveConfig(
            tol=self.tol,
            max_iter=self.max_iter,
            simplex_resolution=self.simplex_resolution,
            refine_steps=self.refine_steps,
            deterministic_only=self.deterministic_only,
        )


class GeneratorModel(BaseModel):
    kind: Literal["random_mdp", "gridworld", "crafted_randomized_optimality"]
    count: int = 1
    n_states: int = 20
    n_actions: int = 4
    n_disturbances: int = 3
    cost_lo: float = -1.0
    cost_hi: float = 1.0
    mode: ModeModel | None = None
    width: int = 5
    height: int = 5
    step_cost: float = 1.0
    noise: float = 0.0


# -- request / response payloads -------------------------------------------


class EvaluateRequest(BaseModel):
    spec: CptSpecModel
    distribution: DistributionModel
    quadrature_tol: float | None = None


class EvaluateResponse(BaseModel):
    value: float
    positive_part: float
    negative_part: float
    quadrature_value: float | None = None


class EstimateRequest(BaseModel):
    spec: CptSpecModel
    law: DistributionModel
    ns: list[int]
    repeats: int = 20
    seed: int = 0


class EstimateRow(BaseModel):
    n: int
    repeat: int
    estimate: float
    abs_error: float


class EstimateResponse(BaseModel):
    ground_truth: float
    rows: list[EstimateRow]


class SolveRequest(BaseModel):
    model: MdpModel
    spec: CptSpecModel
    config: SolveConfigModel = Field(default_factory=SolveConfigModel)
    seed: int = 0


class SolveResponse(BaseModel):
    values: dict[str, float]
    policy: dict[str, dict[str, float]]
    residuals: list[float]
    iterations: int
    converged: bool


class CheckRequest(BaseModel):
    model: MdpModel
    spec: CptSpecModel
    trials: int = 1000
    seed: int = 0
    k_max: int = 25


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str


class CheckResponse(BaseModel):
    results: list[CheckResult]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)


class BenchRequest(BaseModel):
    generator: GeneratorModel
    spec: CptSpecModel
    config: SolveConfigModel = Field(default_factory=SolveConfigModel)
    seed: int = 0


class BenchInstance(BaseModel):
    index: int
    label: str
    n_states: int
    iterations: int
    converged: bool
    final_residual: float
    residual_ratio: float
    wall_time_s: float
    values: dict[str, float]
    policy: dict[str, dict[str, float]]


class BenchResponse(BaseModel):
    instances: list[BenchInstance]
