"""HTTP service exposing evaluation, estimation, solving, and checking.

Every endpoint is a stateless computation: JSON payload in, JSON result
out.  File handling lives in the CLI client; the service never touches
the filesystem, which keeps results reproducible across deployments.
"""

from __future__ import annotations

import time

import numpy as np
from fastapi import FastAPI, HTTPException

from cptdp import __version__
from cptdp.bellman import (
    SolveConfig,
    StructuralConditionError,
    contraction_condition_check,
    k_step_contraction_probe,
    monotonicity_probe,
    value_iteration,
)
from cptdp.cpt import cpt_decomposition, cpt_value_quadrature
from cptdp.estimator import DiscreteSampler, convergence_study
from cptdp.generators import crafted_randomized_optimality, gridworld, random_mdp
from cptdp.mdp import (
    Discounted,
    MarkovModel,
    RandomizedPolicy,
    ValueFunction,
    pliska_check,
    uniform_transience_certificate,
    validate_model,
)
from cptdp.schemas import (
    BenchInstance,
    BenchRequest,
    BenchResponse,
    CheckRequest,
    CheckResponse,
    CheckResult,
    EstimateRequest,
    EstimateResponse,
    EstimateRow,
    EvaluateRequest,
    EvaluateResponse,
    GeneratorModel,
    SolveRequest,
    SolveResponse,
)

__all__ = ["create_app", "app", "instance_seed"]


def instance_seed(master: int, index: int) -> int:
    """Per-instance seed fan-out: SeedSequence((master, index))."""
    return int(np.random.SeedSequence((master, index)).generate_state(1)[0])


def _bad_request(exc: ValueError) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def _materialize_model(payload) -> MarkovModel:
    model = payload.to_core()
    report = validate_model(model)
    if not report.ok:
        raise HTTPException(status_code=400, detail=f"model failed validation: {report}")
    return model


def _solve(model: MarkovModel, spec, config: SolveConfig, initial_values):
    J0 = None
    if initial_values:
        J0 = ValueFunction.from_dict(model, initial_values)
    return value_iteration(model, spec, J0, config)


def _generate_instances(gen: GeneratorModel, master_seed: int) -> list[tuple[str, MarkovModel]]:
    out = []
    for i in range(gen.count):
        if gen.kind == "random_mdp":
            mode = gen.mode.to_core() if gen.mode is not None else Discounted(0.9)
            m = random_mdp(
                gen.n_states,
                gen.n_actions,
                gen.n_disturbances,
                (gen.cost_lo, gen.cost_hi),
                mode,
                seed=instance_seed(master_seed, i),
            )
            out.append((f"random_mdp[{i}]", m))
        elif gen.kind == "gridworld":
            out.append((f"gridworld[{i}]", gridworld(gen.width, gen.height, gen.step_cost, gen.noise)))
        else:
            out.append((f"crafted_randomized_optimality[{i}]", crafted_randomized_optimality()))
    return out


def create_app() -> FastAPI:
    app = FastAPI(
        title="cptdp",
        description="Risk-sensitive dynamic programming under cumulative prospect theory",
        version=__version__,
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        try:
            spec = req.spec.to_core()
            dist = req.distribution.to_core()
            pos, neg = cpt_decomposition(dist, spec)
            quad = None
            if req.quadrature_tol is not None:
                quad = cpt_value_quadrature(dist, spec, req.quadrature_tol)
        except ValueError as exc:
            raise _bad_request(exc)
        return EvaluateResponse(
            value=pos - neg, positive_part=pos, negative_part=neg, quadrature_value=quad
        )

    @app.post("/estimate", response_model=EstimateResponse)
    def estimate(req: EstimateRequest) -> EstimateResponse:
        try:
            spec = req.spec.to_core()
            sampler = DiscreteSampler(req.law.to_core(), seed=req.seed)
            table = convergence_study(sampler, spec, req.ns, req.repeats)
        except ValueError as exc:
            raise _bad_request(exc)
        rows = [
            EstimateRow(n=r.n, repeat=r.repeat, estimate=r.estimate, abs_error=r.abs_error)
            for r in table.rows
        ]
        return EstimateResponse(ground_truth=table.ground_truth, rows=rows)

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        try:
            model = _materialize_model(req.model)
            spec = req.spec.to_core()
            result = _solve(model, spec, req.config.to_core(), req.model.initial_values)
        except ValueError as exc:
            raise _bad_request(exc)
        return SolveResponse(
            values=result.value.to_dict(),
            policy=result.policy.to_dict(model),
            residuals=list(result.trace),
            iterations=result.iterations,
            converged=result.converged,
        )

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest) -> CheckResponse:
        try:
            model = req.model.to_core()
            spec = req.spec.to_core()
        except ValueError as exc:
            raise _bad_request(exc)
        results: list[CheckResult] = []

        report = validate_model(model)
        results.append(
            CheckResult(
                name="model-validation",
                passed=report.ok,
                detail="ok" if report.ok else "; ".join(str(v) for v in report.violations),
            )
        )
        if not report.ok:
            return CheckResponse(results=results)

        violations = monotonicity_probe(model, spec, req.trials, req.seed)
        results.append(
            CheckResult(
                name="monotonicity-probe",
                passed=not violations,
                detail=(
                    f"no violations in {req.trials} trials"
                    if not violations
                    else f"{len(violations)} violations, first at state {violations[0].state!r}"
                ),
            )
        )

        if isinstance(model.mode, Discounted):
            try:
                chk = contraction_condition_check(spec, model.mode.alpha, model.cost_bound)
                results.append(
                    CheckResult(
                        name="contraction-condition",
                        passed=chk.passed,
                        detail=f"beta_hat={chk.beta_hat!r} at level {chk.worst_level!r}",
                    )
                )
            except StructuralConditionError as exc:
                results.append(
                    CheckResult(name="contraction-condition", passed=False, detail=str(exc))
                )
        else:
            bound, certified = uniform_transience_certificate(model, horizon=5000)
            results.append(
                CheckResult(
                    name="uniform-transience",
                    passed=certified,
                    detail=f"worst-case non-absorption bound {bound!r}"
                    + ("" if certified else " (not settled within horizon)"),
                )
            )
            p_bound, p_conv = pliska_check(
                model, RandomizedPolicy.uniform(model), horizon=5000, tol=1e-10
            )
            results.append(
                CheckResult(
                    name="pliska-uniform-policy",
                    passed=p_conv,
                    detail=f"bound {p_bound!r}",
                )
            )
            try:
                K = k_step_contraction_probe(model, spec, req.k_max, max(req.trials // 10, 20), req.seed)
                results.append(
                    CheckResult(
                        name="k-step-contraction",
                        passed=K is not None,
                        detail=f"K={K}" if K is not None else f"no K <= {req.k_max} observed",
                    )
                )
            except StructuralConditionError as exc:
                results.append(
                    CheckResult(name="k-step-contraction", passed=False, detail=str(exc))
                )
        return CheckResponse(results=results)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest) -> BenchResponse:
        try:
            spec = req.spec.to_core()
            config = req.config.to_core()
            instances = _generate_instances(req.generator, req.seed)
        except ValueError as exc:
            raise _bad_request(exc)
        rows: list[BenchInstance] = []
        for i, (label, model) in enumerate(instances):
            t0 = time.perf_counter()
            result = value_iteration(model, spec, None, config)
            elapsed = time.perf_counter() - t0
            trace = result.trace
            ratio = trace[-1] / trace[-2] if len(trace) >= 2 and trace[-2] > 0 else float("nan")
            rows.append(
                BenchInstance(
                    index=i,
                    label=label,
                    n_states=model.n_states,
                    iterations=result.iterations,
                    converged=result.converged,
                    final_residual=trace[-1] if trace else 0.0,
                    residual_ratio=ratio,
                    wall_time_s=elapsed,
                    values=result.value.to_dict(),
                    policy=result.policy.to_dict(model),
                )
            )
        return BenchResponse(instances=rows)

    return app


app = create_app()
