"""Command-line client for the cptdp service.

Commands parse input documents, post them to the service (an in-process
application instance by default, or a remote server via ``--server``),
and write any CSV/report artifacts locally.  Failures exit nonzero with
a single machine-parseable ``error[<code>]: ...`` line on stderr.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx

from cptdp import __version__
from cptdp.fileio import (
    LoadError,
    load_distribution,
    load_generator,
    load_model,
    load_spec,
    write_csv,
    write_yaml,
)
from cptdp.schemas import (
    BenchRequest,
    CheckRequest,
    CptSpecModel,
    DistributionModel,
    EstimateRequest,
    EvaluateRequest,
    SolveConfigModel,
    SolveRequest,
)

SEED_SCHEME = "numpy SeedSequence((master_seed, instance_index))"


def fail(code: str, message: str) -> None:
    click.echo(f"error[{code}]: {message}", err=True)
    sys.exit(1)


class ServiceClient:
    """Thin HTTP client; in-process app unless a server URL is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.filterwarnings(
                    "ignore", message="Using `httpx` with `starlette.testclient`"
                )
                from fastapi.testclient import TestClient

            from cptdp.service import create_app

            self._client = TestClient(create_app())

    def post(self, endpoint: str, payload) -> dict:
        try:
            resp = self._client.post(endpoint, json=payload.model_dump(mode="json"))
        except httpx.HTTPError as exc:
            fail("connection", f"service unreachable: {exc}")
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            fail("service", f"{endpoint} rejected the request: {detail}")
        return resp.json()


def _spec_payload(path: str) -> CptSpecModel:
    return CptSpecModel.from_core(load_spec(path))


server_option = click.option("--server", default=None, help="remote service URL (default: run in-process)")
seed_option = click.option("--seed", default=0, show_default=True, help="master seed")
out_option = click.option("--out", required=True, type=click.Path(), help="output directory")


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Risk-sensitive dynamic programming under cumulative prospect theory."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="CPT spec document")
@click.option("--dist", "dist_path", required=True, type=click.Path(), help="distribution document")
@click.option("--quad-tol", default=None, type=float, help="also cross-check by quadrature at this tolerance")
@server_option
def evaluate(spec_path: str, dist_path: str, quad_tol: float | None, server: str | None) -> None:
    """Print the exact CPT value of a distribution under a spec."""
    try:
        spec = _spec_payload(spec_path)
        dist = DistributionModel.from_core(load_distribution(dist_path))
    except LoadError as exc:
        fail("invalid-input", str(exc))
    req = EvaluateRequest(spec=spec, distribution=dist, quadrature_tol=quad_tol)
    body = ServiceClient(server).post("/evaluate", req)
    click.echo(repr(body["value"]))
    if body.get("quadrature_value") is not None:
        click.echo(f"quadrature: {body['quadrature_value']!r}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--dist", "dist_path", required=True, type=click.Path(), help="law to sample from")
@click.option("--ns", required=True, help="comma-separated ascending sample sizes, e.g. 100,1000,10000")
@click.option("--repeats", default=20, show_default=True)
@out_option
@seed_option
@server_option
def estimate(spec_path, dist_path, ns, repeats, out, seed, server) -> None:
    """Sample-based estimation error curve, written as CSV."""
    try:
        spec = _spec_payload(spec_path)
        law = DistributionModel.from_core(load_distribution(dist_path))
        sizes = [int(tok) for tok in ns.split(",") if tok.strip()]
    except LoadError as exc:
        fail("invalid-input", str(exc))
    except ValueError:
        fail("invalid-input", f"--ns must be comma-separated integers, got {ns!r}")
    req = EstimateRequest(spec=spec, law=law, ns=sizes, repeats=repeats, seed=seed)
    body = ServiceClient(server).post("/estimate", req)
    rows = [(r["n"], r["repeat"], r["estimate"], r["abs_error"]) for r in body["rows"]]
    write_csv(Path(out) / "estimate.csv", ("n", "repeat", "estimate", "abs_error"), rows)
    click.echo(f"ground truth: {body['ground_truth']!r}")
    click.echo(f"wrote {len(rows)} rows to {Path(out) / 'estimate.csv'}")


def _config_from_flags(tol, max_iter, simplex_res, deterministic_only) -> SolveConfigModel:
    return SolveConfigModel(
        tol=tol,
        max_iter=max_iter,
        simplex_resolution=simplex_res,
        deterministic_only=deterministic_only,
    )


solver_options = [
    click.option("--tol", default=1e-9, show_default=True, help="sup-norm stopping threshold"),
    click.option("--max-iter", default=1000, show_default=True),
    click.option("--simplex-res", default=10, show_default=True, help="action-mix grid resolution"),
    click.option("--deterministic-only", is_flag=True, help="search deterministic actions only"),
]


def with_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn

    return wrap


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--spec", "spec_path", required=True, type=click.Path())
@with_options(solver_options)
@out_option
@seed_option
@server_option
def solve(model_path, spec_path, tol, max_iter, simplex_res, deterministic_only, out, seed, server) -> None:
    """Run CPT value iteration; write a report and the residual trace."""
    try:
        doc = load_model(model_path)
        spec = _spec_payload(spec_path)
    except LoadError as exc:
        fail("invalid-input", str(exc))
    req = SolveRequest(
        model=doc.payload,
        spec=spec,
        config=_config_from_flags(tol, max_iter, simplex_res, deterministic_only),
        seed=seed,
    )
    body = ServiceClient(server).post("/solve", req)
    out_dir = Path(out)
    report = {
        "header": {
            "command": "solve",
            "master_seed": seed,
            "seed_scheme": SEED_SCHEME,
            "model": str(model_path),
            "spec": str(spec_path),
            "config": req.config.model_dump(),
        },
        "converged": body["converged"],
        "iterations": body["iterations"],
        "final_residual": body["residuals"][-1] if body["residuals"] else 0.0,
        "values": body["values"],
        "policy": body["policy"],
    }
    write_yaml(out_dir / "solve_report.yaml", report)
    write_csv(
        out_dir / "residuals.csv",
        ("iteration", "residual"),
        [(i + 1, r) for i, r in enumerate(body["residuals"])],
    )
    click.echo(f"converged: {body['converged']} after {body['iterations']} sweeps")
    click.echo(f"wrote {out_dir / 'solve_report.yaml'} and {out_dir / 'residuals.csv'}")
    if not body["converged"]:
        fail("not-converged", f"residual {report['final_residual']!r} above tol after {body['iterations']} sweeps")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--trials", default=1000, show_default=True)
@click.option("--k-max", default=25, show_default=True)
@click.option("--allow-invalid", is_flag=True, help="probe a model even if validation fails")
@click.option("--out", default=None, type=click.Path(), help="optional YAML report path")
@seed_option
@server_option
def check(model_path, spec_path, trials, k_max, allow_invalid, out, seed, server) -> None:
    """Run the assumption checkers and print a pass/fail table."""
    try:
        doc = load_model(model_path, allow_invalid=allow_invalid)
        spec = _spec_payload(spec_path)
    except LoadError as exc:
        fail("invalid-input", str(exc))
    req = CheckRequest(model=doc.payload, spec=spec, trials=trials, seed=seed, k_max=k_max)
    body = ServiceClient(server).post("/check", req)
    width = max(len(r["name"]) for r in body["results"])
    for r in body["results"]:
        status = "PASS" if r["passed"] else "FAIL"
        click.echo(f"{r['name']:<{width}}  {status}  {r['detail']}")
    if out:
        write_yaml(Path(out), {"header": {"command": "check", "master_seed": seed}, "results": body["results"]})


@main.command()
@click.option("--gen", "gen_path", required=True, type=click.Path(), help="generator config document")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@with_options(solver_options)
@out_option
@seed_option
@server_option
def bench(gen_path, spec_path, tol, max_iter, simplex_res, deterministic_only, out, seed, server) -> None:
    """Generate a seeded corpus, solve every instance, aggregate to CSV.

    The wall_time_s column is measured and therefore not byte-reproducible;
    all other columns are deterministic in (config, seed)."""
    try:
        gen = load_generator(gen_path)
        spec = _spec_payload(spec_path)
    except LoadError as exc:
        fail("invalid-input", str(exc))
    req = BenchRequest(
        generator=gen,
        spec=spec,
        config=_config_from_flags(tol, max_iter, simplex_res, deterministic_only),
        seed=seed,
    )
    body = ServiceClient(server).post("/bench", req)
    out_dir = Path(out)
    rows = []
    for inst in body["instances"]:
        rows.append(
            (
                inst["index"],
                inst["label"],
                inst["n_states"],
                inst["iterations"],
                inst["converged"],
                inst["final_residual"],
                inst["residual_ratio"],
                inst["wall_time_s"],
            )
        )
        write_yaml(
            out_dir / f"instance_{inst['index']:03d}_report.yaml",
            {
                "header": {
                    "command": "bench",
                    "master_seed": seed,
                    "instance_index": inst["index"],
                    "seed_scheme": SEED_SCHEME,
                },
                "label": inst["label"],
                "converged": inst["converged"],
                "iterations": inst["iterations"],
                "values": inst["values"],
                "policy": inst["policy"],
            },
        )
    write_csv(
        out_dir / "bench.csv",
        (
            "index",
            "label",
            "n_states",
            "iterations",
            "converged",
            "final_residual",
            "residual_ratio",
            "wall_time_s",
        ),
        rows,
    )
    click.echo(f"solved {len(rows)} instances; wrote {out_dir / 'bench.csv'}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("cptdp.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
