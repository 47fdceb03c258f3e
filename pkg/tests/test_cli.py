import pytest
from click.testing import CliRunner

from cptdp.cli import main
from cptdp.fileio import write_yaml
from cptdp.schemas import MdpModel
from conftest import transient_branch_model

RN_SPEC_DOC = {
    "reference_point": 0.0,
    "utility_gain": {"family": "identity"},
    "utility_loss": {"family": "identity"},
    "weighting_gain": {"family": "identity"},
    "weighting_loss": {"family": "identity"},
}


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def docs(tmp_path):
    paths = {}
    paths["spec"] = tmp_path / "spec.yaml"
    write_yaml(paths["spec"], RN_SPEC_DOC)
    paths["coin"] = tmp_path / "coin.yaml"
    write_yaml(paths["coin"], {"atoms": [[0.0, 0.5], [1.0, 0.5]]})
    paths["model"] = tmp_path / "model.yaml"
    write_yaml(paths["model"], MdpModel.from_core(transient_branch_model()).model_dump())
    paths["gen"] = tmp_path / "gen.yaml"
    write_yaml(
        paths["gen"],
        {
            "kind": "random_mdp",
            "count": 2,
            "n_states": 4,
            "n_actions": 2,
            "n_disturbances": 2,
            "cost_lo": -1.0,
            "cost_hi": 1.0,
            "mode": {"kind": "discounted", "alpha": 0.7},
        },
    )
    paths["tmp"] = tmp_path
    return paths


def test_evaluate_prints_value(runner, docs):
    result = runner.invoke(main, ["evaluate", "--spec", str(docs["spec"]), "--dist", str(docs["coin"])])
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "0.5"


def test_evaluate_quadrature_flag(runner, docs):
    result = runner.invoke(
        main,
        ["evaluate", "--spec", str(docs["spec"]), "--dist", str(docs["coin"]), "--quad-tol", "1e-10"],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0] == "0.5"
    assert lines[1].startswith("quadrature: 0.5")


def test_evaluate_missing_file_fails(runner, docs):
    result = runner.invoke(
        main, ["evaluate", "--spec", str(docs["spec"]), "--dist", str(docs["tmp"] / "nope.yaml")]
    )
    assert result.exit_code == 1
    assert result.output.startswith("error[invalid-input]:")
    assert "not found" in result.output


def test_evaluate_invalid_distribution_names_field(runner, docs):
    bad = docs["tmp"] / "bad.yaml"
    write_yaml(bad, {"atoms": [[0.0, 0.5], [1.0, 0.4]]})
    result = runner.invoke(main, ["evaluate", "--spec", str(docs["spec"]), "--dist", str(bad)])
    assert result.exit_code == 1
    assert result.output.startswith("error[invalid-input]:")
    assert "atoms" in result.output


def test_estimate_writes_csv_deterministically(runner, docs):
    out1 = docs["tmp"] / "est1"
    out2 = docs["tmp"] / "est2"
    args = ["estimate", "--spec", str(docs["spec"]), "--dist", str(docs["coin"]),
            "--ns", "50,100", "--repeats", "3", "--seed", "7"]
    assert runner.invoke(main, args + ["--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(out2)]).exit_code == 0
    b1 = (out1 / "estimate.csv").read_bytes()
    b2 = (out2 / "estimate.csv").read_bytes()
    assert b1 == b2
    header = b1.decode().splitlines()[0]
    assert header == "n,repeat,estimate,abs_error"
    assert len(b1.decode().splitlines()) == 1 + 6


def test_estimate_bad_ns(runner, docs):
    result = runner.invoke(
        main,
        ["estimate", "--spec", str(docs["spec"]), "--dist", str(docs["coin"]),
         "--ns", "10,abc", "--out", str(docs["tmp"] / "x")],
    )
    assert result.exit_code == 1
    assert result.output.startswith("error[invalid-input]:")


def test_solve_writes_report_and_residuals(runner, docs):
    out = docs["tmp"] / "solve"
    result = runner.invoke(
        main,
        ["solve", "--model", str(docs["model"]), "--spec", str(docs["spec"]),
         "--out", str(out), "--tol", "1e-10"],
    )
    assert result.exit_code == 0, result.output
    report = (out / "solve_report.yaml").read_text()
    assert "converged: true" in report
    assert "seed_scheme" in report
    residuals = (out / "residuals.csv").read_text().splitlines()
    assert residuals[0] == "iteration,residual"
    assert len(residuals) > 2


def test_solve_byte_deterministic(runner, docs):
    args = ["solve", "--model", str(docs["model"]), "--spec", str(docs["spec"]), "--tol", "1e-10"]
    out1, out2 = docs["tmp"] / "s1", docs["tmp"] / "s2"
    assert runner.invoke(main, args + ["--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(out2)]).exit_code == 0
    assert (out1 / "residuals.csv").read_bytes() == (out2 / "residuals.csv").read_bytes()
    r1 = (out1 / "solve_report.yaml").read_text().replace(str(out1), "")
    r2 = (out2 / "solve_report.yaml").read_text().replace(str(out2), "")
    assert r1 == r2


def test_solve_non_convergence_exits_nonzero(runner, docs):
    out = docs["tmp"] / "noconv"
    result = runner.invoke(
        main,
        ["solve", "--model", str(docs["model"]), "--spec", str(docs["spec"]),
         "--out", str(out), "--tol", "1e-16", "--max-iter", "2"],
    )
    assert result.exit_code == 1
    assert "error[not-converged]:" in result.output
    # artifacts are still written for inspection
    assert (out / "solve_report.yaml").exists()


def test_solve_invalid_model_names_location(runner, docs):
    bad = docs["tmp"] / "bad_model.yaml"
    write_yaml(
        bad,
        {
            "states": ["s0"],
            "mode": {"kind": "discounted", "alpha": 0.9},
            "cost_bound": 1.0,
            "actions": {"s0": {"a": [{"disturbance": "d0", "mass": 0.9, "next": "s0", "cost": 0.0}]}},
        },
    )
    result = runner.invoke(
        main,
        ["solve", "--model", str(bad), "--spec", str(docs["spec"]), "--out", str(docs["tmp"] / "o")],
    )
    assert result.exit_code == 1
    assert result.output.startswith("error[invalid-input]:")
    assert "(s0, a)" in result.output


def test_check_prints_table(runner, docs):
    result = runner.invoke(
        main,
        ["check", "--model", str(docs["model"]), "--spec", str(docs["spec"]), "--trials", "100"],
    )
    assert result.exit_code == 0, result.output
    assert "model-validation" in result.output
    assert "monotonicity-probe" in result.output
    assert "uniform-transience" in result.output
    assert "PASS" in result.output


def test_bench_writes_csv_and_reports(runner, docs):
    out = docs["tmp"] / "bench"
    result = runner.invoke(
        main,
        ["bench", "--gen", str(docs["gen"]), "--spec", str(docs["spec"]),
         "--out", str(out), "--seed", "3", "--deterministic-only"],
    )
    assert result.exit_code == 0, result.output
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[0].startswith("index,label,n_states,iterations,converged")
    assert len(lines) == 3
    assert (out / "instance_000_report.yaml").exists()
    assert (out / "instance_001_report.yaml").exists()


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
