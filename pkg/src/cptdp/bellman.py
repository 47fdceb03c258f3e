"""CPT-driven Bellman operators, value iteration, and assumption checkers.

The one-step mapping H(x, a, J) evaluates the CPT staircase on the law of
the one-step return (proper in discounted mode, sub-normalized in
transient mode, reference point pinned at zero inside the operator).
T_mu applies H under a stationary randomized policy; T minimizes H over
the action simplex.  Monotonicity of H and contractivity of T_mu hold
only under structural conditions on the utilities and weightings, so the
module also ships numerical verifiers for those conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from cptdp.cpt import (
    CptSpec,
    DiscreteDistribution,
    cpt_value_exact,
    cpt_value_subnormalized,
)
from cptdp.mdp import (
    Discounted,
    MarkovModel,
    RandomizedPolicy,
    Transient,
    ValueFunction,
    return_distribution,
    uniform_transience_certificate,
    validate_model,
)

__all__ = [
    "SolveConfig",
    "SolveResult",
    "StructuralConditionError",
    "ProbeViolation",
    "ContractionCheck",
    "apply_H",
    "bellman_min",
    "value_iteration",
    "monotonicity_probe",
    "contraction_condition_check",
    "default_z_family",
    "empirical_contraction_modulus",
    "k_step_contraction_probe",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class StructuralConditionError(ValueError):
    """A closed-form precondition of a contraction guarantee failed."""

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


@dataclass(frozen=True)
class SolveConfig:
    """Solver parameters: stopping rule and action-simplex search density."""

    tol: float = 1e-9
    max_iter: int = 1000
    simplex_resolution: int = 10
    refine_steps: int = 2
    deterministic_only: bool = False

    def __post_init__(self) -> None:
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.simplex_resolution < 1:
            raise ValueError("simplex_resolution must be at least 1")
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be non-negative")


@dataclass
class SolveResult:
    value: ValueFunction
    policy: RandomizedPolicy
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


# ---------------------------------------------------------------------------
# H and the Bellman minimization
# ---------------------------------------------------------------------------


def _operator_spec(spec: CptSpec) -> CptSpec:
    # the one-step operator always measures returns against reference 0
    return spec if spec.reference_point == 0.0 else spec.with_reference(0.0)


def apply_H(
    model: MarkovModel,
    state: str,
    action_mix: Sequence[float] | np.ndarray,
    J: ValueFunction | np.ndarray,
    spec: CptSpec,
) -> float:
    """One-step CPT evaluation of cost plus continuation value.

    At the absorbing state of a transient model H is identically 0 (its
    return law is empty by construction).
    """
    transient = isinstance(model.mode, Transient)
    if transient and state == model.mode.absorbing:
        return 0.0
    dist = return_distribution(model, state, action_mix, J)
    spec0 = _operator_spec(spec)
    if transient:
        return cpt_value_subnormalized(dist, spec0)
    return cpt_value_exact(dist, spec0)


@lru_cache(maxsize=128)
def _simplex_grid(n_actions: int, resolution: int) -> tuple[tuple[int, ...], ...]:
    """Integer compositions of ``resolution`` into ``n_actions`` parts,
    in lexicographic order (ties in the search resolve to the smallest)."""

    def rec(remaining: int, slots: int):
        if slots == 1:
            yield (remaining,)
            return
        for first in range(remaining + 1):
            for rest in rec(remaining - first, slots - 1):
                yield (first, *rest)

    return tuple(rec(resolution, n_actions))


def _golden_section(fn, lo: float, hi: float, iters: int = 48) -> tuple[float, float]:
    """Golden-section minimization on [lo, hi]; returns (argmin, min)."""
    a, b = lo, hi
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    f1, f2 = fn(c1), fn(c2)
    for _ in range(iters):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - GOLDEN * (b - a)
            f1 = fn(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + GOLDEN * (b - a)
            f2 = fn(c2)
    t = c1 if f1 <= f2 else c2
    return t, min(f1, f2)


def bellman_min(
    model: MarkovModel,
    state: str,
    J: ValueFunction | np.ndarray,
    spec: CptSpec,
    cfg: SolveConfig,
) -> tuple[float, np.ndarray]:
    """Approximate minimum of H over the action simplex at one state.

    Evaluates every deterministic action, then a grid of mixes at
    resolution 1/m, then coordinate-pair golden-section refinement around
    the incumbent.  The CPT objective is non-convex over the simplex, so
    this is a density-controlled search, not a global guarantee; the
    returned value never exceeds the best deterministic action.
    """
    acts = model.actions(state)
    k = len(acts)
    if k == 0:
        raise ValueError(f"state {state!r} has no feasible action")

    def H(mix: np.ndarray) -> float:
        return apply_H(model, state, mix, J, spec)

    best_mix = None
    best_val = math.inf
    seen: set[tuple[int, ...]] = set()
    m = cfg.simplex_resolution

    # deterministic actions first, in action order
    for i in range(k):
        mix = np.zeros(k)
        mix[i] = 1.0
        val = H(mix)
        seen.add(tuple(int(m) if j == i else 0 for j in range(k)))
        if val < best_val:
            best_val, best_mix = val, mix

    if not cfg.deterministic_only and k > 1:
        for comp in _simplex_grid(k, m):
            if comp in seen:
                continue
            mix = np.asarray(comp, dtype=float) / m
            val = H(mix)
            if val < best_val:
                best_val, best_mix = val, mix

        window = 1.5 / m
        for _ in range(cfg.refine_steps):
            for i in range(k):
                for j in range(k):
                    if i == j:
                        continue
                    lo = -min(best_mix[i], window)
                    hi = min(best_mix[j], window)
                    if hi - lo <= 0.0:
                        continue
                    direction = np.zeros(k)
                    direction[i] = 1.0
                    direction[j] = -1.0

                    def line(t: float) -> float:
                        cand = np.clip(best_mix + t * direction, 0.0, 1.0)
                        return H(cand / cand.sum())

                    t_star, val = _golden_section(line, lo, hi)
                    if val < best_val:
                        cand = np.clip(best_mix + t_star * direction, 0.0, 1.0)
                        best_val, best_mix = val, cand / cand.sum()

    return best_val, np.asarray(best_mix, dtype=float)


def value_iteration(
    model: MarkovModel,
    spec: CptSpec,
    J0: ValueFunction | None,
    cfg: SolveConfig,
) -> SolveResult:
    """Iterate J <- TJ until the sup-norm residual falls below tol.

    In transient mode the absorbing state's value is pinned to 0 for the
    whole run.  Non-convergence within max_iter is reported through the
    ``converged`` flag, not an exception.
    """
    report = validate_model(model)
    if not report.ok:
        raise ValueError(f"model failed validation:\n{report}")
    if spec.u_plus(0.0) != 0.0 or spec.u_minus(0.0) != 0.0:
        raise ValueError("utilities must satisfy u(0) = 0")

    J = (J0 if J0 is not None else ValueFunction.zeros(model)).values.copy()
    absorbing = model.absorbing_index
    if absorbing is not None:
        J[absorbing] = 0.0
    sweep_states = [s for s in model.states if model.state_index(s) != absorbing]

    trace: list[float] = []
    mixes: dict[str, np.ndarray] = {}
    converged = False
    for _ in range(cfg.max_iter):
        J_next = J.copy()
        for s in sweep_states:
            val, mix = bellman_min(model, s, J, spec, cfg)
            J_next[model.state_index(s)] = val
            mixes[s] = mix
        residual = float(np.max(np.abs(J_next - J))) if sweep_states else 0.0
        trace.append(residual)
        J = J_next
        if residual <= cfg.tol:
            converged = True
            break

    per_state = dict(mixes)
    if absorbing is not None and model.actions(model.states[absorbing]):
        vec = np.zeros(len(model.actions(model.states[absorbing])))
        vec[0] = 1.0
        per_state[model.states[absorbing]] = vec
    return SolveResult(
        value=ValueFunction(model.states, J),
        policy=RandomizedPolicy(per_state),
        trace=trace,
        iterations=len(trace),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# monotonicity probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeViolation:
    trial: int
    state: str
    h_low: float
    h_high: float

    @property
    def gap(self) -> float:
        return self.h_low - self.h_high


def _value_scale(model: MarkovModel) -> float:
    if isinstance(model.mode, Discounted):
        return model.cost_bound / (1.0 - model.mode.alpha)
    return 10.0 * model.cost_bound


def _random_value_pair(model: MarkovModel, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    scale = _value_scale(model)
    J = rng.uniform(-scale, scale, model.n_states)
    J_hi = J + rng.uniform(0.0, scale / 2.0, model.n_states)
    absorbing = model.absorbing_index
    if absorbing is not None:
        J[absorbing] = 0.0
        J_hi[absorbing] = 0.0
    return J, J_hi


def monotonicity_probe(
    model: MarkovModel,
    spec: CptSpec,
    trials: int,
    seed: int,
) -> list[ProbeViolation]:
    """Search for H(x, a, J) > H(x, a, J') with J <= J' pointwise.

    Under monotone utilities and valid weighting functions the report is
    expected to be empty; a corrupted non-monotone weighting makes the
    probe fire, which the test suite uses to confirm its sensitivity.
    """
    rng = np.random.default_rng(seed)
    states = [s for s in model.non_absorbing_states() if model.actions(s)]
    violations: list[ProbeViolation] = []
    if not states:
        return violations
    for t in range(trials):
        J, J_hi = _random_value_pair(model, rng)
        s = states[int(rng.integers(len(states)))]
        mix = rng.dirichlet(np.ones(len(model.actions(s))))
        h_low = apply_H(model, s, mix, J, spec)
        h_high = apply_H(model, s, mix, J_hi, spec)
        if h_low > h_high + 1e-10:
            violations.append(ProbeViolation(trial=t, state=s, h_low=h_low, h_high=h_high))
    return violations


# ---------------------------------------------------------------------------
# contraction condition check (discounted)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionCheck:
    beta_hat: float
    passed: bool
    worst_z: DiscreteDistribution
    worst_level: float


def _require_contraction_structure(spec: CptSpec) -> None:
    if spec.u_plus(0.0) != 0.0 or spec.u_minus(0.0) != 0.0:
        raise StructuralConditionError("utility-zero", "utilities must satisfy u(0) = 0")
    if not math.isfinite(spec.u_plus.derivative_at_zero):
        raise StructuralConditionError(
            "gain-utility-derivative-bounded",
            f"{spec.u_plus.describe()} has unbounded derivative at 0",
        )
    if not math.isfinite(spec.u_minus.derivative_at_zero):
        raise StructuralConditionError(
            "loss-utility-derivative-bounded",
            f"{spec.u_minus.describe()} has unbounded derivative at 0",
        )


def _condition_integral(spec: CptSpec, z: DiscreteDistribution, upper: float) -> float:
    """Closed-form value of the two contraction integrals up to ``upper``.

    Both integrands are products of a step function of z and a utility
    derivative, so each piece integrates to a utility difference; the
    step heights use correctly-rounded cumulative masses.
    """
    atoms = sorted(z.merged().atoms)
    cuts = [0.0] + [v for v, _ in atoms if 0.0 < v < upper] + [upper]
    below: list[float] = []
    above: list[float] = []
    for s in cuts[:-1]:
        below.append(math.fsum(m for v, m in atoms if v <= s))
        above.append(math.fsum(m for v, m in atoms if v > s))
    total = 0.0
    for lo, hi, mb, ma in zip(cuts[:-1], cuts[1:], below, above):
        w_lt = spec.w_plus(min(mb, 1.0))
        w_gt = spec.w_minus(min(ma, 1.0))
        total += w_lt * (spec.u_plus(upper - lo) - spec.u_plus(upper - hi))
        total += w_gt * (spec.u_minus(hi) - spec.u_minus(lo))
    return total


def default_z_family(alpha: float, c: float) -> list[DiscreteDistribution]:
    """Point masses, two-point laws, and uniform discretizations on [0, 2c]."""
    family: list[DiscreteDistribution] = []
    for k in range(9):
        family.append(DiscreteDistribution(((c * k / 8.0, 1.0),)))
    family.append(DiscreteDistribution(((2.0 * c, 1.0),)))
    for q in (1e-4, 1e-3, 1e-2, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99):
        family.append(DiscreteDistribution(((0.0, q), (2.0 * c, 1.0 - q))))
    for n in (2, 5, 11):
        for hi in (c, 2.0 * c):
            vals = np.linspace(0.0, hi, n)
            family.append(DiscreteDistribution(tuple((float(v), 1.0 / n) for v in vals)))
    return family


def contraction_condition_check(
    spec: CptSpec,
    alpha: float,
    c: float,
    z_family: list[DiscreteDistribution] | None = None,
) -> ContractionCheck:
    """Falsification search for the contraction bound over a family of laws.

    For each candidate law Z and level c', evaluates

        I = integral_0^{alpha c'} w+(P(Z < z)) u+'(alpha c' - z) dz
          + integral_0^{alpha c'} w-(P(Z > z)) u-'(z) dz

    and reports beta_hat = max I / c'.  The quantifier over all laws is
    sampled, never proven: when no family is supplied, the default family
    is augmented with a continuous search over two-point laws, which are
    extremal for affine utilities.  Structural preconditions (bounded,
    non-increasing derivatives with u(0) = 0) are checked first.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if c <= 0.0:
        raise ValueError("c must be positive")
    _require_contraction_structure(spec)

    refine = z_family is None
    family = default_z_family(alpha, c) if z_family is None else list(z_family)
    levels = [c * 0.25, c * 0.5, c]

    beta_hat = -math.inf
    worst_z = family[0]
    worst_level = levels[-1]
    for z in family:
        for level in levels:
            val = _condition_integral(spec, z, alpha * level) / level
            if val > beta_hat:
                beta_hat, worst_z, worst_level = val, z, level

    if refine:
        # two-point laws {0: q, 2c: 1-q} reduce the integral to
        # w+(q) u+(alpha c') + w-(1-q) u-(alpha c'); maximize over q
        for level in levels:
            upper = alpha * level
            up = spec.u_plus(upper)
            um = spec.u_minus(upper)

            def neg_phi(q: float) -> float:
                return -(spec.w_plus(q) * up + spec.w_minus(1.0 - q) * um) / level

            grid = np.concatenate(
                (
                    np.logspace(-9, -0.31, 120),
                    np.linspace(0.1, 0.9, 33),
                    1.0 - np.logspace(-9, -0.31, 120),
                )
            )
            vals = np.array([-neg_phi(float(q)) for q in grid])
            q0 = float(grid[int(np.argmax(vals))])
            lo = max(q0 * 0.5, 1e-12)
            hi = min(q0 * 1.5 if q0 < 0.5 else q0 + (1.0 - q0) * 0.5, 1.0 - 1e-12)
            q_star, neg_val = _golden_section(neg_phi, lo, hi, iters=96)
            if -neg_val > beta_hat:
                beta_hat = -neg_val
                worst_z = DiscreteDistribution(((0.0, q_star), (2.0 * c, 1.0 - q_star)))
                worst_level = level

    return ContractionCheck(
        beta_hat=float(beta_hat),
        passed=bool(beta_hat < 1.0),
        worst_z=worst_z,
        worst_level=float(worst_level),
    )


# ---------------------------------------------------------------------------
# empirical contraction diagnostics
# ---------------------------------------------------------------------------


def _random_policy(model: MarkovModel, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        s: rng.dirichlet(np.ones(len(model.actions(s))))
        for s in model.non_absorbing_states()
        if model.actions(s)
    }


def _apply_policy_operator(
    model: MarkovModel, mixes: dict[str, np.ndarray], J: np.ndarray, spec: CptSpec
) -> np.ndarray:
    out = np.zeros(model.n_states)
    for s, mix in mixes.items():
        out[model.state_index(s)] = apply_H(model, s, mix, J, spec)
    return out


def empirical_contraction_modulus(
    model: MarkovModel,
    spec: CptSpec,
    trials: int,
    seed: int,
) -> float:
    """Max observed ||T_mu J - T_mu J'|| / ||J - J'|| over random triples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        J, J_hi = _random_value_pair(model, rng)
        denom = float(np.max(np.abs(J - J_hi)))
        if denom == 0.0:
            continue
        mixes = _random_policy(model, rng)
        TJ = _apply_policy_operator(model, mixes, J, spec)
        TJ_hi = _apply_policy_operator(model, mixes, J_hi, spec)
        worst = max(worst, float(np.max(np.abs(TJ - TJ_hi))) / denom)
    return worst


def k_step_contraction_probe(
    model: MarkovModel,
    spec: CptSpec,
    K_max: int,
    trials: int,
    seed: int,
) -> int | None:
    """Smallest K <= K_max whose observed K-step modulus is below 1.

    Requires a certified uniformly transient model, bounded utility
    derivatives at zero, and linearly dominated weighting functions
    (w(p) <= xi p for a finite xi); any structural failure raises with
    the violated condition named.  Returns None when no K qualifies.
    """
    if not isinstance(model.mode, Transient):
        raise StructuralConditionError("transient-mode", "model must be transient")
    bound, certified = uniform_transience_certificate(model)
    if not certified:
        raise StructuralConditionError(
            "uniform-transience",
            "worst-case non-absorption series did not converge within the horizon",
        )
    _require_contraction_structure(spec)
    for label, w in (("gain", spec.w_plus), ("loss", spec.w_minus)):
        xi = w.chord_bound
        if not math.isfinite(xi):
            raise StructuralConditionError(
                f"{label}-weighting-chord-bound",
                f"{w.describe()} violates w(p) <= xi * p for every finite xi",
            )

    rng = np.random.default_rng(seed)
    worst = np.zeros(K_max)
    for _ in range(trials):
        J, J_hi = _random_value_pair(model, rng)
        denom = float(np.max(np.abs(J - J_hi)))
        if denom == 0.0:
            continue
        mixes = _random_policy(model, rng)
        cur, cur_hi = J, J_hi
        for k in range(K_max):
            cur = _apply_policy_operator(model, mixes, cur, spec)
            cur_hi = _apply_policy_operator(model, mixes, cur_hi, spec)
            ratio = float(np.max(np.abs(cur - cur_hi))) / denom
            worst[k] = max(worst[k], ratio)
    for k in range(K_max):
        if worst[k] < 1.0 - 1e-6:
            return k + 1
    return None
