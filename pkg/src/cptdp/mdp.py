"""Finite Markov control models with discounted and transient modes.

A model holds finite states, per-state feasible actions, and for each
(state, action) a finite disturbance law; each disturbance carries a
successor state and a per-step cost.  Transient models have an absorbing
state whose outgoing transitions are self-loops with zero cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from cptdp.cpt import MASS_EPS, DiscreteDistribution

__all__ = [
    "Discounted",
    "Transient",
    "Outcome",
    "MarkovModel",
    "ValueFunction",
    "RandomizedPolicy",
    "Violation",
    "ValidationReport",
    "validate_model",
    "return_distribution",
    "pliska_check",
    "uniform_transience_certificate",
]


@dataclass(frozen=True)
class Discounted:
    alpha: float


@dataclass(frozen=True)
class Transient:
    absorbing: str


@dataclass(frozen=True)
class Outcome:
    """One disturbance realization: its probability, successor and cost."""

    disturbance: str
    mass: float
    next_state: str
    cost: float


@dataclass(frozen=True)
class MarkovModel:
    states: tuple[str, ...]
    feasible_actions: Mapping[str, tuple[str, ...]]
    outcomes: Mapping[tuple[str, str], tuple[Outcome, ...]]
    cost_bound: float
    mode: Discounted | Transient

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})
        object.__setattr__(self, "_tables", {})

    # -- indexed access -----------------------------------------------------

    def state_index(self, state: str) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(f"unknown state {state!r}") from None

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def absorbing_index(self) -> int | None:
        if isinstance(self.mode, Transient):
            return self.state_index(self.mode.absorbing)
        return None

    def actions(self, state: str) -> tuple[str, ...]:
        return tuple(self.feasible_actions.get(state, ()))

    def table(self, state: str, action: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(masses, costs, successor indices) arrays for one (state, action)."""
        key = (state, action)
        cached = self._tables.get(key)
        if cached is not None:
            return cached
        rows = self.outcomes.get(key, ())
        masses = np.array([o.mass for o in rows], dtype=float)
        costs = np.array([o.cost for o in rows], dtype=float)
        nxt = np.array([self.state_index(o.next_state) for o in rows], dtype=int)
        self._tables[key] = (masses, costs, nxt)
        return self._tables[key]

    def non_absorbing_states(self) -> tuple[str, ...]:
        if isinstance(self.mode, Transient):
            return tuple(s for s in self.states if s != self.mode.absorbing)
        return self.states


@dataclass
class ValueFunction:
    """Bounded real vector over the model's states, with the sup-norm."""

    states: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.states),):
            raise ValueError("value vector length does not match the state list")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("value function entries must be finite")

    @classmethod
    def zeros(cls, model: MarkovModel) -> "ValueFunction":
        return cls(model.states, np.zeros(model.n_states))

    @classmethod
    def from_dict(cls, model: MarkovModel, entries: Mapping[str, float]) -> "ValueFunction":
        vals = np.zeros(model.n_states)
        for s, v in entries.items():
            vals[model.state_index(s)] = float(v)
        return cls(model.states, vals)

    def to_dict(self) -> dict[str, float]:
        return {s: float(v) for s, v in zip(self.states, self.values)}

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def sup_dist(self, other: "ValueFunction") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def __getitem__(self, state: str) -> float:
        return float(self.values[self.states.index(state)])


@dataclass
class RandomizedPolicy:
    """Per-state probability vector over that state's feasible actions."""

    per_state: dict[str, np.ndarray]

    @classmethod
    def uniform(cls, model: MarkovModel) -> "RandomizedPolicy":
        return cls(
            {
                s: np.full(len(model.actions(s)), 1.0 / len(model.actions(s)))
                for s in model.states
                if model.actions(s)
            }
        )

    @classmethod
    def deterministic(cls, model: MarkovModel, choice: Mapping[str, str]) -> "RandomizedPolicy":
        per_state = {}
        for s, a in choice.items():
            acts = model.actions(s)
            vec = np.zeros(len(acts))
            vec[acts.index(a)] = 1.0
            per_state[s] = vec
        return cls(per_state)

    def mix(self, state: str) -> np.ndarray:
        return self.per_state[state]

    def validate_against(self, model: MarkovModel) -> None:
        for s, vec in self.per_state.items():
            acts = model.actions(s)
            if len(vec) != len(acts):
                raise ValueError(f"policy at {s!r} has wrong length")
            _check_mix(vec, s)

    def to_dict(self, model: MarkovModel) -> dict[str, dict[str, float]]:
        return {
            s: {a: float(p) for a, p in zip(model.actions(s), vec)}
            for s, vec in self.per_state.items()
        }


def _check_mix(mix: np.ndarray, where: str = "") -> np.ndarray:
    mix = np.asarray(mix, dtype=float)
    label = f" at {where!r}" if where else ""
    if np.any(mix < -MASS_EPS):
        raise ValueError(f"action mix{label} has a negative entry")
    if abs(float(math.fsum(mix.tolist())) - 1.0) > 10 * MASS_EPS:
        raise ValueError(f"action mix{label} does not sum to 1")
    return np.clip(mix, 0.0, None)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "model valid"
        return "\n".join(str(v) for v in self.violations)


def validate_model(model: MarkovModel) -> ValidationReport:
    """Report every violated structural invariant with its (x, a, d) triple."""
    bad: list[Violation] = []

    def add(code: str, loc: str, msg: str) -> None:
        bad.append(Violation(code, loc, msg))

    if len(set(model.states)) != len(model.states):
        add("duplicate-state", "states", "state names are not unique")
    if not model.states:
        add("no-states", "states", "state list is empty")

    if isinstance(model.mode, Discounted):
        if not (0.0 < model.mode.alpha < 1.0):
            add("discount-range", "mode", f"alpha {model.mode.alpha!r} outside (0, 1)")
    elif isinstance(model.mode, Transient):
        if model.mode.absorbing not in model.states:
            add("absorbing-unknown", "mode", f"absorbing state {model.mode.absorbing!r} not in states")
    if not (model.cost_bound > 0.0 and math.isfinite(model.cost_bound)):
        add("cost-bound", "cost_bound", f"cost bound {model.cost_bound!r} must be positive")

    absorbing = model.mode.absorbing if isinstance(model.mode, Transient) else None
    for s in model.states:
        acts = model.actions(s)
        if not acts:
            add("no-actions", s, "state has no feasible action")
        for a in acts:
            rows = model.outcomes.get((s, a), ())
            loc = f"({s}, {a})"
            if not rows:
                add("no-disturbances", loc, "no disturbance outcomes")
                continue
            total = math.fsum(o.mass for o in rows)
            if any(o.mass < 0.0 or not math.isfinite(o.mass) for o in rows):
                add("negative-mass", loc, "disturbance mass is negative or non-finite")
            if abs(total - 1.0) > MASS_EPS:
                add("law-normalization", loc, f"disturbance masses sum to {total!r}, not 1")
            for o in rows:
                tloc = f"({s}, {a}, {o.disturbance})"
                if o.next_state not in model.states:
                    add("unknown-successor", tloc, f"successor {o.next_state!r} not in states")
                if not math.isfinite(o.cost):
                    add("cost-non-finite", tloc, f"cost {o.cost!r} is not finite")
                elif abs(o.cost) > model.cost_bound:
                    add(
                        "cost-bound-exceeded",
                        tloc,
                        f"|cost| {abs(o.cost)!r} exceeds bound {model.cost_bound!r}",
                    )
                if s == absorbing:
                    if o.next_state != absorbing:
                        add("absorbing-leak", tloc, "absorbing state must self-loop")
                    if o.cost != 0.0:
                        add("absorbing-cost", tloc, f"absorbing state cost {o.cost!r} must be 0")
    return ValidationReport(tuple(bad))


# ---------------------------------------------------------------------------
# one-step return law
# ---------------------------------------------------------------------------


def return_distribution(
    model: MarkovModel,
    state: str,
    action_mix: Sequence[float] | np.ndarray,
    J: "ValueFunction | np.ndarray",
) -> DiscreteDistribution:
    """Law of the one-step return  g + (alpha) J(successor)  under a mix.

    Discounted mode yields the proper law of g + alpha * J(f).  Transient
    mode yields the law of g + J(f) restricted to non-absorbing
    successors, a sub-normalized law whose deficit is the one-step
    absorption probability.
    """
    acts = model.actions(state)
    mix = np.asarray(action_mix, dtype=float)
    if mix.shape != (len(acts),):
        raise ValueError(
            f"action mix length {mix.shape} does not match |A({state})| = {len(acts)}"
        )
    mix = _check_mix(mix, state)
    jvals = J.values if isinstance(J, ValueFunction) else np.asarray(J, dtype=float)

    transient = isinstance(model.mode, Transient)
    if transient and state == model.mode.absorbing:
        raise ValueError("return law is undefined at the absorbing state")
    alpha = model.mode.alpha if isinstance(model.mode, Discounted) else 1.0
    absorbing_idx = model.absorbing_index

    atoms: list[tuple[float, float]] = []
    for a, p_a in zip(acts, mix):
        if p_a == 0.0:
            continue
        masses, costs, nxt = model.table(state, a)
        z = costs + alpha * jvals[nxt]
        for zi, mi, ni in zip(z, masses, nxt):
            if transient and ni == absorbing_idx:
                continue
            atoms.append((float(zi), float(p_a * mi)))
    # composing two 1e-12-validated normalizations can drift past a strict
    # 1e-12 check, hence the widened tolerance on this internal product law
    return DiscreteDistribution(tuple(atoms), subnormalized=transient, mass_tol=8 * MASS_EPS)


# ---------------------------------------------------------------------------
# transience diagnostics
# ---------------------------------------------------------------------------


def _policy_substochastic(model: MarkovModel, policy: RandomizedPolicy) -> tuple[np.ndarray, list[int]]:
    """Transition matrix between non-absorbing states under a stationary policy."""
    if not isinstance(model.mode, Transient):
        raise ValueError("transience diagnostics require a transient-mode model")
    policy.validate_against(model)
    absorbing = model.mode.absorbing
    live = [i for i, s in enumerate(model.states) if s != absorbing]
    pos = {i: k for k, i in enumerate(live)}
    Q = np.zeros((len(live), len(live)))
    for s in model.states:
        if s == absorbing:
            continue
        i = pos[model.state_index(s)]
        mix = policy.mix(s)
        for a, p_a in zip(model.actions(s), mix):
            if p_a == 0.0:
                continue
            masses, _, nxt = model.table(s, a)
            for mi, ni in zip(masses, nxt):
                if int(ni) == model.absorbing_index:
                    continue
                Q[i, pos[int(ni)]] += p_a * mi
    return Q, live


def pliska_check(
    model: MarkovModel,
    policy: RandomizedPolicy,
    horizon: int,
    tol: float,
) -> tuple[float, bool]:
    """Partial sum of non-absorption probabilities under a stationary policy.

    Propagates the state-occupancy vector exactly and accumulates, for the
    worst starting state, sum_k P(x_{k+1} != absorbing).  The partial sum
    is a certified lower bound of the full series; the converged flag is
    set once the tail increment drops below tol within the horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    Q, live = _policy_substochastic(model, policy)
    if not live:
        return 0.0, True
    partial = np.zeros(len(live))
    M = np.eye(len(live))
    for _ in range(horizon):
        M = M @ Q
        step = M.sum(axis=1)  # P(x_{k+1} != absorbing | start)
        partial += step
        if float(step.max()) < tol:
            return float(partial.max()), True
    return float(partial.max()), False


def uniform_transience_certificate(
    model: MarkovModel,
    horizon: int = 10_000,
    tol: float = 1e-10,
) -> tuple[float, bool]:
    """Worst-case Pliska bound over all policies, by a max-cost recursion.

    U(x) = max_a [ P(next != absorbing | x, a) + sum_y Q_a(x, y) U(y) ]
    is iterated from zero; since per-step non-absorption probability is
    affine in the action mix, randomized policies cannot exceed this
    deterministic worst case.  Returns (bound, certified); certification
    fails when the recursion has not settled within the horizon (for
    example when some policy can avoid absorption forever).
    """
    if not isinstance(model.mode, Transient):
        raise ValueError("transience diagnostics require a transient-mode model")
    absorbing = model.mode.absorbing
    live = [s for s in model.states if s != absorbing]
    if not live:
        return 0.0, True
    idx = {s: k for k, s in enumerate(live)}
    U = np.zeros(len(live))
    for _ in range(horizon):
        nxt_U = np.zeros_like(U)
        for s in live:
            best = -math.inf
            for a in model.actions(s):
                masses, _, nxt = model.table(s, a)
                total = 0.0
                for mi, ni in zip(masses, nxt):
                    if int(ni) == model.absorbing_index:
                        continue
                    total += mi * (1.0 + U[idx[model.states[int(ni)]]])
                best = max(best, total)
            nxt_U[idx[s]] = best
        delta = float(np.max(np.abs(nxt_U - U)))
        U = nxt_U
        if delta < tol:
            return float(U.max()), True
    return float(U.max()), False
