"""Seeded instance generators for experiments and benchmarks.

Every generator is a pure function of its parameters (and seed, where
randomness is involved) and produces models that pass validation.
"""

from __future__ import annotations

import numpy as np

from cptdp.mdp import Discounted, MarkovModel, Outcome, Transient, validate_model

__all__ = [
    "random_mdp",
    "gridworld",
    "crafted_randomized_optimality",
    "geometric_chain",
    "corridor",
    "CRAFTED_VERTEX_SAFE",
    "CRAFTED_VERTEX_LOTTERY",
    "CRAFTED_GRID_MARGIN",
]

# Dense 1e-4 grid scan of the crafted instance's mix objective at J = 0
# (safe-action probability t): interior optimum near t = 0.9436 beats both
# vertices.  Frozen from the pre-build scan.
CRAFTED_VERTEX_SAFE = 1.0
CRAFTED_VERTEX_LOTTERY = 1.024664115074458
CRAFTED_GRID_MARGIN = 0.02879036373253885


def _finalize(model: MarkovModel) -> MarkovModel:
    report = validate_model(model)
    if not report.ok:
        raise AssertionError(f"generator produced an invalid model:\n{report}")
    return model


def random_mdp(
    n_states: int,
    n_actions: int,
    n_disturbances: int,
    cost_range: tuple[float, float],
    mode: Discounted | Transient,
    seed: int,
) -> MarkovModel:
    """Random finite model with dense disturbance laws.

    In transient mode an extra sink state is appended, every (state,
    action) pair routes at least mass 0.2 straight to the sink, and the
    requested ``mode.absorbing`` name labels the sink; this guarantees
    uniform transience (one-step non-absorption is at most 0.8 under any
    policy).
    """
    lo, hi = float(cost_range[0]), float(cost_range[1])
    if hi < lo:
        raise ValueError("cost range is reversed")
    rng = np.random.default_rng(seed)
    transient = isinstance(mode, Transient)
    states = [f"s{i}" for i in range(n_states)]
    if transient:
        sink = mode.absorbing
        if sink in states:
            raise ValueError(f"absorbing name {sink!r} collides with a generated state")
        states.append(sink)

    feasible = {}
    outcomes = {}
    action_names = [f"a{j}" for j in range(n_actions)]
    for s in states[:n_states]:
        feasible[s] = tuple(action_names)
        for a in action_names:
            masses = rng.dirichlet(np.ones(n_disturbances))
            if transient:
                masses = 0.2 * np.eye(n_disturbances)[0] + 0.8 * masses
            rows = []
            for d in range(n_disturbances):
                if transient and d == 0:
                    nxt = sink
                else:
                    nxt = states[int(rng.integers(n_states))]
                cost = float(rng.uniform(lo, hi))
                rows.append(Outcome(f"d{d}", float(masses[d]), nxt, cost))
            outcomes[(s, a)] = tuple(rows)
    if transient:
        feasible[sink] = ("stay",)
        outcomes[(sink, "stay")] = (Outcome("d0", 1.0, sink, 0.0),)

    bound = max(abs(lo), abs(hi))
    if bound == 0.0:
        bound = 1.0
    return _finalize(
        MarkovModel(
            states=tuple(states),
            feasible_actions=feasible,
            outcomes=outcomes,
            cost_bound=bound,
            mode=mode,
        )
    )


def gridworld(
    width: int,
    height: int,
    step_cost: float = 1.0,
    noise: float = 0.0,
    goal: tuple[int, int] | None = None,
) -> MarkovModel:
    """Transient grid: move toward an absorbing goal under slip noise.

    Each move costs ``step_cost``; with probability ``noise`` the agent
    slips to a uniformly random direction instead.  Moves off the grid
    stay in place.  The goal cell is absorbing with zero cost.
    """
    if width < 1 or height < 1:
        raise ValueError("grid must be at least 1x1")
    if not (0.0 <= noise < 1.0):
        raise ValueError("noise must lie in [0, 1)")
    if step_cost <= 0.0:
        raise ValueError("step cost must be positive")
    gr, gc = goal if goal is not None else (height - 1, width - 1)
    if not (0 <= gr < height and 0 <= gc < width):
        raise ValueError("goal outside the grid")

    def name(r: int, c: int) -> str:
        return "goal" if (r, c) == (gr, gc) else f"r{r}c{c}"

    moves = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}

    def step(r: int, c: int, d: str) -> str:
        dr, dc = moves[d]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < height and 0 <= nc < width):
            nr, nc = r, c
        return name(nr, nc)

    states = tuple(name(r, c) for r in range(height) for c in range(width))
    feasible = {}
    outcomes = {}
    for r in range(height):
        for c in range(width):
            s = name(r, c)
            if s == "goal":
                feasible[s] = ("stay",)
                outcomes[(s, "stay")] = (Outcome("d0", 1.0, "goal", 0.0),)
                continue
            feasible[s] = tuple(moves)
            for a in moves:
                rows = []
                for d in moves:
                    mass = noise / 4.0 + (1.0 - noise if d == a else 0.0)
                    rows.append(Outcome(f"slip-{d}", mass, step(r, c, d), step_cost))
                outcomes[(s, a)] = tuple(rows)
    return _finalize(
        MarkovModel(
            states=states,
            feasible_actions=feasible,
            outcomes=outcomes,
            cost_bound=step_cost,
            mode=Transient("goal"),
        )
    )


def crafted_randomized_optimality() -> MarkovModel:
    """One-state discounted instance whose Bellman minimum is interior.

    Action "safe" costs 1 surely; action "lottery" costs 0 with
    probability 0.9 and 5.5 with probability 0.1.  Under an overweighting
    gain distortion (Tversky-Kahneman delta = 0.61, identity utility),
    the minimizing mix at J = 0 puts interior probability on both
    actions and beats both vertices.
    """
    outcomes = {
        ("s0", "safe"): (Outcome("d0", 1.0, "s0", 1.0),),
        ("s0", "lottery"): (
            Outcome("d0", 0.9, "s0", 0.0),
            Outcome("d1", 0.1, "s0", 5.5),
        ),
    }
    return _finalize(
        MarkovModel(
            states=("s0",),
            feasible_actions={"s0": ("safe", "lottery")},
            outcomes=outcomes,
            cost_bound=5.5,
            mode=Discounted(0.9),
        )
    )


def geometric_chain(stay_prob: float, cost: float = 1.0) -> MarkovModel:
    """Two-state transient chain: stay with ``stay_prob``, absorb otherwise."""
    if not (0.0 <= stay_prob < 1.0):
        raise ValueError("stay probability must lie in [0, 1)")
    outcomes = {
        ("s0", "go"): (
            Outcome("stay", stay_prob, "s0", cost),
            Outcome("absorb", 1.0 - stay_prob, "sink", cost),
        ),
        ("sink", "stay"): (Outcome("d0", 1.0, "sink", 0.0),),
    }
    return _finalize(
        MarkovModel(
            states=("s0", "sink"),
            feasible_actions={"s0": ("go",), "sink": ("stay",)},
            outcomes=outcomes,
            cost_bound=max(abs(cost), 1.0),
            mode=Transient("sink"),
        )
    )


def corridor(length: int, cost: float = 1.0) -> MarkovModel:
    """Deterministic chain s0 -> s1 -> ... -> sink, one action per state."""
    if length < 1:
        raise ValueError("corridor length must be at least 1")
    states = tuple(f"s{i}" for i in range(length)) + ("sink",)
    feasible = {}
    outcomes = {}
    for i in range(length):
        s = f"s{i}"
        nxt = f"s{i + 1}" if i + 1 < length else "sink"
        feasible[s] = ("go",)
        outcomes[(s, "go")] = (Outcome("d0", 1.0, nxt, cost),)
    feasible["sink"] = ("stay",)
    outcomes[("sink", "stay")] = (Outcome("d0", 1.0, "sink", 0.0),)
    return _finalize(
        MarkovModel(
            states=states,
            feasible_actions=feasible,
            outcomes=outcomes,
            cost_bound=max(abs(cost), 1.0),
            mode=Transient("sink"),
        )
    )
