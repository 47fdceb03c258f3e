import numpy as np
import pytest

from cptdp.cpt import (
    CptSpec,
    DiscreteDistribution,
    IdentityUtility,
    IdentityWeighting,
    PowerUtility,
    ScaledUtility,
    TabulatedWeighting,
    TverskyKahnemanWeighting,
)
from cptdp.generators import (
    corridor,
    crafted_randomized_optimality,
    geometric_chain,
    gridworld,
    random_mdp,
)
from cptdp.mdp import Discounted, MarkovModel, Outcome, Transient

# ---------------------------------------------------------------------------
# randomized inputs
# ---------------------------------------------------------------------------


def random_distribution(rng: np.random.Generator, max_atoms: int = 40) -> DiscreteDistribution:
    n = int(rng.integers(1, max_atoms + 1))
    values = rng.uniform(-5.0, 5.0, n)
    if n > 2 and rng.random() < 0.3:
        values[int(rng.integers(n))] = values[int(rng.integers(n))]  # force a tie
    raw = rng.uniform(0.01, 1.0, n)
    masses = raw / raw.sum()
    return DiscreteDistribution(tuple(zip(values.tolist(), masses.tolist())))


def random_weighting(rng: np.random.Generator):
    kind = rng.integers(3)
    if kind == 0:
        return IdentityWeighting()
    if kind == 1:
        return TverskyKahnemanWeighting(float(rng.uniform(0.35, 1.0)))
    k = int(rng.integers(2, 6))
    ps = np.sort(rng.uniform(0.05, 0.95, k))
    ws = np.sort(rng.uniform(0.02, 0.98, k))
    knots = ((0.0, 0.0), *zip(ps.tolist(), ws.tolist()), (1.0, 1.0))
    return TabulatedWeighting(knots)


def random_utility(rng: np.random.Generator):
    kind = rng.integers(3)
    if kind == 0:
        return IdentityUtility()
    if kind == 1:
        return PowerUtility(float(rng.uniform(0.5, 1.0)))
    base = IdentityUtility() if rng.random() < 0.5 else PowerUtility(float(rng.uniform(0.5, 1.0)))
    return ScaledUtility(base, float(rng.uniform(0.5, 2.5)))


def random_spec(rng: np.random.Generator) -> CptSpec:
    return CptSpec(
        reference_point=float(rng.uniform(-1.0, 1.0)),
        u_plus=random_utility(rng),
        u_minus=random_utility(rng),
        w_plus=random_weighting(rng),
        w_minus=random_weighting(rng),
    )


# ---------------------------------------------------------------------------
# reference specs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def rn_spec() -> CptSpec:
    return CptSpec.risk_neutral()


@pytest.fixture(scope="session")
def tk_spec() -> CptSpec:
    """Power 0.88 utilities with the classic 0.61 / 0.69 weighting pair."""
    return CptSpec(
        0.0,
        PowerUtility(0.88),
        PowerUtility(0.88),
        TverskyKahnemanWeighting(0.61),
        TverskyKahnemanWeighting(0.69),
    )


@pytest.fixture(scope="session")
def tk_identity_spec() -> CptSpec:
    """Identity utilities with the 0.61 / 0.69 weighting pair (conforming)."""
    return CptSpec(
        0.0,
        IdentityUtility(),
        IdentityUtility(),
        TverskyKahnemanWeighting(0.61),
        TverskyKahnemanWeighting(0.69),
    )


@pytest.fixture(scope="session")
def tabulated_spec() -> CptSpec:
    w = TabulatedWeighting(((0.0, 0.0), (0.25, 0.4), (0.75, 0.6), (1.0, 1.0)))
    return CptSpec(0.0, IdentityUtility(), IdentityUtility(), w, w)


# ---------------------------------------------------------------------------
# hand-built models
# ---------------------------------------------------------------------------


def two_disturbance_model(alpha: float = 0.5) -> MarkovModel:
    """Two disturbances with masses 0.3 / 0.7, costs 1 / 2."""
    return MarkovModel(
        states=("s0", "s1", "s2"),
        feasible_actions={"s0": ("a",), "s1": ("a",), "s2": ("a",)},
        outcomes={
            ("s0", "a"): (Outcome("d0", 0.3, "s1", 1.0), Outcome("d1", 0.7, "s2", 2.0)),
            ("s1", "a"): (Outcome("d0", 1.0, "s1", 0.0),),
            ("s2", "a"): (Outcome("d0", 1.0, "s2", 0.0),),
        },
        cost_bound=2.0,
        mode=Discounted(alpha),
    )


def transient_branch_model() -> MarkovModel:
    """Three-state transient chain with a 0.4-mass absorbing branch."""
    return MarkovModel(
        states=("s0", "s1", "sink"),
        feasible_actions={"s0": ("a",), "s1": ("a",), "sink": ("stay",)},
        outcomes={
            ("s0", "a"): (
                Outcome("d0", 0.4, "sink", 0.7),
                Outcome("d1", 0.35, "s1", 1.0),
                Outcome("d2", 0.25, "s0", -2.0),
            ),
            ("s1", "a"): (Outcome("d0", 1.0, "sink", 0.0),),
            ("sink", "stay"): (Outcome("d0", 1.0, "sink", 0.0),),
        },
        cost_bound=2.0,
        mode=Transient("sink"),
    )


def recurrent_escape_model() -> MarkovModel:
    """Transient-mode model where one policy loops forever off the sink."""
    return MarkovModel(
        states=("s0", "s1", "sink"),
        feasible_actions={"s0": ("loop", "leave"), "s1": ("loop",), "sink": ("stay",)},
        outcomes={
            ("s0", "loop"): (Outcome("d0", 1.0, "s1", 1.0),),
            ("s0", "leave"): (Outcome("d0", 1.0, "sink", 1.0),),
            ("s1", "loop"): (Outcome("d0", 1.0, "s0", 1.0),),
            ("sink", "stay"): (Outcome("d0", 1.0, "sink", 0.0),),
        },
        cost_bound=1.0,
        mode=Transient("sink"),
    )


def three_level_model() -> MarkovModel:
    """Single action, three disturbances with masses 0.3 / 0.4 / 0.3.

    The return law has three distinct tail levels (1.0, 0.7, 0.3), which
    makes the monotonicity probe sensitive to non-monotone weightings."""
    return MarkovModel(
        states=("s0", "s1", "s2"),
        feasible_actions={"s0": ("a",), "s1": ("a",), "s2": ("a",)},
        outcomes={
            ("s0", "a"): (
                Outcome("d0", 0.3, "s0", 0.1),
                Outcome("d1", 0.4, "s1", 0.5),
                Outcome("d2", 0.3, "s2", 1.0),
            ),
            ("s1", "a"): (Outcome("d0", 1.0, "s1", 0.0),),
            ("s2", "a"): (Outcome("d0", 1.0, "s2", 0.0),),
        },
        cost_bound=1.0,
        mode=Discounted(0.9),
    )


@pytest.fixture(scope="session")
def model_corpus() -> list[tuple[str, MarkovModel]]:
    """Shared corpus for the monotonicity and contraction suites."""
    return [
        ("two-disturbance", two_disturbance_model()),
        ("three-level", three_level_model()),
        ("random-discounted-6", random_mdp(6, 3, 3, (-1.0, 1.0), Discounted(0.8), seed=11)),
        ("random-discounted-5", random_mdp(5, 2, 4, (-0.5, 1.0), Discounted(0.5), seed=12)),
        ("random-transient-5", random_mdp(5, 3, 3, (-1.0, 1.0), Transient("sink"), seed=13)),
        ("geometric", geometric_chain(0.5)),
        ("corridor-2", corridor(2)),
        ("corridor-3", corridor(3)),
        ("gridworld-3x3", gridworld(3, 3, step_cost=1.0, noise=0.1)),
        ("crafted", crafted_randomized_optimality()),
        ("transient-branch", transient_branch_model()),
    ]
