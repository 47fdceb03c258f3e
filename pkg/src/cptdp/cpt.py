"""Cumulative prospect theory primitives.

A CPT valuation of a random outcome X combines a reference point b,
separate utilities for gains and losses, and probability weighting of
tail probabilities:

    C(X) = integral_0^inf  w+( P( u+((X-b)_+) > x ) ) dx
         - integral_0^inf  w-( P( u-((X-b)_-) > x ) ) dx

with (y)_+ = max(y, 0) and (y)_- = -min(y, 0).  For a finite discrete
law both integrands are right-continuous step functions of x, so each
integral is a finite sum of (segment width) * w(tail mass).  This module
provides the weighting and utility families, discrete distributions,
the exact staircase evaluation, and an adaptive-quadrature cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

# Floating tolerance for mass / normalization checks throughout.
MASS_EPS = 1e-12

__all__ = [
    "MASS_EPS",
    "QuadratureError",
    "WeightingFunction",
    "IdentityWeighting",
    "TverskyKahnemanWeighting",
    "TabulatedWeighting",
    "UtilityFunction",
    "IdentityUtility",
    "PowerUtility",
    "ScaledUtility",
    "CptSpec",
    "DiscreteDistribution",
    "weight_eval",
    "utility_derivative",
    "utility_inverse",
    "cpt_decomposition",
    "cpt_value_exact",
    "cpt_value_subnormalized",
    "cpt_value_quadrature",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# probability weighting functions
# ---------------------------------------------------------------------------


class WeightingFunction:
    """Monotone non-decreasing map of [0, 1] onto [0, 1] with w(0)=0, w(1)=1.

    Subclasses implement ``_eval`` on arrays of valid probabilities.  The
    ``chord_bound`` property reports sup_p w(p)/p (the smallest xi with
    w(p) <= xi * p), which is infinite for families that amplify small
    probabilities faster than linearly.
    """

    def _eval(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, p):
        arr = np.asarray(p, dtype=float)
        out = np.clip(self._eval(arr), 0.0, 1.0)
        if np.ndim(p) == 0:
            return float(out)
        return out

    @property
    def chord_bound(self) -> float:
        raise NotImplementedError

    def _check_monotone_grid(self, n: int = 2049) -> None:
        grid = np.linspace(0.0, 1.0, n)
        vals = self(grid)
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError(f"{self.describe()} is not monotone non-decreasing")


@dataclass(frozen=True)
class IdentityWeighting(WeightingFunction):
    """w(p) = p."""

    def _eval(self, p: np.ndarray) -> np.ndarray:
        return p

    @property
    def chord_bound(self) -> float:
        return 1.0

    def describe(self) -> str:
        return "identity"


@dataclass(frozen=True)
class TverskyKahnemanWeighting(WeightingFunction):
    """w(p) = p^delta / (p^delta + (1-p)^delta)^(1/delta).

    delta = 1 recovers the identity.  Small delta overweights rare events;
    the form is rejected at construction if it fails a grid monotonicity
    check (it loses monotonicity for delta below roughly 0.28).
    """

    delta: float

    def __post_init__(self) -> None:
        if not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        self._check_monotone_grid()

    def _eval(self, p: np.ndarray) -> np.ndarray:
        d = self.delta
        with np.errstate(divide="ignore", invalid="ignore"):
            num = p**d
            den = (num + (1.0 - p) ** d) ** (1.0 / d)
            out = np.where(p <= 0.0, 0.0, np.where(p >= 1.0, 1.0, num / den))
        return out

    @property
    def chord_bound(self) -> float:
        if self.delta == 1.0:
            return 1.0
        if self.delta < 1.0:
            # w(p) ~ p^delta near 0, so w(p)/p is unbounded
            return math.inf
        grid = np.linspace(1e-9, 1.0, 4097)
        return float(np.max(self(grid) / grid))

    def describe(self) -> str:
        return f"tversky-kahneman(delta={self.delta})"


@dataclass(frozen=True)
class TabulatedWeighting(WeightingFunction):
    """Piecewise-linear weighting through ascending (p, w) knots.

    The knot list must start at (0, 0), end at (1, 1), and be monotone in
    both coordinates; this is validated at construction unless ``validate``
    is disabled (test fixtures only).
    """

    knots: tuple[tuple[float, float], ...]
    validate: bool = True

    def __post_init__(self) -> None:
        knots = tuple((float(p), float(w)) for p, w in self.knots)
        object.__setattr__(self, "knots", knots)
        ps = [p for p, _ in knots]
        ws = [w for _, w in knots]
        if len(knots) < 2:
            raise ValueError("tabulated weighting needs at least two knots")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("knot probabilities must be strictly ascending")
        if ps[0] != 0.0 or ps[-1] != 1.0:
            raise ValueError("knots must cover p=0 and p=1")
        if not self.validate:
            return
        if ws[0] != 0.0 or ws[-1] != 1.0:
            raise ValueError("knots must satisfy w(0)=0 and w(1)=1")
        if any(b < a - 1e-12 for a, b in zip(ws, ws[1:])):
            raise ValueError("knot weights must be monotone non-decreasing")

    def _eval(self, p: np.ndarray) -> np.ndarray:
        ps = np.array([k[0] for k in self.knots])
        ws = np.array([k[1] for k in self.knots])
        return np.interp(p, ps, ws)

    @property
    def chord_bound(self) -> float:
        # w(p)/p is monotone on each linear segment, so knots attain the sup
        return max(w / p for p, w in self.knots if p > 0.0)

    def describe(self) -> str:
        return f"tabulated({len(self.knots)} knots)"


def weight_eval(w: WeightingFunction, p):
    """Evaluate w(p) for p in [0, 1] (up to 1e-12 slack), clamped to [0, 1]."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < -MASS_EPS) or np.any(arr > 1.0 + MASS_EPS):
        bad = arr[(arr < -MASS_EPS) | (arr > 1.0 + MASS_EPS)]
        raise ValueError(f"probability outside [0, 1]: {float(np.ravel(bad)[0])!r}")
    return w(np.clip(arr, 0.0, 1.0)) if np.ndim(p) else w(min(max(float(p), 0.0), 1.0))


# ---------------------------------------------------------------------------
# utility functions (non-negative reals -> non-negative reals)
# ---------------------------------------------------------------------------


class UtilityFunction:
    """Monotone non-decreasing utility with u(0) = 0 on [0, inf).

    Each family provides a closed-form derivative and inverse.
    ``derivative_at_zero`` reports u'(0+), returning +inf when the
    derivative is unbounded there (power exponents below 1).
    """

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("utility domain is the non-negative reals")
        out = self._eval(arr)
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    @property
    def derivative_at_zero(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class IdentityUtility(UtilityFunction):
    """u(x) = x."""

    def _eval(self, x: np.ndarray) -> np.ndarray:
        return x

    def derivative(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.ones_like(arr)
        return float(out) if np.ndim(x) == 0 else out

    def inverse(self, y):
        arr = np.asarray(y, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("inverse domain is the non-negative reals")
        return float(arr) if np.ndim(y) == 0 else arr

    @property
    def derivative_at_zero(self) -> float:
        return 1.0

    def describe(self) -> str:
        return "identity"


@dataclass(frozen=True)
class PowerUtility(UtilityFunction):
    """u(x) = x^sigma with sigma in (0, 1].

    For sigma < 1 the derivative is unbounded at 0; ``derivative`` reports
    +inf there and contraction checkers treat the family as structurally
    non-conforming.
    """

    exponent: float

    def __post_init__(self) -> None:
        if not (0.0 < self.exponent <= 1.0):
            raise ValueError(f"exponent must lie in (0, 1], got {self.exponent}")

    def _eval(self, x: np.ndarray) -> np.ndarray:
        return x**self.exponent

    def derivative(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("derivative domain is the non-negative reals")
        s = self.exponent
        if s == 1.0:
            out = np.ones_like(arr)
        else:
            with np.errstate(divide="ignore"):
                out = np.where(arr == 0.0, np.inf, s * arr ** (s - 1.0))
        return float(out) if np.ndim(x) == 0 else out

    def inverse(self, y):
        arr = np.asarray(y, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("inverse domain is the non-negative reals")
        out = arr ** (1.0 / self.exponent)
        return float(out) if np.ndim(y) == 0 else out

    @property
    def derivative_at_zero(self) -> float:
        return 1.0 if self.exponent == 1.0 else math.inf

    def describe(self) -> str:
        return f"power(sigma={self.exponent})"


@dataclass(frozen=True)
class ScaledUtility(UtilityFunction):
    """u(x) = factor * base(x) with factor > 0 (loss aversion scaling)."""

    base: UtilityFunction
    factor: float

    def __post_init__(self) -> None:
        if not (self.factor > 0.0 and math.isfinite(self.factor)):
            raise ValueError(f"factor must be positive and finite, got {self.factor}")

    def _eval(self, x: np.ndarray) -> np.ndarray:
        return self.factor * self.base._eval(x)

    def derivative(self, x):
        out = self.factor * np.asarray(self.base.derivative(x), dtype=float)
        return float(out) if np.ndim(x) == 0 else out

    def inverse(self, y):
        arr = np.asarray(y, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("inverse domain is the non-negative reals")
        return self.base.inverse(arr / self.factor) if np.ndim(y) else float(
            self.base.inverse(float(y) / self.factor)
        )

    @property
    def derivative_at_zero(self) -> float:
        return self.factor * self.base.derivative_at_zero

    def describe(self) -> str:
        return f"scaled({self.base.describe()}, factor={self.factor})"


def utility_derivative(u: UtilityFunction, x):
    """Closed-form u'(x); +inf sentinel at 0 for power exponents below 1."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("derivative domain is the non-negative reals")
    return u.derivative(x)


def utility_inverse(u: UtilityFunction, y):
    """Closed-form inverse on the range: u(utility_inverse(u, y)) == y."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("inverse domain is the non-negative reals")
    return u.inverse(y)


# ---------------------------------------------------------------------------
# CPT specification and discrete distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CptSpec:
    """Reference point plus gain/loss utilities and weighting functions."""

    reference_point: float
    u_plus: UtilityFunction
    u_minus: UtilityFunction
    w_plus: WeightingFunction
    w_minus: WeightingFunction

    @classmethod
    def risk_neutral(cls) -> "CptSpec":
        """b = 0 and all four component functions the identity."""
        return cls(
            reference_point=0.0,
            u_plus=IdentityUtility(),
            u_minus=IdentityUtility(),
            w_plus=IdentityWeighting(),
            w_minus=IdentityWeighting(),
        )

    def with_reference(self, b: float) -> "CptSpec":
        return CptSpec(float(b), self.u_plus, self.u_minus, self.w_plus, self.w_minus)

    @property
    def is_risk_neutral(self) -> bool:
        return (
            self.reference_point == 0.0
            and all(
                isinstance(u, IdentityUtility) for u in (self.u_plus, self.u_minus)
            )
            and all(
                isinstance(w, IdentityWeighting) for w in (self.w_plus, self.w_minus)
            )
        )


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite list of (value, mass) atoms, optionally sub-normalized.

    Proper distributions must have total mass 1 within 1e-12.  Laws built
    by restricting to non-absorbing transitions carry total mass below 1
    and must be flagged ``subnormalized`` (an empty atom list is then
    allowed).  Atom values need not be distinct.
    """

    atoms: tuple[tuple[float, float], ...]
    subnormalized: bool = False
    mass_tol: float = MASS_EPS

    def __post_init__(self) -> None:
        atoms = tuple((float(v), float(m)) for v, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for i, (v, m) in enumerate(atoms):
            if not math.isfinite(v):
                raise ValueError(f"atom {i} has non-finite value {v!r}")
            if not math.isfinite(m) or m < 0.0:
                raise ValueError(f"atom {i} has invalid mass {m!r}")
        total = math.fsum(m for _, m in atoms)
        if total > 1.0 + self.mass_tol:
            raise ValueError(f"total mass {total!r} exceeds 1")
        if not self.subnormalized and abs(total - 1.0) > self.mass_tol:
            raise ValueError(
                f"total mass {total!r} is not 1; flag the law subnormalized "
                "if the deficit is intentional"
            )
        object.__setattr__(self, "_total", total)

    @property
    def total_mass(self) -> float:
        return self._total

    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms], dtype=float)

    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    def mean(self) -> float:
        return math.fsum(v * m for v, m in self.atoms)

    def merged(self) -> "DiscreteDistribution":
        """Combine equal-valued atoms by summing their masses."""
        acc: dict[float, list[float]] = {}
        for v, m in self.atoms:
            acc.setdefault(v, []).append(m)
        merged = tuple(
            (v, math.fsum(ms)) for v, ms in sorted(acc.items(), key=lambda kv: kv[0])
        )
        return DiscreteDistribution(merged, self.subnormalized, self.mass_tol)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.subnormalized:
            raise ValueError("cannot sample a sub-normalized law")
        return rng.choice(self.values(), size=n, p=self.masses() / self.total_mass)


# ---------------------------------------------------------------------------
# exact staircase evaluation
# ---------------------------------------------------------------------------


def _tail_masses(sorted_values: list[float], sorted_masses: list[float]) -> list[float]:
    """Correctly-rounded suffix mass sums, one per distinct positive value.

    Tail probabilities feed the weighting functions, whose slope is
    unbounded near 0 and 1 for sub-linear families; fsum keeps the tail
    floats independent of summation order so that independent evaluation
    routes see bit-identical arguments.
    """
    tails = []
    start = 0
    n = len(sorted_values)
    while start < n:
        tails.append(math.fsum(sorted_masses[start:]))
        v = sorted_values[start]
        while start < n and sorted_values[start] == v:
            start += 1
    return tails


def _distorted_tail_integral(values: np.ndarray, masses: np.ndarray, w: WeightingFunction) -> float:
    """Exact integral of w(P(Y > x)) over x >= 0 for a discrete law of Y >= 0.

    P(Y > x) is constant between consecutive distinct values, so the
    integral is a finite sum of segment widths times distorted tails.
    """
    keep = values > 0.0
    if not np.any(keep):
        return 0.0
    v = values[keep]
    m = masses[keep]
    order = np.argsort(v, kind="stable")
    vs = v[order].tolist()
    ms = m[order].tolist()
    tails = _tail_masses(vs, ms)
    distinct = sorted(set(vs))
    widths = np.diff(np.concatenate(([0.0], distinct)))
    wt = w(np.clip(np.asarray(tails), 0.0, 1.0))
    return float(np.sum(widths * wt))


def _gain_loss_laws(dist: DiscreteDistribution, spec: CptSpec):
    b = spec.reference_point
    vals = dist.values()
    masses = dist.masses()
    gains = spec.u_plus(np.maximum(vals - b, 0.0))
    losses = spec.u_minus(np.maximum(b - vals, 0.0))
    if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(losses))):
        raise ValueError("utility evaluation produced a non-finite value")
    return gains, losses, masses


def cpt_decomposition(
    dist: DiscreteDistribution, spec: CptSpec, *, allow_subnormalized: bool = False
) -> tuple[float, float]:
    """(positive integral, negative integral) of the CPT valuation."""
    if dist.subnormalized and not allow_subnormalized:
        raise ValueError("sub-normalized law passed to a proper-law evaluation")
    if not dist.atoms:
        return 0.0, 0.0
    gains, losses, masses = _gain_loss_laws(dist, spec)
    pos = _distorted_tail_integral(gains, masses, spec.w_plus)
    neg = _distorted_tail_integral(losses, masses, spec.w_minus)
    return pos, neg


def cpt_value_exact(dist: DiscreteDistribution, spec: CptSpec) -> float:
    """Exact CPT value of a proper discrete distribution."""
    pos, neg = cpt_decomposition(dist, spec, allow_subnormalized=False)
    return pos - neg

def cpt_value_subnormalized(dist: DiscreteDistribution, spec: CptSpec) -> float:
    """CPT staircase value where tails come from a sub-normalized law.

    Mass excluded from the law contributes to neither integral; proper
    laws evaluate identically to ``cpt_value_exact``.
    """
    pos, neg = cpt_decomposition(dist, spec, allow_subnormalized=True)
    return pos - neg


# ---------------------------------------------------------------------------
# quadrature cross-check
# ---------------------------------------------------------------------------


def _quad_tail_integral(
    u_values: np.ndarray, masses: np.ndarray, w: WeightingFunction, tol: float
) -> tuple[float, float]:
    keep = u_values > 0.0
    if not np.any(keep):
        return 0.0, 0.0
    v = u_values[keep].tolist()
    m = masses[keep].tolist()
    upper = max(v)

    def integrand(x: float) -> float:
        tail = math.fsum(mi for vi, mi in zip(v, m) if vi > x)
        return weight_eval(w, min(tail, 1.0))

    points = sorted({vi for vi in v if 0.0 < vi < upper})
    val, err = integrate.quad(
        integrand,
        0.0,
        upper,
        points=points or None,
        limit=max(100, 10 * len(points) + 50),
        epsabs=tol,
        epsrel=0.0,
    )
    return float(val), float(err)


def cpt_value_quadrature(dist: DiscreteDistribution, spec: CptSpec, tol: float) -> float:
    """Adaptive-quadrature evaluation of the two CPT tail integrals.

    Independent cross-check of ``cpt_value_exact``: the integrands are
    step functions, the quadrature splits at every step location, and the
    result is guaranteed within ``tol`` or a QuadratureError is raised.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if dist.subnormalized:
        raise ValueError("sub-normalized law passed to a proper-law evaluation")
    if not dist.atoms:
        raise ValueError("empty distribution")
    gains, losses, masses = _gain_loss_laws(dist, spec)
    pos, err_pos = _quad_tail_integral(gains, masses, spec.w_plus, tol / 4.0)
    neg, err_neg = _quad_tail_integral(losses, masses, spec.w_minus, tol / 4.0)
    if err_pos + err_neg > tol:
        raise QuadratureError(
            f"quadrature error estimate {err_pos + err_neg!r} exceeds tol {tol!r}"
        )
    return pos - neg
