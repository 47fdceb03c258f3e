"""Order-statistics estimation of the CPT value from i.i.d. samples.

Sorting the batch ascending as X_[1] <= ... <= X_[n], the estimate is

    C+_n = sum_i u+((X_[i]-b)_+) * [w+((n+1-i)/n) - w+((n-i)/n)]
    C-_n = sum_i u-((X_[i]-b)_-) * [w-(i/n)     - w-((i-1)/n)]
    C_n  = C+_n - C-_n

which coincides with the exact staircase value of the empirical law and
converges almost surely to the CPT value as n grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cptdp.cpt import CptSpec, DiscreteDistribution

__all__ = [
    "SampleBatch",
    "EstimatorResult",
    "DiscreteSampler",
    "StudyRow",
    "StudyTable",
    "estimate_cpt",
    "convergence_study",
]


@dataclass(frozen=True)
class SampleBatch:
    """Immutable batch of i.i.d. draws plus the seed that produced it."""

    samples: tuple[float, ...]
    seed: int = 0
    source_label: str = ""

    def __post_init__(self) -> None:
        samples = tuple(float(s) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ValueError("sample batch is empty")
        for i, s in enumerate(samples):
            if not math.isfinite(s):
                raise ValueError(f"non-finite sample at index {i}: {s!r}")

    def __len__(self) -> int:
        return len(self.samples)

    def sorted_values(self) -> np.ndarray:
        # stable sort: ties keep original order, so results are reproducible
        return np.sort(np.asarray(self.samples, dtype=float), kind="stable")


@dataclass(frozen=True)
class EstimatorResult:
    value: float
    positive_part: float
    negative_part: float
    n: int


def estimate_cpt(batch: SampleBatch, spec: CptSpec) -> EstimatorResult:
    """CPT-value estimate from the sorted batch.

    The reference point is subtracted before applying the gain/loss
    utilities, so a nonzero b is handled by shifting the samples.
    """
    if len(batch) == 0:
        raise ValueError("sample batch is empty")
    x = batch.sorted_values()
    if not np.all(np.isfinite(x)):
        idx = int(np.flatnonzero(~np.isfinite(x))[0])
        raise ValueError(f"non-finite sample at sorted index {idx}")
    n = x.size
    b = spec.reference_point
    gains = spec.u_plus(np.maximum(x - b, 0.0))
    losses = spec.u_minus(np.maximum(b - x, 0.0))
    i = np.arange(1, n + 1, dtype=float)
    w_pos = spec.w_plus((n + 1.0 - i) / n) - spec.w_plus((n - i) / n)
    w_neg = spec.w_minus(i / n) - spec.w_minus((i - 1.0) / n)
    positive = float(np.sum(gains * w_pos))
    negative = float(np.sum(losses * w_neg))
    return EstimatorResult(
        value=positive - negative,
        positive_part=positive,
        negative_part=negative,
        n=int(n),
    )


@dataclass(frozen=True)
class DiscreteSampler:
    """Seeded i.i.d. sampler from a proper discrete law.

    Batches for distinct (n, repeat) pairs use independently derived
    streams, so parallel evaluation of repeats cannot change any result.
    """

    law: DiscreteDistribution
    seed: int
    label: str = ""

    def __post_init__(self) -> None:
        if self.law.subnormalized:
            raise ValueError("sampler requires a proper law")

    def batch(self, n: int, repeat: int = 0) -> SampleBatch:
        if n < 1:
            raise ValueError("batch size must be at least 1")
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, n, repeat)))
        draws = self.law.sample(rng, n)
        return SampleBatch(
            samples=tuple(float(v) for v in draws),
            seed=self.seed,
            source_label=self.label or f"discrete law ({len(self.law.atoms)} atoms)",
        )


@dataclass(frozen=True)
class StudyRow:
    n: int
    repeat: int
    estimate: float
    abs_error: float


@dataclass(frozen=True)
class StudyTable:
    rows: tuple[StudyRow, ...]
    ground_truth: float

    def errors_for(self, n: int) -> np.ndarray:
        return np.array([r.abs_error for r in self.rows if r.n == n])

    def summary(self) -> list[tuple[int, float, float]]:
        """(n, mean abs error, std of abs error) per sample size."""
        out = []
        for n in sorted({r.n for r in self.rows}):
            e = self.errors_for(n)
            out.append((n, float(e.mean()), float(e.std())))
        return out

    def write_csv(self, path) -> None:
        """Emit the error curve in the harness CSV layout (n, repeat,
        estimate, abs_error), rows ordered n ascending then repeat."""
        from cptdp.fileio import write_csv

        write_csv(
            path,
            ("n", "repeat", "estimate", "abs_error"),
            [(r.n, r.repeat, r.estimate, r.abs_error) for r in self.rows],
        )


def convergence_study(
    sampler: DiscreteSampler,
    spec: CptSpec,
    ns: Sequence[int],
    repeats: int,
    ground_truth: DiscreteDistribution | None = None,
) -> StudyTable:
    """Estimation error curve against the exact value of the sampled law.

    Rows are ordered by n ascending then repeat ascending; the layout
    matches the CSV emitted by the command-line harness.
    """
    from cptdp.cpt import cpt_value_exact

    ns = [int(n) for n in ns]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("sample sizes must be strictly ascending")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if ground_truth is not None and ground_truth.merged().atoms != sampler.law.merged().atoms:
        raise ValueError("ground-truth law does not match the sampler's law")
    exact = cpt_value_exact(sampler.law, spec)
    rows = []
    for n in ns:
        for rep in range(repeats):
            est = estimate_cpt(sampler.batch(n, rep), spec)
            rows.append(
                StudyRow(n=n, repeat=rep, estimate=est.value, abs_error=abs(est.value - exact))
            )
    return StudyTable(rows=tuple(rows), ground_truth=exact)
