"""Core algebra for skew-evolution semiflows and their evolution cocycles.

A skew-evolution semiflow is a pair: a semiflow on a base space of
trajectories, plus a linear cocycle acting on R^p fibers above it.  This
module owns the base-point and grid types, the evaluation entry points
with their domain checks (pairs (t, s) must satisfy t >= s >= 0), the
exponential shift, the algebraic law checkers, and the metric on the
base space of shifted generator functions.

Norms of cocycle values span many orders of magnitude, so every margin
that feeds a pass/fail decision is computed in log-space via
``log_cocycle_norm``; models supply per-component log factors whenever
they have a diagonal closed form.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

# Relative residuals divide by max(norm, NORM_FLOOR) so that exact zeros
# do not turn into NaNs.
NORM_FLOOR = 1e-300


class DomainError(ValueError):
    """Evaluation outside t >= s >= 0, wrong base variant, or bad dimension."""


class PreconditionError(ValueError):
    """An operation's stated precondition was violated."""


class NormChoice(Enum):
    SUM_ABS = "sum_abs"
    EUCLID = "euclid"
    MAX_ABS = "max_abs"


# ---------------------------------------------------------------------------
# Base points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trivial:
    """Base point for scalar models: a nonnegative time-like coordinate."""

    value: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0.0):
            raise DomainError(f"Trivial base point needs a finite value >= 0, got {self.value}")

    def label(self) -> str:
        return f"trivial({self.value:.17g})"

    def sort_key(self) -> tuple:
        return (0, self.value, 0.0)


@dataclass(frozen=True)
class ShiftedGenerator:
    """The n-th generator function shifted left by sigma.

    Represents u -> x_n(u + sigma) where (x_n) is the fixed decreasing
    family implemented in :mod:`cocycle_lab.models`.
    """

    n: int
    sigma: float = 0.0

    def __post_init__(self) -> None:
        if not (isinstance(self.n, int) and self.n >= 1):
            raise DomainError(f"generator index must be an integer >= 1, got {self.n!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise DomainError(f"generator shift must be finite and >= 0, got {self.sigma}")

    def label(self) -> str:
        return f"x{self.n}^{self.sigma:.17g}"

    def sort_key(self) -> tuple:
        return (1, float(self.n), self.sigma)


BasePoint = Trivial | ShiftedGenerator


def base_discrepancy(a: BasePoint, b: BasePoint) -> float:
    """Coordinate discrepancy between base points (inf across variants)."""
    if isinstance(a, Trivial) and isinstance(b, Trivial):
        return abs(a.value - b.value)
    if isinstance(a, ShiftedGenerator) and isinstance(b, ShiftedGenerator):
        if a.n != b.n:
            return math.inf
        return abs(a.sigma - b.sigma)
    return math.inf


# ---------------------------------------------------------------------------
# Vectors and norms
# ---------------------------------------------------------------------------


def norm(v: Sequence[float] | np.ndarray, choice: NormChoice = NormChoice.SUM_ABS) -> float:
    arr = np.asarray(v, dtype=float)
    if choice is NormChoice.SUM_ABS:
        return float(np.sum(np.abs(arr)))
    if choice is NormChoice.EUCLID:
        return float(np.sqrt(np.sum(arr * arr)))
    return float(np.max(np.abs(arr)))


def _log_combine(log_terms: np.ndarray, choice: NormChoice) -> float:
    """Norm of a vector given the logs of its component magnitudes."""
    if log_terms.size == 0:
        return -math.inf
    if log_terms.size == 1:
        # logsumexp of a singleton is the entry itself, for every norm.
        return float(log_terms[0])
    if choice is NormChoice.SUM_ABS:
        return _logsumexp_small(log_terms)
    if choice is NormChoice.EUCLID:
        return 0.5 * _logsumexp_small(2.0 * log_terms)
    return float(np.max(log_terms))


def _logsumexp_small(a: np.ndarray) -> float:
    """logsumexp tuned for the short arrays this package produces.

    scipy's implementation dominates runtime when called per sample;
    dimensions here are the fiber dimension, so a direct shifted sum is
    both exact enough and an order of magnitude cheaper.
    """
    if a.size > 16:
        return float(logsumexp(a))
    m = float(np.max(a))
    if m == -math.inf or not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(a - m))))


# ---------------------------------------------------------------------------
# The pair (semiflow, cocycle)
# ---------------------------------------------------------------------------

SemiflowFn = Callable[[float, float, BasePoint], BasePoint]
CocycleFn = Callable[[float, float, BasePoint, np.ndarray], np.ndarray]
LogFactorsFn = Callable[[float, float, BasePoint], np.ndarray]


@dataclass(frozen=True, eq=False)
class SkewEvolutionSemiflow:
    """An evolution semiflow on base points plus a cocycle on R^p fibers.

    ``log_factors(t, s, x)``, when present, returns the per-component log
    gains of a diagonal cocycle; checkers use it to evaluate norms in
    log-space without overflow.  ``strongly_measurable`` gates the
    integral-instability operations.  ``descriptor`` records how the
    model was built, for reports.
    """

    semiflow: SemiflowFn
    cocycle: CocycleFn
    dimension: int
    norm_choice: NormChoice = NormChoice.SUM_ABS
    strongly_measurable: bool = True
    log_factors: LogFactorsFn | None = None
    descriptor: dict = field(default_factory=dict)


def _require_pair(t: float, s: float) -> None:
    if not (math.isfinite(t) and math.isfinite(s)):
        raise DomainError(f"times must be finite, got (t={t}, s={s})")
    if s < 0.0 or t < s:
        raise DomainError(f"(t, s) = ({t}, {s}) outside the admissible region t >= s >= 0")


def eval_semiflow(xi: SkewEvolutionSemiflow, t: float, s: float, x: BasePoint) -> BasePoint:
    _require_pair(t, s)
    return xi.semiflow(t, s, x)


def eval_cocycle(
    xi: SkewEvolutionSemiflow, t: float, s: float, x: BasePoint, v: Sequence[float] | np.ndarray
) -> np.ndarray:
    _require_pair(t, s)
    arr = np.asarray(v, dtype=float)
    if arr.shape != (xi.dimension,):
        raise DomainError(f"vector has shape {arr.shape}, model dimension is {xi.dimension}")
    return xi.cocycle(t, s, x, arr)


def eval_skew(
    xi: SkewEvolutionSemiflow, t: float, s: float, x: BasePoint, v: Sequence[float] | np.ndarray
) -> tuple[BasePoint, np.ndarray]:
    """Evaluate base motion and fiber action together."""
    return eval_semiflow(xi, t, s, x), eval_cocycle(xi, t, s, x, v)


def log_cocycle_norm(
    xi: SkewEvolutionSemiflow, t: float, s: float, x: BasePoint, v: Sequence[float] | np.ndarray
) -> float:
    """log ||Phi(t, s, x) v|| under the model's norm, computed stably.

    Uses the model's closed-form log factors when available; otherwise
    falls back to the log of the directly evaluated norm.  Returns -inf
    for an exactly zero image.
    """
    _require_pair(t, s)
    arr = np.asarray(v, dtype=float)
    if arr.shape != (xi.dimension,):
        raise DomainError(f"vector has shape {arr.shape}, model dimension is {xi.dimension}")
    if xi.log_factors is not None:
        g = np.asarray(xi.log_factors(t, s, x), dtype=float)
        mask = arr != 0.0
        with np.errstate(divide="ignore"):
            terms = g[mask] + np.log(np.abs(arr[mask]))
        return _log_combine(terms, xi.norm_choice)
    value = norm(xi.cocycle(t, s, x, arr), xi.norm_choice)
    return math.log(value) if value > 0.0 else -math.inf


def shift_cocycle(xi: SkewEvolutionSemiflow, gamma: float) -> SkewEvolutionSemiflow:
    """Damp the cocycle by exp(-gamma (t - s)), leaving the semiflow alone.

    Acts as a group in gamma: shifting by gamma1 then gamma2 agrees with
    shifting by gamma1 + gamma2 up to roundoff, and gamma = 0 is the
    identity.
    """
    if not math.isfinite(gamma):
        raise PreconditionError(f"shift parameter must be finite, got {gamma}")

    def shifted_cocycle(t: float, s: float, x: BasePoint, v: np.ndarray) -> np.ndarray:
        return math.exp(-gamma * (t - s)) * xi.cocycle(t, s, x, v)

    shifted_log: LogFactorsFn | None = None
    if xi.log_factors is not None:
        base_log = xi.log_factors

        def shifted_log(t: float, s: float, x: BasePoint) -> np.ndarray:  # type: ignore[no-redef]
            return np.asarray(base_log(t, s, x), dtype=float) - gamma * (t - s)

    return SkewEvolutionSemiflow(
        semiflow=xi.semiflow,
        cocycle=shifted_cocycle,
        dimension=xi.dimension,
        norm_choice=xi.norm_choice,
        strongly_measurable=xi.strongly_measurable,
        log_factors=shifted_log,
        descriptor={"kind": "shifted", "gamma": gamma, "base": xi.descriptor},
    )


# ---------------------------------------------------------------------------
# Sample grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleGrid:
    """Times, base points, and nonzero vectors to sample inequalities on.

    Admissible triples are (t, s, t0) drawn from ``times`` with
    t >= s >= t0, crossed with every base point and vector.
    """

    times: tuple[float, ...]
    base_points: tuple[BasePoint, ...]
    vectors: tuple[tuple[float, ...], ...]

    @classmethod
    def create(
        cls,
        times: Iterable[float],
        base_points: Iterable[BasePoint],
        vectors: Iterable[Sequence[float]],
    ) -> "SampleGrid":
        ts = tuple(float(t) for t in times)
        for t in ts:
            if not (math.isfinite(t) and t >= 0.0):
                raise PreconditionError(f"grid times must be finite and >= 0, got {t}")
        if any(b >= a for a, b in zip(ts[1:], ts)):
            raise PreconditionError("grid times must be strictly increasing")
        vecs = []
        for v in vectors:
            tup = tuple(float(c) for c in v)
            if not all(math.isfinite(c) for c in tup):
                raise PreconditionError(f"vector components must be finite, got {tup}")
            if all(c == 0.0 for c in tup):
                raise PreconditionError("zero vectors are not allowed in a sample grid")
            vecs.append(tup)
        return cls(times=ts, base_points=tuple(base_points), vectors=tuple(vecs))

    def require_nonempty(self) -> None:
        if not (self.times and self.base_points and self.vectors):
            raise PreconditionError("grid nonempty")

    def vector_arrays(self) -> list[np.ndarray]:
        return [np.asarray(v, dtype=float) for v in self.vectors]

    def vector_labels(self) -> list[str]:
        return [format_vector(v) for v in self.vectors]

    def pairs(self) -> Iterator[tuple[int, int]]:
        """Index pairs (i, j) with times[i] >= times[j]."""
        for j in range(len(self.times)):
            for i in range(j, len(self.times)):
                yield i, j

    def triples(self) -> Iterator[tuple[int, int, int]]:
        """Index triples (i, j, k) with times[i] >= times[j] >= times[k]."""
        for k in range(len(self.times)):
            for j in range(k, len(self.times)):
                for i in range(j, len(self.times)):
                    yield i, j, k

    @property
    def grid_hash(self) -> str:
        parts = ["times:" + ",".join(f"{t:.17g}" for t in self.times)]
        parts.append("base:" + ";".join(x.label() for x in self.base_points))
        parts.append("vectors:" + ";".join(self.vector_labels()))
        return hashlib.sha256("|".join(parts).encode("ascii")).hexdigest()


def format_vector(v: Sequence[float]) -> str:
    return "[" + ",".join(f"{c:.17g}" for c in v) + "]"


# ---------------------------------------------------------------------------
# Check reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    t: float
    s: float
    t0: float
    base: str
    vector: str
    margin: float

    def sort_key(self) -> tuple:
        return (self.t, self.s, self.t0, self.base, self.vector)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "s": self.s,
            "t0": self.t0,
            "base": self.base,
            "vector": self.vector,
            "margin": self.margin,
        }


# A sink receives (t, s, t0, base_label, vector_label, margin) per sample.
MarginSink = Callable[[float, float, float, str, str, float], None]


@dataclass(frozen=True)
class CheckReport:
    """Outcome of sampling one certificate inequality over a grid.

    ``worst_margin`` is the minimum log-margin over all samples and the
    verdict is Pass exactly when no sample fell below -tol.
    """

    check: str
    tol: float
    samples_checked: int
    worst_margin: float
    counterexamples: tuple[Counterexample, ...]

    @property
    def verdict(self) -> str:
        return "pass" if not self.counterexamples else "fail"

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "tol": self.tol,
            "samples_checked": self.samples_checked,
            "worst_margin": self.worst_margin,
            "counterexamples": [c.to_json_dict() for c in self.counterexamples],
            "verdict": self.verdict,
        }


class _ReportBuilder:
    """Accumulates margins, tracks the worst one, and collects failures."""

    def __init__(self, check: str, tol: float, sink: MarginSink | None = None):
        if not (math.isfinite(tol) and tol >= 0.0):
            raise PreconditionError(f"margin tolerance must be finite and >= 0, got {tol}")
        self.check = check
        self.tol = tol
        self.sink = sink
        self.samples = 0
        self.worst = math.inf
        self.failures: list[Counterexample] = []

    def add(self, t: float, s: float, t0: float, base: str, vector: str, margin: float) -> None:
        self.samples += 1
        if margin < self.worst:
            self.worst = margin
        if margin < -self.tol or math.isnan(margin):
            self.failures.append(Counterexample(t, s, t0, base, vector, float(margin)))
        if self.sink is not None:
            self.sink(t, s, t0, base, vector, float(margin))

    def add_array(
        self,
        ts: np.ndarray,
        ss: np.ndarray,
        t0s: np.ndarray,
        base: str,
        vector: str,
        margins: np.ndarray,
    ) -> None:
        """Absorb a batch of samples; only failures cost per-row work."""
        n = margins.size
        if n == 0:
            return
        self.samples += n
        finite_or_inf = margins[~np.isnan(margins)]
        if finite_or_inf.size:
            low = float(np.min(finite_or_inf))
            if low < self.worst:
                self.worst = low
        bad = np.flatnonzero((margins < -self.tol) | np.isnan(margins))
        for idx in bad:
            self.failures.append(
                Counterexample(
                    float(ts[idx]), float(ss[idx]), float(t0s[idx]), base, vector, float(margins[idx])
                )
            )
        if self.sink is not None:
            for i in range(n):
                self.sink(float(ts[i]), float(ss[i]), float(t0s[i]), base, vector, float(margins[i]))

    def finish(self) -> CheckReport:
        if self.samples == 0:
            raise PreconditionError("grid nonempty")
        ordered = tuple(sorted(self.failures, key=Counterexample.sort_key))
        return CheckReport(
            check=self.check,
            tol=self.tol,
            samples_checked=self.samples,
            worst_margin=self.worst,
            counterexamples=ordered,
        )


# ---------------------------------------------------------------------------
# Law checkers
# ---------------------------------------------------------------------------


def check_semiflow_laws(
    xi: SkewEvolutionSemiflow,
    grid: SampleGrid,
    tol: float = 1e-9,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Verify the identity and composition laws of the base semiflow.

    Margins are the negated coordinate discrepancies, so a clean model
    reports worst_margin 0 and any violation shows up as margin < -tol.
    """
    grid.require_nonempty()
    builder = _ReportBuilder("semiflow-laws", tol, margin_sink)
    times = grid.times
    n = len(times)
    for x in grid.base_points:
        label = x.label()
        for t in times:
            d = base_discrepancy(eval_semiflow(xi, t, t, x), x)
            builder.add(t, t, t, label, "-", -d)
        for k in range(n):
            t0 = times[k]
            # flown[i - k] is phi(t_i, t0, x); it doubles as the direct
            # route for every split point s between t0 and t_i.
            flown = [eval_semiflow(xi, s, t0, x) for s in times[k:]]
            for j in range(k, n):
                s, mid = times[j], flown[j - k]
                for i in range(j, n):
                    through = eval_semiflow(xi, times[i], s, mid)
                    d = base_discrepancy(through, flown[i - k])
                    builder.add(times[i], s, t0, label, "-", -d)
    return builder.finish()


def check_cocycle_laws(
    xi: SkewEvolutionSemiflow,
    grid: SampleGrid,
    tol: float = 1e-9,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Verify the cocycle identity and composition over the semiflow.

    The composition residual is a relative error: the through-route value
    Phi(t, s, phi(s, t0, x)) Phi(s, t0, x) v is compared against the
    direct Phi(t, t0, x) v, divided by max(||direct||, 1e-300).
    """
    grid.require_nonempty()
    builder = _ReportBuilder("cocycle-laws", tol, margin_sink)
    times = grid.times
    n = len(times)
    vectors = grid.vector_arrays()
    labels = grid.vector_labels()
    for x in grid.base_points:
        xlabel = x.label()
        for v, vlabel in zip(vectors, labels):
            vnorm = norm(v, xi.norm_choice)
            for t in times:
                res = norm(eval_cocycle(xi, t, t, x, v) - v, xi.norm_choice)
                builder.add(t, t, t, xlabel, vlabel, -res / max(vnorm, NORM_FLOOR))
            for k in range(n):
                t0 = times[k]
                # moved[i - k] is Phi(t_i, t0, x) v: the partial leg when
                # t_i plays the split point and the direct route otherwise.
                flown = [eval_semiflow(xi, s, t0, x) for s in times[k:]]
                moved = [eval_cocycle(xi, s, t0, x, v) for s in times[k:]]
                for j in range(k, n):
                    s, mid, w = times[j], flown[j - k], moved[j - k]
                    for i in range(j, n):
                        through = eval_cocycle(xi, times[i], s, mid, w)
                        direct = moved[i - k]
                        rel = norm(through - direct, xi.norm_choice) / max(
                            norm(direct, xi.norm_choice), NORM_FLOOR
                        )
                        builder.add(times[i], s, t0, xlabel, vlabel, -rel)
    return builder.finish()


# ---------------------------------------------------------------------------
# Metric on the generator base space
# ---------------------------------------------------------------------------


def metric_distance(
    x: BasePoint, y: BasePoint, n_max: int = 20, samples_per_unit: int = 16
) -> float:
    """Weighted sup-metric between two shifted generator functions.

    Sums 2^{-n} d_n / (1 + d_n) for n = 1 .. n_max, where d_n is the sup
    of |x(u) - y(u)| over [0, n] approximated on a uniform grid with
    ``samples_per_unit`` subintervals per unit.  Truncation error is at
    most 2^{-n_max}.
    """
    from .models import generator_value  # deferred: models builds on this module

    if not (isinstance(x, ShiftedGenerator) and isinstance(y, ShiftedGenerator)):
        raise PreconditionError("metric_distance is defined on shifted generator points")
    if n_max < 1 or samples_per_unit < 1:
        raise PreconditionError("n_max and samples_per_unit must be >= 1")
    total = 0.0
    for n in range(1, n_max + 1):
        u = np.linspace(0.0, float(n), n * samples_per_unit + 1)
        dn = float(
            np.max(np.abs(generator_value(x.n, x.sigma, u) - generator_value(y.n, y.sigma, u)))
        )
        total += 2.0 ** (-n) * dn / (1.0 + dn)
    return total
