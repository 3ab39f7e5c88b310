"""Witness certificates for the four asymptotic properties, with fitters.

Each property is an inequality with a witness function:

* decay: ||Phi(t + t0, t0, x) v|| >= f(t) ||v|| for a positive
  nonincreasing f, with a parametric form e^{-omega t} / n_tilde;
* instability: N(t) ||Phi(t, t0, x) v|| >= ||v||;
* exp-instability: N(t) e^{-nu (t - s)} ||Phi(t, t0, x) v|| >=
  ||Phi(s, t0, x) v||;
* integral-instability: the running integral of the trajectory norm is
  at most M(t) ||Phi(t, t0, x) v||.

Estimators fit the tightest grid witness (plus headroom), checkers
sample the inequality and report log-margins.  Every estimate/check pair
routes the per-sample statistic through one shared code path, so a
fitted certificate re-checks cleanly on its own grid even at tol = 0.

Witnesses store a log-value table alongside linear values; margins only
ever touch the log side.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._version import __version__
from .core import (
    CheckReport,
    MarginSink,
    PreconditionError,
    SampleGrid,
    SkewEvolutionSemiflow,
    _ReportBuilder,
    log_cocycle_norm,
    norm,
)
from .quadrature import QuadratureConfig, norm_integral_prefix

DEFAULT_HEADROOM = 0.01
DEFAULT_GROWTH_CAP = 8.0
DEFAULT_NU_CANDIDATES = tuple(0.25 * k for k in range(1, 17))

# Admissibility slack for the realized-rate gate in the exp-instability
# estimator; covers roundoff in the rate quotients, nothing more.
_RATE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Witness functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpWitness:
    """Parametric witness coef * e^{rate * t}."""

    coef: float
    rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.coef) and self.coef > 0.0):
            raise PreconditionError(f"witness coefficient must be finite and > 0, got {self.coef}")
        if not math.isfinite(self.rate):
            raise PreconditionError(f"witness rate must be finite, got {self.rate}")

    @property
    def form(self) -> str:
        return "parametric"

    def value(self, t: float) -> float:
        return self.coef * math.exp(self.rate * t)

    def log_value(self, t: float) -> float:
        return math.log(self.coef) + self.rate * t

    def breakpoints(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class TabulatedWitness:
    """Step-interpolated witness: value at the nearest knot time >= t.

    Past the last knot the last value extends; the log table is the
    authoritative side for margin arithmetic.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]
    log_values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.times:
            raise PreconditionError("tabulated witness needs at least one knot")
        if len(self.times) != len(self.values) or len(self.times) != len(self.log_values):
            raise PreconditionError("tabulated witness arrays must have equal length")
        if any(b >= a for a, b in zip(self.times[1:], self.times)) or self.times[0] < 0.0:
            raise PreconditionError("witness knot times must be strictly increasing and >= 0")
        for lv in self.log_values:
            if math.isnan(lv) or lv == math.inf:
                raise PreconditionError(f"witness log-values must be finite or -inf, got {lv}")

    @classmethod
    def from_values(cls, times: Sequence[float], values: Sequence[float]) -> "TabulatedWitness":
        vals = tuple(float(v) for v in values)
        if any(not (v > 0.0) or not math.isfinite(v) for v in vals):
            raise PreconditionError("tabulated witness values must be positive and finite")
        return cls(tuple(float(t) for t in times), vals, tuple(math.log(v) for v in vals))

    @classmethod
    def from_log_values(cls, times: Sequence[float], logs: Sequence[float]) -> "TabulatedWitness":
        lv = tuple(float(v) for v in logs)
        return cls(tuple(float(t) for t in times), tuple(math.exp(v) for v in lv), lv)

    @property
    def form(self) -> str:
        return "tabulated"

    def _index(self, t: float) -> int:
        idx = bisect.bisect_left(self.times, t)
        return idx if idx < len(self.times) else len(self.times) - 1

    def value(self, t: float) -> float:
        return self.values[self._index(t)]

    def log_value(self, t: float) -> float:
        return self.log_values[self._index(t)]

    def breakpoints(self) -> tuple[float, ...]:
        return self.times


Witness = ExpWitness | TabulatedWitness


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricDecay:
    """Decay witness f(t) = e^{-omega t} / n_tilde.

    Derived certificates always have n_tilde > 1; the boundary n_tilde = 1
    is accepted so plain exponentials are expressible by hand.
    """

    n_tilde: float
    omega: float
    grid_hash: str = ""
    tool_version: str = __version__

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n_tilde) and self.n_tilde >= 1.0):
            raise PreconditionError(f"n_tilde must be finite and >= 1, got {self.n_tilde}")
        if not (math.isfinite(self.omega) and self.omega > 0.0):
            raise PreconditionError(f"omega must be finite and > 0, got {self.omega}")

    @property
    def form(self) -> str:
        return "parametric"

    def value(self, t: float) -> float:
        return math.exp(-self.omega * t) / self.n_tilde

    def log_value(self, t: float) -> float:
        return -self.omega * t - math.log(self.n_tilde)

    def breakpoints(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class TabulatedDecay:
    """Tabulated decay witness: positive, nonincreasing, step-interpolated."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    log_values: tuple[float, ...]
    grid_hash: str = ""
    tool_version: str = __version__

    def __post_init__(self) -> None:
        table = TabulatedWitness(self.times, self.values, self.log_values)
        if any(b > a for a, b in zip(table.log_values, table.log_values[1:])):
            raise PreconditionError("decay witness values must be nonincreasing")
        if self.log_values[0] == -math.inf:
            raise PreconditionError("decay witness values must be positive")

    @classmethod
    def from_values(
        cls, times: Sequence[float], values: Sequence[float], grid_hash: str = ""
    ) -> "TabulatedDecay":
        w = TabulatedWitness.from_values(times, values)
        return cls(w.times, w.values, w.log_values, grid_hash)

    @classmethod
    def from_log_values(
        cls, times: Sequence[float], logs: Sequence[float], grid_hash: str = ""
    ) -> "TabulatedDecay":
        w = TabulatedWitness.from_log_values(times, logs)
        return cls(w.times, w.values, w.log_values, grid_hash)

    @property
    def form(self) -> str:
        return "tabulated"

    def _table(self) -> TabulatedWitness:
        return TabulatedWitness(self.times, self.values, self.log_values)

    def value(self, t: float) -> float:
        return self._table().value(t)

    def log_value(self, t: float) -> float:
        return self._table().log_value(t)

    def breakpoints(self) -> tuple[float, ...]:
        return self.times


DecayCertificate = ParametricDecay | TabulatedDecay


def decay_limit_witnessed(cert: DecayCertificate) -> bool:
    """Whether the table shows actual decay toward 0 (vacuous for parametric).

    A finite table cannot prove a limit; strict overall decrease is the
    evidence the theorem runs ask for before trusting a tabulated f.
    """
    if isinstance(cert, ParametricDecay):
        return True
    return cert.log_values[-1] < cert.log_values[0]


def _validate_instability_witness(w: Witness, strict_above_one: bool) -> None:
    if isinstance(w, ExpWitness):
        if w.coef < 1.0 or w.rate < 0.0:
            raise PreconditionError(
                f"witness needs coef >= 1 and rate >= 0, got ({w.coef}, {w.rate})"
            )
        if strict_above_one and w.coef == 1.0 and w.rate == 0.0:
            raise PreconditionError("instability witness must exceed 1 for t > 0")
    else:
        floor = 0.0
        if strict_above_one:
            if any(lv <= floor for lv in w.log_values):
                raise PreconditionError("instability witness values must be > 1")
        else:
            if any(lv < floor for lv in w.log_values):
                raise PreconditionError("integral witness values must be >= 1")


@dataclass(frozen=True)
class InstabilityCertificate:
    N: Witness
    grid_hash: str = ""
    tool_version: str = __version__

    def __post_init__(self) -> None:
        _validate_instability_witness(self.N, strict_above_one=True)


@dataclass(frozen=True)
class ExpInstabilityCertificate:
    N: Witness
    nu: float
    grid_hash: str = ""
    tool_version: str = __version__
    # Envelope cap active when the certificate was fitted; None for
    # hand-written certificates.
    growth_cap: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.nu) and self.nu > 0.0):
            raise PreconditionError(f"nu must be finite and > 0, got {self.nu}")
        _validate_instability_witness(self.N, strict_above_one=True)


@dataclass(frozen=True)
class IntegralInstabilityCertificate:
    M: Witness
    grid_hash: str = ""
    tool_version: str = __version__
    quad: QuadratureConfig | None = None

    def __post_init__(self) -> None:
        _validate_instability_witness(self.M, strict_above_one=False)


@dataclass(frozen=True)
class NoCertificate:
    """Estimator outcome when no candidate parameter was admissible."""

    property_name: str
    reason: str
    grid_hash: str = ""
    tool_version: str = __version__
    details: dict = field(default_factory=dict)


Certificate = DecayCertificate | InstabilityCertificate | ExpInstabilityCertificate | IntegralInstabilityCertificate


def decay_to_exponential(f: DecayCertificate, mu: float) -> ParametricDecay:
    """Convert any decay witness into the parametric form via one pivot time.

    Needs f(mu) < 1; returns n_tilde = 1 / f(mu) and
    omega = -ln f(mu) / mu, which bounds f from below at multiples of mu.
    """
    if not (math.isfinite(mu) and mu > 0.0):
        raise PreconditionError(f"pivot time mu must be > 0, got {mu}")
    log_fmu = f.log_value(mu)
    if not log_fmu < 0.0:
        raise PreconditionError(f"decay_to_exponential needs f(mu) < 1, got f({mu}) = {f.value(mu)}")
    return ParametricDecay(
        n_tilde=math.exp(-log_fmu), omega=-log_fmu / mu, grid_hash=f.grid_hash
    )


# ---------------------------------------------------------------------------
# Shared sample statistics
# ---------------------------------------------------------------------------


def _log_norm_table(
    xi: SkewEvolutionSemiflow, times: Sequence[float], x, v: np.ndarray
) -> np.ndarray:
    """L[i, j] = log ||Phi(times[i], times[j], x) v|| for i >= j, else nan."""
    n = len(times)
    table = np.full((n, n), np.nan)
    for j in range(n):
        for i in range(j, n):
            val = log_cocycle_norm(xi, times[i], times[j], x, v)
            if val == -math.inf:
                raise PreconditionError(
                    f"model degeneracy: cocycle image vanished at (t={times[i]}, s={times[j]})"
                )
            table[i, j] = val
    return table


def _decay_stats(xi: SkewEvolutionSemiflow, grid: SampleGrid) -> np.ndarray:
    """m[i, j, a, b] = log ||Phi(u_i + t0_j, t0_j, x_a) v_b|| - log ||v_b||."""
    times = grid.times
    n = len(times)
    out = np.empty((n, n, len(grid.base_points), len(grid.vectors)))
    for a, x in enumerate(grid.base_points):
        for b, v in enumerate(grid.vector_arrays()):
            log_v = math.log(norm(v, xi.norm_choice))
            for j, t0 in enumerate(times):
                for i, u in enumerate(times):
                    out[i, j, a, b] = log_cocycle_norm(xi, u + t0, t0, x, v) - log_v
    return out


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def estimate_decay(xi: SkewEvolutionSemiflow, grid: SampleGrid) -> TabulatedDecay:
    """Fit the tightest grid lower bound f_hat(u) = min ratio, monotonized.

    The running minimum over increasing u makes the table nonincreasing;
    f_hat(0) is exactly 1 because the u = 0 ratio is identically one.
    """
    grid.require_nonempty()
    stats = _decay_stats(xi, grid)
    per_u = np.min(stats, axis=(1, 2, 3))
    logs = np.minimum.accumulate(per_u)
    return TabulatedDecay.from_log_values(grid.times, logs, grid_hash=grid.grid_hash)


def estimate_instability(
    xi: SkewEvolutionSemiflow, grid: SampleGrid, headroom: float = DEFAULT_HEADROOM
) -> InstabilityCertificate:
    """Fit N_hat(t) = (1 + headroom) * max(1, worst inverse growth up to t)."""
    grid.require_nonempty()
    if not (math.isfinite(headroom) and headroom > 0.0):
        raise PreconditionError(f"headroom must be > 0, got {headroom}")
    times = grid.times
    n = len(times)
    need = np.zeros(n)
    for x in grid.base_points:
        for v in grid.vector_arrays():
            log_v = math.log(norm(v, xi.norm_choice))
            table = _log_norm_table(xi, times, x, v)
            for i in range(n):
                # r = log ||v|| - log ||Phi(t_i, t0_k)v|| over t0_k <= t_i
                r = log_v - table[i, : i + 1]
                need[i] = max(need[i], float(np.max(r)))
    logs = math.log1p(headroom) + need
    witness = TabulatedWitness.from_log_values(times, logs)
    return InstabilityCertificate(N=witness, grid_hash=grid.grid_hash)


def _pair_envelopes(
    xi: SkewEvolutionSemiflow, grid: SampleGrid
) -> tuple[np.ndarray, float]:
    """Worst backward ratio per time pair, and the best realized growth rate.

    Returns R[i, j] = max over t0 <= s_j, x, v of
    log ||Phi(s_j, t0)v|| - log ||Phi(t_i, t0)v|| (for i >= j), together
    with rho_star = max over samples of the forward growth rate
    (log ||Phi(t_i, t0)v|| - log ||Phi(s_j, t0)v||) / (t_i - s_j).
    """
    times = np.asarray(grid.times)
    n = len(times)
    R = np.full((n, n), -np.inf)
    rho_star = -math.inf
    for x in grid.base_points:
        for v in grid.vector_arrays():
            table = _log_norm_table(xi, times, x, v)
            for j in range(n):
                cols = table[:, : j + 1]
                diffs = table[j, : j + 1][None, :] - cols[j:, :]
                R[j:, j] = np.maximum(R[j:, j], np.max(diffs, axis=1))
            for k in range(n - 1):
                col = table[k + 1 :, k]
                gaps = times[k + 1 :] - times[k]
                base = table[k, k]
                rates = (col - base) / gaps
                rho_star = max(rho_star, float(np.max(rates)))
                if col.size > 1:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        pair = (col[1:, None] - col[None, :-1]) / (
                            times[k + 2 :, None] - times[k + 1 : -1][None, :]
                        )
                    lower = np.tril(np.ones_like(pair, dtype=bool), k=0)
                    if np.any(lower):
                        rho_star = max(rho_star, float(np.max(pair[lower])))
    return R, rho_star


def _ls_slope(times: Sequence[float], values: np.ndarray) -> float:
    if len(times) < 2:
        return 0.0
    return float(np.polyfit(np.asarray(times), values, 1)[0])


def estimate_exp_instability(
    xi: SkewEvolutionSemiflow,
    grid: SampleGrid,
    nu_candidates: Sequence[float] | None = None,
    growth_cap: float = DEFAULT_GROWTH_CAP,
    headroom: float = DEFAULT_HEADROOM,
) -> ExpInstabilityCertificate | NoCertificate:
    """Pick the largest admissible rate and fit its required witness.

    A candidate nu is admissible when (a) it does not exceed the best
    growth rate actually realized on the sample set, so the witness never
    has to absorb a rate deficit that grows with the window length, and
    (b) the least-squares slope of the fitted log-witness over the grid
    times stays within ``growth_cap``.  If no candidate qualifies a
    NoCertificate result is returned rather than an exception.
    """
    grid.require_nonempty()
    if not (math.isfinite(growth_cap) and growth_cap > 0.0):
        raise PreconditionError(f"growth_cap must be > 0, got {growth_cap}")
    if not (math.isfinite(headroom) and headroom > 0.0):
        raise PreconditionError(f"headroom must be > 0, got {headroom}")
    candidates = tuple(float(c) for c in (nu_candidates or DEFAULT_NU_CANDIDATES))
    if not candidates or any(not (math.isfinite(c) and c > 0.0) for c in candidates):
        raise PreconditionError("nu candidates must be positive reals")
    if any(b >= a for a, b in zip(candidates[1:], candidates)):
        raise PreconditionError("nu candidates must be sorted increasing")

    times = np.asarray(grid.times)
    R, rho_star = _pair_envelopes(xi, grid)
    gaps = times[:, None] - times[None, :]
    slopes: dict[float, float] = {}
    for nu in reversed(candidates):
        if nu > rho_star + _RATE_TOL:
            continue
        with np.errstate(invalid="ignore"):
            needed = nu * gaps + R
        y = np.array([float(np.max(needed[i, : i + 1])) for i in range(len(times))])
        slope = _ls_slope(grid.times, y)
        slopes[nu] = slope
        if slope <= growth_cap:
            logs = math.log1p(headroom) + np.maximum(y, 0.0)
            witness = TabulatedWitness.from_log_values(grid.times, logs)
            return ExpInstabilityCertificate(
                N=witness, nu=nu, grid_hash=grid.grid_hash, growth_cap=growth_cap
            )
    if rho_star + _RATE_TOL < candidates[0]:
        reason = (
            f"no candidate is covered by the realized growth rate {rho_star:.6g}; "
            "the required witness would grow without bound in the window length"
        )
    else:
        reason = f"every rate-covered candidate needs an envelope slope above growth_cap={growth_cap}"
    return NoCertificate(
        property_name="exp-instability",
        reason=reason,
        grid_hash=grid.grid_hash,
        details={
            "candidates": list(candidates),
            "realized_rate": rho_star,
            "envelope_slopes": {f"{nu:.17g}": s for nu, s in sorted(slopes.items())},
            "growth_cap": growth_cap,
        },
    )


def estimate_integral_instability(
    xi: SkewEvolutionSemiflow,
    grid: SampleGrid,
    quad_cfg: QuadratureConfig = QuadratureConfig(),
    headroom: float = DEFAULT_HEADROOM,
) -> IntegralInstabilityCertificate:
    """Fit M_hat(t) = max(1, (1 + headroom) * worst integral-to-norm ratio)."""
    grid.require_nonempty()
    if not xi.strongly_measurable:
        raise PreconditionError("integral instability needs a strongly measurable model")
    if not (math.isfinite(headroom) and headroom > 0.0):
        raise PreconditionError(f"headroom must be > 0, got {headroom}")
    times = grid.times
    n = len(times)
    need = np.full(n, -np.inf)
    for x in grid.base_points:
        for v in grid.vector_arrays():
            for k in range(n):
                stats = _datko_stats(xi, x, v, times, k, quad_cfg)
                for i in range(k, n):
                    d = stats[i - k]
                    if d > need[i]:
                        need[i] = d
    logs = np.maximum(0.0, math.log1p(headroom) + need)
    witness = TabulatedWitness.from_log_values(times, logs)
    return IntegralInstabilityCertificate(M=witness, grid_hash=grid.grid_hash, quad=quad_cfg)


# Quadrature results are deterministic, and the estimator/checker pairs
# plus the validators re-request identical (model, base, vector, t0)
# integrals many times, so memoize them.  Keys pin the model object
# itself, which keeps its id stable for the cache's lifetime; values
# must be treated as read-only.
_DATKO_MEMO: dict = {}
_DATKO_MEMO_CAP = 65536


def _datko_stats(
    xi: SkewEvolutionSemiflow,
    x,
    v: np.ndarray,
    times: Sequence[float],
    k: int,
    quad_cfg: QuadratureConfig,
) -> np.ndarray:
    """d[i - k] = log(integral over [t0_k, t_i]) - log ||Phi(t_i, t0_k, x)v||.

    The first entry (t = t0) is -inf; both the estimator and the checker
    consume exactly these floats.  The ratio has degree 0 in v, so v is
    normalized before the quadrature: otherwise the integrator's absolute
    tolerance floor would make the refinement depth, and hence the last
    few digits, depend on the scale of v.
    """
    v = v / norm(v, xi.norm_choice)
    key = (id(xi), x, v.tobytes(), tuple(times), k, quad_cfg.to_key())
    hit = _DATKO_MEMO.get(key)
    if hit is not None:
        return hit[1]
    tail = times[k:]
    prefix = norm_integral_prefix(xi, x, v, tail, quad_cfg)
    out = np.empty(len(tail))
    for idx, t in enumerate(tail):
        logn = log_cocycle_norm(xi, t, times[k], x, v)
        with np.errstate(divide="ignore"):
            out[idx] = (math.log(prefix[idx]) if prefix[idx] > 0.0 else -math.inf) - logn
    if len(_DATKO_MEMO) >= _DATKO_MEMO_CAP:
        _DATKO_MEMO.clear()
    _DATKO_MEMO[key] = (xi, out)
    return out


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


def check_decay(
    xi: SkewEvolutionSemiflow,
    cert: DecayCertificate,
    grid: SampleGrid,
    tol: float = 1e-9,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Sample log ||Phi(u + t0, t0, x)v|| - log f(u) - log ||v|| over the grid."""
    if not isinstance(cert, (ParametricDecay, TabulatedDecay)):
        raise PreconditionError(f"check_decay needs a decay certificate, got {type(cert).__name__}")
    grid.require_nonempty()
    builder = _ReportBuilder("decay", tol, margin_sink)
    times = np.asarray(grid.times)
    stats = _decay_stats(xi, grid)
    log_f = np.array([cert.log_value(u) for u in grid.times])
    for a, x in enumerate(grid.base_points):
        xlabel = x.label()
        for b, vlabel in enumerate(grid.vector_labels()):
            for j, t0 in enumerate(grid.times):
                margins = stats[:, j, a, b] - log_f
                builder.add_array(
                    times + t0, np.full_like(times, t0), np.full_like(times, t0),
                    xlabel, vlabel, margins,
                )
    return builder.finish()


def check_instability(
    xi: SkewEvolutionSemiflow,
    cert: InstabilityCertificate,
    grid: SampleGrid,
    tol: float = 1e-9,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Sample log N(t) + log ||Phi(t, t0, x)v|| - log ||v|| over t >= t0."""
    if not isinstance(cert, InstabilityCertificate):
        raise PreconditionError(
            f"check_instability needs an instability certificate, got {type(cert).__name__}"
        )
    grid.require_nonempty()
    builder = _ReportBuilder("instability", tol, margin_sink)
    times = np.asarray(grid.times)
    log_n = np.array([cert.N.log_value(t) for t in grid.times])
    for x in grid.base_points:
        xlabel = x.label()
        for v, vlabel in zip(grid.vector_arrays(), grid.vector_labels()):
            log_v = math.log(norm(v, xi.norm_choice))
            table = _log_norm_table(xi, grid.times, x, v)
            for k in range(len(times)):
                r = log_v - table[k:, k]
                margins = log_n[k:] - r
                builder.add_array(
                    times[k:], np.full(len(times) - k, times[k]),
                    np.full(len(times) - k, times[k]), xlabel, vlabel, margins,
                )
    return builder.finish()


def check_exp_instability(
    xi: SkewEvolutionSemiflow,
    cert: ExpInstabilityCertificate,
    grid: SampleGrid,
    tol: float = 1e-9,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Sample the two-time inequality over all triples t >= s >= t0.

    Margin: log N(t) - (nu (t - s) + log ||Phi(s, t0, x)v|| -
    log ||Phi(t, t0, x)v||), evaluated per base point and vector.
    """
    if not isinstance(cert, ExpInstabilityCertificate):
        raise PreconditionError(
            f"check_exp_instability needs an exp-instability certificate, got {type(cert).__name__}"
        )
    grid.require_nonempty()
    builder = _ReportBuilder("exp-instability", tol, margin_sink)
    times = np.asarray(grid.times)
    n = len(times)
    log_n = np.array([cert.N.log_value(t) for t in grid.times])
    nu = cert.nu
    for x in grid.base_points:
        xlabel = x.label()
        for v, vlabel in zip(grid.vector_arrays(), grid.vector_labels()):
            table = _log_norm_table(xi, grid.times, x, v)
            for k in range(n):
                for j in range(k, n):
                    i_slice = slice(j, n)
                    needed = nu * (times[i_slice] - times[j]) + (table[j, k] - table[i_slice, k])
                    margins = log_n[i_slice] - needed
                    count = n - j
                    builder.add_array(
                        times[i_slice], np.full(count, times[j]), np.full(count, times[k]),
                        xlabel, vlabel, margins,
                    )
    return builder.finish()


def check_integral_instability(
    xi: SkewEvolutionSemiflow,
    cert: IntegralInstabilityCertificate,
    grid: SampleGrid,
    tol: float = 1e-9,
    quad_cfg: QuadratureConfig | None = None,
    margin_sink: MarginSink | None = None,
) -> CheckReport:
    """Sample log M(t) + log ||Phi(t, t0, x)v|| - log integral over t >= t0.

    The t = t0 samples have a zero integral and count as margin +inf.
    Uses the certificate's own quadrature config when it carries one.
    """
    if not isinstance(cert, IntegralInstabilityCertificate):
        raise PreconditionError(
            f"check_integral_instability needs an integral certificate, got {type(cert).__name__}"
        )
    grid.require_nonempty()
    if not xi.strongly_measurable:
        raise PreconditionError("integral instability needs a strongly measurable model")
    cfg = quad_cfg or cert.quad or QuadratureConfig()
    builder = _ReportBuilder("integral-instability", tol, margin_sink)
    times = np.asarray(grid.times)
    n = len(times)
    log_m = np.array([cert.M.log_value(t) for t in grid.times])
    for x in grid.base_points:
        xlabel = x.label()
        for v, vlabel in zip(grid.vector_arrays(), grid.vector_labels()):
            for k in range(n):
                stats = _datko_stats(xi, x, v, grid.times, k, cfg)
                margins = log_m[k:] - stats
                builder.add_array(
                    times[k:], np.full(n - k, times[k]), np.full(n - k, times[k]),
                    xlabel, vlabel, margins,
                )
    return builder.finish()


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _require_keys(doc: dict, required: set[str], optional: set[str], what: str) -> None:
    keys = set(doc)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise PreconditionError(f"{what} is missing keys {sorted(missing)}")
    if unknown:
        raise PreconditionError(f"{what} has unknown keys {sorted(unknown)}")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _float_list(value, what: str) -> list[float]:
    if not isinstance(value, list) or not all(_is_number(v) for v in value):
        raise PreconditionError(f"{what} must be a list of numbers")
    return [float(v) for v in value]


def witness_to_json_dict(w: Witness) -> dict:
    if isinstance(w, ExpWitness):
        return {"coef": w.coef, "rate": w.rate}
    return {"times": list(w.times), "values": list(w.values)}


def witness_from_json_dict(doc: dict, form: str, what: str) -> Witness:
    if not isinstance(doc, dict):
        raise PreconditionError(f"{what} must be an object")
    if form == "parametric":
        _require_keys(doc, {"coef", "rate"}, set(), what)
        if not (_is_number(doc["coef"]) and _is_number(doc["rate"])):
            raise PreconditionError(f"{what} coef and rate must be numbers")
        return ExpWitness(float(doc["coef"]), float(doc["rate"]))
    if form == "tabulated":
        _require_keys(doc, {"times", "values"}, set(), what)
        return TabulatedWitness.from_values(
            _float_list(doc["times"], f"{what}.times"), _float_list(doc["values"], f"{what}.values")
        )
    raise PreconditionError(f"unknown witness form {form!r}")


def _quad_to_json(quad: QuadratureConfig | None):
    return None if quad is None else quad.to_json_dict()


def _quad_from_json(doc, what: str) -> QuadratureConfig | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise PreconditionError(f"{what} must be an object or null")
    _require_keys(doc, set(), {"rel_tol", "abs_tol", "max_depth", "datko_lower_limit"}, what)
    defaults = QuadratureConfig()
    return QuadratureConfig(
        rel_tol=float(doc.get("rel_tol", defaults.rel_tol)),
        abs_tol=float(doc.get("abs_tol", defaults.abs_tol)),
        max_depth=int(doc.get("max_depth", defaults.max_depth)),
        datko_lower_limit=doc.get("datko_lower_limit", defaults.datko_lower_limit),
    )


def certificate_to_json_dict(cert) -> dict:
    """Serialize any certificate (or a no-certificate outcome) to a JSON dict."""
    if isinstance(cert, ParametricDecay):
        body = {"kind": "decay", "form": "parametric", "n_tilde": cert.n_tilde, "omega": cert.omega}
    elif isinstance(cert, TabulatedDecay):
        body = {
            "kind": "decay",
            "form": "tabulated",
            "times": list(cert.times),
            "values": list(cert.values),
        }
    elif isinstance(cert, InstabilityCertificate):
        body = {"kind": "instability", "form": cert.N.form, "N": witness_to_json_dict(cert.N)}
    elif isinstance(cert, ExpInstabilityCertificate):
        body = {
            "kind": "exp_instability",
            "form": cert.N.form,
            "N": witness_to_json_dict(cert.N),
            "nu": cert.nu,
            "growth_cap": cert.growth_cap,
        }
    elif isinstance(cert, IntegralInstabilityCertificate):
        body = {
            "kind": "integral_instability",
            "form": cert.M.form,
            "M": witness_to_json_dict(cert.M),
            "quad": _quad_to_json(cert.quad),
        }
    elif isinstance(cert, NoCertificate):
        body = {
            "kind": "no_certificate",
            "property": cert.property_name,
            "reason": cert.reason,
            "details": cert.details,
        }
    else:
        raise PreconditionError(f"cannot serialize object of type {type(cert).__name__}")
    body["grid_hash"] = cert.grid_hash
    body["tool_version"] = cert.tool_version
    return body


def certificate_from_json_dict(doc: dict):
    """Parse a certificate document, validating shape and invariants.

    Tabulated log tables are rebuilt from the stored linear values, so a
    file round trip preserves values exactly and logs to one rounding.
    """
    if not isinstance(doc, dict):
        raise PreconditionError("certificate document must be an object")
    kind = doc.get("kind")
    common = {"kind", "grid_hash", "tool_version"}
    grid_hash = doc.get("grid_hash", "")
    version = doc.get("tool_version", __version__)
    if not isinstance(grid_hash, str) or not isinstance(version, str):
        raise PreconditionError("grid_hash and tool_version must be strings")

    def number(key: str) -> float:
        if key not in doc or not isinstance(doc[key], (int, float)) or isinstance(doc[key], bool):
            raise PreconditionError(f"certificate field {key!r} must be a number")
        return float(doc[key])

    if kind == "decay":
        form = doc.get("form")
        if form == "parametric":
            _require_keys(doc, common | {"form", "n_tilde", "omega"}, set(), "decay certificate")
            return ParametricDecay(number("n_tilde"), number("omega"), grid_hash, version)
        if form == "tabulated":
            _require_keys(doc, common | {"form", "times", "values"}, set(), "decay certificate")
            w = TabulatedWitness.from_values(
                _float_list(doc["times"], "times"), _float_list(doc["values"], "values")
            )
            return TabulatedDecay(w.times, w.values, w.log_values, grid_hash, version)
        raise PreconditionError(f"unknown decay form {form!r}")
    if kind == "instability":
        _require_keys(doc, common | {"form", "N"}, set(), "instability certificate")
        return InstabilityCertificate(
            witness_from_json_dict(doc["N"], doc["form"], "N"), grid_hash, version
        )
    if kind == "exp_instability":
        _require_keys(
            doc, common | {"form", "N", "nu"}, {"growth_cap"}, "exp-instability certificate"
        )
        cap = doc.get("growth_cap")
        if cap is not None and (not isinstance(cap, (int, float)) or isinstance(cap, bool)):
            raise PreconditionError("growth_cap must be a number or null")
        return ExpInstabilityCertificate(
            witness_from_json_dict(doc["N"], doc["form"], "N"),
            number("nu"),
            grid_hash,
            version,
            growth_cap=None if cap is None else float(cap),
        )
    if kind == "integral_instability":
        _require_keys(doc, common | {"form", "M"}, {"quad"}, "integral certificate")
        return IntegralInstabilityCertificate(
            witness_from_json_dict(doc["M"], doc["form"], "M"),
            grid_hash,
            version,
            quad=_quad_from_json(doc.get("quad"), "quad"),
        )
    if kind == "no_certificate":
        _require_keys(doc, common | {"property", "reason"}, {"details"}, "no-certificate document")
        details = doc.get("details", {})
        if not isinstance(details, dict):
            raise PreconditionError("details must be an object")
        return NoCertificate(
            property_name=str(doc["property"]),
            reason=str(doc["reason"]),
            grid_hash=grid_hash,
            tool_version=version,
            details=details,
        )
    raise PreconditionError(f"unknown certificate kind {kind!r}")
