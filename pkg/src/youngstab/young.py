"""Young integrals of sampled paths and the Young-Loeve defect.

The integral of y against x is the limit of left-point Riemann-Stieltjes
sums over refinements.  For the declared piecewise-linear path model the
limit is computable in closed form segment by segment; `young_integral`
follows the definition through dyadic refinements and reports the
between-level difference as its error estimate, while
`young_integral_exact` evaluates the limit directly.

Value shapes: a matrix integrand (n, d, m) against an m-dimensional x
gives a d-vector (contraction); a vector integrand (n, d) against x gives
the d x m matrix of pairwise integrals (outer pairing).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .paths import SamplePath, p_variation

__all__ = [
    "YoungIntegralResult",
    "young_integral",
    "young_integral_exact",
    "young_loeve_defect",
    "yl_constant",
]


def yl_constant(p: float) -> float:
    """Young-Loeve constant K = (1 - 2^{1-2/p})^{-1} for q = p, p in (1,2)."""
    if not 1 <= p < 2:
        raise ParameterError(f"Young-Loeve constant requires p in [1, 2), got {p}")
    return float(1.0 / (1.0 - 2.0 ** (1.0 - 2.0 / p)))


@dataclass(frozen=True)
class YoungIntegralResult:
    """Integral value, running partial integrals, finest mesh and the
    max-norm difference between the two finest refinement levels."""

    value: np.ndarray
    running: SamplePath
    mesh: float
    refinement_error: float


def _pair_term(y_vals, dx):
    """Contract integrand values with increments of x."""
    if y_vals.ndim == 3:
        if y_vals.shape[2] != dx.shape[1]:
            raise ParameterError(
                f"matrix integrand inner dimension {y_vals.shape[2]} != driver dimension {dx.shape[1]}"
            )
        return np.einsum("sdm,sm->sd", y_vals, dx)
    return np.einsum("sd,sm->sdm", y_vals, dx)


def _union_times(y: SamplePath, x: SamplePath, a: float, b: float) -> np.ndarray:
    if not (y.covers(a, b) and x.covers(a, b)):
        raise DomainError(
            f"interval [{a}, {b}] not covered by both paths "
            f"(y spans [{y.start}, {y.end}], x spans [{x.start}, {x.end}])"
        )
    ys = y.restrict(a, b).times
    xs = x.restrict(a, b).times
    merged = np.union1d(ys, xs)
    # drop near-duplicates produced by float endpoint insertion
    keep = np.concatenate([[True], np.diff(merged) > 1e-15 * max(1.0, abs(b - a))])
    return merged[keep]


def young_integral(
    y: SamplePath, x: SamplePath, interval=None, levels: int = 4
) -> YoungIntegralResult:
    """Left-point Young integral of y against x over [a, b].

    Sums are evaluated on ``levels`` dyadic refinements of the merged grid
    of both paths, interpolating inputs linearly at inserted points.  The
    result carries the finest-level running integral; the refinement error
    is the max-norm gap between the two finest levels.  Additivity over
    adjacent intervals is exact at shared grid points.
    """
    if levels < 1:
        raise ParameterError("levels must be a positive integer")
    if interval is None:
        a = max(y.start, x.start)
        b = min(y.end, x.end)
    else:
        a, b = float(interval[0]), float(interval[1])
    if a >= b:
        raise ParameterError(f"empty interval [{a}, {b}]")
    base = _union_times(y, x, a, b)
    prev_running = None
    running_vals = None
    times_f = base
    for level in range(levels):
        times_f = _dyadic_refine(base, 2**level)
        y_vals = np.asarray(y.at(times_f[:-1]), dtype=float)
        if y_vals.ndim == 1:
            y_vals = y_vals[:, None]
        dx = np.diff(np.atleast_2d(np.asarray(x.at(times_f), dtype=float).T).T, axis=0)
        terms = _pair_term(y_vals, dx)
        running_vals = np.concatenate(
            [np.zeros((1,) + terms.shape[1:]), np.cumsum(terms, axis=0)], axis=0
        )
        if prev_running is not None:
            stride = 2
            err = float(
                np.max(np.abs(running_vals[::stride] - prev_running))
            )
        prev_running = running_vals
    refinement_error = err if levels > 1 else float("inf")
    running = SamplePath(times_f, running_vals)
    return YoungIntegralResult(
        value=running_vals[-1],
        running=running,
        mesh=float(np.max(np.diff(times_f))),
        refinement_error=refinement_error,
    )


def _dyadic_refine(times: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return times
    left = times[:-1]
    width = np.diff(times)
    offs = np.arange(factor) / factor
    fine = (left[:, None] + width[:, None] * offs[None, :]).ravel()
    return np.append(fine, times[-1])


def young_integral_exact(y: SamplePath, x: SamplePath, interval=None):
    """Limit of the refinement scheme for piecewise-linear y and x.

    On each merged-grid segment both inputs are linear, so the integral is
    (y_u + y_v)/2 paired with (x_v - x_u); the left-point sums of
    `young_integral` converge to this value as levels grow.  Returns
    (value, running SamplePath on the merged grid).
    """
    if interval is None:
        a = max(y.start, x.start)
        b = min(y.end, x.end)
    else:
        a, b = float(interval[0]), float(interval[1])
    if a >= b:
        raise ParameterError(f"empty interval [{a}, {b}]")
    times = _union_times(y, x, a, b)
    y_vals = np.asarray(y.at(times), dtype=float)
    if y_vals.ndim == 1:
        y_vals = y_vals[:, None]
    x_vals = np.atleast_2d(np.asarray(x.at(times), dtype=float).T).T
    mid = 0.5 * (y_vals[:-1] + y_vals[1:])
    terms = _pair_term(mid, np.diff(x_vals, axis=0))
    running_vals = np.concatenate(
        [np.zeros((1,) + terms.shape[1:]), np.cumsum(terms, axis=0)], axis=0
    )
    return running_vals[-1], SamplePath(times, running_vals)


def young_loeve_defect(y: SamplePath, x: SamplePath, s: float, t: float, p: float):
    """Both sides of the defect estimate with q = p.

    lhs = || int_s^t y dx - y_s (x_t - x_s) ||, rhs = K(p) times the
    product of the p-variation seminorms of y and x on [s, t]; the
    integral is the exact piecewise-linear value.  Returns (lhs, rhs).
    """
    if not 1 < p < 2:
        raise ParameterError(f"defect estimate requires p in (1, 2), got {p}")
    if s >= t:
        raise ParameterError(f"need s < t, got [{s}, {t}]")
    value, _ = young_integral_exact(y, x, (s, t))
    y_s = np.asarray(y.at(s), dtype=float)
    if y_s.ndim == 0:
        y_s = y_s[None]
    dx = np.atleast_1d(np.asarray(x.at(t), dtype=float) - np.asarray(x.at(s), dtype=float))
    if y_s.ndim == 2:
        first = y_s @ dx
    else:
        first = np.einsum("d,m->dm", y_s, dx)
    lhs = float(np.linalg.norm(value - first))
    rhs = yl_constant(p) * p_variation(y, p, (s, t)) * p_variation(x, p, (s, t))
    return lhs, rhs
