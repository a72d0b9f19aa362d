"""B-spline bases: recurrence evaluation, derivatives, and divided differences.

The basis of order ``k`` over knots ``t_0 <= ... <= t_N`` consists of the
``N - k + 1`` functions ``B_j``, each supported on ``[t_j, t_{j+k})`` and built
by the two-term recurrence from order-1 interval indicators.  Values at the
last knot are taken as left limits so the basis still sums to one on the
closed support.  Production code uses clamped sequences (:class:`KnotSequence`,
endpoint knots repeated ``order`` times); the evaluators also accept raw knot
arrays (pass ``k=``) so generic distinct-knot sequences can be checked against
the divided-difference definition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateKnots, InvalidSupport, OutOfSupport, SingularSystem


def divided_difference(abscissae, values) -> float:
    """Leading coefficient of the polynomial interpolating the given points.

    Restricted to pairwise-distinct abscissae; the coincident-knot (osculating)
    case is out of scope and raises :class:`DegenerateKnots`.
    """
    xs = np.asarray(abscissae, dtype=float)
    fs = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != fs.shape or xs.size == 0:
        raise ValueError("abscissae and values must be equal-length, non-empty 1-D sequences")
    if np.unique(xs).size != xs.size:
        raise DegenerateKnots("divided difference needs pairwise-distinct abscissae")
    table = fs.copy()
    for r in range(1, xs.size):
        table = (table[1:] - table[:-1]) / (xs[r:] - xs[:-r])
    return float(table[0])


@dataclass(frozen=True)
class KnotSequence:
    """Clamped nondecreasing knots with order-fold endpoint multiplicity.

    The first and last ``order`` entries repeat the support endpoints, interior
    knots are simple, so the basis functions sum to one on all of ``[a, b]``.
    """

    knots: np.ndarray
    order: int

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", t)
        k = self.order
        if k < 1:
            raise ValueError("order must be at least 1")
        if t.ndim != 1 or t.size < 2 * k:
            raise ValueError("need a 1-D knot array with at least 2*order entries")
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be nondecreasing")
        if t[0] >= t[-1]:
            raise InvalidSupport("support interval is degenerate")
        if not (np.all(t[:k] == t[0]) and np.all(t[-k:] == t[-1])):
            raise ValueError("endpoint knots must repeat `order` times")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("interior knots must be strictly increasing")

    @classmethod
    def uniform(cls, support, intervals: int, order: int) -> "KnotSequence":
        """Clamped sequence with `intervals` equal pieces on `support`."""
        a, b = float(support[0]), float(support[1])
        if not a < b:
            raise InvalidSupport(f"support [{a}, {b}] is degenerate")
        if intervals < 1:
            raise ValueError("need at least one interval")
        breaks = np.linspace(a, b, intervals + 1)
        knots = np.concatenate([np.full(order - 1, a), breaks, np.full(order - 1, b)])
        return cls(knots, order)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def support_lo(self) -> float:
        return float(self.knots[0])

    @property
    def support_hi(self) -> float:
        return float(self.knots[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct abscissae a = b_0 < ... < b_P = b delimiting the pieces."""
        k = self.order
        return self.knots[k - 1 : self.knots.size - k + 1]

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.order

    @property
    def interior_gaps(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def h_max(self) -> float:
        return float(self.interior_gaps.max())

    @property
    def h_min(self) -> float:
        return float(self.interior_gaps.min())

    @property
    def mesh_ratio(self) -> float:
        return self.h_max / self.h_min

    @property
    def basic_interval(self) -> tuple[float, float]:
        k = self.order
        return float(self.knots[k - 1]), float(self.knots[-k])


def _resolve(knots, k):
    if isinstance(knots, KnotSequence):
        return knots.knots, knots.order
    t = np.asarray(knots, dtype=float)
    if k is None:
        raise TypeError("raw knot arrays need an explicit spline order k")
    return t, int(k)


def _order1(t, x):
    """Order-1 indicator table, left-continuous at the terminal knot."""
    left = t[:-1]
    right = t[1:]
    table = ((left[None, :] <= x[:, None]) & (x[:, None] < right[None, :])).astype(float)
    at_end = x == t[-1]
    if at_end.any():
        patch = (left < right) & (right == t[-1])
        table[np.ix_(at_end, patch)] = 1.0
    return table


def _raise_order(table, t, r, x):
    """One step of the two-term recurrence: order r-1 values to order r values."""
    m = t.size - r
    lo = t[:m]
    d1 = t[r - 1 : r - 1 + m] - lo
    d2 = t[r : r + m] - t[1 : 1 + m]
    w1 = np.where(d1 > 0, (x[:, None] - lo) / np.where(d1 > 0, d1, 1.0), 0.0)
    w2 = np.where(d2 > 0, (t[r : r + m] - x[:, None]) / np.where(d2 > 0, d2, 1.0), 0.0)
    return w1 * table[:, :m] + w2 * table[:, 1 : m + 1]


def _derivative_step(table, t, r):
    """Differentiate once: derivative values of order r from order r-1 values."""
    m = t.size - r
    d1 = t[r - 1 : r - 1 + m] - t[:m]
    d2 = t[r : r + m] - t[1 : 1 + m]
    inv1 = np.where(d1 > 0, 1.0 / np.where(d1 > 0, d1, 1.0), 0.0)
    inv2 = np.where(d2 > 0, 1.0 / np.where(d2 > 0, d2, 1.0), 0.0)
    return (r - 1) * (table[:, :m] * inv1[None, :] - table[:, 1 : m + 1] * inv2[None, :])


def basis_matrix(knots, x, deriv: int = 0, k: int | None = None) -> np.ndarray:
    """Evaluate every basis function (or its deriv-th derivative) at x.

    Returns an array of shape ``(npoints, num_basis)``.  Zero-denominator terms
    in the recurrence and the derivative formula contribute zero, which is what
    makes repeated endpoint knots work without special cases.
    """
    t, k = _resolve(knots, k)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    if deriv >= k:
        return np.zeros((xv.size, t.size - k))
    table = _order1(t, xv)
    for r in range(2, k - deriv + 1):
        table = _raise_order(table, t, r, xv)
    for r in range(k - deriv + 1, k + 1):
        table = _derivative_step(table, t, r)
    return table


def _as_output(values, x):
    return float(values[0]) if np.isscalar(x) else values


def bspline_eval(knots, j: int, x, k: int | None = None):
    """Value of the j-th order-k basis function at x.

    Zero outside ``[t_j, t_{j+k})``; at the terminal knot the left limit is
    returned so the basis still sums to one there.
    """
    t, k = _resolve(knots, k)
    if not 0 <= j <= t.size - k - 1:
        raise IndexError(f"basis index {j} out of range for {t.size - k} functions")
    return _as_output(basis_matrix(t, x, k=k)[:, j], x)


def bspline_derivative(knots, j: int, x, order: int = 1, k: int | None = None):
    """order-th derivative of the j-th basis function at x.

    Computed by recursive application of the first-derivative formula; at
    interior knots this yields the right limit, at the terminal knot the left
    limit.  Continuity on closed intervals is only guaranteed for
    ``order < k - 1`` with simple interior knots.
    """
    t, k = _resolve(knots, k)
    if not 0 <= j <= t.size - k - 1:
        raise IndexError(f"basis index {j} out of range for {t.size - k} functions")
    if order < 1:
        raise ValueError("derivative order must be at least 1")
    return _as_output(basis_matrix(t, x, deriv=order, k=k)[:, j], x)


@dataclass(frozen=True)
class SplineFunction:
    """Linear combination of the basis functions over a clamped knot sequence."""

    knots: KnotSequence
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", c)
        if c.ndim != 1 or c.size != self.knots.num_basis:
            raise ValueError(
                f"need {self.knots.num_basis} coefficients, got {c.size}"
            )

    def __call__(self, x, order: int = 0):
        return spline_eval(self, x, order)


def _local_window(t, k, x):
    """Index range of the <= k basis functions supported at scalar x."""
    if x >= t[-1]:
        m = int(np.nonzero(np.diff(t) > 0)[0][-1])
    else:
        m = int(np.searchsorted(t, x, side="right")) - 1
    lo = max(m - k + 1, 0)
    hi = min(m, t.size - k - 1)
    return lo, hi, m


def spline_eval(s: SplineFunction, x, order: int = 0):
    """Evaluate the spline (or its order-th derivative) at x.

    Outside the support the value is 0 for order 0; derivative evaluation
    outside the support raises :class:`OutOfSupport`.  Scalar evaluation
    touches only the locally supported basis functions.
    """
    a, b = s.knots.support
    t, k = s.knots.knots, s.knots.order
    if np.isscalar(x):
        xf = float(x)
        if not a <= xf <= b:
            if order == 0:
                return 0.0
            raise OutOfSupport(f"derivative requested at {xf} outside [{a}, {b}]")
        lo, hi, m = _local_window(t, k, xf)
        window = t[lo : hi + k + 1]
        local = basis_matrix(window, xf, deriv=order, k=k)[0]
        return float(local @ s.coefficients[lo : hi + 1])
    xv = np.asarray(x, dtype=float)
    inside = (xv >= a) & (xv <= b)
    if order == 0:
        out = np.zeros(xv.shape)
        if inside.any():
            out[inside] = basis_matrix(s.knots, xv[inside]) @ s.coefficients
        return out
    if not inside.all():
        raise OutOfSupport("derivative requested outside the support")
    return basis_matrix(s.knots, xv, deriv=order) @ s.coefficients


def spline_distance(g: Callable, knots: KnotSequence, grid_size: int) -> float:
    """Sup-norm residual of the least-squares spline approximation to g.

    Discrete surrogate for the distance from g to the spline space, evaluated
    on an oversampled uniform grid; requires ``grid_size >= 10 * num_basis``.
    """
    dim = knots.num_basis
    if grid_size < 10 * dim:
        raise ValueError(f"grid_size must be at least {10 * dim} for {dim} basis functions")
    a, b = knots.support
    grid = np.linspace(a, b, grid_size)
    design = basis_matrix(knots, grid)
    try:
        target = np.asarray(g(grid), dtype=float)
        if target.shape != grid.shape:
            raise TypeError
    except TypeError:
        target = np.array([g(v) for v in grid], dtype=float)
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < dim:
        raise SingularSystem(f"collocation matrix has rank {rank} < {dim}")
    return float(np.abs(design @ coef - target).max())
