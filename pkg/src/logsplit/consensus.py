"""Combine subset estimators: product, composite interpolation, renormalization.

The subset densities are multiplied in log space, sampled once on a uniform
node grid, and replaced by a piecewise Lagrange polynomial of degree ``l``
(``l + 1`` nodes per piece).  The interpolant's integral is exact per-piece
Gauss-Legendre, so the renormalization constant is consistent with the curve
that gets evaluated and exported.  Node values are cached at build time and
never recomputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import quadrature
from .errors import (
    DegenerateProduct,
    DegreeTooHigh,
    GridTooCoarse,
    InvalidSupport,
    SupportMismatch,
)
from .logspline import LogsplineFit


@dataclass(frozen=True)
class ProductEstimator:
    """Unnormalized product of converged subset fits on a common support."""

    fits: tuple[LogsplineFit, ...]

    def __post_init__(self):
        fits = tuple(self.fits)
        object.__setattr__(self, "fits", fits)
        if len(fits) < 1:
            raise ValueError("need at least one fit")
        support = fits[0].model.support
        for f in fits[1:]:
            if f.model.support != support:
                raise SupportMismatch(
                    f"fit supports differ: {f.model.support} vs {support}"
                )
        if not all(f.converged for f in fits):
            raise ValueError("all fits must have converged")

    @property
    def support(self) -> tuple[float, float]:
        return self.fits[0].model.support

    @property
    def subset_count(self) -> int:
        return len(self.fits)

    @property
    def min_order(self) -> int:
        return min(f.model.knots.order for f in self.fits)


def product_log_eval(pe: ProductEstimator, x):
    """log of the product of subset densities; -inf outside the support."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(xv.shape)
    for f in pe.fits:
        total = total + f.log_density(xv)
    return float(total[0]) if np.isscalar(x) else total


def product_eval(pe: ProductEstimator, x):
    """Product of the subset densities, accumulated in log space."""
    logv = product_log_eval(pe, x)
    if np.isscalar(x):
        return float(np.exp(logv)) if np.isfinite(logv) else 0.0
    out = np.zeros_like(np.atleast_1d(logv))
    finite = np.isfinite(logv)
    out[finite] = np.exp(logv[finite])
    return out


@dataclass(frozen=True)
class InterpolationGrid:
    """Uniform nodes x_i = a + i*dx packed into degree-sized pieces."""

    support: tuple[float, float]
    degree: int
    num_pieces: int

    def __post_init__(self):
        a, b = float(self.support[0]), float(self.support[1])
        if not a < b:
            raise InvalidSupport(f"support [{a}, {b}] is degenerate")
        object.__setattr__(self, "support", (a, b))
        if self.degree < 1:
            raise ValueError("interpolation degree must be at least 1")
        if self.num_pieces < 1:
            raise GridTooCoarse("need at least one interpolation piece")

    @classmethod
    def from_node_spacing(cls, support, degree: int, dx: float) -> "InterpolationGrid":
        """Round dx down to the nearest value giving an integer piece count."""
        a, b = float(support[0]), float(support[1])
        if not (np.isfinite(dx) and dx > 0):
            raise GridTooCoarse(f"unusable node spacing {dx}")
        pieces = int(math.ceil((b - a) / (dx * degree) - 1e-9))
        if pieces < 1:
            raise GridTooCoarse(f"node spacing {dx} yields no pieces on [{a}, {b}]")
        return cls((a, b), degree, pieces)

    @property
    def num_nodes(self) -> int:
        return self.num_pieces * self.degree + 1

    @property
    def dx(self) -> float:
        a, b = self.support
        return (b - a) / (self.num_pieces * self.degree)

    @cached_property
    def nodes(self) -> np.ndarray:
        a, b = self.support
        nodes = np.linspace(a, b, self.num_nodes)
        nodes.setflags(write=False)
        return nodes

    @property
    def piece_edges(self) -> np.ndarray:
        a, b = self.support
        return np.linspace(a, b, self.num_pieces + 1)

    def piece_index(self, x) -> np.ndarray:
        """Owning piece per point: boundaries belong to the left piece."""
        a, b = self.support
        width = (b - a) / self.num_pieces
        idx = np.ceil((np.asarray(x, dtype=float) - a) / width).astype(int) - 1
        return np.clip(idx, 0, self.num_pieces - 1)


def lagrange_basis(grid: InterpolationGrid, piece: int, tau: int, x):
    """Cardinal polynomial for node tau of the given piece, evaluated at x."""
    deg = grid.degree
    if not 0 <= piece < grid.num_pieces:
        raise IndexError(f"piece {piece} out of range")
    if not 0 <= tau <= deg:
        raise IndexError(f"node index {tau} out of range for degree {deg}")
    xs = grid.nodes[piece * deg : piece * deg + deg + 1]
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    value = np.ones(xv.shape)
    for j in range(deg + 1):
        if j != tau:
            # ratio first: at x == xs[tau] every factor is exactly 1.0
            value = value * ((xv - xs[j]) / (xs[tau] - xs[j]))
    return float(value[0]) if np.isscalar(x) else value


def _integrate_nodes(grid: InterpolationGrid, node_values: np.ndarray) -> float:
    """Exact integral of the piecewise polynomial through the node values."""
    q = (grid.degree + 2) // 2  # ceil((l+1)/2) nodes: exact for degree <= l
    x, w = quadrature.panel_nodes(grid.piece_edges, q)
    return float(w @ _evaluate_nodes(grid, node_values, x))


def _evaluate_nodes(grid: InterpolationGrid, node_values: np.ndarray, x: np.ndarray):
    deg = grid.degree
    idx = grid.piece_index(x)
    base = idx * deg
    nodes = grid.nodes
    value = np.zeros(x.shape)
    for tau in range(deg + 1):
        term = node_values[base + tau]
        for j in range(deg + 1):
            if j != tau:
                # ratio first so stored node values are reproduced bit for bit
                term = term * ((x - nodes[base + j]) / (nodes[base + tau] - nodes[base + j]))
        value = value + term
    return value


@dataclass(frozen=True)
class CompositeInterpolant:
    """Piecewise Lagrange interpolant of the product plus its integral.

    Evaluation reproduces the stored node values bit for bit (each cardinal
    factor cancels exactly at its own node) and is zero outside the support.
    Overshoot below zero is kept as-is; the renormalized curve may dip
    negative near sharp features and :func:`negative_lobe_mass` reports how
    much.
    """

    grid: InterpolationGrid
    node_values: np.ndarray
    lambda_tilde: float

    @classmethod
    def from_node_values(cls, grid: InterpolationGrid, values) -> "CompositeInterpolant":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.num_nodes,):
            raise ValueError(f"need {grid.num_nodes} node values, got {values.shape}")
        lam = _integrate_nodes(grid, values)
        if not lam > 0:
            raise DegenerateProduct(f"interpolant integrates to {lam} <= 0")
        return cls(grid, values, lam)

    @classmethod
    def from_callable(cls, func: Callable, grid: InterpolationGrid) -> "CompositeInterpolant":
        return cls.from_node_values(grid, np.asarray(func(grid.nodes), dtype=float))

    def __call__(self, x):
        return interpolant_eval(self, x)


def build_interpolant(pe: ProductEstimator, grid: InterpolationGrid) -> CompositeInterpolant:
    """Sample the product once at the grid nodes and wrap the interpolant.

    The degree must satisfy l <= k - 3 so that the interpolated function has
    the l + 1 continuous derivatives the error bound requires.
    """
    if grid.support != pe.support:
        raise SupportMismatch(
            f"grid support {grid.support} differs from product support {pe.support}"
        )
    if grid.degree > pe.min_order - 3:
        raise DegreeTooHigh(
            f"degree {grid.degree} exceeds spline order {pe.min_order} minus 3"
        )
    return CompositeInterpolant.from_node_values(grid, product_eval(pe, grid.nodes))


def interpolant_eval(ci: CompositeInterpolant, x):
    """Piecewise polynomial value; zero outside the support."""
    a, b = ci.grid.support
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(xv.shape)
    inside = (xv >= a) & (xv <= b)
    if inside.any():
        out[inside] = _evaluate_nodes(ci.grid, ci.node_values, xv[inside])
    return float(out[0]) if np.isscalar(x) else out


def integrate_interpolant(ci: CompositeInterpolant) -> float:
    """Integral of the interpolant over the support (the stored constant)."""
    lam = _integrate_nodes(ci.grid, ci.node_values)
    if not lam > 0:
        raise DegenerateProduct(f"interpolant integrates to {lam} <= 0")
    return lam


def normalized_eval(ci: CompositeInterpolant, x):
    """Renormalized estimator: interpolant divided by its integral."""
    value = interpolant_eval(ci, x)
    return value / ci.lambda_tilde


def negative_lobe_mass(ci: CompositeInterpolant) -> float:
    """Approximate integral of the negative part (interpolation overshoot)."""
    x, w = quadrature.panel_nodes(ci.grid.piece_edges, ci.grid.degree + 2)
    values = _evaluate_nodes(ci.grid, ci.node_values, x)
    return float(-(w @ np.minimum(values, 0.0)))


def choose_dx(n_norm: float, beta: float, l: int, j: int,
              c: float = 1.0, support=None) -> float:
    """Node spacing c * n_norm^(-beta(1/(l+1) + 1/(j+1))).

    With `support` given, the raw spacing is rounded down so the interval
    splits into an integer number of degree-l pieces.
    """
    if not (n_norm > 0 and beta > 0 and c > 0):
        raise ValueError("n_norm, beta and c must be positive")
    if l < 1 or j < 0:
        raise ValueError("need l >= 1 and j >= 0")
    raw = c * float(n_norm) ** (-beta * (1.0 / (l + 1) + 1.0 / (j + 1)))
    if support is None:
        return raw
    return InterpolationGrid.from_node_spacing(support, l, raw).dx
