"""Gauss-Legendre panel quadrature helpers."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(num_nodes: int):
    """Nodes and weights of the num_nodes-point rule on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(num_nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(edges, num_nodes: int):
    """Map a Gauss-Legendre rule onto every panel [edges[i], edges[i+1]].

    Returns flattened abscissae and weights; the weighted sum of integrand
    values equals the composite integral over [edges[0], edges[-1]].
    """
    edges = np.asarray(edges, dtype=float)
    nodes, weights = gauss_legendre(num_nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def refine_edges(edges, splits: int = 2):
    """Subdivide each panel into `splits` equal parts."""
    edges = np.asarray(edges, dtype=float)
    pieces = [
        np.linspace(edges[i], edges[i + 1], splits, endpoint=False)
        for i in range(edges.size - 1)
    ]
    return np.concatenate(pieces + [edges[-1:]])
