"""Convergence-rate experiments for the combined estimator.

A replication draws one sample per subset from a named target, fits the
subset estimators, combines and renormalizes them, and integrates the squared
gap to the analytically-known combined density.  Replications are averaged
per sample size; the log-log regression of the mean against the per-subset
sample count is compared with the theoretical slope -2*beta, and a bound line
with that slope is calibrated at the first grid point (the theory leaves its
constant free, so anchoring is a presentation choice).
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammainc, gammaln, ndtr

from . import quadrature
from .consensus import (
    InterpolationGrid,
    ProductEstimator,
    build_interpolant,
    choose_dx,
    normalized_eval,
)
from .errors import (
    DegenerateProduct,
    EmptySubset,
    ExperimentAborted,
    NoMaximizer,
    NonConvergence,
    ParseError,
    SupportMismatch,
)
from .logspline import LogsplineModel, SampleSet, choose_knots, fit


@dataclass(frozen=True)
class NormalTarget:
    """Every subset posterior is the same normal; the combined density is the
    renormalized M-fold product, a normal with variance shrunk by M."""

    mean: float
    sd: float

    name = "normal"

    def sample(self, rng: np.random.Generator, size):
        return rng.normal(self.mean, self.sd, size)

    def combined_density(self, subsets: int, support) -> Callable:
        a, b = support
        sd = self.sd / math.sqrt(subsets)
        mass = ndtr((b - self.mean) / sd) - ndtr((a - self.mean) / sd)
        norm = sd * math.sqrt(2 * math.pi) * mass

        def pdf(x):
            xv = np.asarray(x, dtype=float)
            out = np.exp(-0.5 * ((xv - self.mean) / sd) ** 2) / norm
            return np.where((xv >= a) & (xv <= b), out, 0.0)

        return pdf

    def as_dict(self):
        return {"name": "normal", "mu": self.mean, "sigma": self.sd}


@dataclass(frozen=True)
class GammaTarget:
    """Gamma(shape, rate) subsets; the M-fold product is again a gamma kernel
    with shape M(shape-1)+1 and rate M*rate, renormalized on the support."""

    shape: float
    rate: float

    name = "gamma"

    def sample(self, rng: np.random.Generator, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def combined_density(self, subsets: int, support) -> Callable:
        a, b = support
        shape_c = subsets * (self.shape - 1.0) + 1.0
        rate_c = subsets * self.rate
        lo = max(a, 0.0)
        mass = gammainc(shape_c, rate_c * b) - gammainc(shape_c, rate_c * lo)
        log_const = shape_c * math.log(rate_c) - gammaln(shape_c) - math.log(mass)

        def pdf(x):
            xv = np.asarray(x, dtype=float)
            safe = np.where(xv > 0, xv, 1.0)
            logpdf = (shape_c - 1.0) * np.log(safe) - rate_c * safe + log_const
            out = np.exp(logpdf)
            return np.where((xv > 0) & (xv >= a) & (xv <= b), out, 0.0)

        return pdf

    def as_dict(self):
        return {"name": "gamma", "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class UniformTarget:
    """Flat subsets; the combined density is flat on the analysis window."""

    lo: float
    hi: float

    name = "uniform"

    def sample(self, rng: np.random.Generator, size):
        return rng.uniform(self.lo, self.hi, size)

    def combined_density(self, subsets: int, support) -> Callable:
        a, b = support

        def pdf(x):
            xv = np.asarray(x, dtype=float)
            return np.where((xv >= a) & (xv <= b), 1.0 / (b - a), 0.0)

        return pdf

    def as_dict(self):
        return {"name": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class BetaTarget:
    """Scaled beta subsets: bell-shaped with genuinely compact support.

    Posterior samples live on a bounded parameter range, which keeps every
    knot interval populated; this is the bundled stand-in for externally
    generated posterior draws.  The M-fold product is again a scaled beta.
    """

    shape_a: float
    shape_b: float
    lo: float = 0.0
    hi: float = 1.0

    name = "beta"

    def sample(self, rng: np.random.Generator, size):
        return self.lo + (self.hi - self.lo) * rng.beta(self.shape_a, self.shape_b, size)

    def combined_density(self, subsets: int, support) -> Callable:
        from scipy.special import betainc, betaln

        a, b = support
        width = self.hi - self.lo
        shape_a = subsets * (self.shape_a - 1.0) + 1.0
        shape_b = subsets * (self.shape_b - 1.0) + 1.0
        ua = min(max((a - self.lo) / width, 0.0), 1.0)
        ub = min(max((b - self.lo) / width, 0.0), 1.0)
        mass = betainc(shape_a, shape_b, ub) - betainc(shape_a, shape_b, ua)
        log_const = -betaln(shape_a, shape_b) - math.log(mass) - math.log(width)

        def pdf(x):
            xv = np.asarray(x, dtype=float)
            u = (xv - self.lo) / width
            safe = np.clip(u, 1e-300, 1.0 - 1e-16)
            logpdf = (
                (shape_a - 1.0) * np.log(safe)
                + (shape_b - 1.0) * np.log1p(-safe)
                + log_const
            )
            inside = (xv >= a) & (xv <= b) & (u > 0) & (u < 1)
            return np.where(inside, np.exp(logpdf), 0.0)

        return pdf

    def as_dict(self):
        return {
            "name": "beta",
            "shape_a": self.shape_a,
            "shape_b": self.shape_b,
            "lo": self.lo,
            "hi": self.hi,
        }


def parse_target(spec: dict):
    """Build a target from its JSON form, e.g. {"name": "normal", "mu": 2, "sigma": 1}."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise ValueError("target: need an object with a 'name' field")
    name = spec["name"]
    if name == "normal":
        return NormalTarget(float(spec.get("mu", 0.0)), float(spec.get("sigma", 1.0)))
    if name == "gamma":
        return GammaTarget(float(spec.get("shape", 1.0)), float(spec.get("rate", 1.0)))
    if name == "uniform":
        return UniformTarget(float(spec.get("lo", 0.0)), float(spec.get("hi", 1.0)))
    if name == "beta":
        return BetaTarget(
            float(spec.get("shape_a", 2.0)),
            float(spec.get("shape_b", 2.0)),
            float(spec.get("lo", 0.0)),
            float(spec.get("hi", 1.0)),
        )
    raise ValueError(f"target.name: unknown generator '{name}'")


@dataclass(frozen=True)
class ExperimentConfig:
    subsets: int
    n_grid: tuple[int, ...]
    target: NormalTarget | GammaTarget | UniformTarget | BetaTarget
    replications: int = 100
    beta: float = 0.5
    j: int = 1
    k: int = 4
    l: int = 1
    seed: int = 0
    dx_constant: float = 1.0
    support_padding: float = 0.01
    support_trim: int = 10
    max_retries: int = 5
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.subsets < 1:
            raise ValueError("M: need at least one subset")
        if len(self.n_grid) < 1 or any(
            b <= a for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise ValueError("n_grid: must be non-empty and strictly increasing")
        if self.replications < 2:
            raise ValueError("replications: need at least 2")
        if not 1 <= self.l <= self.k - 3:
            raise ValueError("l: must satisfy 1 <= l <= k - 3")
        if not 0 <= self.j <= self.k - 1:
            raise ValueError("j: must satisfy 0 <= j <= k - 1")
        if self.jobs < 1:
            raise ValueError("jobs: need at least 1")


@dataclass(frozen=True)
class MiseReport:
    """Mean/std of the integrated squared error per sample size, with the
    fitted log-log slope and the calibrated theoretical bound line."""

    sample_sizes: tuple[int, ...]
    mean_ise: tuple[float, ...]
    std_ise: tuple[float, ...]
    bound_values: tuple[float, ...]
    slope: float
    intercept: float
    theoretical_slope: float
    bound_constant: float
    failed: dict[int, int] = field(default_factory=dict)

    def rows(self):
        return list(zip(self.sample_sizes, self.mean_ise, self.std_ise, self.bound_values))


def ise(true_density: Callable, estimate: Callable, support, *,
        breakpoints=(), abs_tol: float = 1e-10, nodes: int = 12,
        max_panels: int = 1 << 17) -> float:
    """Integral of (true - estimate)^2 over the support.

    Composite Gauss-Legendre, refined by panel halving until the total moves
    by less than abs_tol.  Both callables must accept arrays.  Pass the
    estimator's piece boundaries as `breakpoints` so panels align with its
    derivative kinks; the generic path just starts from a single panel.
    """
    a, b = float(support[0]), float(support[1])
    inner = [p for p in np.asarray(breakpoints, dtype=float) if a < p < b]
    edges = np.unique(np.concatenate([[a, b], inner]))

    def total(e):
        x, w = quadrature.panel_nodes(e, nodes)
        diff = np.asarray(true_density(x), dtype=float) - np.asarray(
            estimate(x), dtype=float
        )
        return float(w @ (diff * diff))

    value = total(edges)
    while edges.size - 1 < max_panels:
        edges = quadrature.refine_edges(edges)
        refined = total(edges)
        if abs(refined - value) <= abs_tol:
            return refined
        value = refined
    return value


def _pipeline_support(draws: np.ndarray, cfg: ExperimentConfig, n: int):
    """Common analysis window: intersection of trimmed subset ranges.

    Every subset must place samples near both edges of the shared support,
    otherwise some edge basis functions see no data and the corresponding
    likelihood is unbounded (no maximizer).  Trimming a few extreme order
    statistics per side before intersecting keeps the local sample density at
    the window edges high enough that this happens only rarely; draws outside
    the window are discarded, never clamped, so no boundary atoms appear.
    The padding is capped below half a knot interval for the same reason.
    """
    r = min(cfg.support_trim, (n - 1) // 4)
    ordered = np.sort(draws, axis=1)
    lo = float(ordered[:, r].max())
    hi = float(ordered[:, -r - 1].min())
    if not lo < hi:
        lo, hi = float(draws.min()), float(draws.max())
    span = hi - lo
    if span == 0.0:
        span = 1.0
    h_est = span / math.ceil(span * n ** (cfg.beta / (cfg.j + 1)))
    pad = min(cfg.support_padding * span, 0.45 * h_est)
    # never pad beyond the pooled range: samples tell us where the target
    # lives, and stepping outside (e.g. below zero for a gamma) would put a
    # jump of the true density inside the analysis window
    return max(lo - pad, float(draws.min())), min(hi + pad, float(draws.max()))


def run_replication(cfg: ExperimentConfig, n: int, rep_seed) -> float:
    """One seeded replication: sample, fit M estimators, combine, return ISE.

    Subsets whose likelihood has no maximizer are resampled from the same
    stream (bounded retries), mirroring the restriction to samples where all
    subset estimators exist; the stream stays deterministic per rep_seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence(rep_seed))
    failure: Exception | None = None
    for _ in range(cfg.max_retries + 1):
        draws = cfg.target.sample(rng, (cfg.subsets, n))
        support = _pipeline_support(draws, cfg, n)
        a, b = support
        try:
            knots = choose_knots(n, support, beta=cfg.beta, j=cfg.j, k=cfg.k)
            model = LogsplineModel(knots)
            fits = tuple(
                fit(model, SampleSet(row[(row >= a) & (row <= b)], support))
                for row in draws
            )
            pe = ProductEstimator(fits)
            n_norm = float(np.linalg.norm(np.full(cfg.subsets, float(n))))
            dx = choose_dx(n_norm, cfg.beta, cfg.l, cfg.j, cfg.dx_constant,
                           support=support)
            grid = InterpolationGrid.from_node_spacing(support, cfg.l, dx)
            interpolant = build_interpolant(pe, grid)
        except (NoMaximizer, NonConvergence, DegenerateProduct) as exc:
            failure = exc
            continue
        truth = cfg.target.combined_density(cfg.subsets, support)
        return ise(
            truth,
            lambda x: normalized_eval(interpolant, x),
            support,
            breakpoints=grid.piece_edges[1:-1],
        )
    raise failure if failure is not None else RuntimeError("unreachable")


def _replication_task(args):
    cfg, n, rep = args
    try:
        return n, rep, run_replication(cfg, n, (cfg.seed, n, rep))
    except (NoMaximizer, NonConvergence, DegenerateProduct):
        return n, rep, None


def run_experiment(cfg: ExperimentConfig) -> MiseReport:
    """Full protocol over the sample-size grid; seeded and schedule-independent."""
    import warnings

    tasks = [(cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    results: dict[tuple[int, int], float | None] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        if cfg.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                for n, rep, value in pool.map(_replication_task, tasks, chunksize=1):
                    results[(n, rep)] = value
        else:
            for task in tasks:
                n, rep, value = _replication_task(task)
                results[(n, rep)] = value

    means, stds, failed = [], [], {}
    for n in cfg.n_grid:
        values = [results[(n, rep)] for rep in range(cfg.replications)]
        good = np.array([v for v in values if v is not None], dtype=float)
        bad = cfg.replications - good.size
        if bad:
            failed[n] = bad
        if bad > cfg.replications // 2:
            raise ExperimentAborted(
                f"{bad}/{cfg.replications} replications failed at n={n}"
            )
        means.append(float(good.mean()))
        stds.append(float(good.std(ddof=1)))

    log_n = np.log(np.asarray(cfg.n_grid, dtype=float))
    slope, intercept = np.polyfit(log_n, np.log(means), 1)
    theoretical = -2.0 * cfg.beta
    bound_constant = means[0] * cfg.n_grid[0] ** (2.0 * cfg.beta)
    bound = [bound_constant * n ** theoretical for n in cfg.n_grid]
    return MiseReport(
        sample_sizes=cfg.n_grid,
        mean_ise=tuple(means),
        std_ise=tuple(stds),
        bound_values=tuple(bound),
        slope=float(slope),
        intercept=float(intercept),
        theoretical_slope=theoretical,
        bound_constant=float(bound_constant),
        failed=failed,
    )


def _read_sample_file(path) -> np.ndarray:
    """One real per line; an optional leading 'theta' header is skipped."""
    values = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text:
                continue
            if lineno == 1 and text.lower() == "theta":
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ParseError(
                    f"not a number: {text!r}", path=str(path), line=lineno
                ) from None
    if not values:
        raise EmptySubset(f"no samples in {path}")
    return np.asarray(values, dtype=float)


def ingest_subsets(paths: Sequence) -> list[SampleSet]:
    """Read one CSV per subset; all share the padded union of the file ranges."""
    if len(paths) < 1:
        raise ValueError("need at least one sample file")
    arrays = [_read_sample_file(p) for p in paths]
    lo = min(float(a.min()) for a in arrays)
    hi = max(float(a.max()) for a in arrays)
    span = hi - lo
    if span == 0.0:
        span = 1.0
    support = (lo - 0.01 * span, hi + 0.01 * span)
    return [SampleSet(a, support) for a in arrays]


def combine_subsets(sets: Sequence[SampleSet], *, beta: float = 0.5, j: int = 1,
                    k: int = 4, l: int = 1, dx_constant: float = 1.0):
    """Fit each subset, multiply, interpolate, renormalize.

    Knot counts follow each subset's own sample count; the node spacing uses
    the Euclidean norm of the per-subset counts.  Returns (fits, interpolant).
    """
    support = sets[0].support
    fits = []
    for s in sets:
        if s.support != support:
            raise SupportMismatch(f"subset supports differ: {s.support} vs {support}")
        knots = choose_knots(s.sample_count, support, beta=beta, j=j, k=k)
        fits.append(fit(LogsplineModel(knots), s))
    pe = ProductEstimator(tuple(fits))
    counts = np.array([s.sample_count for s in sets], dtype=float)
    dx = choose_dx(float(np.linalg.norm(counts)), beta, l, j, dx_constant,
                   support=support)
    grid = InterpolationGrid.from_node_spacing(support, l, dx)
    return fits, build_interpolant(pe, grid)


def synthesize_subsets(target, subsets: int, rows: int, seed: int, directory) -> list:
    """Write one posterior-sample CSV per subset; the bundled data generator."""
    import pathlib

    out_dir = pathlib.Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in range(subsets):
        rng = np.random.default_rng(np.random.SeedSequence((seed, m)))
        values = target.sample(rng, rows)
        path = out_dir / f"subset_{m + 1:02d}.csv"
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("theta\n")
            for v in values:
                handle.write(f"{float(v)!r}\n")
        paths.append(path)
    return paths
