"""
Independent numerical ground truth

Adaptive quadrature (re-exported from the quadrature module), deterministic
Monte-Carlo sampling of the image measure, Kolmogorov-Smirnov distance and
per-piece analytic preimages.

Random numbers come from numpy's PCG64 generator seeded through
SeedSequence(seed). With shards > 1 the seed sequence is spawned into one
child per shard and shard k draws n // shards samples, plus one more when
k < n % shards; the concatenated sample is sorted, so the result depends only
on (u, n, seed, shards).
"""

from pathlib import Path

import numpy as np
from scipy.special import kolmogorov

from .data import EmpiricalSample, KSReport
from .errors import ValidationError
from .exprfn import PartitionedFunction, evaluate_many, invert_many, validate
from .measures import (
    AbsContMeasure,
    BorelTestSet,
    HomogeneousYoungMeasure,
    cdf_grid,
    cdf_left_grid,
)
from .quadrature import adaptive_quadrature, cumulative_quadrature
from .utils import logger, write_csv

DEFAULT_SAMPLES = 1_000_000
DEFAULT_SEED = 42
KS_THRESHOLD = 0.005
TABLE_POINTS = 4097
TABLE_CELL_MASS = 1e-4
TABLE_ROUNDS = 40

__all__ = [
    "adaptive_quadrature",
    "cumulative_quadrature",
    "monte_carlo_pushforward",
    "ks_distance",
    "ks_report",
    "preimage_measure",
    "write_sample_csv",
]


def monte_carlo_pushforward(
    u: PartitionedFunction, n: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED, shards: int = 1
) -> EmpiricalSample:
    """Sorted sample {u(X_k)} with X_k uniform on the domain"""
    if n < 1:
        raise ValueError("n must be at least 1")
    if shards < 1:
        raise ValueError("shards must be at least 1")
    report = validate(u)
    if not report.structurally_valid:
        raise ValidationError(report)

    a, b = u.domain
    streams = np.random.SeedSequence(seed).spawn(shards) if shards > 1 else [np.random.SeedSequence(seed)]
    chunks = []
    for k, stream in enumerate(streams):
        size = n // shards + (1 if k < n % shards else 0)
        generator = np.random.Generator(np.random.PCG64(stream))
        chunks.append(a + (b - a) * generator.random(size))
    xs = np.concatenate(chunks)
    values = np.sort(evaluate_many(u, xs))
    logger.debug(f"Drew {n} samples with seed {seed} across {shards} shard(s)")
    return EmpiricalSample(values=values, seed=seed, n=n)


def _abscont_cdf_table(nu: AbsContMeasure):
    """CDF table whose cells each carry mass <= TABLE_CELL_MASS"""
    grid = np.union1d(nu.support.grid(TABLE_POINTS), [
        s for s in nu.singular_endpoints if nu.support.lower <= s <= nu.support.upper
    ])
    for _ in range(TABLE_ROUNDS):
        totals = cumulative_quadrature(nu.density, grid, singular_endpoints=nu.singular_endpoints)
        heavy = np.flatnonzero(np.diff(totals) > TABLE_CELL_MASS)
        if heavy.size == 0:
            return grid, totals
        extra = (grid[heavy, None] + (grid[heavy + 1] - grid[heavy])[:, None] * np.linspace(0, 1, 17)[None, 1:-1]).ravel()
        grid = np.union1d(grid, extra)
    logger.warning(f"CDF table still has cells heavier than {TABLE_CELL_MASS:g}")
    return grid, totals


def _model_cdf(nu: HomogeneousYoungMeasure, ys: np.ndarray):
    """(F(y), F(y-)) at the distinct sample values"""
    if isinstance(nu, AbsContMeasure):
        grid, totals = _abscont_cdf_table(nu)
        values = np.interp(ys, grid, totals)
        return values, values
    clipped = np.clip(ys, nu.support.lower, nu.support.upper)
    right = np.where(ys < nu.support.lower, 0.0, cdf_grid(nu, clipped))
    left = np.where(ys > nu.support.upper, 1.0, cdf_left_grid(nu, clipped))
    right = np.where(ys > nu.support.upper, 1.0, right)
    left = np.where(ys < nu.support.lower, 0.0, left)
    return right, left


def ks_distance(sample: EmpiricalSample, nu: HomogeneousYoungMeasure) -> float:
    """sup |F_n - F| evaluated on both sides of every jump of the empirical CDF"""
    values = np.asarray(sample.values, dtype=float)
    if values.size == 0:
        raise ValueError("sample is empty")
    distinct, counts = np.unique(values, return_counts=True)
    above = np.cumsum(counts) / values.size
    below = above - counts / values.size
    model, model_left = _model_cdf(nu, distinct)
    distance = max(np.max(np.abs(above - model)), np.max(np.abs(below - model_left)))
    return float(min(max(distance, 0.0), 1.0))


def ks_report(sample: EmpiricalSample, nu: HomogeneousYoungMeasure, threshold: float = KS_THRESHOLD) -> KSReport:
    distance = ks_distance(sample, nu)
    p_value = float(kolmogorov(np.sqrt(sample.n) * distance))
    logger.info(f"KS distance {distance:.3g} against {nu.variant} measure (p={p_value:.3g})")
    return KSReport(nu.variant, distance, threshold, sample.n, sample.seed, p_value)


def preimage_measure(u: PartitionedFunction, test_set: BorelTestSet) -> float:
    """μ(u^{-1}(A)) from per-piece preimages of the closed intervals of A"""
    total = 0.0
    for piece in u.pieces:
        for lo, hi in test_set.intervals:
            if piece.is_constant:
                level = piece.image[0]
                total += piece.length if lo <= level <= hi else 0.0
                continue
            low, high = max(lo, piece.image[0]), min(hi, piece.image[1])
            if low > high:
                continue
            ends = invert_many(piece, np.array([low, high]))
            total += abs(float(ends[1] - ends[0]))
    return total / u.measure


def write_sample_csv(sample: EmpiricalSample, path: Path) -> Path:
    return write_csv(Path(path), ["value"], ([v] for v in sample.values.tolist()))
