"""Wild t-bootstrap calibration of the boundary-supremum threshold.

Each realization multiplies the standardized residuals by Rademacher signs
drawn from a counter-based generator keyed by (seed, realization), rebuilds
the studentized bootstrap field at the lattice pixels adjacent to the
boundary, interpolates it onto each crossing point with the same weights
used for the statistic field, and records the maximum over points of
|min over the point's active conditions|. The calibrated threshold is a
conservative empirical quantile of that sample.

Realizations are processed in fixed-size chunks so the arithmetic (and hence
the result, bit for bit) is independent of the worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateBootstrapError,
    EmptyEstimateError,
    InvalidParameterError,
)
from .excursion import BoundarySegmentation, segmentation_arrays

_CHUNK = 256  # realizations per work item; fixed so numerics ignore worker count


@dataclass(frozen=True)
class BootstrapConfig:
    B: int
    alpha: float
    seed: int

    def __post_init__(self):
        if self.B < 1:
            raise InvalidParameterError(f"B must be positive, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError(f"alpha must be in (0,1), got {self.alpha}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class QuantileResult:
    """Bootstrap sample and the order statistic chosen as the threshold.

    ``index`` is 1-based: a == sorted(h_tilde)[index - 1].
    """

    a: float
    h_tilde: np.ndarray
    index: int


def rademacher_stream(seed: int, realization_index: int, n: int) -> np.ndarray:
    """n values in {-1., +1.}, deterministic given (seed, realization_index).

    Streams for distinct realization indices come from distinct keys of a
    counter-based generator, so they are independent by construction and
    reproducible under any parallel schedule.
    """
    key = np.array([seed, realization_index], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0


def order_statistic_index(B: int, alpha: float) -> int:
    """1-based index ceil((1-alpha)*B), guarded against float round-up."""
    idx = math.ceil((1.0 - alpha) * B - 1e-9)
    return min(max(idx, 1), B)


def empirical_quantile(h_tilde: np.ndarray, alpha: float) -> QuantileResult:
    """Conservative empirical (1-alpha) quantile of a bootstrap sample."""
    h_tilde = np.asarray(h_tilde, dtype=np.float64)
    idx = order_statistic_index(h_tilde.size, alpha)
    a = float(np.sort(h_tilde)[idx - 1])
    return QuantileResult(a=a, h_tilde=h_tilde, index=idx)


def bootstrap_quantile(
    residuals,
    seg: BoundarySegmentation,
    signs_effective,
    cfg: BootstrapConfig,
    workers: int = 1,
) -> QuantileResult:
    """Estimate the (1-alpha) quantile of the boundary maximum statistic.

    ``residuals`` holds one standardized-residual stack per condition; the
    same multipliers are applied to every condition within a realization
    (shared observations couple the conditions in the limit). ``signs_effective``
    are the per-condition signs matching the standardization mode.

    Degenerate bootstrap samples (sd exactly 0 at a boundary-adjacent pixel)
    raise, naming the realization and the flat pixel index.
    """
    residuals = list(residuals)
    M = len(residuals)
    if M < 1:
        raise ConfigurationError("need at least one residual stack")
    lattice = residuals[0].lattice
    n = residuals[0].n
    for i, st in enumerate(residuals):
        if st.lattice != lattice or st.n != n:
            raise ConfigurationError(
                f"residual stack {i + 1} does not share lattice/n with stack 1"
            )
    if not seg.points:
        raise EmptyEstimateError("boundary segmentation is empty; nothing to bootstrap")
    signs = np.asarray(signs_effective, dtype=np.float64).reshape(-1)
    if signs.size != M or not np.all(np.abs(signs) == 1.0):
        raise ConfigurationError("signs_effective must hold one +/-1 value per condition")

    i1, i2, w, active = segmentation_arrays(seg, lattice, M)
    P = w.size
    # The bootstrap field is studentized at lattice pixels (where residual
    # observations live) and then interpolated onto the crossing points with
    # the segmentation weights, mirroring how the statistic field itself is
    # evaluated there. Only boundary-adjacent pixels are materialized.
    pixels, inverse = np.unique(np.concatenate([i1, i2]), return_inverse=True)
    j1, j2 = inverse[:P], inverse[P:]
    Q = pixels.size
    r_pix = np.empty((M, n, Q))
    for i, st in enumerate(residuals):
        r_pix[i] = st.values.reshape(n, -1)[:, pixels]
    # Squared sums are invariant under sign multipliers (r_l^2 == 1).
    sumsq = np.einsum("mnq,mnq->mq", r_pix, r_pix)

    h_tilde = np.empty(cfg.B)
    sqrt_n = math.sqrt(n)

    def run_chunk(b0: int) -> None:
        b1 = min(b0 + _CHUNK, cfg.B)
        mult = np.empty((b1 - b0, n))
        for j, b in enumerate(range(b0, b1)):
            mult[j] = rademacher_stream(cfg.seed, b, n)
        minima = np.full((b1 - b0, P), np.inf)
        for i in range(M):
            total = mult @ r_pix[i]
            sig2 = (sumsq[i] - total * total / n) / (n - 1)
            if np.any(sig2 <= 0.0):
                bad = np.argwhere(sig2 <= 0.0)[0]
                raise DegenerateBootstrapError(b0 + int(bad[0]), int(pixels[bad[1]]))
            g_pix = signs[i] * total / (sqrt_n * np.sqrt(sig2))
            g = (1.0 - w) * g_pix[:, j1] + w * g_pix[:, j2]
            minima = np.minimum(minima, np.where(active[i], g, np.inf))
        h_tilde[b0:b1] = np.abs(minima).max(axis=1)

    starts = range(0, cfg.B, _CHUNK)
    if workers <= 1:
        for b0 in starts:
            run_chunk(b0)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in [pool.submit(run_chunk, b0) for b0 in starts]:
                res.result()

    h_tilde.setflags(write=False)
    return empirical_quantile(h_tilde, cfg.alpha)
