"""Signed standardized fields, their pixelwise-min combination, and the
sub-pixel boundary of the estimated combined excursion set.

Conjunction mode works on fields delta_i * (mu_hat_i - c_i) / s_i where s_i
is the large-sample scale of mu_hat_i (se_i / tau_n, i.e. sigma_hat for the
intercept-only model). Disjunction mode additionally negates every working
field, so thresholding the min targets the complement intersection whose
De Morgan dual is the requested union.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, EmptyEstimateError, InvalidParameterError
from .field import Lattice, ScalarField
from .glm import GlmFit

MODES = ("conjunction", "disjunction")


@dataclass(frozen=True)
class CombineSpec:
    """How the M estimated excursion sets are combined.

    ``thresholds`` holds the per-condition levels c_i (response units),
    ``signs`` the per-condition exceedance directions delta_i in {-1,+1}
    (+1 means "at or above c_i", -1 means "at or below c_i").
    """

    thresholds: np.ndarray
    signs: np.ndarray
    mode: str = "conjunction"

    def __post_init__(self):
        c = np.asarray(self.thresholds, dtype=np.float64).reshape(-1)
        d = np.asarray(self.signs, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "thresholds", c)
        object.__setattr__(self, "signs", d)
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode: {self.mode!r}")
        if c.shape != d.shape:
            raise ConfigurationError(
                f"{c.size} thresholds but {d.size} signs; one of each per condition"
            )
        if c.size < 1:
            raise ConfigurationError("need at least one condition")
        if not np.all(np.abs(d) == 1):
            raise ConfigurationError("signs must be -1 or +1")

    @property
    def M(self) -> int:
        return self.thresholds.size

    def effective_signs(self) -> np.ndarray:
        """Signs applied to the limiting fields: delta_i under conjunction,
        -delta_i under disjunction (inner-complement construction)."""
        return self.signs if self.mode == "conjunction" else -self.signs


@dataclass(frozen=True)
class StandardizedFields:
    """Working fields g_hat[i] plus their exact pixelwise minimum m_hat."""

    g_hat: tuple
    m_hat: ScalarField
    tau_n: float

    @property
    def M(self) -> int:
        return len(self.g_hat)


@dataclass(frozen=True)
class BoundaryPoint:
    """A zero crossing of m_hat along one 4-neighbor lattice edge.

    ``edge`` is ((r1, c1), (r2, c2)) with the endpoints in scan order, ``w``
    the fractional position of the crossing from the first endpoint, and
    ``active_set`` the 1-based conditions whose interpolated working field
    is within the segmentation tolerance of zero (never empty: the argmin
    condition is always included).
    """

    edge: tuple
    w: float
    active_set: frozenset


@dataclass(frozen=True)
class BoundarySegmentation:
    points: tuple
    eta: float


def standardize(fits, spec: CombineSpec) -> StandardizedFields:
    """Build the signed standardized working fields for the requested combination."""
    fits = list(fits)
    if len(fits) != spec.M:
        raise ConfigurationError(f"{len(fits)} fits for {spec.M} configured conditions")
    lattice = fits[0].mu_hat.lattice
    n = fits[0].n
    for i, f in enumerate(fits):
        if f.mu_hat.lattice != lattice:
            raise ConfigurationError(f"condition {i + 1} is on a different lattice")
        if f.n != n:
            raise ConfigurationError(
                f"condition {i + 1} has n={f.n}, condition 1 has n={n}"
            )
    tau_n = fits[0].tau_n
    eff = spec.effective_signs()
    g_list = []
    for f, c, s in zip(fits, spec.thresholds, eff):
        scale = f.se.values / tau_n  # large-sample sd of mu_hat; sigma_hat for intercept-only
        g = s * (f.mu_hat.values - c) / scale
        g_list.append(ScalarField(lattice, g))
    m_hat = ScalarField(lattice, np.minimum.reduce([g.values for g in g_list]))
    return StandardizedFields(g_hat=tuple(g_list), m_hat=m_hat, tau_n=tau_n)


def zero_crossings(values: np.ndarray):
    """Sub-pixel zero crossings of a field along 4-neighbor lattice edges.

    Returns parallel arrays (p1, p2, w) where p1/p2 are (row, col) pairs in
    scan order and w in [0, 1] locates the crossing from p1. Strict sign
    changes get the linear-interpolation weight m1 / (m1 - m2); each pixel
    holding an exact zero contributes one deduplicated point with w in {0, 1}.
    """
    m = np.asarray(values, dtype=np.float64)
    height, width = m.shape
    p1 = []
    p2 = []
    ws = []

    zr, zc = np.nonzero(m == 0.0)
    for r, c in zip(zr.tolist(), zc.tolist()):
        if c + 1 < width:
            p1.append((r, c))
            p2.append((r, c + 1))
            ws.append(0.0)
        else:
            p1.append((r, c - 1))
            p2.append((r, c))
            ws.append(1.0)

    m1 = m[:, :-1]
    m2 = m[:, 1:]
    hr, hc = np.nonzero(m1 * m2 < 0.0)
    wh = m1[hr, hc] / (m1[hr, hc] - m2[hr, hc])
    for r, c, w in zip(hr.tolist(), hc.tolist(), wh.tolist()):
        p1.append((r, c))
        p2.append((r, c + 1))
        ws.append(w)

    m1 = m[:-1, :]
    m2 = m[1:, :]
    vr, vc = np.nonzero(m1 * m2 < 0.0)
    wv = m1[vr, vc] / (m1[vr, vc] - m2[vr, vc])
    for r, c, w in zip(vr.tolist(), vc.tolist(), wv.tolist()):
        p1.append((r, c))
        p2.append((r + 1, c))
        ws.append(w)

    order = sorted(range(len(ws)), key=lambda k: (p1[k], p2[k], ws[k]))
    p1 = [p1[k] for k in order]
    p2 = [p2[k] for k in order]
    ws = [ws[k] for k in order]
    return p1, p2, np.asarray(ws, dtype=np.float64)


def segment_boundary(fields: StandardizedFields, eta: float | None = None) -> BoundarySegmentation:
    """Extract the boundary of {m_hat >= 0} with per-point active condition sets.

    ``eta`` is the tolerance for calling a condition active at a crossing;
    the default is two standard errors on the standardized scale (2 * tau_n).
    """
    if eta is None:
        eta = 2.0 * fields.tau_n
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")

    m = fields.m_hat.values
    p1, p2, w = zero_crossings(m)
    if len(w) == 0:
        kind = "empty" if m.flat[0] < 0 else "full"
        raise EmptyEstimateError(
            f"estimated combined excursion set is {kind} "
            "(no boundary on the lattice); confidence regions undefined"
        )

    width = fields.m_hat.lattice.width
    i1 = np.array([r * width + c for r, c in p1], dtype=np.intp)
    i2 = np.array([r * width + c for r, c in p2], dtype=np.intp)
    G = np.stack([g.values.reshape(-1) for g in fields.g_hat])
    g_interp = (1.0 - w) * G[:, i1] + w * G[:, i2]

    active = np.abs(g_interp) <= eta
    active[np.argmin(g_interp, axis=0), np.arange(len(w))] = True

    points = tuple(
        BoundaryPoint(
            edge=(p1[k], p2[k]),
            w=float(w[k]),
            active_set=frozenset(int(i) + 1 for i in np.flatnonzero(active[:, k])),
        )
        for k in range(len(w))
    )
    return BoundarySegmentation(points=points, eta=float(eta))


def save_boundary_csv(path, seg: BoundarySegmentation) -> None:
    """Write boundary points as CSV; active sets are encoded as a bitmask
    with condition 1 in the least significant bit."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p1_row", "p1_col", "p2_row", "p2_col", "w", "active_mask"])
        for pt in seg.points:
            (r1, c1), (r2, c2) = pt.edge
            mask = 0
            for i in pt.active_set:
                mask |= 1 << (i - 1)
            writer.writerow([r1, c1, r2, c2, repr(pt.w), mask])


def segmentation_arrays(seg: BoundarySegmentation, lattice: Lattice, M: int):
    """Flat-index view of a segmentation for vectorized evaluation.

    Returns (i1, i2, w, active) where i1/i2 index the flattened lattice and
    active is an (M, P) boolean matrix of per-point active sets.
    """
    P = len(seg.points)
    i1 = np.empty(P, dtype=np.intp)
    i2 = np.empty(P, dtype=np.intp)
    w = np.empty(P, dtype=np.float64)
    active = np.zeros((M, P), dtype=bool)
    for k, pt in enumerate(seg.points):
        (r1, c1), (r2, c2) = pt.edge
        i1[k] = r1 * lattice.width + c1
        i2[k] = r2 * lattice.width + c2
        w[k] = pt.w
        for i in pt.active_set:
            active[i - 1, k] = True
    return i1, i2, w, active
