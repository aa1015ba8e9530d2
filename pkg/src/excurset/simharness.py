"""Monte Carlo coverage experiments with synthetic signals.

Three standard scenarios are provided: smoothed binary circles or squares
in a Venn arrangement (overlap controlled by the center separation) and
crossed linear ramps (speed of signal change controlled by a gradient
multiplier). Each instance draws fresh noise, runs the full analysis
pipeline for a conjunction at the scenario threshold, and records whether
the nested-inclusion statement held against the known signal.
"""

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_quantile
from .errors import ConfigurationError, EmptyEstimateError
from .excursion import CombineSpec, segment_boundary, standardize, zero_crossings
from .field import FieldStack, Lattice, ScalarField, gaussian_smooth
from .glm import fit, intercept_only_design
from .regions import assert_nested, check_inclusion, threshold_regions, true_working_fields

SCENARIOS = ("circles", "squares", "ramps")
SIGNAL_FWHM_PX = 5.0

# High-SNR binary shapes are scaled by 3 before smoothing and analyzed at
# c = 2; low-SNR data divides the signal by 4 and is analyzed at c = 1/2.
# Ramp gradients: 8 per 50 pixels (high), 2 per 50 (low), times the
# multiplier k carried in ``geometry``.
_SNR = {
    "high": {"scale": 3.0, "threshold": 2.0, "ramp_gradient": 8.0 / 50.0},
    "low": {"scale": 0.75, "threshold": 0.5, "ramp_gradient": 2.0 / 50.0},
}

# Standard parameter grids; values outside are allowed but flagged.
_STANDARD_GRIDS = {"separation": (0.0, 50.0), "k": (0.25, 1.75), "rho": (-1.0, 1.0)}


@dataclass(frozen=True)
class SimulationSpec:
    """One grid point of a coverage experiment.

    ``geometry`` is the center separation in pixels for circles/squares and
    the gradient multiplier k for ramps. ``shape_radius`` (circle radius /
    square half-width) defaults to 25 px and is configurable. ``boot.seed``
    doubles as the master seed for the whole experiment; per-instance
    streams are derived from it.
    """

    scenario: str
    snr: str
    n: int
    geometry: float
    instances: int
    boot: BootstrapConfig
    M: int = 2
    noise_rho: float = 0.0
    width: int = 100
    height: int = 100
    shape_radius: float = 25.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario: {self.scenario!r}")
        if self.snr not in _SNR:
            raise ConfigurationError(f"unknown SNR regime: {self.snr!r}")
        if self.n < 2:
            raise ConfigurationError("n must be at least 2")
        if self.M < 1:
            raise ConfigurationError("M must be at least 1")
        if self.instances < 1:
            raise ConfigurationError("instances must be at least 1")
        if not -1.0 <= self.noise_rho <= 1.0:
            raise ConfigurationError("noise_rho must lie in [-1, 1]")
        if self.shape_radius <= 0:
            raise ConfigurationError("shape_radius must be positive")

    @property
    def threshold(self) -> float:
        return _SNR[self.snr]["threshold"]

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.width, self.height)

    @property
    def extrapolated(self) -> bool:
        """True when geometry or noise_rho lies outside the standard grids."""
        lo, hi = _STANDARD_GRIDS["k" if self.scenario == "ramps" else "separation"]
        if not lo <= self.geometry <= hi:
            return True
        lo, hi = _STANDARD_GRIDS["rho"]
        return not lo <= self.noise_rho <= hi

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "snr": self.snr,
            "n": self.n,
            "geometry": self.geometry,
            "instances": self.instances,
            "M": self.M,
            "noise_rho": self.noise_rho,
            "width": self.width,
            "height": self.height,
            "shape_radius": self.shape_radius,
            "threshold": self.threshold,
            "extrapolated": self.extrapolated,
            "boot": {"B": self.boot.B, "alpha": self.boot.alpha, "seed": self.boot.seed},
        }


@dataclass(frozen=True)
class CoverageReport:
    """Aggregated coverage for one spec.

    ``coverage`` is covered / (instances - empty_estimates): instances whose
    estimated set was empty or full cannot be analyzed and are excluded from
    the denominator but reported. The binomial interval uses the same
    denominator. ``runtime`` is informational and excluded from the
    determinism contract.
    """

    spec: SimulationSpec
    method: str
    instances: int
    covered: int
    empty_estimates: int
    coverage: float
    ci_low: float
    ci_high: float
    mean_a: float
    runtime: dict = field(compare=False)

    def to_dict(self, include_runtime: bool = True) -> dict:
        rep = {
            "spec": self.spec.to_dict(),
            "method": self.method,
            "instances": self.instances,
            "covered": self.covered,
            "empty_estimates": self.empty_estimates,
            "coverage": self.coverage,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "mean_a": self.mean_a,
        }
        if include_runtime:
            rep["runtime"] = dict(self.runtime)
        return rep


CSV_COLUMNS = [
    "scenario", "snr", "n", "geometry", "noise_rho", "M", "instances",
    "B", "alpha", "seed", "method", "covered", "empty_estimates",
    "coverage", "ci_low", "ci_high", "mean_a", "total_s",
]


def write_reports_csv(path, reports) -> None:
    """One CSV row per (n, geometry) grid point, for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            s = rep.spec
            writer.writerow([
                s.scenario, s.snr, s.n, s.geometry, s.noise_rho, s.M, s.instances,
                s.boot.B, s.boot.alpha, s.boot.seed, rep.method, rep.covered,
                rep.empty_estimates, repr(rep.coverage), repr(rep.ci_low),
                repr(rep.ci_high), repr(rep.mean_a), rep.runtime.get("total_s", ""),
            ])


# ---------------------------------------------------------------------------
# Signal and noise generation
# ---------------------------------------------------------------------------


def generate_signal(spec: SimulationSpec):
    """Analytic signal fields for the scenario, sampled on the lattice."""
    if spec.M > 2:
        raise ConfigurationError("built-in scenarios define signals for at most 2 conditions")
    lattice = spec.lattice
    settings = _SNR[spec.snr]
    if spec.scenario == "ramps":
        grad = spec.geometry * settings["ramp_gradient"]
        cols = np.arange(spec.width, dtype=np.float64)
        rows = np.arange(spec.height, dtype=np.float64)
        horizontal = spec.threshold + grad * (cols - spec.width / 2.0)
        vertical = spec.threshold + grad * (rows - spec.height / 2.0)
        mu = [
            ScalarField(lattice, np.tile(horizontal, (spec.height, 1))),
            ScalarField(lattice, np.tile(vertical[:, None], (1, spec.width))),
        ]
        return mu[: spec.M]

    cy = (spec.height - 1) / 2.0
    cx0 = (spec.width - 1) / 2.0
    if spec.M == 1:
        centers = [cx0]
    else:
        centers = [cx0 - spec.geometry / 2.0, cx0 + spec.geometry / 2.0]
    rows = np.arange(spec.height, dtype=np.float64)[:, None]
    cols = np.arange(spec.width, dtype=np.float64)[None, :]
    out = []
    for cx in centers:
        if spec.scenario == "circles":
            inside = (rows - cy) ** 2 + (cols - cx) ** 2 <= spec.shape_radius**2
        else:
            inside = (np.abs(rows - cy) <= spec.shape_radius) & (
                np.abs(cols - cx) <= spec.shape_radius
            )
        binary = ScalarField(lattice, inside.astype(np.float64) * settings["scale"])
        out.append(gaussian_smooth(binary, SIGNAL_FWHM_PX))
    return out


def _correlation_factor(M: int, rho: float) -> np.ndarray:
    """Symmetric square root of the equicorrelation matrix."""
    if rho < -1.0 / (M - 1) - 1e-12:
        raise ConfigurationError(
            f"equicorrelation {rho} is infeasible for M={M} (needs rho >= {-1.0 / (M - 1):.4f})"
        )
    corr = np.full((M, M), rho)
    np.fill_diagonal(corr, 1.0)
    eigval, eigvec = np.linalg.eigh(corr)
    return (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T


def generate_noise(spec: SimulationSpec, instance_seed):
    """Unit-variance Gaussian noise stacks, equicorrelated across conditions.

    ``instance_seed`` may be an integer or a numpy SeedSequence; draws come
    from a counter-based generator so instances are reproducible in any
    execution order.
    """
    if isinstance(instance_seed, np.random.SeedSequence):
        ss = instance_seed
    else:
        ss = np.random.SeedSequence(int(instance_seed))
    rng = np.random.Generator(np.random.Philox(seed=ss))
    lattice = spec.lattice
    z = rng.standard_normal((spec.M, spec.n, spec.height, spec.width))
    if spec.M == 1 or spec.noise_rho == 0.0:
        eps = z
    elif spec.M == 2:
        # Exact at rho = +/-1: the second field is the first (negated).
        eps = np.empty_like(z)
        eps[0] = z[0]
        eps[1] = spec.noise_rho * z[0] + math.sqrt(1.0 - spec.noise_rho**2) * z[1]
    else:
        factor = _correlation_factor(spec.M, spec.noise_rho)
        eps = np.einsum("ij,jnhw->inhw", factor, z)
    return [FieldStack(lattice, eps[i]) for i in range(spec.M)]


# ---------------------------------------------------------------------------
# Per-instance pipeline
# ---------------------------------------------------------------------------


def _combine_spec(spec: SimulationSpec) -> CombineSpec:
    return CombineSpec(
        thresholds=np.full(spec.M, spec.threshold),
        signs=np.ones(spec.M, dtype=np.int64),
        mode="conjunction",
    )


def _naive_inclusion(truth, combine: CombineSpec, stats, a_vec) -> bool:
    """Inclusion check for per-condition thresholds a_i on the studentized
    fields (the naive intersection of single-condition regions)."""
    working = true_working_fields(truth, combine)
    true_min = np.minimum.reduce(working, axis=0)
    true_set = true_min >= 0.0
    a_vec = np.asarray(a_vec, dtype=np.float64)

    lower = np.all([s >= -a for s, a in zip(stats, a_vec)], axis=0)
    upper = np.all([s >= a for s, a in zip(stats, a_vec)], axis=0)
    if np.any(true_set & ~lower):
        return False
    if np.any(upper & ~true_set):
        return False

    p1, p2, w = zero_crossings(true_min)
    if len(w) == 0:
        return True
    width = true_min.shape[1]
    i1 = np.array([r * width + c for r, c in p1], dtype=np.intp)
    i2 = np.array([r * width + c for r, c in p2], dtype=np.intp)
    interp = np.stack(
        [(1.0 - w) * s.reshape(-1)[i1] + w * s.reshape(-1)[i2] for s in stats]
    )
    in_lower = np.min(interp + a_vec[:, None], axis=0) >= 0.0
    outside_upper = np.min(interp - a_vec[:, None], axis=0) < 0.0
    return bool(np.all(in_lower) and np.all(outside_upper))


def run_instance(spec: SimulationSpec, signal, combine: CombineSpec, index: int, method: str):
    """Run one simulation instance; returns (covered, empty_estimate, a).

    Instance streams are derived as SeedSequence([master_seed, index]), so
    results do not depend on scheduling or worker count.
    """
    ss = np.random.SeedSequence([spec.boot.seed, index])
    noise_ss, boot_ss = ss.spawn(2)
    noise = generate_noise(spec, noise_ss)
    design = intercept_only_design(spec.n)
    stacks = [
        FieldStack(spec.lattice, signal[i].values + noise[i].values) for i in range(spec.M)
    ]
    fits = [fit(st, design) for st in stacks]

    try:
        if method == "proposed":
            fields = standardize(fits, combine)
            seg = segment_boundary(fields)
            seed_b = int(boot_ss.generate_state(1, np.uint64)[0])
            qr = bootstrap_quantile(
                [f.residuals for f in fits],
                seg,
                combine.effective_signs(),
                BootstrapConfig(spec.boot.B, spec.boot.alpha, seed_b),
            )
            regs = threshold_regions(fields, qr.a, combine, alpha=spec.boot.alpha)
            assert_nested(regs)
            ok = check_inclusion(signal, combine, regs, fields, qr.a)
            return ok, False, qr.a
        # Naive contrast: intersect M single-condition regions, each
        # calibrated independently at the same tolerance.
        seeds = boot_ss.generate_state(spec.M, np.uint64)
        a_vec = []
        stats = []
        for i in range(spec.M):
            single = CombineSpec(
                thresholds=[combine.thresholds[i]],
                signs=[int(combine.signs[i])],
                mode="conjunction",
            )
            fields_i = standardize([fits[i]], single)
            seg_i = segment_boundary(fields_i)
            qr_i = bootstrap_quantile(
                [fits[i].residuals],
                seg_i,
                single.effective_signs(),
                BootstrapConfig(spec.boot.B, spec.boot.alpha, int(seeds[i])),
            )
            a_vec.append(qr_i.a)
            stats.append(fields_i.m_hat.values / fields_i.tau_n)
        ok = _naive_inclusion(signal, combine, stats, a_vec)
        return ok, False, float(np.mean(a_vec))
    except EmptyEstimateError:
        return False, True, float("nan")


def _instance_chunk(args):
    spec, method, lo, hi = args
    signal = generate_signal(spec)
    combine = _combine_spec(spec)
    return [run_instance(spec, signal, combine, k, method) for k in range(lo, hi)]


def _coverage(spec: SimulationSpec, method: str, workers: int) -> CoverageReport:
    t0 = time.perf_counter()
    if workers <= 1:
        results = _instance_chunk((spec, method, 0, spec.instances))
    else:
        chunk = max(1, min(32, math.ceil(spec.instances / (workers * 4))))
        tasks = [
            (spec, method, lo, min(lo + chunk, spec.instances))
            for lo in range(0, spec.instances, chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_instance_chunk, tasks))
        results = [r for part in chunks for r in part]
    total_s = time.perf_counter() - t0

    covered = sum(1 for ok, empty, _ in results if ok and not empty)
    empty_estimates = sum(1 for _, empty, _ in results if empty)
    analyzed = spec.instances - empty_estimates
    coverage = covered / analyzed if analyzed else float("nan")
    if analyzed:
        half = 1.96 * math.sqrt(coverage * (1.0 - coverage) / analyzed)
        ci_low, ci_high = max(0.0, coverage - half), min(1.0, coverage + half)
        a_vals = [a for ok, empty, a in results if not empty]
        mean_a = float(np.sum(a_vals) / analyzed)
    else:
        ci_low = ci_high = mean_a = float("nan")
    return CoverageReport(
        spec=spec,
        method=method,
        instances=spec.instances,
        covered=covered,
        empty_estimates=empty_estimates,
        coverage=coverage,
        ci_low=ci_low,
        ci_high=ci_high,
        mean_a=mean_a,
        runtime={"total_s": total_s, "per_instance_s": total_s / spec.instances},
    )


def run_coverage(spec: SimulationSpec, workers: int = 1) -> CoverageReport:
    """Empirical coverage of the proposed conjunction regions."""
    return _coverage(spec, "proposed", workers)


def naive_comparison(spec: SimulationSpec, workers: int = 1) -> CoverageReport:
    """Empirical coverage of naively intersected single-condition regions."""
    return _coverage(spec, "naive", workers)
