"""Nested confidence-region masks and the simulation inclusion check.

Conjunction mode thresholds the studentized minimum field directly. For
disjunction the working fields were already negated upstream, so the three
masks are computed for the inner complement intersection and then emitted
as plain set complements with the upper/lower roles swapped (the lattice
realization of closed complements).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidParameterError
from .excursion import CombineSpec, StandardizedFields, zero_crossings
from .field import ScalarField


@dataclass(frozen=True)
class ConfidenceRegions:
    """Nested pixel masks: upper (inner) set, point estimate, lower (outer) set."""

    upper: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    a: float
    alpha: float | None
    mode: str
    signs: np.ndarray

    @property
    def mask_labels(self) -> tuple:
        return ("G+", "G", "G-") if self.mode == "disjunction" else ("F+", "F", "F-")

    def pixel_counts(self) -> dict:
        return {
            "upper": int(self.upper.sum()),
            "point": int(self.point.sum()),
            "lower": int(self.lower.sum()),
        }


def threshold_regions(
    fields: StandardizedFields,
    a: float,
    spec: CombineSpec,
    alpha: float | None = None,
) -> ConfidenceRegions:
    """Threshold the studentized minimum field at -a, 0, +a."""
    if a < 0:
        raise InvalidParameterError(f"threshold a must be nonnegative, got {a}")
    stat = fields.m_hat.values / fields.tau_n
    inner_upper = stat >= a
    inner_point = fields.m_hat.values >= 0.0
    inner_lower = stat >= -a
    if spec.mode == "disjunction":
        upper, point, lower = ~inner_lower, ~inner_point, ~inner_upper
    else:
        upper, point, lower = inner_upper, inner_point, inner_lower
    for mask in (upper, point, lower):
        mask.setflags(write=False)
    return ConfidenceRegions(
        upper=upper,
        point=point,
        lower=lower,
        a=float(a),
        alpha=alpha,
        mode=spec.mode,
        signs=spec.signs.copy(),
    )


def assert_nested(regions: ConfidenceRegions) -> None:
    """Guard the nesting invariant upper <= point <= lower; raised on every
    CLI run and simulation instance rather than only under tests."""
    if np.any(regions.upper & ~regions.point) or np.any(regions.point & ~regions.lower):
        raise ConfigurationError("internal error: region masks are not nested")


def true_working_fields(truth, spec: CombineSpec) -> np.ndarray:
    """Signed true fields on the inner-combination scale.

    ``truth`` holds the analytic signal fields (unit noise variance, as in
    the simulation model), so signs and zero sets match the standardized
    working fields without further scaling.
    """
    truth = list(truth)
    if len(truth) != spec.M:
        raise ConfigurationError(f"{len(truth)} truth fields for {spec.M} conditions")
    eff = spec.effective_signs()
    return np.stack(
        [s * (t.values - c) for t, c, s in zip(truth, spec.thresholds, eff)]
    )


def check_inclusion(
    truth,
    spec: CombineSpec,
    regions: ConfidenceRegions,
    fields: StandardizedFields,
    a: float,
) -> bool:
    """Did upper <= true set <= lower hold, at pixels and along the true boundary?

    Pixel nesting is checked on the lattice; in addition the studentized
    minimum field is interpolated at every sub-pixel crossing of the true
    boundary (edge-crossing segmentation of the true min field) and must lie
    in [-a, +a): true-boundary points belong to the target set, so they must
    sit inside the lower region and must not be strictly interior to the
    upper one.
    """
    for t in truth:
        if not isinstance(t, ScalarField):
            raise ConfigurationError("truth fields must be lattice-sampled scalar fields")
    working = true_working_fields(truth, spec)
    true_min = np.minimum.reduce(working, axis=0)
    true_set = true_min >= 0.0

    if regions.mode == "disjunction":
        inner_upper, inner_lower = ~regions.lower, ~regions.upper
    else:
        inner_upper, inner_lower = regions.upper, regions.lower

    if np.any(true_set & ~inner_lower):
        return False
    if np.any(inner_upper & ~true_set):
        return False

    p1, p2, w = zero_crossings(true_min)
    if len(w) == 0:
        return True
    width = fields.m_hat.lattice.width
    i1 = np.array([r * width + c for r, c in p1], dtype=np.intp)
    i2 = np.array([r * width + c for r, c in p2], dtype=np.intp)
    stat = (fields.m_hat.values / fields.tau_n).reshape(-1)
    interp = (1.0 - w) * stat[i1] + w * stat[i2]
    return bool(np.all(interp >= -a) and np.all(interp < a))


def region_report(regions: ConfidenceRegions, extra: dict | None = None) -> dict:
    """JSON-ready summary of a set of confidence regions."""
    labels = regions.mask_labels
    rep = {
        "a": regions.a,
        "alpha": regions.alpha,
        "mode": regions.mode,
        "signs": [int(s) for s in regions.signs],
        "mask_labels": {"upper": labels[0], "point": labels[1], "lower": labels[2]},
        "pixel_counts": regions.pixel_counts(),
    }
    if extra:
        rep.update(extra)
    return rep
