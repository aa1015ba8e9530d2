import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_fit
from excurset.bootstrap import BootstrapConfig
from excurset.errors import ConfigurationError, EmptyEstimateError
from excurset.excursion import (
    CombineSpec,
    save_boundary_csv,
    segment_boundary,
    standardize,
    zero_crossings,
)
from excurset.field import Lattice, ScalarField
from excurset.simharness import SimulationSpec, generate_signal
from reference import bilinear, refined_smoothed_circles


def random_fields(rng, m, shape=(6, 7)):
    return [make_fit(rng.standard_normal(shape) * 2.0, 1.0, rng=rng) for _ in range(m)]


def interp_at(point, values):
    (r1, c1), (r2, c2) = point.edge
    return (1.0 - point.w) * values[r1, c1] + point.w * values[r2, c2]


# ---------------------------------------------------------------------------
# standardize
# ---------------------------------------------------------------------------


def test_single_condition_identity():
    mu = np.ones((3, 3))
    fields = standardize([make_fit(mu, 1.0)], CombineSpec([0.0], [1]))
    assert np.array_equal(fields.g_hat[0].values, np.ones((3, 3)))
    assert np.array_equal(fields.m_hat.values, np.ones((3, 3)))


def test_sign_negation_flips_second_condition(rng):
    fits = random_fields(rng, 2)
    spec = CombineSpec([1.0, 1.0], [1, -1])
    fields = standardize(fits, spec)
    expected = -(fits[1].mu_hat.values - 1.0) / fits[1].sigma_hat.values
    assert np.max(np.abs(fields.g_hat[1].values - expected)) <= 1e-14


def test_disjunction_min_is_negated_max(rng):
    fits = random_fields(rng, 2)
    raw = [(f.mu_hat.values - 0.5) / f.sigma_hat.values for f in fits]
    fields = standardize(fits, CombineSpec([0.5, 0.5], [1, 1], mode="disjunction"))
    assert np.max(np.abs(fields.m_hat.values + np.maximum(*raw))) <= 1e-12


def test_m_hat_is_exact_pixelwise_min(rng):
    fits = random_fields(rng, 3)
    fields = standardize(fits, CombineSpec([0.0] * 3, [1] * 3))
    stacked = np.stack([g.values for g in fields.g_hat])
    assert np.array_equal(fields.m_hat.values, stacked.min(axis=0))


def test_standardize_rejects_mismatched_inputs(rng):
    small = make_fit(np.zeros((3, 3)), 1.0)
    big = make_fit(np.zeros((4, 4)), 1.0)
    with pytest.raises(ConfigurationError, match="lattice"):
        standardize([small, big], CombineSpec([0.0, 0.0], [1, 1]))
    other_n = make_fit(np.zeros((3, 3)), 1.0, n=8)
    with pytest.raises(ConfigurationError, match="n="):
        standardize([small, other_n], CombineSpec([0.0, 0.0], [1, 1]))


def test_combine_spec_validation():
    with pytest.raises(ConfigurationError):
        CombineSpec([0.0, 1.0], [1])
    with pytest.raises(ConfigurationError):
        CombineSpec([0.0], [2])
    with pytest.raises(ConfigurationError):
        CombineSpec([0.0], [1], mode="xor")


# ---------------------------------------------------------------------------
# segment_boundary
# ---------------------------------------------------------------------------


def test_linear_crossing_midpoint():
    fields = standardize(
        [make_fit(np.array([[-1.0, 1.0], [-1.0, 1.0]]), 1.0)], CombineSpec([0.0], [1])
    )
    seg = segment_boundary(fields, eta=0.1)
    assert len(seg.points) == 2
    for pt in seg.points:
        assert pt.w == pytest.approx(0.5)
        assert pt.active_set == frozenset({1})


def test_identical_fields_activate_both(rng):
    mu = rng.standard_normal((5, 5))
    fits = [make_fit(mu, 1.0), make_fit(mu, 1.0)]
    fields = standardize(fits, CombineSpec([0.0, 0.0], [1, 1]))
    seg = segment_boundary(fields, eta=1e-6)
    assert len(seg.points) > 0
    assert all(pt.active_set == frozenset({1, 2}) for pt in seg.points)


def test_interpolated_m_hat_vanishes(rng):
    fits = random_fields(rng, 2, shape=(10, 10))
    fields = standardize(fits, CombineSpec([0.0, 0.0], [1, 1]))
    seg = segment_boundary(fields)
    assert len(seg.points) > 0
    for pt in seg.points:
        assert abs(interp_at(pt, fields.m_hat.values)) <= 1e-9


def test_exact_zero_pixel_deduplicated():
    values = np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]])
    fields = standardize([make_fit(values, 1.0)], CombineSpec([0.0], [1]))
    seg = segment_boundary(fields, eta=0.1)
    assert len(seg.points) == 1
    pt = seg.points[0]
    assert pt.w in (0.0, 1.0)
    assert pt.edge[0] == (1, 1) if pt.w == 0.0 else pt.edge[1] == (1, 1)


def test_zero_pixel_in_last_column_uses_w_one():
    values = np.array([[1.0, 0.0], [1.0, 1.0]])
    fields = standardize([make_fit(values, 1.0)], CombineSpec([0.0], [1]))
    seg = segment_boundary(fields, eta=0.1)
    (pt,) = seg.points
    assert pt.w == 1.0 and pt.edge == ((0, 0), (0, 1))


@pytest.mark.parametrize("sign,kind", [(1.0, "full"), (-1.0, "empty")])
def test_empty_or_full_estimate_raises(sign, kind):
    fields = standardize([make_fit(sign * np.ones((4, 4)), 1.0)], CombineSpec([0.0], [1]))
    with pytest.raises(EmptyEstimateError, match=kind):
        segment_boundary(fields)


def test_sign_flip_preserves_crossings(rng):
    values = rng.standard_normal((8, 8))
    p1a, p2a, wa = zero_crossings(values)
    p1b, p2b, wb = zero_crossings(-values)
    assert p1a == p1b and p2a == p2b
    assert np.array_equal(wa, wb)


@settings(max_examples=20, deadline=None)
@given(shift=st.floats(0.0, 3.0), seed=st.integers(0, 2**31))
def test_raising_thresholds_shrinks_point_set(shift, seed):
    rng = np.random.default_rng(seed)
    fits = random_fields(rng, 2)
    base = standardize(fits, CombineSpec([0.0, 0.0], [1, 1]))
    raised = standardize(fits, CombineSpec([shift, shift], [1, 1]))
    assert (raised.m_hat.values >= 0).sum() <= (base.m_hat.values >= 0).sum()


def test_two_circles_active_set_partition_vs_refined_oracle():
    # Noiseless high-SNR Venn circles at separation 20, threshold 2: the
    # boundary splits into one arc per condition plus isolated points where
    # both level curves meet, near rows 27.9 and 71.1 at column 49.5.
    spec = SimulationSpec("circles", "high", 100, 20.0, 1, BootstrapConfig(10, 0.05, 0))
    signal = generate_signal(spec)
    fits = [make_fit(s.values, 1.0, n=100) for s in signal]
    fields = standardize(fits, CombineSpec([2.0, 2.0], [1, 1]))
    eta = 0.4
    seg = segment_boundary(fields, eta=eta)

    by_active = {}
    for pt in seg.points:
        by_active.setdefault(tuple(sorted(pt.active_set)), []).append(pt)
    assert set(by_active) == {(1,), (2,), (1, 2)}
    assert len(by_active[(1,)]) == len(by_active[(2,)])
    # long arcs per condition, a handful of isolated double-active points
    assert len(by_active[(1,)]) > 5 * len(by_active[(1, 2)])

    for pt in by_active[(1, 2)]:
        (r1, c1), (r2, c2) = pt.edge
        row = r1 + pt.w * (r2 - r1)
        col = c1 + pt.w * (c2 - c1)
        assert min(abs(row - 27.9), abs(row - 71.1)) < 1.5
        assert abs(col - 49.5) < 1.5

    # classify every point against a 10x-refined evaluation of the smoothed signal
    factor = 10
    refined = refined_smoothed_circles(100, 100, [39.5, 59.5], 25.0, 3.0, 5.0, factor)
    for pt in seg.points:
        (r1, c1), (r2, c2) = pt.edge
        rr = (r1 + pt.w * (r2 - r1)) * factor
        cc = (c1 + pt.w * (c2 - c1)) * factor
        vals = [bilinear(g - 2.0, rr, cc) for g in refined]
        oracle = {i + 1 for i, v in enumerate(vals) if abs(v) < eta}
        oracle.add(1 + int(np.argmin(vals)))
        assert oracle == set(pt.active_set)


def test_boundary_csv_bitmask(tmp_path, rng):
    fits = random_fields(rng, 2)
    fields = standardize(fits, CombineSpec([0.0, 0.0], [1, 1]))
    seg = segment_boundary(fields, eta=5.0)  # large eta: many multi-condition sets
    path = tmp_path / "boundary.csv"
    save_boundary_csv(path, seg)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "p1_row,p1_col,p2_row,p2_col,w,active_mask"
    assert len(lines) == len(seg.points) + 1
    for line, pt in zip(lines[1:], seg.points):
        r1, c1, r2, c2, w, mask = line.split(",")
        assert ((int(r1), int(c1)), (int(r2), int(c2))) == pt.edge
        assert float(w) == pt.w
        expected = sum(1 << (i - 1) for i in pt.active_set)
        assert int(mask) == expected
