import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minhyper.errors import ParameterError
from minhyper.families import Example12Params, make_cartan_tube, make_example11, make_example12
from minhyper.kernel import DiffConfig
from minhyper.scan import (
    CHECKS,
    DEFAULT_CHECKS,
    AxisGrid,
    CheckStat,
    GridSpec,
    ResidualReport,
    default_tolerance,
    scan_grid,
)

EX11 = make_example11()
TWO_PI_R2 = 2 * math.pi / math.sqrt(2)


def ex11_grid(n=5):
    return GridSpec(AxisGrid(0, TWO_PI_R2, n, False), AxisGrid(0, TWO_PI_R2, n, False), AxisGrid(-2, 2, n))


def test_axis_grid_values():
    assert np.allclose(AxisGrid(0, 1, 5).values(), [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(AxisGrid(0, 1, 4, False).values(), [0, 0.25, 0.5, 0.75])
    with pytest.raises(ValueError):
        AxisGrid(0, 1, 1)
    with pytest.raises(ValueError):
        AxisGrid(1, 1, 3)


def test_grid_points_lexicographic():
    g = GridSpec(AxisGrid(0, 1, 2), AxisGrid(0, 1, 2), AxisGrid(0, 1, 2))
    pts = list(g.points())
    assert len(pts) == len(g) == 8
    assert pts == sorted(pts)
    assert pts[1] == (0.0, 0.0, 1.0)


def test_random_points_reproducible():
    g = ex11_grid()
    assert g.random_points(5, 3) == g.random_points(5, 3)
    assert g.random_points(5, 3) != g.random_points(5, 4)
    for p in g.random_points(50, 1):
        assert 0 <= p[0] <= TWO_PI_R2 and -2 <= p[2] <= 2


def test_empty_check_set_passes():
    r = scan_grid(EX11, ex11_grid(3), [])
    assert r.stats == {}
    assert r.passed
    assert r.total_points == 27


@pytest.mark.parametrize("cfg", [DiffConfig(base_step=1e-3), DiffConfig(analytic=True)], ids=["fd", "analytic"])
def test_example11_H_K_scan(cfg):
    # FD jets use a 1e-3 base step here: at 1e-4 roundoff in the z-derivatives
    # (|x_z| ~ 1/(1+z^2)) leaves |K| near 2e-6 at |z| = 2.
    r = scan_grid(EX11, ex11_grid(7), ["H", "K"], cfg)
    assert r.stats["H"].max_abs <= 1e-6
    assert r.stats["K"].max_abs <= 1e-6
    assert r.passed


def test_example11_default_step_within_default_tolerance():
    r = scan_grid(EX11, ex11_grid(7), ["H", "K"])
    assert r.passed  # default tolerance 1e-5


def test_default_checks_analytic():
    r = scan_grid(EX11, ex11_grid(5), DEFAULT_CHECKS, DiffConfig(analytic=True))
    assert r.passed, {k: s.as_dict() for k, s in r.stats.items() if not s.passed}
    assert r.stats["H"].max_abs <= 1e-12


def test_unknown_and_inapplicable_checks():
    with pytest.raises(ParameterError):
        scan_grid(EX11, ex11_grid(3), ["nope"])
    with pytest.raises(ParameterError):
        scan_grid(make_cartan_tube(), ex11_grid(3), ["structure"])


def test_dict_checks_expand_per_identity():
    r = scan_grid(EX11, ex11_grid(3), ["structure"], DiffConfig(analytic=True, frame_step=2e-3))
    names = set(r.stats)
    assert "structure:3.10" in names and "structure:x_uuu" in names
    assert r.stats["structure:3.11"].tolerance == 1e-6
    assert r.stats["structure:x_uuu"].tolerance == 1e-3
    assert r.passed


def test_tolerance_overrides():
    r = scan_grid(EX11, ex11_grid(3), ["H", "structure"], DiffConfig(analytic=True), {"H": 1e-20, "structure:3.12": 1e-30})
    assert r.stats["H"].tolerance == 1e-20
    assert r.stats["structure:3.12"].tolerance == 1e-30
    assert r.stats["structure:3.13"].tolerance == default_tolerance("structure", "3.13", "example11")


def test_tolerance_failure_reported_with_worst_point():
    r = scan_grid(EX11, ex11_grid(3), ["lambda"], DiffConfig(), {"lambda": 1e-30})
    assert not r.passed and r.within_budget
    st_ = r.stats["lambda:spectrum"]
    assert st_.worst_point is not None and not st_.passed


def test_workers_do_not_change_result():
    grid = ex11_grid(4)
    checks = ["H", "K", "lambda", "norm", "scalar"]
    one = scan_grid(EX11, grid, checks, workers=1)
    three = scan_grid(EX11, grid, checks, workers=3)
    assert {k: s.as_dict() for k, s in one.stats.items()} == {k: s.as_dict() for k, s in three.stats.items()}


def test_extra_points_are_scanned():
    g = ex11_grid(3)
    r = scan_grid(EX11, g, ["norm"], extra_points=g.random_points(4, 0))
    assert r.total_points == 31
    assert r.stats["norm"].count == 31


def test_boundary_grid_exceeds_exclusion_budget():
    imm = make_example12(Example12Params(0.1, 1.0))
    lo, hi = imm.params.phase.interval
    # v runs all the way to the interval ends: FD stencils there leave the domain
    grid = GridSpec(AxisGrid(-1, 1, 3), AxisGrid(lo, hi, 5), AxisGrid(-1, 1, 3))
    r = scan_grid(imm, grid, ["H"])
    assert r.exclusions.get("DomainEscape", 0) > 0
    assert r.exclusion_fraction > 0.01
    assert not r.within_budget and not r.passed


def test_shrunk_grid_has_no_exclusions():
    imm = make_example12(Example12Params(0.1, 1.0))
    a, b = imm.params.phase.shrunk_interval()
    grid = GridSpec(AxisGrid(-1, 1, 3), AxisGrid(a, b, 5), AxisGrid(-1, 1, 3))
    r = scan_grid(imm, grid, ["H", "K"])
    assert r.excluded_points == 0 and r.passed


# --- CheckStat and report merging ----------------------------------------------


def test_nan_counts_as_failure():
    s = CheckStat("x", 1.0)
    s.add(float("nan"), 0, (0, 0, 0))
    assert s.max_abs == math.inf and not s.passed


def test_tie_break_lowest_index():
    s = CheckStat("x", 1.0)
    s.add(0.5, 7, (7, 0, 0))
    s.add(0.5, 3, (3, 0, 0))
    s.add(0.5, 9, (9, 0, 0))
    assert s.worst_index == 3 and s.worst_point == (3, 0, 0)


def _stat_from(values, offset):
    s = CheckStat("x", 1.0)
    for k, v in enumerate(values):
        s.add(v, offset + k, (offset + k, 0.0, 0.0))
    return s


def _report_from(values, offset):
    r = ResidualReport(total_points=len(values))
    r.stats["x"] = _stat_from(values, offset)
    return r


values = st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, 2.0]), min_size=1, max_size=8)


def _as_tuple(s):
    return (s.max_abs, s.sum_abs, s.count, s.worst_point, s.worst_index)


@settings(max_examples=200, deadline=None)
@given(values, values, values)
def test_merge_associative_and_matches_sequential(a, b, c):
    sa, sb, sc = _stat_from(a, 0), _stat_from(b, len(a)), _stat_from(c, len(a) + len(b))
    left = sa.merge(sb).merge(sc)
    right = sa.merge(sb.merge(sc))
    whole = _stat_from(a + b + c, 0)
    assert left.max_abs == right.max_abs == whole.max_abs
    assert left.worst_index == right.worst_index == whole.worst_index
    assert left.count == right.count == whole.count
    assert math.isclose(left.sum_abs, whole.sum_abs) and math.isclose(right.sum_abs, whole.sum_abs)
    # merging in either order gives the same winner
    assert _as_tuple(sb.merge(sa))[3:] == _as_tuple(sa.merge(sb))[3:]


@settings(max_examples=100, deadline=None)
@given(values, values)
def test_report_invariants(a, b):
    r = _report_from(a, 0).merge(_report_from(b, len(a)))
    s = r.stats["x"]
    assert s.max_abs >= s.mean_abs >= 0
    assert r.total_points == len(a) + len(b)


def test_report_merge_counts_exclusions():
    r1 = ResidualReport(exclusions={"DomainEscape": 2}, excluded_points=2, total_points=10)
    r2 = ResidualReport(exclusions={"DomainEscape": 1, "PoleSingularity": 1}, excluded_points=2, total_points=10)
    m = r1.merge(r2)
    assert m.exclusions == {"DomainEscape": 3, "PoleSingularity": 1}
    assert m.exclusion_fraction == pytest.approx(0.2)
    assert m.exclusions_dict()["by_error"] == m.exclusions


def test_check_registry():
    for name in DEFAULT_CHECKS:
        assert name in CHECKS
    assert CHECKS["structure"].applies_to("example11")
    assert not CHECKS["structure"].applies_to("cartan")
    assert CHECKS["H"].applies_to("expr")
