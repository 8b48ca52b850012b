"""Order measurement and cross-module consistency checks."""

import numpy as np
import pytest

import groupoid_vi.discrete as disc
import groupoid_vi.dynamics as dyn
import groupoid_vi.errorlab as lab
import groupoid_vi.exact as ex
import groupoid_vi.geometry as geo
import groupoid_vi.schemes as schemes
from groupoid_vi.errors import InsufficientPoints

CFG = ex.ShootingConfig(residual_tol=1e-12,
                        flow=dyn.FlowConfig(abs_tol=1e-13, rel_tol=1e-12))
GRID = [0.4, 0.2, 0.1, 0.05, 0.025]


@pytest.fixture(scope="module")
def ho():
    return dyn.harmonic_oscillator()


@pytest.fixture(scope="module")
def rb():
    return dyn.rigid_body(1.0, 2.0, 3.0)


@pytest.fixture(scope="module")
def ho_probes(ho):
    return [geo.tangent(ho.instance, [0.3], [0.8]),
            geo.tangent(ho.instance, [-0.4], [0.5])]


@pytest.fixture(scope="module")
def rb_probes(rb):
    return [geo.algebra_vector(rb.instance, [0.9, -0.4, 0.7]),
            geo.algebra_vector(rb.instance, [0.2, 1.0, -0.5])]


# ---------------------------------------------------------------------------
# value-order measurement
# ---------------------------------------------------------------------------

def test_dl_order_midpoint_ho(ho, ho_probes):
    rep = lab.dl_order(lambda h: schemes.midpoint_pair(ho, h), ho,
                       lab.probes_from_states(ho, ho_probes, CFG.flow),
                       GRID, CFG, expected_slope=3.0, band=0.15)
    assert rep.verdict == "pass"
    assert abs(rep.order - 2.0) <= 0.15


def test_dl_order_exact_scheme_reports_exact(ho, ho_probes):
    rep = lab.dl_order(lambda h: ex.as_discrete_lagrangian(ho, h, CFG), ho,
                       lab.probes_from_states(ho, ho_probes, CFG.flow),
                       GRID, CFG)
    assert rep.verdict == "exact"
    assert rep.slope is None


def test_dl_order_free_particle_midpoint_exact():
    sys = dyn.free_particle(1)
    probes = [geo.tangent(sys.instance, [0.1], [0.9])]
    rep = lab.dl_order(lambda h: schemes.midpoint_pair(sys, h), sys,
                       lab.probes_from_states(sys, probes, CFG.flow), GRID, CFG)
    assert rep.verdict == "exact"


def test_dl_order_insufficient_points(ho, ho_probes):
    with pytest.raises(InsufficientPoints):
        lab.dl_order(lambda h: schemes.midpoint_pair(ho, h), ho,
                     lab.probes_from_states(ho, ho_probes, CFG.flow),
                     [0.1, 0.05], CFG)


def test_dl_order_grid_robustness(rb, rb_probes):
    reps = []
    for grid in (GRID, [0.32, 0.16, 0.08, 0.04, 0.02]):
        reps.append(lab.dl_order(
            lambda h: schemes.tau_alpha_group(rb, "exp", 0.5, h), rb,
            lab.probes_from_states(rb, rb_probes, CFG.flow), grid, CFG))
    assert abs(reps[0].slope - reps[1].slope) < 0.1


# ---------------------------------------------------------------------------
# flow-order measurement
# ---------------------------------------------------------------------------

def test_flow_order_midpoint_ho(ho, ho_probes):
    rep = lab.flow_order(lambda h: schemes.midpoint_pair(ho, h), ho, ho_probes,
                         GRID, CFG, expected_slope=3.0, band=0.2)
    assert rep.verdict == "pass"


def test_flow_order_exact_scheme_at_floor(ho, ho_probes):
    rep = lab.flow_order(lambda h: ex.as_discrete_lagrangian(ho, h, CFG), ho,
                         ho_probes, [0.2, 0.1, 0.05],
                         CFG, newton=disc.NewtonConfig(residual_tol=1e-12))
    assert rep.verdict == "exact"


def test_flow_order_arrow_observable_superconverges(ho, ho_probes):
    # symmetric scheme: momentum-matching defect O(h^3), inverse regularity
    # rescales arrows by h, so the arrow observable measures one order higher
    rep = lab.flow_order(lambda h: schemes.midpoint_pair(ho, h), ho, ho_probes,
                         GRID, CFG, observable="arrow")
    assert rep.slope > 3.5


def test_bundle_product_measures_second_order():
    # coupled Lagrange-Poincare system: value agreement and one-step flow
    # error both at slope ~3, exercising the bundle shooting path
    sys = dyn.heavy_top_trivial_bundle(inertia=(1.0, 2.0, 3.0), mass=1.0,
                                       gravity=1.0, coupling=0.3)
    probes = [geo.bundle_vector(sys.instance, [0.8, -0.3, 0.5],
                                [0.1, 0.0, -0.2], [0.3, -0.2, 0.4])]
    grid = [0.4, 0.2, 0.1, 0.05]
    rep_dl = lab.dl_order(lambda h: schemes.bundle_product(sys, h), sys,
                          lab.probes_from_states(sys, probes, CFG.flow),
                          grid, CFG)
    assert abs(rep_dl.slope - 3.0) < 0.3
    rep_flow = lab.flow_order(lambda h: schemes.bundle_product(sys, h), sys,
                              probes, grid, CFG,
                              newton=disc.NewtonConfig(residual_tol=1e-10))
    assert abs(rep_flow.slope - 3.0) < 0.3


def test_flow_order_drops_failing_h(rb, rb_probes):
    # h large enough that log(exp_map) leaves the branch -> dropped, not fatal
    def factory(h):
        return schemes.tau_alpha_group(rb, "exp", 0.5, h)

    big = geo.algebra_vector(rb.instance, [2.4, 1.8, 1.2])
    rep = lab.flow_order(factory, rb, [big], [1.2, 0.2, 0.1, 0.05, 0.025], CFG)
    assert rep.slope is not None


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def test_theorem51_ho(ho):
    rng = np.random.default_rng(0)
    arrows = [ex.exponential_map(
        ho, geo.tangent(ho.instance, rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)),
        0.1, CFG.flow) for _ in range(5)]
    assert lab.theorem51_check(ho, arrows, 0.1, CFG) <= 1e-8


def test_theorem51_free_particle_tight():
    sys = dyn.free_particle(1)
    arrows = [geo.pair_arrow(sys.instance, [0.0], [0.4])]
    assert lab.theorem51_check(sys, arrows, 0.2, CFG) <= 1e-12


def test_theorem51_rigid_body(rb, rb_probes):
    arrows = [ex.exponential_map(rb, a0, 0.05, CFG.flow) for a0 in rb_probes]
    assert lab.theorem51_check(rb, arrows, 0.05, CFG) <= 1e-7


def test_theorem51_sign_injection_fails(ho):
    arrows = [ex.exponential_map(ho, geo.tangent(ho.instance, [0.3], [0.6]),
                                 0.1, CFG.flow)]
    assert lab.theorem51_check(ho, arrows, 0.1, CFG, flip_sign=True) > 1e-2


def test_theorem55_consistency(ho):
    arrows = [geo.pair_arrow(ho.instance, [0.1], [0.25]),
              geo.pair_arrow(ho.instance, [-0.3], [0.0])]
    out = lab.theorem55_check(ho, arrows, 0.1, CFG)
    assert out["max"] <= 1e-6


def test_defect_scales_with_solver_tolerance(rb):
    # horizon long enough that the flow tolerance is the binding error
    # source; tightening it by 100x must cut the defect at least in half
    # (it tracks nearly proportionally)
    a0 = geo.algebra_vector(rb.instance, [0.9, -0.4, 0.7])
    defects = []
    for ft in (1e-5, 1e-7):
        cfg = ex.ShootingConfig(residual_tol=ft / 10,
                                flow=dyn.FlowConfig(abs_tol=ft / 10, rel_tol=ft))
        arrows = [ex.exponential_map(rb, a0, 1.5, cfg.flow)]
        defects.append(lab.theorem51_check(rb, arrows, 1.5, cfg))
    assert defects[1] < 0.5 * defects[0]


def test_psi_defect_bounded_by_shooting_tolerance(rb):
    # Newton overshoots its stopping tolerance quadratically, so the psi
    # defects saturate near machine precision; the honest statement is
    # that they stay below the tolerance-implied bound at every setting
    a0 = geo.algebra_vector(rb.instance, [0.9, -0.4, 0.7])
    g0 = geo.group_arrow(rb.instance, geo.group_exp(rb.instance, [0.8, 0.3, -0.5]))
    for tol in (1e-6, 1e-8, 1e-10):
        cfg = ex.ShootingConfig(residual_tol=tol,
                                flow=dyn.FlowConfig(abs_tol=1e-13, rel_tol=1e-12))
        u = ex.exponential_map(rb, a0, 0.1, cfg.flow)
        out = lab.psi_reduction_check(rb, [(g0, geo.compose(g0, u))], 0.1, cfg)
        assert out["momentum"] <= 3.0 * tol / 0.1


def test_psi_reduction_so3(rb):
    rng = np.random.default_rng(1)
    pairs = []
    for _ in range(4):
        g0 = geo.group_arrow(rb.instance,
                             geo.group_exp(rb.instance, rng.uniform(-1, 1, 3)))
        a0 = geo.algebra_vector(rb.instance, rng.uniform(-1, 1, 3))
        u = ex.exponential_map(rb, a0, 0.1, CFG.flow)
        pairs.append((g0, geo.compose(g0, u)))
    out = lab.psi_reduction_check(rb, pairs, 0.1, CFG)
    assert out["value"] <= 1e-7
    assert out["momentum"] <= 1e-6


def test_psi_reduction_identity_start_is_tight(rb):
    a0 = geo.algebra_vector(rb.instance, [0.7, -0.2, 0.4])
    u = ex.exponential_map(rb, a0, 0.1, CFG.flow)
    pairs = [(geo.identity_at(rb.instance), u)]
    out = lab.psi_reduction_check(rb, pairs, 0.1, CFG)
    assert out["value"] <= 1e-10


def test_psi_reduction_left_translation_invariance(rb):
    # translating the pair by k leaves the pullback value unchanged
    rng = np.random.default_rng(2)
    a0 = geo.algebra_vector(rb.instance, [0.5, 0.3, -0.6])
    u = ex.exponential_map(rb, a0, 0.1, CFG.flow)
    g0 = geo.group_arrow(rb.instance, geo.group_exp(rb.instance, rng.uniform(-1, 1, 3)))
    k = geo.group_arrow(rb.instance, geo.group_exp(rb.instance, rng.uniform(-1, 1, 3)))
    pair_a = (g0, geo.compose(g0, u))
    pair_b = (geo.compose(k, g0), geo.compose(geo.compose(k, g0), u))
    out_a = lab.psi_reduction_check(rb, [pair_a], 0.1, CFG)
    out_b = lab.psi_reduction_check(rb, [pair_b], 0.1, CFG)
    assert abs(out_a["value"] - out_b["value"]) < 1e-8


# ---------------------------------------------------------------------------
# structure preservation
# ---------------------------------------------------------------------------

def test_symplecticity_midpoint(ho):
    ld = schemes.midpoint_pair(ho, 0.1)
    mu = geo.Momentum(ho.instance, np.array([0.3]), np.array([0.5]))
    assert lab.symplecticity_defect(ld, mu,
                                    disc.NewtonConfig(residual_tol=1e-13)) <= 1e-5


def test_conservation_report_exact_dl(ho):
    h = 0.1
    exact_ld = ex.as_discrete_lagrangian(ho, h, CFG)
    g0 = ex.exponential_map(ho, geo.tangent(ho.instance, [0.0], [1.0]), h, CFG.flow)
    # shooting tol 1e-12 leaves ~1e-11 evaluation noise in the exact
    # momenta (chart residual divided by h), so the DEL solve cannot be
    # pushed below that floor
    rep = lab.conservation_report(exact_ld, ho, g0, 100,
                                  disc.NewtonConfig(residual_tol=1e-11))
    assert not rep.record.failed
    assert rep.energy_drift <= 1e-7


def test_conservation_report_casimir(rb):
    h = 0.05
    ld = schemes.tau_alpha_group(rb, "exp", 0.5, h)
    g0 = ex.exponential_map(rb, geo.algebra_vector(rb.instance, [1.0, 0.3, -0.4]),
                            h, CFG.flow)
    rep = lab.conservation_report(ld, rb, g0, 300,
                                  disc.NewtonConfig(residual_tol=1e-13))
    assert rep.casimir_drift <= 1e-10
    assert rep.energy_drift is not None
