import numpy as np
import pytest

from holomoser import build_algebra
from holomoser.forms import OrbitGeometry
from holomoser.moser import (
    MoserStage,
    analytic_properness_bound,
    check_hypotheses,
    constant_stage,
    flow_stages,
    gauge_fix,
    hermitian_stage,
    homotopy_primitive,
    integrate_flow,
    moser_field,
    primitive_exactness_residual,
    properness_fit,
    properness_gamma,
    scaling_stage,
    segment_stage,
    segment_weight_coords,
    stokes_closedness_residual,
    verify_pullback,
)
from holomoser.roots import chamber_constants, compute_root_datum, weight_from_matrix

_SCALE = np.array([1.0])


@pytest.fixture(scope="module")
def su21():
    alg = build_algebra("su", p=2, q=1)
    datum = compute_root_datum(alg)
    w = weight_from_matrix(alg, 1j * np.diag([0.6, 0.1, -0.7]))
    return alg, datum, OrbitGeometry(alg, datum, w)


@pytest.fixture(scope="module")
def su11():
    alg = build_algebra("su", p=1, q=1)
    datum = compute_root_datum(alg)
    return alg, datum, OrbitGeometry(alg, datum, datum.lambda0)


def delta_for(geo):
    _, b = chamber_constants(geo.weight, geo.datum)
    return 1.5 * b


def stage_families(geo):
    d = delta_for(geo)
    return [hermitian_stage(geo), scaling_stage(geo, d), segment_stage(geo, d)], d


def rand_batch(geo, rng, n, radius=1.0):
    ks = geo.alg.group_exp(rng.standard_normal((n, geo.alg.dim_k)))
    zs = radius * rng.standard_normal((n, geo.dim_p))
    return ks, zs


def test_constant_family_flow_is_identity(su11):
    _, _, geo = su11
    rng = np.random.default_rng(0)
    ks, zs = rand_batch(geo, rng, 4)
    res = integrate_flow(constant_stage(geo), ks, zs, steps=20)
    assert np.abs(res.k - ks).max() < 1e-12
    assert np.abs(res.z - zs).max() < 1e-12
    assert res.trace.reprojections == 0


@pytest.mark.parametrize("which", ["su11", "su21"])
def test_time_derivative_matches_finite_differences(which, su11, su21, request):
    _, _, geo = request.getfixturevalue(which)
    rng = np.random.default_rng(1)
    families, _ = stage_families(geo)
    ks, zs = rand_batch(geo, rng, 6)
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    eps = 1e-5
    for fam in families:
        for t in (0.15, 0.5, 0.85):
            fd = (
                fam.omega(eig, kap, _SCALE, t + eps)
                - fam.omega(eig, kap, _SCALE, t - eps)
            ) / (2 * eps)
            sigma = fam.domega_dt(eig, kap, _SCALE, t)
            assert np.abs(fd - sigma).max() < 1e-8, fam.name


@pytest.mark.parametrize("which", ["su11", "su21"])
def test_primitive_integrates_time_derivative(which, su11, su21, request):
    _, _, geo = request.getfixturevalue(which)
    rng = np.random.default_rng(2)
    families, _ = stage_families(geo)
    for fam in families:
        k0 = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
        z0 = rng.standard_normal(geo.dim_p)
        res = primitive_exactness_residual(fam, geo, k0, z0, 0.4, rng)
        assert res < 1e-6, fam.name


def test_primitive_vanishes_on_zero_section(su21):
    _, _, geo = su21
    rng = np.random.default_rng(3)
    families, _ = stage_families(geo)
    ks, _ = rand_batch(geo, rng, 8)
    zs = np.zeros((8, geo.dim_p))
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    for fam in families:
        mu = homotopy_primitive(fam, eig, kap, zs, 0.7)
        assert np.abs(mu).max() == 0.0, fam.name


def test_gauge_potential_vanishes_for_radial_primitives(su21):
    _, _, geo = su21
    rng = np.random.default_rng(4)
    fam = hermitian_stage(geo)

    def mu_eval(ks, zs, t):
        return homotopy_primitive(fam, geo.fiber_eig(zs), geo.kappa(ks), zs, t)

    potential, corrected = gauge_fix(geo, mu_eval)
    ks, zs = rand_batch(geo, rng, 5)
    assert np.abs(potential(ks, zs, 0.5)).max() < 1e-12
    assert np.abs(corrected(ks, zs, 0.5) - mu_eval(ks, zs, 0.5)).max() < 1e-8


def test_gauge_fix_matches_symbolic_quadratic(su21):
    # mu = d(||v||^2) has potential f = (4/3)||v||^2, so the corrected form
    # is (2 - 8/3) <v, dv>; it must annihilate fiber vectors on the zero section
    _, _, geo = su21
    rng = np.random.default_rng(5)

    def mu_quad(ks, zs, t):
        out = np.zeros((zs.shape[0], geo.dim_t))
        out[:, geo.dim_c :] = 2.0 * zs
        return out

    potential, corrected = gauge_fix(geo, mu_quad)
    ks, zs = rand_batch(geo, rng, 5)
    sq = np.einsum("bi,bi->b", zs, zs)
    assert np.abs(potential(ks, zs, 0.0) - (4.0 / 3.0) * sq).max() < 1e-12
    got = corrected(ks, zs, 0.0)
    assert np.abs(got[:, geo.dim_c :] + (2.0 / 3.0) * zs).max() < 1e-7
    assert np.abs(got[:, : geo.dim_c]).max() < 1e-12
    assert np.abs(corrected(ks, np.zeros_like(zs), 0.0)).max() < 1e-12

    def mu_zero(ks, zs, t):
        return np.zeros((zs.shape[0], geo.dim_t))

    potential0, corrected0 = gauge_fix(geo, mu_zero)
    assert np.abs(potential0(ks, zs, 0.0)).max() == 0.0
    assert np.abs(corrected0(ks, zs, 0.0)).max() == 0.0


def test_moser_field_solves_and_is_vertical(su21):
    _, _, geo = su21
    rng = np.random.default_rng(6)
    families, _ = stage_families(geo)
    ks, zs = rand_batch(geo, rng, 6)
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    for fam in families:
        xi, margin = moser_field(fam, ks, zs, 0.3)
        omega = fam.omega(eig, kap, _SCALE, 0.3)[:, 0]
        mu = homotopy_primitive(fam, eig, kap, zs, 0.3)
        solve_res = np.abs(np.einsum("bij,bj->bi", omega, xi) - mu).max()
        assert solve_res < 1e-12, fam.name
        assert margin > 1e-3
    # product-side stages move only the fiber
    for fam in families[:2]:
        xi, _ = moser_field(fam, ks, zs, 0.3)
        assert np.abs(xi[:, : geo.dim_c]).max() == 0.0, fam.name
    # the zero section is a fixed-point set of every stage field
    ks0, _ = rand_batch(geo, rng, 200)
    zs0 = np.zeros((200, geo.dim_p))
    for fam in families:
        xi, _ = moser_field(fam, ks0, zs0, 0.6)
        assert np.abs(xi).max() == 0.0, fam.name


def test_stage_endpoints_are_compatible(su21):
    _, _, geo = su21
    rng = np.random.default_rng(7)
    families, _ = stage_families(geo)
    ks, zs = rand_batch(geo, rng, 6)
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    herm1 = families[0].omega(eig, kap, _SCALE, 1.0)
    scal0 = families[1].omega(eig, kap, _SCALE, 0.0)
    scal1 = families[1].omega(eig, kap, _SCALE, 1.0)
    segm0 = families[2].omega(eig, kap, _SCALE, 0.0)
    assert np.abs(herm1 - scal0).max() < 1e-12
    assert np.abs(scal1 - segm0).max() < 1e-12


def test_segment_weight_interpolates(su21):
    # the chamber segment runs from the orbit weight to delta * lambda_0;
    # delta > b_lambda is exactly what keeps every interior weight admissible
    _, _, geo = su21
    d = delta_for(geo)
    assert np.abs(segment_weight_coords(geo, d, 0.0) - geo.lam).max() < 1e-14
    end = segment_weight_coords(geo, d, 1.0)
    assert np.abs(end - d * geo.lam0).max() < 1e-14


def test_stokes_certifies_closed_and_detects_broken(su21):
    _, _, geo = su21
    rng = np.random.default_rng(8)
    fam = hermitian_stage(geo)
    k0 = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
    z0 = rng.standard_normal(geo.dim_p)

    def closed(eig, kap):
        return fam.omega(eig, kap, _SCALE, 0.5)[:, 0]

    def broken(eig, kap):
        # scaling a closed form by a non-constant function of Z breaks dW = 0
        factor = 1.0 + 0.1 * (eig[0] ** 2).sum(axis=-1)
        return closed(eig, kap) * factor[:, None, None]

    good = stokes_closedness_residual(geo, closed, k0, z0, 1e-2, rng)
    bad = stokes_closedness_residual(geo, broken, k0, z0, 1e-2, rng)
    assert good < 1e-8
    assert bad > 1e-4


def test_flow_ceiling_aborts_escaping_lanes(su11):
    _, _, geo = su11
    rng = np.random.default_rng(9)
    ks, zs = rand_batch(geo, rng, 2)
    zs /= np.linalg.norm(zs, axis=1)[:, None]
    with pytest.raises(RuntimeError, match="ceiling"):
        integrate_flow(hermitian_stage(geo), ks, zs, steps=10, z_ceiling=0.1)


def test_flow_records_path_when_asked(su11):
    _, _, geo = su11
    rng = np.random.default_rng(10)
    ks, zs = rand_batch(geo, rng, 2)
    res = integrate_flow(hermitian_stage(geo), ks, zs, steps=10, record_path=True)
    assert len(res.trace.path) == 11
    k_first, z_first = res.trace.path[0]
    k_last, z_last = res.trace.path[-1]
    assert np.abs(k_first - ks).max() == 0.0
    assert np.abs(z_first - zs).max() == 0.0
    assert np.abs(k_last - res.k).max() == 0.0
    assert np.abs(z_last - res.z).max() == 0.0
    plain = integrate_flow(hermitian_stage(geo), ks, zs, steps=10)
    assert plain.trace.path is None


def test_hermitian_stage_certifies_pullback(su11):
    _, _, geo = su11
    rng = np.random.default_rng(11)
    pts = []
    for _ in range(4):
        k = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
        z = rng.standard_normal(geo.dim_p)
        pts.append((k, z / np.linalg.norm(z) * rng.uniform(0.3, 1.0)))
    stages = [MoserStage(hermitian_stage(geo), 200)]
    out = verify_pullback(geo, stages, pts, eps=1e-4, rng=np.random.default_rng(0))
    assert out["pullback_residual"] < 1e-6
    assert out["zero_section_displacement"] < 1e-10
    assert out["equivariance_residual"] < 1e-10
    # the hermitian deformation does not shift the moment map
    assert np.abs(out["moment_shift_mean"]).max() < 1e-9
    assert out["moment_shift_spread"] < 1e-9
    assert out["min_form_margin"] > 0.1
    assert out["min_image_separation"] > 1e-3


def test_flow_converges_at_order_four(su11):
    _, _, geo = su11
    rng = np.random.default_rng(12)
    pts = []
    for _ in range(3):
        k = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
        z = rng.standard_normal(geo.dim_p)
        pts.append((k, z / np.linalg.norm(z)))
    residuals = {}
    for steps in (10, 20):
        stages = [MoserStage(hermitian_stage(geo), steps)]
        out = verify_pullback(
            geo, stages, pts, eps=1e-5, n_equivariance=0, n_zero=0,
            rng=np.random.default_rng(0),
        )
        residuals[steps] = out["pullback_residual"]
    assert residuals[10] / residuals[20] > 8.0


def test_stage_moment_shifts_match_analytic_constants(su11):
    _, _, geo = su11
    rng = np.random.default_rng(13)
    d = delta_for(geo)
    pts = []
    for _ in range(3):
        k = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
        z = rng.standard_normal(geo.dim_p)
        pts.append((k, 0.8 * z / np.linalg.norm(z)))
    expected = {
        "hermitian": 0.0 * geo.lam0,
        "scaling": (d - 1.0) * geo.lam0,
        "segment": -d * geo.lam0,
    }
    for fam in (hermitian_stage(geo), scaling_stage(geo, d), segment_stage(geo, d)):
        out = verify_pullback(
            geo, [MoserStage(fam, 60)], pts, eps=1e-4,
            n_equivariance=0, n_zero=0, rng=np.random.default_rng(0),
        )
        gap = out["moment_shift_mean"] - expected[fam.name]
        assert np.abs(gap).max() < 1e-6, fam.name
        assert out["moment_shift_spread"] < 1e-6, fam.name


@pytest.mark.parametrize("which", ["su11", "su21"])
def test_properness_fit_matches_analytic_bound(which, su11, su21, request):
    _, _, geo = request.getfixturevalue(which)
    families, d = stage_families(geo)
    rng = np.random.default_rng(14)
    for fam in families:
        fit = properness_fit(geo, fam, rng)
        bound = analytic_properness_bound(geo, fam.name, d)
        assert 0.99 < fit / bound < 1.05, fam.name
        gamma = properness_gamma(geo, fam)
        assert abs(gamma - 2.0) < 0.05, fam.name


def test_check_hypotheses_clean_report(su21):
    _, _, geo = su21
    families, d = stage_families(geo)
    stages = [MoserStage(f, 10) for f in families]
    out = check_hypotheses(geo, stages, d, np.random.default_rng(15))
    assert out["closedness_rel_residual"] < 1e-8
    assert out["primitive_exactness_residual"] < 1e-6
    assert out["zero_section_cross_block"] < 1e-14
    assert out["zero_section_dt_restriction"] < 1e-14
    assert out["zero_section_endpoint_restriction"] < 1e-14
    assert out["zero_section_primitive_sup"] < 1e-14
    assert np.isfinite(out["zero_section_moment_sup"])
    assert out["zero_section_moment_sup"] < 20.0
    assert out["orthogonality_nullspace_residual"] < 1e-10
    for row in out["properness"]:
        assert 0.99 < row["ratio"] < 1.05, row
        assert abs(row["gamma_fit"] - 2.0) < 0.05, row


def test_three_stage_composite_certifies(su11):
    _, _, geo = su11
    rng = np.random.default_rng(16)
    families, _ = stage_families(geo)
    stages = [
        MoserStage(families[0], 30),
        MoserStage(families[1], 30),
        MoserStage(families[2], 60),
    ]
    pts = []
    for _ in range(6):
        k = geo.alg.group_exp(rng.standard_normal(geo.alg.dim_k))
        z = rng.standard_normal(geo.dim_p)
        pts.append((k, z / np.linalg.norm(z) * rng.uniform(0.2, 1.1)))
    out = verify_pullback(geo, stages, pts, eps=1e-4, rng=np.random.default_rng(0))
    assert out["pullback_residual"] < 1e-5
    # hermitian, scaling and segment shifts cancel exactly in the composite
    assert np.abs(out["moment_shift_mean"]).max() < 1e-8
    assert out["moment_shift_spread"] < 1e-8
    assert out["zero_section_displacement"] < 1e-10
    assert out["equivariance_residual"] < 1e-8
    assert out["min_image_separation"] > 1e-4


def test_flow_stages_chains_traces(su11):
    _, _, geo = su11
    rng = np.random.default_rng(17)
    families, _ = stage_families(geo)
    stages = [MoserStage(f, 10) for f in families]
    ks, zs = rand_batch(geo, rng, 3, radius=0.5)
    _, _, traces = flow_stages(stages, ks, zs)
    assert len(traces) == 3
    assert all(tr.steps == 10 for tr in traces)
    assert all(tr.max_group_residual < 1e-10 for tr in traces)
