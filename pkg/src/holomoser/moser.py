"""Moser isotopies between the model symplectic structures.

A FormFamily is a t-family of closed 2-forms on the model K x p together
with its time derivative and a compatible family of moment maps.  The Moser
construction turns each family into a flow: the time derivative is made
exact by the radial homotopy primitive (fiber scaling (k, Z) -> (k, sZ)),
the Moser field solves iota(xi) omega_t = -mu_t, and a fourth-order
Runge-Kutta-Munthe-Kaas integrator transports points so that the time-one
map pulls the final form back to the initial one.

Three concrete stages compose to the full isotopy:

    hermitian   product form  ->  delta form at delta = 1,
    scaling     delta = 1     ->  delta = delta,
    segment     delta form    ->  pullback of the orbit form
                (the segment family traversed from the delta end).

The verification drivers re-integrate perturbed initial points and compare
central-difference differentials against the claimed pullback identity,
transport moment maps, and check the standing hypotheses (closedness via
Stokes on exponential-chart simplices, exactness of the primitive, zero
section behaviour, properness constants of the moment families).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .roots import ChamberWeight, chamber_constants

_UNIT_SCALE = np.array([1.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_X + 1.0)
_GL_WEIGHTS = 0.5 * _GL_W

# degree-5 symmetric triangle rule (barycentric nodes, weights sum to 1)
_TRI_A2 = 0.470142064105115
_TRI_A3 = 0.101286507323456
_TRI_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_TRI_A2, _TRI_A2, 1 - 2 * _TRI_A2],
        [_TRI_A2, 1 - 2 * _TRI_A2, _TRI_A2],
        [1 - 2 * _TRI_A2, _TRI_A2, _TRI_A2],
        [_TRI_A3, _TRI_A3, 1 - 2 * _TRI_A3],
        [_TRI_A3, 1 - 2 * _TRI_A3, _TRI_A3],
        [1 - 2 * _TRI_A3, _TRI_A3, _TRI_A3],
    ]
)
_TRI_W = np.array(
    [0.225]
    + [0.132394152788506] * 3
    + [0.125939180544827] * 3
)


class FormFamily:
    """A t in [0,1] family of closed 2-forms with moments, batched evaluators.

    omega / domega_dt map (eig, kap, scales, t) to (B, S, T, T) matrices at
    the points (k_b, s Z_b); moment maps (eig, kap, t) to (B, N) coadjoint
    coordinates.
    """

    def __init__(self, name, geometry, omega, domega_dt, moment,
                 pairing_direction=None):
        self.name = name
        self.geometry = geometry
        self._omega = omega
        self._domega = domega_dt
        self._moment = moment
        if pairing_direction is None:
            z0 = geometry.z0
            pairing_direction = lambda t: z0 / np.linalg.norm(z0)
        self.pairing_direction = pairing_direction

    def omega(self, eig, kap, scales, t):
        return self._omega(eig, kap, scales, t)

    def domega_dt(self, eig, kap, scales, t):
        return self._domega(eig, kap, scales, t)

    def moment(self, eig, kap, t):
        return self._moment(eig, kap, t)


def hermitian_stage(geometry):
    """Product form to the delta = 1 form through the scaled fiber family."""
    return FormFamily(
        "hermitian",
        geometry,
        lambda eig, kap, s, t: geometry.hermitian_blocks(eig, s, t),
        lambda eig, kap, s, t: geometry.hermitian_dt_blocks(eig, s, t),
        lambda eig, kap, t: geometry.moment_hermitian(eig, geometry.klam(kap), t),
    )


def scaling_stage(geometry, delta):
    """Delta coefficient 1 to delta along s(t) = 1 + t (delta - 1)."""

    def domega(eig, kap, s, t):
        out = geometry.delta_blocks(eig, s, delta - 1.0)
        out[..., : geometry.dim_c, : geometry.dim_c] = 0.0
        return out

    return FormFamily(
        "scaling",
        geometry,
        lambda eig, kap, s, t: geometry.delta_blocks(eig, s, 1.0 + t * (delta - 1.0)),
        domega,
        lambda eig, kap, t: geometry.moment_delta(
            eig, geometry.klam(kap), 1.0 + t * (delta - 1.0)
        ),
    )


def segment_stage(geometry, delta):
    """Delta form to the orbit pullback: the segment family from its delta end."""

    def omega(eig, kap, s, t):
        pull = geometry.pullback_blocks(eig, kap, s)
        dl = geometry.delta_blocks(eig, s, delta)
        return (1.0 - t) * dl + t * pull

    def domega(eig, kap, s, t):
        return geometry.pullback_blocks(eig, kap, s) - geometry.delta_blocks(
            eig, s, delta
        )

    def direction(t):
        coords = segment_weight_coords(geometry, delta, 1.0 - t)
        return coords / np.linalg.norm(coords)

    return FormFamily(
        "segment",
        geometry,
        omega,
        domega,
        lambda eig, kap, t: geometry.moment_segment(
            eig, geometry.klam(kap), 1.0 - t, delta
        ),
        pairing_direction=direction,
    )


def segment_weight_coords(geometry, delta, u):
    """Full coordinates of the interpolated weight u delta lambda_0 + (1-u) lambda."""
    return u * delta * geometry.lam0 + (1.0 - u) * geometry.lam


def constant_stage(geometry):
    """The product form at every t; its Moser flow is the identity."""

    def zero(eig, kap, s, t):
        b = eig[0].shape[0]
        s_nodes = len(np.atleast_1d(s))
        return np.zeros((b, s_nodes, geometry.dim_t, geometry.dim_t))

    return FormFamily(
        "constant",
        geometry,
        lambda eig, kap, s, t: geometry.product_blocks(
            eig[0].shape[0], len(np.atleast_1d(s))
        ),
        zero,
        lambda eig, kap, t: geometry.moment_product(eig, geometry.klam(kap)),
    )


@dataclass
class MoserStage:
    family: FormFamily
    steps: int


# -- Moser data at points ----------------------------------------------------------


def homotopy_primitive(family, eig, kap, zp, t):
    """Primitive mu_t of d omega_t/dt from the fiber-scaling homotopy.

    mu|_(k,Z)(u) = int_0^1 sigma|_(k,sZ)((0, Z), (u_base, s u_fiber)) ds,
    valid because each sigma is closed and has no base-base component along
    the zero section.  Returns covector components (B, T).
    """
    geo = family.geometry
    sigma = family.domega_dt(eig, kap, _GL_NODES, t)  # (B, S, T, T)
    w = np.zeros((zp.shape[0], geo.dim_t))
    w[:, geo.dim_c :] = zp
    contracted = np.einsum("bsij,bi->bsj", sigma, w)
    contracted[:, :, geo.dim_c :] *= _GL_NODES[None, :, None]
    return np.einsum("s,bsj->bj", _GL_WEIGHTS, contracted)


def gauge_potential(family, ks, zs, t):
    """Line integral of mu_t along the fiber ray; vanishes for these primitives.

    The radial primitive pairs the scaling vector with itself inside a skew
    form, so the gauge normalization int_0^1 mu|_(k,sZ)((0, Z)) ds is zero
    and no df correction is ever subtracted.  Returned per lane as (B,).
    """
    geo = family.geometry
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    w, u = eig
    out = np.zeros(zs.shape[0])
    for s_o, w_o in zip(_GL_NODES, _GL_WEIGHTS):
        mu = homotopy_primitive(family, (s_o * w, u), kap, s_o * zs, t)
        out += w_o * np.einsum("bj,bj->b", mu[:, geo.dim_c :], zs)
    return out


def gauge_fix(geometry, mu_eval, eps=1e-6):
    """Normalize a family of 1-forms by subtracting the radial potential.

    mu_eval(ks, zs, t) -> (B, T) frame components.  Returns (potential,
    corrected): potential evaluates f_t(k, Z) = 2 int_0^1 mu_t|(k,sZ)((0,sZ)) ds
    by quadrature and corrected returns mu_t - df_t with df_t from central
    differences.  The correction kills the fiber contraction of the family
    at the zero section; for the radial homotopy primitives the potential
    already vanishes identically and the correction is a no-op.
    """
    c = geometry.dim_c
    c_k = geometry.complement[: geometry.alg.dim_k]

    def potential(ks, zs, t):
        out = np.zeros(zs.shape[0])
        for s_o, w_o in zip(_GL_NODES, _GL_WEIGHTS):
            mu = mu_eval(ks, s_o * zs, t)
            out += w_o * 2.0 * s_o * np.einsum("bj,bj->b", mu[:, c:], zs)
        return out

    def corrected(ks, zs, t):
        mu = np.array(mu_eval(ks, zs, t))
        for i in range(geometry.dim_t):
            if i < c:
                hi = potential(ks @ geometry.alg.group_exp(eps * c_k[:, i]), zs, t)
                lo = potential(ks @ geometry.alg.group_exp(-eps * c_k[:, i]), zs, t)
            else:
                dz = np.zeros(zs.shape[1])
                dz[i - c] = eps
                hi = potential(ks, zs + dz, t)
                lo = potential(ks, zs - dz, t)
            mu[:, i] -= (hi - lo) / (2 * eps)
        return mu

    return potential, corrected


def moser_field(family, ks, zs, t):
    """Moser field xi_t with iota(xi) omega_t = -mu_t; (B, T) tangent coords."""
    geo = family.geometry
    eig = geo.fiber_eig(zs)
    kap = geo.kappa(ks)
    omega = family.omega(eig, kap, _UNIT_SCALE, t)[:, 0]
    margin = float(np.linalg.svd(omega, compute_uv=False)[..., -1].min())
    if margin < 1e-10:
        raise RuntimeError(
            f"{family.name} family degenerates along the flow "
            f"(margin {margin:.3e} at t = {t:.4f})"
        )
    mu = homotopy_primitive(family, eig, kap, zs, t)
    xi = np.linalg.solve(omega, mu[..., None])[..., 0]
    return xi, margin


# -- flow integration --------------------------------------------------------------


@dataclass
class FlowTrace:
    steps: int
    min_form_margin: float
    max_group_residual: float
    reprojections: int
    fiber_sup: np.ndarray  # per-lane max ||Z|| along the flow
    path: list | None = None  # per-step (k, z) snapshots when recorded


@dataclass
class FlowResult:
    k: np.ndarray
    z: np.ndarray
    trace: FlowTrace


def _bracket_k(alg, x, y):
    xf = np.zeros(x.shape[:-1] + (alg.dim,))
    xf[..., : alg.dim_k] = x
    yf = np.zeros(y.shape[:-1] + (alg.dim,))
    yf[..., : alg.dim_k] = y
    return alg.bracket(xf, yf)[..., : alg.dim_k]


def _dexpinv(alg, u, y):
    # inverse right-hand side of k' = k X in the chart k = k0 exp(u):
    # u' = y + [u,y]/2 + [u,[u,y]]/12 + O(|u|^4), enough for order four
    uy = _bracket_k(alg, u, y)
    return y + 0.5 * uy + _bracket_k(alg, u, uy) / 12.0


def integrate_flow(family, k0, z0, steps, t0=0.0, t1=1.0, z_ceiling=None,
                   project_tol=1e-12, record_path=False):
    """Flow the Moser field of the family from t0 to t1 (RKMK order four).

    k0: (B, a, a) group elements (one matrix is promoted to a batch), z0:
    (B, dim_p).  The group chart is k exp(u) with the truncated dexpinv;
    drift off K beyond project_tol triggers a polar reprojection.  A fiber
    norm ceiling (default ten times the initial bound) aborts escaping flows.
    record_path keeps per-step (k, z) snapshots (including both endpoints)
    on the trace.
    """
    geo = family.geometry
    alg = geo.alg
    ks = np.asarray(k0, dtype=complex)
    zs = np.asarray(z0, dtype=float).copy()
    if ks.ndim == 2:
        ks = ks[None]
    if zs.ndim == 1:
        zs = zs[None]
    ks = ks.copy()
    fiber_sup = np.linalg.norm(zs, axis=-1)
    if z_ceiling is None:
        z_ceiling = 10.0 * max(1.0, float(fiber_sup.max()))
    h = (t1 - t0) / steps
    min_margin = np.inf
    max_res = 0.0
    reproj = 0
    path = [(ks.copy(), zs.copy())] if record_path else None

    def eval_field(k_arg, z_arg, t_arg):
        nonlocal min_margin
        xi, margin = moser_field(family, k_arg, z_arg, t_arg)
        min_margin = min(min_margin, margin)
        x_full = xi[:, : geo.dim_c] @ geo.complement[: alg.dim_k].T
        return x_full, xi[:, geo.dim_c :]

    for n in range(steps):
        t = t0 + n * h
        x1, a1 = eval_field(ks, zs, t)
        k2 = ks @ alg.group_exp(0.5 * h * x1)
        x2r, a2 = eval_field(k2, zs + 0.5 * h * a1, t + 0.5 * h)
        x2 = _dexpinv(alg, 0.5 * h * x1, x2r)
        k3 = ks @ alg.group_exp(0.5 * h * x2)
        x3r, a3 = eval_field(k3, zs + 0.5 * h * a2, t + 0.5 * h)
        x3 = _dexpinv(alg, 0.5 * h * x2, x3r)
        k4 = ks @ alg.group_exp(h * x3)
        x4r, a4 = eval_field(k4, zs + h * a3, t + h)
        x4 = _dexpinv(alg, h * x3, x4r)
        ks = ks @ alg.group_exp((h / 6.0) * (x1 + 2 * x2 + 2 * x3 + x4))
        zs = zs + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        norms = np.linalg.norm(zs, axis=-1)
        fiber_sup = np.maximum(fiber_sup, norms)
        if norms.max() > z_ceiling:
            raise RuntimeError(
                f"{family.name} flow escaped the fiber ceiling "
                f"{z_ceiling:.2f} at t = {t + h:.4f}"
            )
        res = float(alg.group_residual(ks).max())
        max_res = max(max_res, res)
        if res > project_tol:
            ks = alg.group_project(ks)
            reproj += 1
        if record_path:
            path.append((ks.copy(), zs.copy()))
    trace = FlowTrace(steps, float(min_margin), max_res, reproj, fiber_sup, path)
    return FlowResult(ks, zs, trace)


def flow_stages(stages, k0, z0):
    """Chain the stage flows; returns (k, z, [FlowTrace])."""
    ks, zs = np.asarray(k0, dtype=complex), np.asarray(z0, dtype=float)
    traces = []
    for stage in stages:
        res = integrate_flow(stage.family, ks, zs, stage.steps)
        ks, zs = res.k, res.z
        traces.append(res.trace)
    return ks, zs, traces


# -- exponential-chart evaluation (shared by the Stokes and exactness checks) ------


def _dexp_matrix(alg, u_k, terms=10):
    """Matrix of y -> d/de exp(u + e y) at e=0 in the frame exp(u)^-1 d exp.

    Equals sum_m (-ad_u)^m / (m+1)! on k; the series is used only for small
    chart displacements, where ten terms are far below roundoff.
    """
    full = np.zeros(alg.dim)
    full[: alg.dim_k] = u_k
    ad = alg.ad(full)[: alg.dim_k, : alg.dim_k]
    out = np.eye(alg.dim_k)
    term = np.eye(alg.dim_k)
    for m in range(1, terms):
        term = term @ (-ad) / (m + 1.0)
        out = out + term
    return out


def _chart_frames(geometry, k0, z0, pts):
    """Points and frame correction for the chart (x, w) -> (k0 exp(Cx), z0+w)."""
    alg = geometry.alg
    c = geometry.dim_c
    c_k = geometry.complement[: alg.dim_k]
    xs = pts[:, :c]
    ks = k0 @ alg.group_exp(xs @ c_k.T)
    zs = z0[None] + pts[:, c:]
    jacs = []
    for q in range(len(pts)):
        jac = np.eye(geometry.dim_t)
        jac[:c, :c] = c_k.T @ _dexp_matrix(alg, c_k @ xs[q]) @ c_k
        jacs.append(jac)
    return ks, zs, np.stack(jacs)


def _chart_form_matrices(geometry, omega_at, k0, z0, pts):
    ks, zs, jacs = _chart_frames(geometry, k0, z0, pts)
    eig = geometry.fiber_eig(zs)
    kap = geometry.kappa(ks)
    mats = omega_at(eig, kap)
    return np.einsum("qji,qjl,qlm->qim", jacs, mats, jacs)


def stokes_closedness_residual(geometry, omega_at, k0, z0, diameter, rng, n_tets=2):
    """Relative boundary-integral defect of omega over small 3-simplices.

    omega_at(eig, kap) -> (Q, T, T).  Integrates the form over the oriented
    boundary of random tetrahedra of the given diameter in the exponential
    chart at (k0, z0); for closed forms the sum is quadrature-exact zero.
    On a two-dimensional total space every 2-form is closed and the check
    is vacuous (returns 0).
    """
    if geometry.dim_t < 3:
        return 0.0
    faces = [(1.0, (1, 2, 3)), (-1.0, (0, 2, 3)), (1.0, (0, 1, 3)), (-1.0, (0, 1, 2))]
    worst = 0.0
    for _ in range(n_tets):
        dirs, _ = np.linalg.qr(rng.standard_normal((geometry.dim_t, 3)))
        verts = np.zeros((4, geometry.dim_t))
        verts[1:] = diameter * dirs.T
        total, scale = 0.0, 0.0
        for sign, (ia, ib, ic) in faces:
            a, b, cc = verts[ia], verts[ib], verts[ic]
            pts = _TRI_BARY @ np.stack([a, b, cc])
            mats = _chart_form_matrices(geometry, omega_at, k0, z0, pts)
            vals = np.einsum("i,qij,j->q", b - a, mats, cc - a)
            integral = 0.5 * float(_TRI_W @ vals)
            total += sign * integral
            scale += abs(integral)
        worst = max(worst, abs(total) / max(scale, 1e-300))
    return worst


def primitive_exactness_residual(family, geometry, k0, z0, t, rng, h=1e-2):
    """Check d mu_t = d omega_t/dt on a random small 2-simplex in the chart.

    Compares the circulation of mu_t around the simplex boundary with the
    flux of the claimed derivative through it (degree-5 triangle rule); both
    are O(h^2), and the returned value is their relative mismatch.
    """
    dirs, _ = np.linalg.qr(rng.standard_normal((geometry.dim_t, 2)))
    u, v = h * dirs[:, 0], h * dirs[:, 1]
    corners = [np.zeros(geometry.dim_t), u, v]
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    nodes, weights = 0.5 * (gl_x + 1.0), 0.5 * gl_w

    def mu_chart(pts):
        ks, zs, jacs = _chart_frames(geometry, k0, z0, pts)
        eig = geometry.fiber_eig(zs)
        kap = geometry.kappa(ks)
        mu = homotopy_primitive(family, eig, kap, zs, t)
        return np.einsum("qji,qj->qi", jacs, mu)

    circulation = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        pts = a[None] + nodes[:, None] * (b - a)[None]
        vals = mu_chart(pts) @ (b - a)
        circulation += float(weights @ vals)

    quad_pts = _TRI_BARY @ np.stack(corners)
    sigma = _chart_form_matrices(
        geometry,
        lambda eig, kap: family.domega_dt(eig, kap, _UNIT_SCALE, t)[:, 0],
        k0,
        z0,
        quad_pts,
    )
    flux = 0.5 * float(_TRI_W @ np.einsum("i,qij,j->q", u, sigma, v))
    return abs(circulation - flux) / max(abs(flux), h * h)


# -- verification drivers ----------------------------------------------------------


def _group_log(alg, g):
    mat = scipy.linalg.logm(np.asarray(g, dtype=complex))
    return alg.coords(mat)


def _flatten_points(ks, zs):
    b = ks.shape[0]
    return np.concatenate(
        [ks.reshape(b, -1).real, ks.reshape(b, -1).imag, zs], axis=1
    )


def verify_pullback(geometry, stages, base_points, eps=1e-4, n_equivariance=4,
                    n_zero=4, rng=None):
    """Certify rho^*(final form) = initial form at the base points.

    Every sample contributes one center lane and 2 dim_t perturbed lanes;
    equivariance partners and zero-section lanes are appended, and the whole
    batch is flowed once through the stages.  Differentials of the composite
    come from central differences (group logarithms for the K part).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    alg = geometry.alg
    c, t_dim = geometry.dim_c, geometry.dim_t
    c_k = geometry.complement[: alg.dim_k]
    b0 = len(base_points)

    lanes_k = [np.asarray(k, complex) for k, _ in base_points]
    lanes_z = [np.asarray(z, float) for _, z in base_points]
    for k, zp in base_points:
        for i in range(t_dim):
            for sgn in (1.0, -1.0):
                if i < c:
                    lanes_k.append(k @ alg.group_exp(sgn * eps * c_k[:, i]))
                    lanes_z.append(zp)
                else:
                    dz = np.zeros(geometry.dim_p)
                    dz[i - c] = sgn * eps
                    lanes_k.append(k)
                    lanes_z.append(zp + dz)

    n_eq = min(n_equivariance, b0)
    eq_rot = []
    for j in range(n_eq):
        k, zp = base_points[j]
        kp = alg.group_exp(rng.standard_normal(alg.dim_k))
        adk = alg.adjoint_group_matrix(kp)
        eq_rot.append((kp, adk))
        lanes_k.append(kp @ k)
        lanes_z.append((adk @ geometry.pad_fiber(zp)[0])[alg.dim_k :])

    zero_idx = len(lanes_k)
    zero_sources = alg.group_exp(rng.standard_normal((n_zero, alg.dim_k)))
    for j in range(n_zero):
        lanes_k.append(zero_sources[j])
        lanes_z.append(np.zeros(geometry.dim_p))

    ks = np.stack(lanes_k)
    zs = np.stack(lanes_z)

    eig0 = geometry.fiber_eig(zs[:b0])
    kap0 = geometry.kappa(ks[:b0])
    omega_start = stages[0].family.omega(eig0, kap0, _UNIT_SCALE, 0.0)[:, 0]
    moment_start = stages[0].family.moment(eig0, kap0, 0.0)

    flowed_k, flowed_z, traces = flow_stages(stages, ks, zs)

    eig1 = geometry.fiber_eig(flowed_z[:b0])
    kap1 = geometry.kappa(flowed_k[:b0])
    omega_end = stages[-1].family.omega(eig1, kap1, _UNIT_SCALE, 1.0)[:, 0]
    moment_end = stages[-1].family.moment(eig1, kap1, 1.0)

    per_sample = np.zeros(b0)
    for b in range(b0):
        kb_inv = alg.group_inverse(flowed_k[b])
        diff = np.zeros((t_dim, t_dim))
        for i in range(t_dim):
            ip = b0 + b * 2 * t_dim + 2 * i
            x_hi = _group_log(alg, kb_inv @ flowed_k[ip])
            x_lo = _group_log(alg, kb_inv @ flowed_k[ip + 1])
            diff[:c, i] = c_k.T @ (x_hi - x_lo)[: alg.dim_k] / (2 * eps)
            diff[c:, i] = (flowed_z[ip] - flowed_z[ip + 1]) / (2 * eps)
        pulled = diff.T @ omega_end[b] @ diff
        per_sample[b] = np.abs(pulled - omega_start[b]).max()

    shift = moment_end - moment_start
    shift_mean = shift.mean(axis=0)
    shift_spread = float((shift.max(axis=0) - shift.min(axis=0)).max()) if b0 else 0.0

    eq_res = 0.0
    for j, (kp, adk) in enumerate(eq_rot):
        lane = b0 * (1 + 2 * t_dim) + j
        target_k = kp @ flowed_k[j]
        target_z = (adk @ geometry.pad_fiber(flowed_z[j])[0])[alg.dim_k :]
        eq_res = max(
            eq_res,
            float(np.abs(flowed_k[lane] - target_k).max()),
            float(np.abs(flowed_z[lane] - target_z).max()),
        )

    zero_res = 0.0
    for j in range(n_zero):
        lane = zero_idx + j
        zero_res = max(
            zero_res,
            float(np.linalg.norm(flowed_z[lane])),
            float(np.abs(flowed_k[lane] - zero_sources[j]).max()),
        )

    flat_src = _flatten_points(ks[:b0], zs[:b0])
    flat_img = _flatten_points(flowed_k[:b0], flowed_z[:b0])

    def min_pairwise(arr):
        if len(arr) < 2:
            return np.inf
        d = np.linalg.norm(arr[:, None] - arr[None, :], axis=-1)
        return float(d[np.triu_indices(len(arr), 1)].min())

    return {
        "pullback_residual": float(per_sample.max()) if b0 else 0.0,
        "pullback_per_sample": per_sample,
        "moment_shift_mean": shift_mean,
        "moment_shift_spread": shift_spread,
        "equivariance_residual": eq_res,
        "zero_section_displacement": zero_res,
        "min_image_separation": min_pairwise(flat_img),
        "min_source_separation": min_pairwise(flat_src),
        "min_form_margin": min(tr.min_form_margin for tr in traces),
        "max_group_residual": max(tr.max_group_residual for tr in traces),
        "reprojections": sum(tr.reprojections for tr in traces),
        "fiber_sup": max(float(tr.fiber_sup.max()) for tr in traces),
        "traces": traces,
    }


# -- hypothesis checks -------------------------------------------------------------


_PROPERNESS_GRID = tuple(np.linspace(0.0, 1.0, 11))


def _root_probe_fibers(geometry, radii=(0.2, 0.4)):
    """Small fiber vectors along every positive noncompact root plane.

    The quadratic properness bounds are saturated (up to O(||Z||^2)
    corrections) exactly on these directions, so including them makes the
    fitted constant converge to the analytic one.
    """
    alg = geometry.alg
    probes = []
    for root in geometry.datum.positive_noncompact():
        for part in (root.vector.real, root.vector.imag):
            vec = part[alg.dim_k :]
            norm = np.linalg.norm(vec)
            if norm < 1e-12:
                continue
            for r in radii:
                probes.append(r * vec / norm)
    return probes


def properness_fit(geometry, family, rng, samples=60, t_grid=_PROPERNESS_GRID,
                   radii=(0.2, 2.5)):
    """Fitted quadratic growth constant of the moment family.

    min over samples and t of <Phi_t(k,Z) - Phi_t(k,0), n_t> / ||Z||^2 with
    n_t the family's unit pairing direction (z0-hat for the product-side
    families, H_{lambda_t}-hat for the segment).  Random points are mixed
    with root-plane probes so the minimum lands on the saturating rays.
    """
    alg = geometry.alg
    ks = alg.group_exp(rng.standard_normal((samples, alg.dim_k)))
    zs = rng.standard_normal((samples, geometry.dim_p))
    zs *= (
        rng.uniform(radii[0], radii[1], size=samples)
        / np.linalg.norm(zs, axis=1)
    )[:, None]
    probes = _root_probe_fibers(geometry)
    ks = np.concatenate([ks, np.broadcast_to(
        np.eye(alg.ambient, dtype=complex), (len(probes), alg.ambient, alg.ambient)
    )])
    zs = np.concatenate([zs, np.stack(probes)])
    kap = geometry.kappa(ks)
    eig = geometry.fiber_eig(zs)
    eig0 = geometry.fiber_eig(np.zeros_like(zs))
    sq = np.linalg.norm(zs, axis=1) ** 2
    best = np.inf
    for t in t_grid:
        gap = family.moment(eig, kap, t) - family.moment(eig0, kap, t)
        vals = gap @ family.pairing_direction(t) / sq
        best = min(best, float(vals.min()))
    return best


def properness_gamma(geometry, family, t=0.5, radii=None):
    """Fitted growth exponent of the moment gap along a root-plane ray.

    Log-log regression of <Phi_t(e, rV) - Phi_t(e, 0), n_t> against r; the
    quadratic-growth hypothesis predicts a slope of 2 for small radii.
    """
    if radii is None:
        radii = np.geomspace(0.05, 0.4, 6)
    alg = geometry.alg
    direction = _root_probe_fibers(geometry, radii=(1.0,))[0]
    zs = np.stack([r * direction for r in radii])
    ks = np.broadcast_to(
        np.eye(alg.ambient, dtype=complex),
        (len(radii), alg.ambient, alg.ambient),
    )
    kap = geometry.kappa(ks)
    gap = family.moment(geometry.fiber_eig(zs), kap, t) - family.moment(
        geometry.fiber_eig(np.zeros_like(zs)), kap, t
    )
    vals = gap @ family.pairing_direction(t)
    return float(np.polyfit(np.log(radii), np.log(vals), 1)[0])


def analytic_properness_bound(geometry, stage_name, delta, t_grid=_PROPERNESS_GRID):
    """The quadratic growth constants the moment families are tested against.

    1/(2||z0||) for the hermitian family, min(1, delta)/(2||z0||) for the
    coefficient scaling, and min over the segment of the interpolated
    m_{lambda_t}^2 / (2 ||H_{lambda_t}||); the segment minimum runs over the
    same t-grid the fit uses.
    """
    z0_norm = float(np.linalg.norm(geometry.z0))
    if stage_name in ("hermitian", "constant"):
        return 1.0 / (2.0 * z0_norm)
    if stage_name == "scaling":
        return min(1.0, delta) / (2.0 * z0_norm)
    if stage_name == "segment":
        vals = []
        for t in t_grid:
            coords = segment_weight_coords(geometry, delta, 1.0 - t)
            rank = geometry.alg.rank
            m, _ = chamber_constants(ChamberWeight(coords[:rank]), geometry.datum)
            vals.append(m * m / (2.0 * np.linalg.norm(coords)))
        return float(min(vals))
    raise ValueError(f"unknown stage {stage_name!r}")


def check_hypotheses(geometry, stages, delta, rng, closedness_points=2,
                     n_tets=2, diameter=1e-2, properness_samples=60):
    """Static hypothesis checks for a stage list.

    For every stage this certifies, at randomly sampled points and family
    times: each omega_t is closed (Stokes on random tetrahedra) and the
    radial primitive integrates its time derivative (circulation vs flux on
    2-simplices); on the zero section the forms have no base-fiber coupling,
    the time derivative and the endpoint difference omega_1 - omega_0 both
    restrict to zero, the primitive vanishes, the moment norms stay bounded
    (sup reported), and the symplectic orthogonal of the section - computed
    as an explicit null space of the base rows - is exactly the fiber.  Each
    moment family's fitted quadratic growth constant and growth exponent are
    reported against the analytic constant.  Dynamic checks (zero-section
    fixing, equivariance, fiber ceilings) come from the flow itself in
    verify_pullback.
    """
    alg = geometry.alg
    worst_closed = 0.0
    worst_exact = 0.0
    cross = 0.0
    i_star_dt = 0.0
    i_star_endpoints = 0.0
    primitive_zero = 0.0
    moment_sup = 0.0
    nullspace_res = 0.0
    properness = []
    eig_zero = geometry.fiber_eig(np.zeros((1, geometry.dim_p)))
    c = geometry.dim_c
    for stage in stages:
        fam = stage.family
        for t in (0.0, 0.5, 1.0):
            def omega_at(eig, kap, _t=t, _f=fam):
                return _f.omega(eig, kap, _UNIT_SCALE, _t)[:, 0]

            for _ in range(closedness_points):
                k0 = alg.group_exp(rng.standard_normal(alg.dim_k))
                z0 = rng.standard_normal(geometry.dim_p)
                worst_closed = max(
                    worst_closed,
                    stokes_closedness_residual(
                        geometry, omega_at, k0, z0, diameter, rng, n_tets
                    ),
                )
                worst_exact = max(
                    worst_exact,
                    primitive_exactness_residual(fam, geometry, k0, z0, t, rng),
                )
                kap0 = geometry.kappa(k0)
                block = omega_at(eig_zero, kap0)[0]
                mu0 = homotopy_primitive(
                    fam, eig_zero, kap0, np.zeros((1, geometry.dim_p)), t
                )
                primitive_zero = max(primitive_zero, float(np.abs(mu0).max()))
                moment_sup = max(
                    moment_sup,
                    float(np.linalg.norm(fam.moment(eig_zero, kap0, t), axis=-1).max()),
                )
                if c == 0:
                    continue
                cross = max(cross, float(np.abs(block[:c, c:]).max()))
                sigma0 = fam.domega_dt(eig_zero, kap0, _UNIT_SCALE, t)[0, 0]
                i_star_dt = max(i_star_dt, float(np.abs(sigma0[:c, :c]).max()))
                gap01 = (
                    fam.omega(eig_zero, kap0, _UNIT_SCALE, 1.0)
                    - fam.omega(eig_zero, kap0, _UNIT_SCALE, 0.0)
                )[0, 0]
                i_star_endpoints = max(
                    i_star_endpoints, float(np.abs(gap01[:c, :c]).max())
                )
                # symplectic orthogonal of the zero section: null space of the
                # base rows of omega_t must have fiber dimension and no base
                # component
                _, svals, vt = np.linalg.svd(block[:c, :])
                kernel = vt[np.concatenate([svals, np.zeros(geometry.dim_t - c)])
                            < 1e-10 * max(svals.max(), 1.0)]
                if kernel.shape[0] != geometry.dim_p:
                    nullspace_res = np.inf
                else:
                    nullspace_res = max(
                        nullspace_res, float(np.abs(kernel[:, :c]).max())
                    )
        d_fit = properness_fit(geometry, fam, rng, samples=properness_samples)
        d_bound = analytic_properness_bound(geometry, fam.name, delta)
        properness.append(
            {
                "stage": fam.name,
                "d_fit": d_fit,
                "d_analytic": d_bound,
                "ratio": d_fit / d_bound,
                "gamma_fit": properness_gamma(geometry, fam),
            }
        )
    return {
        "closedness_rel_residual": worst_closed,
        "primitive_exactness_residual": worst_exact,
        "zero_section_cross_block": cross,
        "zero_section_dt_restriction": i_star_dt,
        "zero_section_endpoint_restriction": i_star_endpoints,
        "zero_section_primitive_sup": primitive_zero,
        "zero_section_moment_sup": moment_sup,
        "orthogonality_nullspace_residual": nullspace_res,
        "properness": properness,
    }
