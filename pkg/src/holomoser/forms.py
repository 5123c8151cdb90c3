"""Symplectic forms and moment maps on the trivialized orbit K.lambda x p.

Points are pairs (k lambda, Z) with k in K and Z in p.  Tangent vectors are
([k, X], A) with X in the B_theta-orthocomplement of k_lambda inside k and A
in p; all forms are returned as matrices against this basis, so the tangent
coordinate layout is always (complement slots, fiber slots).

The five forms:
  * pullback       Gamma^* of the KKS form of G.lambda (split formula, with
                   the unsplit single-bracket formula kept as an oracle),
  * product        Omega_{K.lambda} (+) Omega_p,  Omega_p(A,B) = B_theta(A,[z0,B]),
  * delta          Omega_{K.lambda} (+) delta * (Gamma_0^* KKS of G.lambda_0),
  * segment        t * delta + (1-t) * pullback,
  * hermitian      Omega_{K.lambda} (+) (Gamma_0^* KKS)|_{tZ}  (scaled family).

Moment maps follow the convention d<Phi, X> = iota(X_M) Omega with
X_M(x) = d/dt|_0 exp(tX).x; the two textbook displays that disagree with this
convention (the flat display, off by a factor 2, and the product display's
fiber sign) are measured at run time by measure_convention_constants.

Batched evaluators carry a leading lane axis B (independent points) and a
node axis S of fiber scalings s, reusing one eigendecomposition of ad(Z) per
lane for all scaled points (k, sZ); this is what makes the homotopy-primitive
quadrature affordable inside flow integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    CoadjointVector,
    f_cosh,
    f_minus,
    f_plus,
    f_plus_prime,
    f_psi,
)
from .roots import in_holomorphic_chamber, pairing_matrix, stabilizer_algebra


class OrbitGeometry:
    """Weight, stabilizer split and cached tensors for one orbit model."""

    def __init__(self, alg, datum, weight):
        ok, margin = in_holomorphic_chamber(weight, datum)
        if not ok:
            raise ValueError(
                f"weight is not in the holomorphic chamber (margin {margin:.3e})"
            )
        self.alg = alg
        self.datum = datum
        self.weight = weight
        self.chamber_margin = margin
        self.lam = weight.full(alg)
        self.lam0 = datum.lambda0.full(alg)
        self.z0 = datum.z0
        split = stabilizer_algebra(weight, datum)
        self.split = split
        self.dim_c = split.complement.shape[1]
        self.dim_p = alg.dim_p
        self.dim_t = self.dim_c + self.dim_p
        comp = np.zeros((alg.dim, self.dim_c))
        comp[: alg.dim_k] = split.complement
        self.complement = comp  # (N, c) full coordinates
        self.m_lam = pairing_matrix(alg, self.lam)
        self.m_lam0 = pairing_matrix(alg, self.lam0)
        self.ad_z0 = alg.ad(self.z0)
        self.base_block = comp.T @ self.m_lam @ comp  # (c, c), point-independent
        prod = np.zeros((self.dim_t, self.dim_t))
        prod[: self.dim_c, : self.dim_c] = self.base_block
        prod[self.dim_c :, self.dim_c :] = self.ad_z0[alg.dim_k :, alg.dim_k :]
        self.product_matrix = prod

    # -- batched building blocks (lanes b, scale nodes s) ----------------------

    def pad_fiber(self, zp):
        zp = np.atleast_2d(np.asarray(zp, dtype=float))
        out = np.zeros(zp.shape[:-1] + (self.alg.dim,))
        out[..., self.alg.dim_k :] = zp
        return out

    def fiber_eig(self, zp):
        """Eigendecomposition of ad(Z) for a batch of fiber vectors."""
        s = self.alg.ad(self.pad_fiber(zp))
        return np.linalg.eigh(s)

    def kappa(self, k):
        """Ad(k^{-1}) coordinate matrices for a batch of group elements."""
        k = np.asarray(k, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        return self.alg.adjoint_group_matrix(self.alg.group_inverse(k))

    def klam(self, kap):
        """Coadjoint coordinates of k lambda from the kappa matrices."""
        return np.einsum("bnm,n->bm", kap, self.lam)

    def _spectral(self, eig, scales, fn):
        w, u = eig
        nu = w[:, None, :] * np.asarray(scales, dtype=float)[None, :, None]
        return np.einsum("bij,bsj,bkj->bsik", u, fn(nu), u)

    def pullback_blocks(self, eig, kap, scales, split_formula=True):
        """Form matrices of Gamma^* Omega at (k, s Z) for each node s.

        Returns (B, S, T, T).  split_formula=False evaluates the unsplit
        single-bracket expression through Psi_Z, the independent oracle.
        """
        alg = self.alg
        b = kap.shape[0]
        s_nodes = len(np.atleast_1d(scales))
        kl = self.klam(kap)
        m_kl = np.einsum("nmk,bk->bnm", alg.structure, kl)
        if split_formula:
            psim = self._spectral(eig, scales, f_minus)[..., :, alg.dim_k :]
            psip = self._spectral(eig, scales, f_plus)[..., :, alg.dim_k :]
            w_p = np.einsum("bnm,bsmj->bsnj", kap, psim)
        else:
            psi = self._spectral(eig, scales, f_psi)[..., :, alg.dim_k :]
            w_p = np.einsum("bnm,bsmj->bsnj", kap, psi)
        w_c = np.broadcast_to(self.complement, (b, s_nodes) + self.complement.shape)
        w_full = np.concatenate([w_c, w_p], axis=-1)
        out = np.einsum("bsni,nm,bsmj->bsij", w_full, self.m_lam, w_full)
        if split_formula:
            out[..., self.dim_c :, self.dim_c :] += np.einsum(
                "bsnu,bnm,bsmv->bsuv", psip, m_kl, psip
            )
        return out

    def delta_blocks(self, eig, scales, delta):
        """Omega^delta at (k, sZ): base block plus delta-scaled flat pullback."""
        alg = self.alg
        psip = self._spectral(eig, scales, f_plus)[..., :, alg.dim_k :]
        pp = delta * np.einsum("bsnu,nm,bsmv->bsuv", psip, self.m_lam0, psip)
        return self._assemble(pp)

    def hermitian_blocks(self, eig, scales, t):
        """The scaled family Omega_t: fiber block (Gamma_0^* Omega)|_{t s Z}."""
        alg = self.alg
        eff = t * np.asarray(scales, dtype=float)
        psip = self._spectral(eig, eff, f_plus)[..., :, alg.dim_k :]
        pp = np.einsum("bsnu,nm,bsmv->bsuv", psip, self.m_lam0, psip)
        return self._assemble(pp)

    def hermitian_dt_blocks(self, eig, scales, t):
        """d/dt of hermitian_blocks: commuting path, so a scalar derivative."""
        alg = self.alg
        w, u = eig
        nu = w[:, None, :] * np.asarray(scales, dtype=float)[None, :, None]
        psip = np.einsum("bij,bsj,bkj->bsik", u, f_plus(t * nu), u)[..., :, alg.dim_k :]
        dpsi = np.einsum("bij,bsj,bkj->bsik", u, nu * f_plus_prime(t * nu), u)[
            ..., :, alg.dim_k :
        ]
        cross = np.einsum("bsnu,nm,bsmv->bsuv", dpsi, self.m_lam0, psip)
        pp = cross - np.swapaxes(cross, -1, -2)
        out = self._assemble(pp)
        out[..., : self.dim_c, : self.dim_c] = 0.0
        return out

    def product_blocks(self, b, s_nodes):
        return np.broadcast_to(
            self.product_matrix, (b, s_nodes) + self.product_matrix.shape
        ).copy()

    def _assemble(self, fiber_block):
        b, s_nodes = fiber_block.shape[:2]
        out = np.zeros((b, s_nodes, self.dim_t, self.dim_t))
        out[..., : self.dim_c, : self.dim_c] = self.base_block
        out[..., self.dim_c :, self.dim_c :] = fiber_block
        return out

    # -- batched moment maps (no node axis; evaluated at the points) -----------

    def _apply(self, eig, fn, xi):
        w, u = eig
        return np.einsum("bij,bj,bkj->bik", u, fn(w), u) @ xi

    def _restrict_k(self, xi):
        out = np.array(xi)
        out[..., self.alg.dim_k :] = 0.0
        return out

    def moment_pullback(self, eig, kl):
        """Gamma^* of the orbit moment map: (e^Z.(k lambda)) restricted to k*."""
        moved = np.einsum(
            "bij,bj,bkj->bik", eig[1], np.exp(-eig[0]), eig[1]
        ) @ kl[..., None]
        return self._restrict_k(moved[..., 0])

    def moment_delta(self, eig, kl, delta):
        cosh = self._apply(eig, f_cosh, self.lam0[:, None])[..., 0]
        return self._restrict_k(kl + delta * cosh)

    def moment_segment(self, eig, kl, t, delta):
        """t * Phi^delta + (1-t) * Phi_pullback, matching the segment form."""
        return t * self.moment_delta(eig, kl, delta) + (1.0 - t) * self.moment_pullback(
            eig, kl
        )

    def moment_flat(self, eig):
        """The flat display lambda_0 o ad(Z)^2; twice the true moment of Omega_p."""
        w, u = eig
        out = np.einsum("bij,bj,bkj->bik", u, w * w, u) @ self.lam0[:, None]
        return self._restrict_k(out[..., 0])

    def moment_product(self, eig, kl):
        return self._restrict_k(kl + 0.5 * self.moment_flat(eig))

    def moment_hermitian(self, eig, kl, t):
        """Moment of the scaled family; continuous through t = 0.

        (1/t^2)(cosh(t nu) - 1) = 2 sinh(t nu / 2)^2 / t^2, with limit nu^2/2.
        """
        w, u = eig
        if t < 1e-12:
            vals = 0.5 * w * w
        else:
            vals = 2.0 * np.sinh(0.5 * t * w) ** 2 / (t * t)
        out = np.einsum("bij,bj,bkj->bik", u, vals, u) @ self.lam0[:, None]
        return self._restrict_k(kl + out[..., 0])

    # -- tangent utilities ------------------------------------------------------

    def generator_field(self, kap, zp, x_gen):
        """Tangent coordinates of the vector field of X = x_gen (in k) at (k, Z)."""
        alg = self.alg
        x_full = np.zeros(alg.dim)
        x_full[: alg.dim_k] = x_gen
        moved = np.einsum("bnm,m->bn", kap, x_full)
        base = moved @ self.complement  # (B, c) coordinates in the complement
        fiber = self.alg.bracket(
            np.broadcast_to(x_full, (kap.shape[0], alg.dim)), self.pad_fiber(zp)
        )[..., alg.dim_k :]
        return np.concatenate([base, fiber], axis=-1)


# -- single-point object layer ---------------------------------------------------


@dataclass
class OrbitPoint:
    """A point (k lambda, Z) of the trivialized orbit."""

    geometry: OrbitGeometry
    k: np.ndarray  # (ambient, ambient) in K
    z: np.ndarray  # (dim_p,) fiber coordinates

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=complex)
        self.z = np.asarray(self.z, dtype=float)
        alg = self.geometry.alg
        res = float(alg.group_residual(self.k))
        if res > 1e-8:
            raise ValueError(f"base element is off the group (residual {res:.2e})")
        if self.z.shape != (alg.dim_p,):
            raise ValueError("fiber vector must have p-coordinates")

    def batched(self):
        eig = self.geometry.fiber_eig(self.z[None])
        kap = self.geometry.kappa(self.k[None])
        return eig, kap


@dataclass
class OrbitTangent:
    """Tangent coordinates ([k,X], A): complement part x, fiber part a."""

    x: np.ndarray
    a: np.ndarray

    def stacked(self):
        return np.concatenate([np.asarray(self.x, float), np.asarray(self.a, float)])


@dataclass
class SkewForm:
    matrix: np.ndarray
    label: str

    def __post_init__(self):
        assert np.abs(self.matrix + self.matrix.T).max() < 1e-9, self.label

    def __call__(self, u, v):
        u = u.stacked() if isinstance(u, OrbitTangent) else np.asarray(u, float)
        v = v.stacked() if isinstance(v, OrbitTangent) else np.asarray(v, float)
        return float(u @ self.matrix @ v)


def form_pullback(point, split_formula=True):
    eig, kap = point.batched()
    mat = point.geometry.pullback_blocks(eig, kap, [1.0], split_formula)[0, 0]
    return SkewForm(mat, "pullback")


def form_product(point):
    return SkewForm(point.geometry.product_matrix.copy(), "product")


def form_delta(point, delta):
    eig, _ = point.batched()
    return SkewForm(point.geometry.delta_blocks(eig, [1.0], delta)[0, 0], "delta")


def form_segment(point, t, delta):
    eig, kap = point.batched()
    geo = point.geometry
    pull = geo.pullback_blocks(eig, kap, [1.0])[0, 0]
    dl = geo.delta_blocks(eig, [1.0], delta)[0, 0]
    return SkewForm(t * dl + (1.0 - t) * pull, f"segment(t={t})")


def form_hermitian(point, t):
    eig, _ = point.batched()
    return SkewForm(
        point.geometry.hermitian_blocks(eig, [1.0], t)[0, 0], f"hermitian(t={t})"
    )


def _as_vector(geometry, coords):
    return CoadjointVector(np.asarray(coords, dtype=float))


def moment_pullback(point):
    eig, kap = point.batched()
    geo = point.geometry
    return _as_vector(geo, geo.moment_pullback(eig, geo.klam(kap))[0])


def moment_delta(point, delta):
    eig, kap = point.batched()
    geo = point.geometry
    return _as_vector(geo, geo.moment_delta(eig, geo.klam(kap), delta)[0])


def moment_segment(point, t, delta):
    eig, kap = point.batched()
    geo = point.geometry
    return _as_vector(geo, geo.moment_segment(eig, geo.klam(kap), t, delta)[0])


def moment_flat(geometry, z):
    eig = geometry.fiber_eig(np.asarray(z, float)[None])
    return _as_vector(geometry, geometry.moment_flat(eig)[0])


def moment_product(point):
    eig, kap = point.batched()
    geo = point.geometry
    return _as_vector(geo, geo.moment_product(eig, geo.klam(kap))[0])


def moment_hermitian(point, t):
    eig, kap = point.batched()
    geo = point.geometry
    return _as_vector(geo, geo.moment_hermitian(eig, geo.klam(kap), t)[0])


def nondegeneracy_margin(form):
    return float(np.linalg.svd(form.matrix, compute_uv=False).min())


def bracket_positivity_slack(datum, w1, w2, zp):
    """B_theta(H_1, ad(Z)^2 H_2) >= min_beta beta(H_1) beta(H_2) ||Z||^2.

    The minimum runs over the positive noncompact roots.  Returns
    (lhs, rhs, slack).
    """
    alg = datum.algebra
    z = np.zeros(alg.dim)
    z[alg.dim_k :] = zp
    adz = alg.ad(z)
    lhs = float(w1.full(alg) @ (adz @ adz) @ w2.full(alg))
    prods = [r.value(w1.coords) * r.value(w2.coords) for r in datum.positive_noncompact()]
    rhs = min(prods) * float(zp @ zp)
    return lhs, rhs, lhs - rhs


# -- moment-map convention checks -------------------------------------------------


def moment_identity_residual(
    geometry, form_at, moment_at, points, generators, eps=1e-5, constant=1.0
):
    """max |FD d<Phi,X>(u) - constant * Omega(X_M, u)| over points and basis u.

    form_at(k, z) -> (T, T) matrix; moment_at(k, z) -> (N,) k*-coordinates.
    Base directions perturb k by k exp(+-eps X_i); fiber directions shift Z.
    """
    alg = geometry.alg
    worst = 0.0
    for (k, zp), x_gen in zip(points, generators):
        kap = geometry.kappa(k[None])
        omega = form_at(k, zp)
        field = geometry.generator_field(kap, zp[None], x_gen)[0]
        x_full = np.zeros(alg.dim)
        x_full[: alg.dim_k] = x_gen
        rhs = field @ omega
        lhs = np.zeros(geometry.dim_t)
        for i in range(geometry.dim_c):
            step = alg.group_exp(eps * geometry.complement[: alg.dim_k, i])
            stepm = alg.group_exp(-eps * geometry.complement[: alg.dim_k, i])
            hi = moment_at(k @ step, zp) @ x_full
            lo = moment_at(k @ stepm, zp) @ x_full
            lhs[i] = (hi - lo) / (2 * eps)
        for j in range(geometry.dim_p):
            dz = np.zeros(geometry.dim_p)
            dz[j] = eps
            hi = moment_at(k, zp + dz) @ x_full
            lo = moment_at(k, zp - dz) @ x_full
            lhs[geometry.dim_c + j] = (hi - lo) / (2 * eps)
        worst = max(worst, float(np.abs(lhs - constant * rhs).max()))
    return worst


def measure_convention_constants(geometry, rng, samples=6, eps=1e-6):
    """Numerically fit the two display constants discussed in the module docs.

    Returns {"flat_display_factor": ~2.0, "product_display_fiber_sign": ~-1.0}:
    the flat display lambda_0 o ad(Z)^2 differentiates to twice iota(X_M)Omega_p,
    and the display fiber term (1/2) Omega_p(v, [X, v]) is minus the true one.
    """
    alg = geometry.alg
    ratios_flat, ratios_sign = [], []
    adz0_p = geometry.ad_z0[alg.dim_k :, alg.dim_k :]
    for _ in range(samples):
        zp = rng.standard_normal(geometry.dim_p)
        x = rng.standard_normal(alg.dim_k)
        x_full = np.zeros(alg.dim)
        x_full[: alg.dim_k] = x
        field = alg.bracket(x_full, geometry.pad_fiber(zp[None])[0])[alg.dim_k :]
        for j in range(geometry.dim_p):
            dz = np.zeros(geometry.dim_p)
            dz[j] = eps
            rhs = float(field @ adz0_p[:, j])
            if abs(rhs) < 1e-3:
                continue
            eig_hi = geometry.fiber_eig((zp + dz)[None])
            eig_lo = geometry.fiber_eig((zp - dz)[None])
            flat_fd = (
                geometry.moment_flat(eig_hi)[0] - geometry.moment_flat(eig_lo)[0]
            ) @ x_full / (2 * eps)
            ratios_flat.append(flat_fd / rhs)

            def display_fiber(v):
                return 0.5 * float(v @ adz0_p @ alg.bracket(x_full, geometry.pad_fiber(v[None])[0])[alg.dim_k :])

            disp_fd = (display_fiber(zp + dz) - display_fiber(zp - dz)) / (2 * eps)
            ratios_sign.append(disp_fd / rhs)
    return {
        "flat_display_factor": float(np.median(ratios_flat)),
        "product_display_fiber_sign": float(np.median(ratios_sign)),
    }
