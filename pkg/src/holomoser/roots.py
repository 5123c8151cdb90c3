"""Root data of the compact torus, the holomorphic chamber, and stabilizers.

Roots are real linear functionals on the maximal torus t of k, recorded by
their values on the orthonormal torus basis (the leading `rank` basis slots of
the algebra).  A root vector v in the complexified algebra satisfies
[H, v] = i alpha(H) v for H in t.  The distinguished central element z0 of k
has ad(z0)^2 = -id on p; the weight dual to it under B_theta spans the ray of
lambda_0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import _PRIMES, MatrixLieAlgebra


@dataclass
class Root:
    coords: np.ndarray  # values on the orthonormal torus basis, shape (rank,)
    vector: np.ndarray  # complex root vector in algebra coordinates, shape (N,)
    compact: bool
    positive: bool

    def value(self, torus_coords):
        return float(np.dot(self.coords, torus_coords))


@dataclass
class ChamberWeight:
    """A weight in t*, stored by coefficients against the dual torus basis.

    B_theta identifies t with t*, so the same coefficients give H_lambda; the
    functional extends by zero on the root spaces and on p.
    """

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)

    def full(self, alg):
        out = np.zeros(alg.dim)
        out[: len(self.coords)] = self.coords
        return out

    def pair(self, alg, x):
        """Dual pairing <lambda, x> for x in coordinates."""
        return float(np.dot(self.full(alg), np.asarray(x, dtype=float)))


@dataclass
class RootDatum:
    algebra: MatrixLieAlgebra
    roots: list
    z0: np.ndarray  # (N,) coordinates
    lambda0: ChamberWeight

    @property
    def rank(self):
        return self.algebra.rank

    def positive_noncompact(self):
        return [r for r in self.roots if not r.compact and r.positive]

    def positive_compact(self):
        return [r for r in self.roots if r.compact and r.positive]

    def validate(self):
        """Residuals for every structural claim the datum makes."""
        alg = self.algebra
        r = alg.rank
        torus_ads = np.swapaxes(alg.structure[:r], 1, 2)  # ad(H_j)
        out = {}
        out["torus_abelian"] = float(
            max(abs(alg.bracket(_unit(alg.dim, i), _unit(alg.dim, j))).max()
                for i in range(r) for j in range(r))
        )
        stacked = torus_ads[:, :, : alg.dim_k].reshape(-1, alg.dim_k)
        sv = np.linalg.svd(stacked, compute_uv=False)
        centralizer_dim = int((sv < 1e-9 * max(1.0, sv.max())).sum())
        out["torus_centralizer_dim_matches_rank"] = float(centralizer_dim != r)

        eig_res = 0.0
        for root in self.roots:
            v = root.vector
            for j in range(r):
                lhs = torus_ads[j] @ v
                eig_res = max(eig_res, float(np.abs(lhs - 1j * root.coords[j] * v).max()))
        out["root_eigen_residual"] = eig_res

        adz0 = alg.ad(self.z0)
        blk = (adz0 @ adz0)[alg.dim_k :, alg.dim_k :]
        out["z0_squares_to_minus_id_on_p"] = float(np.abs(blk + np.eye(alg.dim_p)).max())
        out["z0_in_torus"] = float(np.abs(np.delete(self.z0, range(r))).max())

        z0_t = self.z0[:r]
        nc = [abs(root.value(z0_t) - 1.0) for root in self.positive_noncompact()]
        cc = [abs(root.value(z0_t)) for root in self.positive_compact()]
        out["noncompact_z0_eigenvalue"] = max(nc) if nc else 0.0
        out["compact_z0_eigenvalue"] = max(cc) if cc else 0.0

        norm_res = 0.0
        for root in self.positive_noncompact():
            e = root.vector
            re2 = 4.0 * float(np.dot(e.real, e.real))
            im2 = 4.0 * float(np.dot(e.imag, e.imag))
            norm_res = max(norm_res, abs(re2 - 2.0), abs(im2 - 2.0))
        out["noncompact_vector_normalization"] = norm_res

        pair_res = 0.0
        coords = np.array([root.coords for root in self.roots])
        for c in coords:
            dist = np.abs(coords + c).max(axis=1).min()
            pair_res = max(pair_res, float(dist))
        out["roots_in_opposite_pairs"] = pair_res
        return out


def _unit(n, j):
    e = np.zeros(n)
    e[j] = 1.0
    return e


def compute_root_datum(alg, tol=1e-9):
    """Extract the root datum by simultaneous diagonalization of ad(t).

    A deterministic generic combination of the torus generators is
    eigendecomposed (it is real skew, so i times it is Hermitian); each
    nonzero eigenvector is certified to be a simultaneous eigenvector of all
    ad(H_j), retrying with a different combination on accidental degeneracy.
    """
    r = alg.rank
    torus_ads = np.swapaxes(alg.structure[:r], 1, 2)
    for attempt in range(len(_PRIMES) - r):
        weights = 1.0 / np.sqrt(np.array(_PRIMES[attempt : attempt + r], dtype=float))
        gen = np.tensordot(weights, torus_ads, axes=([0], [0]))
        w, vecs = np.linalg.eigh(1j * gen)
        nonzero = np.abs(w) > 1e-7 * max(1.0, np.abs(w).max())
        roots, ok = _certify_root_vectors(alg, torus_ads, vecs[:, nonzero], tol)
        if ok and len(roots) == alg.dim - r:
            break
    else:
        raise RuntimeError("failed to separate root spaces with generic torus element")

    z0 = _distinguished_central_element(alg, tol)

    # orient z0: the lexicographically greatest noncompact root gets value +1
    noncompact = [(c, v) for c, v, compact in roots if not compact]
    if not noncompact:
        raise ValueError("no noncompact roots; the fiber p carries no torus action")
    lead = max(noncompact, key=lambda cv: tuple(np.round(cv[0], 10)))
    val = float(np.dot(lead[0], z0[:r]))
    if abs(abs(val) - 1.0) > 1e-8:
        raise ValueError("center of k does not act with eigenvalues +-i on p")
    if val < 0:
        z0 = -z0

    out = []
    for coords, vec, compact in roots:
        if compact:
            lead_idx = np.flatnonzero(np.abs(coords) > tol)
            positive = bool(len(lead_idx)) and coords[lead_idx[0]] > 0
        else:
            positive = float(np.dot(coords, z0[:r])) > 0
        out.append(Root(coords=coords, vector=vec, compact=compact, positive=positive))
    out.sort(key=lambda root: tuple(np.round(root.coords, 10)), reverse=True)

    datum = RootDatum(
        algebra=alg, roots=out, z0=z0, lambda0=ChamberWeight(z0[:r].copy())
    )
    res = datum.validate()
    worst = max(res.values())
    if worst > 1e-8:
        raise RuntimeError(f"root datum failed self-certification: {res}")
    return datum


def _certify_root_vectors(alg, torus_ads, vecs, tol):
    """Check candidate eigenvectors against every torus generator at once."""
    r = len(torus_ads)
    roots = []
    for idx in range(vecs.shape[1]):
        v = vecs[:, idx]
        v = v / np.linalg.norm(v)
        coords = np.array([float((-1j * (np.conj(v) @ (torus_ads[j] @ v))).real)
                           for j in range(r)])
        for j in range(r):
            if np.abs(torus_ads[j] @ v - 1j * coords[j] * v).max() > tol:
                return [], False
        k_norm = np.linalg.norm(v[: alg.dim_k])
        p_norm = np.linalg.norm(v[alg.dim_k :])
        if min(k_norm, p_norm) > tol:
            return [], False
        compact = k_norm > p_norm
        # deterministic phase: largest-magnitude component made real positive
        lead = int(np.argmax(np.abs(v)))
        phase = v[lead] / abs(v[lead])
        roots.append((coords, v / phase, compact))
    return roots, True


def _distinguished_central_element(alg, tol):
    """Solve ad(z)^2 = -id on p over the center of k."""
    dim_k = alg.dim_k
    c = alg.structure
    # center of k: x in k with [x, e_j] = 0 for all e_j in k
    stacked = np.einsum("ijk->jki", c[:dim_k, :dim_k, :]).reshape(-1, dim_k)
    _, s, vt = np.linalg.svd(stacked, full_matrices=False)
    kernel = [vt[i] for i in range(len(s)) if s[i] < 1e-9 * max(1.0, s.max())]
    if len(kernel) != 1:
        raise ValueError(
            f"center of k has dimension {len(kernel)}; the model is not of "
            "Hermitian tube/non-tube type handled here"
        )
    zeta = np.zeros(alg.dim)
    zeta[:dim_k] = kernel[0]
    adz = alg.ad(zeta)
    blk = (adz @ adz)[dim_k:, dim_k:]
    mu = float(np.trace(blk)) / alg.dim_p
    if mu >= 0 or np.abs(blk - mu * np.eye(alg.dim_p)).max() > tol:
        raise ValueError("ad(zeta)^2 is not a negative scalar on p")
    return zeta / np.sqrt(-mu)


# -- chamber ------------------------------------------------------------------


def in_holomorphic_chamber(weight, datum, strict_margin=1e-12):
    """Membership test; returns (bool, margin over noncompact positive roots)."""
    h = weight.coords
    nonc = [root.value(h) for root in datum.positive_noncompact()]
    comp = [root.value(h) for root in datum.positive_compact()]
    margin = min(nonc)
    ok = margin > strict_margin and (not comp or min(comp) >= -strict_margin)
    return ok, float(margin)


def chamber_constants(weight, datum):
    """(m_lambda, b_lambda): chamber margin and bracket-pairing norm.

    b_lambda is the spectral norm of M_ij = <lambda, [e_i, e_j]> over all of
    g, an upper bound for the supremum in the nondegeneracy threshold.
    """
    alg = datum.algebra
    _, m = in_holomorphic_chamber(weight, datum, strict_margin=-np.inf)
    mat = pairing_matrix(alg, weight.full(alg))
    b = float(np.linalg.norm(mat, ord=2))
    return m, b


def pairing_matrix(alg, xi):
    """Matrix of the 2-form <xi, [., .]> on g, for xi in dual coordinates."""
    return np.einsum("ijk,...k->...ij", alg.structure, xi)


@dataclass
class StabilizerSplit:
    """B_theta-orthonormal bases of k_lambda and its complement inside k."""

    kernel: np.ndarray  # (dim_k, d)
    complement: np.ndarray  # (dim_k, c)


def stabilizer_algebra(weight, datum, rel_tol=1e-9):
    """Split k into the stabilizer k_lambda and its B_theta-orthocomplement.

    k_lambda is the kernel of X |-> lambda o ad(X)|_k, found by SVD with a
    relative singular-value threshold.
    """
    alg = datum.algebra
    dim_k = alg.dim_k
    m_kk = pairing_matrix(alg, weight.full(alg))[:dim_k, :dim_k]
    _, s, vt = np.linalg.svd(m_kk)
    # absolute floor keeps the K-invariant case (zero matrix) in the kernel
    thresh = max(rel_tol * float(s.max()), 1e-12 * max(1.0, float(np.linalg.norm(weight.coords))))
    small = s < thresh
    kernel = vt[small].T
    complement = vt[~small].T
    return StabilizerSplit(kernel=kernel, complement=complement)


def weight_from_matrix(alg, h_matrix):
    """ChamberWeight whose H_lambda equals the given torus matrix."""
    x = alg.coords(h_matrix)
    if alg.membership_residual(h_matrix) > 1e-10:
        raise ValueError("matrix does not lie in the algebra")
    if np.abs(x[alg.rank :]).max() > 1e-10:
        raise ValueError("matrix does not lie in the chosen maximal torus")
    return ChamberWeight(x[: alg.rank].copy())
