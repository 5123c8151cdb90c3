"""Certification pipelines over the orbit models.

Three entry points, mirrored by the CLI:

- ``inspect_model`` reports the structural data of one algebra: dimensions,
  the root system with compactness tags, the distinguished central element
  z0 and its weight, and the certificates tying them together.
- ``run_lemma_suite`` certifies the supporting spectral and growth facts on
  large seeded samples: the chi-operator contraction spectrum, quadratic
  growth of the pullback moment, the exact flat pairing, positivity of the
  bracket pairing for chamber weight pairs, the moment/form compatibility of
  all five families, and linearity of the chamber constants.
- ``run_theorem_pipeline`` certifies the main pullback statement: it gates
  on the chamber and on delta > b_lambda, checks the deformation hypotheses
  of every stage, certifies each stage flow and the composite flow against
  finite-difference differentials, and aggregates one verdict.

Both runners return plain report dicts (see report.render_report); all
randomness comes from streams spawned off the scenario seed, so reports are
reproducible byte-for-byte outside their timing block.
"""

from __future__ import annotations

import time

import numpy as np

from .algebra import build_algebra
from .forms import (
    OrbitGeometry,
    OrbitPoint,
    bracket_positivity_slack,
    form_delta,
    form_hermitian,
    form_product,
    form_pullback,
    form_segment,
    measure_convention_constants,
    moment_delta,
    moment_flat,
    moment_hermitian,
    moment_identity_residual,
    moment_product,
    moment_pullback,
    moment_segment,
)
from .moser import (
    MoserStage,
    check_hypotheses,
    hermitian_stage,
    scaling_stage,
    segment_stage,
    verify_pullback,
)
from .operators import chi_spectrum_check
from .report import SCHEMA_VERSION
from .roots import (
    ChamberWeight,
    chamber_constants,
    compute_root_datum,
    in_holomorphic_chamber,
)


class ChamberError(ValueError):
    """The requested weight is not strictly inside the holomorphic chamber."""


class DeltaError(ValueError):
    """The requested delta does not exceed b_lambda."""


def _build_model(scenario):
    alg = build_algebra(scenario.family, **scenario.algebra_params())
    datum = compute_root_datum(alg)
    if scenario.lam is None:
        weight = datum.lambda0
    else:
        if len(scenario.lam) != alg.rank:
            raise ValueError(
                f"lambda needs {alg.rank} torus coordinates, got {len(scenario.lam)}"
            )
        weight = ChamberWeight(np.asarray(scenario.lam, dtype=float))
    ok, margin = in_holomorphic_chamber(weight, datum)
    if not ok:
        coords = [float(v) for v in weight.coords]
        raise ChamberError(
            f"weight {coords} is outside the holomorphic chamber "
            f"(margin over positive noncompact roots: {margin:.6g}, need > 0)"
        )
    return alg, datum, weight, margin


def _sample_points(geometry, rng, count, radius):
    pts = []
    for _ in range(count):
        k = geometry.alg.group_exp(rng.standard_normal(geometry.alg.dim_k))
        z = rng.standard_normal(geometry.dim_p)
        z *= rng.uniform(0.1, radius) / np.linalg.norm(z)
        pts.append((k, z))
    return pts


def _verdict(checks):
    return "pass" if all(checks.values()) else "fail"


# -- inspection ---------------------------------------------------------------------


def inspect_model(family, p=None, q=None, n=None):
    """Structural report for one algebra: dimensions, roots, z0 certificates."""
    alg = build_algebra(family, p=p, q=q, n=n)
    datum = compute_root_datum(alg)
    rank = alg.rank
    z0_torus = datum.z0[:rank]

    ad_z0 = alg.ad(datum.z0)
    square = ad_z0 @ ad_z0
    cert = float(
        np.abs(square[alg.dim_k :, alg.dim_k :] + np.eye(alg.dim_p)).max()
    )

    roots = []
    worst_compact = 0.0
    worst_noncompact = 0.0
    for root in datum.roots:
        value = float(root.value(z0_torus))
        roots.append(
            {
                "coords": [float(c) for c in root.coords],
                "compact": bool(root.compact),
                "positive": bool(root.positive),
                "value_on_z0": value,
            }
        )
        if root.compact:
            worst_compact = max(worst_compact, abs(value))
        elif root.positive:
            worst_noncompact = max(worst_noncompact, abs(value - 1.0))

    z0_norm_sq = float(datum.z0 @ datum.z0)
    pairing = datum.lambda0.pair(alg, datum.z0)
    m0, b0 = chamber_constants(datum.lambda0, datum)

    checks = {
        "z0_squares_to_minus_id_on_p": cert < 1e-10,
        "compact_roots_vanish_on_z0": worst_compact < 1e-10,
        "positive_noncompact_roots_are_one_on_z0": worst_noncompact < 1e-10,
        "lambda0_pairs_to_norm_squared": abs(pairing - z0_norm_sq) < 1e-12,
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "inspect",
        "verdict": _verdict(checks),
        "algebra": {
            "family": family,
            "p": p,
            "q": q,
            "n": n,
            "ambient": alg.ambient,
            "dim": alg.dim,
            "dim_k": alg.dim_k,
            "dim_p": alg.dim_p,
            "rank": rank,
        },
        "roots": roots,
        "root_counts": {
            "total": len(roots),
            "compact": sum(1 for r in roots if r["compact"]),
            "noncompact": sum(1 for r in roots if not r["compact"]),
            "positive_noncompact": sum(
                1 for r in roots if r["positive"] and not r["compact"]
            ),
        },
        "z0": [float(v) for v in z0_torus],
        "z0_norm_squared": z0_norm_sq,
        "z0_certificate_residual": cert,
        "lambda0": [float(v) for v in datum.lambda0.coords],
        "lambda0_z0_pairing": pairing,
        "constants_at_lambda0": {"m_lambda": m0, "b_lambda": b0},
        "checks": checks,
    }


# -- supporting-inequality suite ----------------------------------------------------


def _random_chamber_weight(datum, rng, box=2.0, max_draws=10000):
    rank = datum.algebra.rank
    for _ in range(max_draws):
        w = ChamberWeight(rng.uniform(-box, box, rank))
        ok, _ = in_holomorphic_chamber(w, datum)
        if ok:
            return w
    raise RuntimeError("chamber rejection sampling failed")


def _unit_fiber(dim_p, rng):
    v = rng.standard_normal(dim_p)
    return v / np.linalg.norm(v)


def _lemma_block(scenario, alg, datum, weight):
    tol = scenario.tolerance
    n = scenario.lemma_samples
    seeds = np.random.SeedSequence(scenario.seed).spawn(5)
    rng_chi, rng_growth, rng_bracket, rng_ident, rng_scale = map(
        np.random.default_rng, seeds
    )

    chi_dev = 0.0
    chi_eig = 0.0
    for _ in range(n):
        z = rng_chi.uniform(0.05, 3.0) * _unit_fiber(alg.dim_p, rng_chi)
        dev, eig = chi_spectrum_check(alg, z)
        chi_dev = max(chi_dev, dev)
        chi_eig = max(chi_eig, eig)

    geo_flat = OrbitGeometry(alg, datum, datum.lambda0)
    eye = np.eye(alg.ambient, dtype=complex)
    growth_slack = np.inf
    flat_res = 0.0
    for _ in range(n):
        zp = rng_growth.uniform(0.05, 3.0) * _unit_fiber(alg.dim_p, rng_growth)
        phi = moment_hermitian(OrbitPoint(geo_flat, eye, zp), 1.0).coords
        growth_slack = min(
            growth_slack,
            float((phi - geo_flat.lam0) @ geo_flat.z0 - 0.5 * zp @ zp),
        )
        val = moment_flat(geo_flat, zp).coords @ geo_flat.z0
        flat_res = max(flat_res, abs(val - zp @ zp) / max(1.0, zp @ zp))

    bracket_slack = np.inf
    for _ in range(n):
        w1 = _random_chamber_weight(datum, rng_bracket)
        w2 = _random_chamber_weight(datum, rng_bracket)
        zp = rng_bracket.uniform(0.05, 2.5) * _unit_fiber(alg.dim_p, rng_bracket)
        _, _, slack = bracket_positivity_slack(datum, w1, w2, zp)
        bracket_slack = min(bracket_slack, float(slack))
    lhs, rhs, _ = bracket_positivity_slack(
        datum, datum.lambda0, datum.lambda0, _unit_fiber(alg.dim_p, rng_bracket)
    )
    bracket_equality = abs(lhs - rhs)

    geo = OrbitGeometry(alg, datum, weight)
    _, b_lam = chamber_constants(weight, datum)
    delta = (
        scenario.delta_abs
        if scenario.delta_abs is not None
        else scenario.delta_mult * b_lam
    )
    pts = [
        (
            alg.group_exp(rng_ident.standard_normal(alg.dim_k)),
            rng_ident.standard_normal(geo.dim_p),
        )
        for _ in range(5)
    ]
    gens = [rng_ident.standard_normal(alg.dim_k) for _ in range(5)]

    def pair(form_fn, mom_fn):
        return (
            lambda k, z: form_fn(OrbitPoint(geo, k, z)).matrix,
            lambda k, z: mom_fn(OrbitPoint(geo, k, z)).coords,
        )

    cases = {
        "pullback": pair(form_pullback, moment_pullback),
        "product": pair(form_product, moment_product),
        "delta": pair(lambda p_: form_delta(p_, delta),
                      lambda p_: moment_delta(p_, delta)),
        "segment": pair(lambda p_: form_segment(p_, 0.4, delta),
                        lambda p_: moment_segment(p_, 0.4, delta)),
        "hermitian": pair(lambda p_: form_hermitian(p_, 0.7),
                          lambda p_: moment_hermitian(p_, 0.7)),
    }
    identity_res = {
        name: moment_identity_residual(geo, f_at, m_at, pts, gens, eps=1e-5)
        for name, (f_at, m_at) in cases.items()
    }
    constants = measure_convention_constants(geo, rng_ident)

    scale_res = 0.0
    for w in [weight] + [_random_chamber_weight(datum, rng_scale) for _ in range(3)]:
        m1, b1 = chamber_constants(w, datum)
        m2, b2 = chamber_constants(ChamberWeight(2.0 * w.coords), datum)
        scale_res = max(scale_res, abs(m2 - 2.0 * m1), abs(b2 - 2.0 * b1))

    checks = {
        "chi_multiset": chi_dev < tol("chi_multiset"),
        "chi_contraction": chi_eig < tol("chi_contraction"),
        "pullback_growth": growth_slack >= tol("growth_slack"),
        "flat_identity": flat_res < tol("flat_identity"),
        "bracket_positivity": bracket_slack >= tol("bracket_slack"),
        "bracket_equality_at_lambda0": bracket_equality < tol("flat_identity"),
        "moment_identities": max(identity_res.values()) < tol("moment_identity"),
        "convention_constants": (
            abs(constants["flat_display_factor"] - 2.0) < tol("moment_identity")
            and abs(constants["product_display_fiber_sign"] + 1.0)
            < tol("moment_identity")
        ),
        "scaling_linearity": scale_res < tol("scaling_linearity"),
    }
    return {
        "samples": n,
        "chi_multiset_deviation": chi_dev,
        "chi_spectral_radius": chi_eig,
        "pullback_growth_min_slack": growth_slack,
        "flat_identity_residual": flat_res,
        "bracket_min_slack": bracket_slack,
        "bracket_equality_residual": bracket_equality,
        "moment_identity_residuals": identity_res,
        "convention_constants": constants,
        "scaling_linearity_residual": scale_res,
        "checks": checks,
    }


def run_lemma_suite(scenario):
    """Certify the supporting facts for the scenario's algebra and weight."""
    t_start = time.perf_counter()
    alg, datum, weight, margin = _build_model(scenario)
    m_lam, b_lam = chamber_constants(weight, datum)
    lemmas = _lemma_block(scenario, alg, datum, weight)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "lemmas",
        "verdict": _verdict(lemmas["checks"]),
        "scenario": scenario.describe(),
        "constants": {
            "m_lambda": m_lam,
            "b_lambda": b_lam,
            "chamber_margin": margin,
        },
        "lemmas": lemmas,
        "stages": [],
        "timing": {"wall_clock_seconds": time.perf_counter() - t_start},
    }


# -- main certification pipeline ----------------------------------------------------


def _segment_witness(geometry, delta, rng, points=200, t_count=21):
    """Nondegeneracy of the segment family over a (t, point) grid.

    Also certifies affinity in t: the form at interior times must equal the
    straight-line combination of its endpoint evaluations.
    """
    scale = np.array([1.0])
    family = segment_stage(geometry, delta)
    ks = geometry.alg.group_exp(
        rng.standard_normal((points, geometry.alg.dim_k))
    )
    zs = rng.standard_normal((points, geometry.dim_p))
    zs *= (rng.uniform(0.1, 1.5, points) / np.linalg.norm(zs, axis=1))[:, None]
    eig = geometry.fiber_eig(zs)
    kap = geometry.kappa(ks)
    end0 = family.omega(eig, kap, scale, 0.0)
    end1 = family.omega(eig, kap, scale, 1.0)
    min_margin = np.inf
    affinity = 0.0
    for t in np.linspace(0.0, 1.0, t_count):
        omega = family.omega(eig, kap, scale, t)
        svals = np.linalg.svd(omega[:, 0], compute_uv=False)
        min_margin = min(min_margin, float(svals[..., -1].min()))
        affinity = max(
            affinity, float(np.abs(omega - ((1 - t) * end0 + t * end1)).max())
        )
    return {
        "t_count": t_count,
        "point_count": points,
        "min_margin": min_margin,
        "affinity_residual": affinity,
    }


def _stage_report(geometry, stage, points, eps, rng, expected_shift, tol):
    out = verify_pullback(geometry, [stage], points, eps=eps, rng=rng)
    shift_error = float(np.abs(out["moment_shift_mean"] - expected_shift).max())
    checks = {
        "pullback": out["pullback_residual"] < tol("stage_pullback"),
        "moment_shift": shift_error < tol("moment_shift")
        and out["moment_shift_spread"] < tol("moment_shift"),
        "zero_section_fixed": out["zero_section_displacement"] < tol("zero_section"),
        "equivariance": out["equivariance_residual"] < tol("equivariance"),
        "group_drift": out["max_group_residual"] < tol("group_drift"),
    }
    return {
        "name": stage.family.name,
        "steps": stage.steps,
        "sample_count": len(points),
        "pullback_residual": out["pullback_residual"],
        "moment_shift_error": shift_error,
        "moment_shift_spread": out["moment_shift_spread"],
        "zero_section_displacement": out["zero_section_displacement"],
        "equivariance_residual": out["equivariance_residual"],
        "min_form_margin": out["min_form_margin"],
        "max_group_residual": out["max_group_residual"],
        "reprojections": out["reprojections"],
        "fiber_sup": out["fiber_sup"],
        "checks": checks,
    }


def _hypothesis_checks(hyp, tol):
    checks = {
        "closedness": hyp["closedness_rel_residual"] < tol("closedness"),
        "primitive_exactness": hyp["primitive_exactness_residual"]
        < tol("exactness"),
        "zero_section_restrictions": max(
            hyp["zero_section_cross_block"],
            hyp["zero_section_dt_restriction"],
            hyp["zero_section_endpoint_restriction"],
            hyp["zero_section_primitive_sup"],
        )
        < tol("zero_restriction"),
        "zero_section_moment_bounded": bool(
            np.isfinite(hyp["zero_section_moment_sup"])
        ),
        "orthogonality_nullspace": hyp["orthogonality_nullspace_residual"]
        < tol("nullspace"),
    }
    for row in hyp["properness"]:
        checks[f"properness_{row['stage']}"] = (
            tol("properness_low") < row["ratio"] < tol("properness_high")
            and abs(row["gamma_fit"] - 2.0) < tol("gamma_deviation")
        )
    return checks


def run_theorem_pipeline(scenario):
    """Certify the pullback statement end to end for one scenario.

    Raises ChamberError/DeltaError before any flow when the weight or delta
    is inadmissible; otherwise returns the full report with one verdict.
    """
    t_start = time.perf_counter()
    alg, datum, weight, margin = _build_model(scenario)
    m_lam, b_lam = chamber_constants(weight, datum)
    delta = (
        scenario.delta_abs
        if scenario.delta_abs is not None
        else scenario.delta_mult * b_lam
    )
    if not delta > b_lam:
        raise DeltaError(
            f"delta = {delta:.6g} must exceed b_lambda = {b_lam:.6g}; the "
            "weight segment would leave the holomorphic chamber"
        )
    geometry = OrbitGeometry(alg, datum, weight)
    tol = scenario.tolerance

    seeds = np.random.SeedSequence((scenario.seed, 1)).spawn(7)
    rng_witness, rng_hyp, rng_s1, rng_s2, rng_s3, rng_comp, rng_pts = map(
        np.random.default_rng, seeds
    )

    stages = [
        MoserStage(hermitian_stage(geometry), max(scenario.steps // 2, 5)),
        MoserStage(scaling_stage(geometry, delta), max(scenario.steps // 2, 5)),
        MoserStage(segment_stage(geometry, delta), scenario.steps),
    ]

    constants = {
        "m_lambda": m_lam,
        "b_lambda": b_lam,
        "delta": delta,
        "chamber_margin": margin,
        "dim_k_lambda": alg.dim_k - geometry.dim_c,
        "dim_base_complement": geometry.dim_c,
        "dim_p": geometry.dim_p,
        "dim_total": geometry.dim_t,
        "z0_norm": float(np.linalg.norm(geometry.z0)),
    }

    lemmas = _lemma_block(scenario, alg, datum, weight)
    witness = _segment_witness(geometry, delta, rng_witness)
    hypotheses = check_hypotheses(geometry, stages, delta, rng_hyp)
    hyp_checks = _hypothesis_checks(hypotheses, tol)

    lam0 = geometry.lam0
    expected_shifts = [0.0 * lam0, (delta - 1.0) * lam0, -delta * lam0]
    stage_reports = []
    for stage, expected, rng_s in zip(
        stages, expected_shifts, (rng_s1, rng_s2, rng_s3)
    ):
        pts = _sample_points(geometry, rng_s, scenario.stage_samples, scenario.radius)
        stage_reports.append(
            _stage_report(geometry, stage, pts, scenario.eps, rng_s, expected, tol)
        )

    comp_pts = _sample_points(geometry, rng_pts, scenario.samples, scenario.radius)
    comp = verify_pullback(
        geometry, stages, comp_pts, eps=scenario.eps, rng=rng_comp
    )
    comp_shift_error = float(np.abs(comp["moment_shift_mean"]).max())
    composite_checks = {
        "pullback": comp["pullback_residual"] < tol("composite_pullback"),
        "moment_preserved": comp_shift_error < tol("moment_shift")
        and comp["moment_shift_spread"] < tol("moment_shift"),
        "zero_section_fixed": comp["zero_section_displacement"]
        < tol("zero_section"),
        "equivariance": comp["equivariance_residual"] < tol("equivariance"),
        "group_drift": comp["max_group_residual"] < tol("group_drift"),
        "images_separated": comp["min_image_separation"] > 0.0,
    }
    composite = {
        "steps": [stage.steps for stage in stages],
        "sample_count": len(comp_pts),
        "pullback_residual": comp["pullback_residual"],
        "moment_shift_error": comp_shift_error,
        "moment_shift_spread": comp["moment_shift_spread"],
        "zero_section_displacement": comp["zero_section_displacement"],
        "equivariance_residual": comp["equivariance_residual"],
        "min_form_margin": comp["min_form_margin"],
        "max_group_residual": comp["max_group_residual"],
        "reprojections": comp["reprojections"],
        "fiber_sup": comp["fiber_sup"],
        "min_image_separation": comp["min_image_separation"],
        "min_source_separation": comp["min_source_separation"],
        "checks": composite_checks,
    }

    checks = {
        "lemmas": all(lemmas["checks"].values()),
        "segment_witness": witness["min_margin"] > tol("segment_margin")
        and witness["affinity_residual"] < tol("affinity"),
        "hypotheses": all(hyp_checks.values()),
        "stages": all(
            all(rep["checks"].values()) for rep in stage_reports
        ),
        "composite": all(composite_checks.values()),
    }

    hypotheses_out = dict(hypotheses)
    hypotheses_out["checks"] = hyp_checks

    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "theorem",
        "verdict": _verdict(checks),
        "scenario": scenario.describe(),
        "constants": constants,
        "lemmas": lemmas,
        "segment_witness": witness,
        "hypotheses": hypotheses_out,
        "stages": stage_reports,
        "composite": composite,
        "checks": checks,
        "timing": {"wall_clock_seconds": time.perf_counter() - t_start},
    }
