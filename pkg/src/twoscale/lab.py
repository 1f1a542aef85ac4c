"""Numerical experiments on the resolution limit of the two-scale energy."""

from dataclasses import dataclass, field
import math

import numpy as np

from .energy import regularity_energy, split_near_off
from .frames import robust_support_delta
from .geometry import distance_to_set
from .scene import Scene, analytic_regularity, mollified_field, sample, sample_field, smooth_from_spec
from .transform import ModelParams, analyze, channel_aggregate, neighborhood_aggregate, truncate, two_scale


@dataclass
class SweepResult:
    scene_id: str
    rows: list
    params: dict = field(default_factory=dict)

    FIELDS = ("n", "R_n", "near", "off", "R_ref", "rel_error")

    def column(self, key):
        return np.array([r[key] for r in self.rows], dtype=float)


def _pipeline(image, system, params):
    n = image.level
    stack = analyze(image, system, params.weights)
    c = channel_aggregate(stack, params.q)
    agg = neighborhood_aggregate(c, params.scale(n), params.r)
    fld = truncate(agg, params.clamp(n), H=params.scale(n), alpha=params.alpha, r=params.r, q=params.q, p=params.p)
    return stack, c, agg, fld


def sweep_regularity(scene, system, n_range, alpha=1.0, params=None, Q=6):
    """``R_n`` of ``T_n u`` per level with the near/off split and the continuum reference."""
    params = params or ModelParams(alpha=alpha)
    ref = analytic_regularity(scene, params.alpha)
    rows = []
    for n in sorted(n_range):
        fld = two_scale(sample(scene, system, n, Q), system, params)
        R = regularity_energy(fld, params.p)
        near, _ = split_near_off(fld, scene.curves, system)
        rel = abs(R - ref) / ref if ref else (0.0 if R == 0 else math.inf)
        rows.append({"n": n, "R_n": R, "near": near, "off": R - near, "R_ref": ref, "rel_error": rel})
    return SweepResult(scene.name or "scene", rows, params.to_dict())


def _rescaled(scene, rho):
    curves = tuple(c.with_rho(rho * c.rho) for c in scene.curves)
    return Scene(scene.domain, scene.smooth, curves, scene.tube_width, scene.margin, scene.name, scene.smooth_tv)


def saturation_tube(field, curves):
    """Coefficient locations within ``H`` of the curves."""
    return (distance_to_set(curves, field.locations()) <= field.H) & field.mask


def jump_height_sweep(scene, heights, system, n, alpha=1.0, params=None, coverage=0.95):
    """``R_n`` per jump height (every curve's height multiplied by ``rho``).

    Also reports the smallest multiplier at which ``coverage`` of the saturation
    tube reaches the clamp.  With a constant smooth part the aggregated
    coefficients scale linearly with ``rho``, so the threshold is read off one
    unit-height run.
    """
    if any(h <= 0 for h in heights):
        raise ValueError("heights must be positive")
    params = params or ModelParams(alpha=alpha)
    rows = []
    for rho in heights:
        sc = _rescaled(scene, rho)
        _, _, agg, fld = _pipeline(sample(sc, system, n), system, params)
        tube = saturation_tube(fld, sc.curves)
        sat = float(np.mean(agg.values[tube] >= fld.M)) if tube.any() else 0.0
        rows.append({"rho": rho, "R_n": regularity_energy(fld, params.p), "saturated": sat})
    threshold = None
    if scene.smooth.total_variation(scene.domain) == 0.0:
        _, _, agg, fld = _pipeline(sample(_rescaled(scene, 1.0), system, n), system, params)
        tube = saturation_tube(fld, scene.curves)
        g = agg.values[tube]
        q = np.quantile(g, 1 - coverage, method="lower")
        threshold = float(fld.M / q) if q > 0 else math.inf
    return {"rows": rows, "saturation_height": threshold, "M": params.clamp(n), "H": params.scale(n)}


def tubular_area(curves, H, level, box=None, chunk=1 << 20):
    """Area of ``{dist <= H}`` rasterised on a ``2^-level`` grid with 2x2 supersampling.

    ``box`` clips the region (needed for lines); otherwise the curves' bounding box
    grown by ``H`` is used.
    """
    w = 2.0**-level
    if H <= w:
        raise ValueError("H must exceed the raster cell")
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for c in curves:
        (a, b), (cc, d) = c.bbox(box)
        lo = np.minimum(lo, [a - H, cc - H])
        hi = np.maximum(hi, [b + H, d + H])
    if box is not None:
        lo = np.maximum(lo, [box[0][0], box[1][0]])
        hi = np.minimum(hi, [box[0][1], box[1][1]])
    i0 = np.floor(lo / w).astype(int)
    i1 = np.ceil(hi / w).astype(int)
    xs = (np.arange(i0[0], i1[0])[:, None] * w + np.array([0.25, 0.75]) * w).ravel()
    ys = (np.arange(i0[1], i1[1])[:, None] * w + np.array([0.25, 0.75]) * w).ravel()
    count = 0
    rows = max(1, chunk // len(ys))
    for s in range(0, len(xs), rows):
        P = np.stack(np.meshgrid(xs[s : s + rows], ys, indexing="ij"), axis=-1)
        count += int(np.count_nonzero(distance_to_set(curves, P) <= H))
    return count * (w / 2) ** 2


def _feature_size(c, box):
    if c.kind in ("circle", "arc"):
        return c.params["radius"] * (1.0 if c.kind == "circle" else min(1.0, c.params["span"]))
    if c.kind == "polygon":
        v = np.asarray(c.params["vertices"])
        return float(np.min(np.hypot(*(np.roll(v, -1, 0) - v).T)))
    return c.length(box)


def box_counting_checks(curves, n_range, box=((0.0, 1.0), (0.0, 1.0))):
    """Per level: robust-intersection check and the smallest ``C`` with ``|cell ∩ curve| <= C 2^-n``."""
    from .geometry import curve_separation

    feats = [_feature_size(c, box) for c in curves]
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            feats.append(curve_separation(curves[i], curves[j], box))
    feature = min(feats)
    N = int(math.floor(math.log2(2.0 / feature))) + 1  # first n with 2^-n < feature / 2
    origin = (box[0][0], box[1][0])
    rows = []
    for n in sorted(n_range):
        w = 2.0**-n
        lengths = {}
        for c in curves:
            for k, v in c.cell_lengths(w, origin, box).items():
                lengths[k] = lengths.get(k, 0.0) + v
        failures = []
        for (i, j), v in lengths.items():
            if v <= 0:
                continue
            best = max(lengths.get((i + a, j + b), 0.0) for a in (-1, 0, 1) for b in (-1, 0, 1))
            if not best > w / 9:
                failures.append((i, j))
        C = max(lengths.values()) / w if lengths else 0.0
        rows.append({"n": n, "cells": len(lengths), "robust_ok": not failures, "failures": failures, "C": C})
    bound = 4 * sum(c.monotone_pieces(box) for c in curves)
    return {"rows": rows, "N": N, "feature": feature, "arc_bound": bound}


def near_singularity_floor(scene, system, n, params=None, spacing=None, offsets=1):
    """Statistics of ``2^-n c_n`` at the lattice points next to a dense sample of curve points.

    For every curve point the nearest coefficient index and its ``(2 offsets + 1)^2``
    neighbours are collected; entries whose stencil leaves the domain are skipped.
    ``min`` and ``p05`` are taken over all collected values, ``constant`` over the
    values divided by the local jump height, and ``best_of_block`` is the smallest
    (over curve points with a complete block) of the block maximum per unit height.
    """
    if not scene.curves:
        raise ValueError("scene has no curves")
    params = params or ModelParams()
    img = sample(scene, system, n)
    stack = analyze(img, system, params.weights)
    c = channel_aggregate(stack, params.q)
    h = c.h
    spacing = spacing or h / 8
    vals, rhos, best = [], [], []
    shape = np.array(c.values.shape)
    for curve in scene.curves:
        pts = curve.sample_points(spacing, scene.domain)
        k = np.rint(pts / h - np.array(c.center) - np.array(c.index0)).astype(int)
        offs = [(a, b) for a in range(-offsets, offsets + 1) for b in range(-offsets, offsets + 1)]
        block = np.full((len(k), len(offs)), np.nan)
        for t, off in enumerate(offs):
            kk = k + np.array(off)
            ok = np.all((kk >= 0) & (kk < shape), axis=1)
            ok[ok] = c.mask[kk[ok, 0], kk[ok, 1]]
            block[ok, t] = h * c.values[kk[ok, 0], kk[ok, 1]] / abs(curve.rho)
        full = ~np.isnan(block).any(axis=1)
        vals.append(block[~np.isnan(block)])
        rhos.append(np.full(int((~np.isnan(block)).sum()), abs(curve.rho)))
        best.append(block[full].max(axis=1))
    scaled = np.concatenate(vals)
    v = scaled * np.concatenate(rhos)
    b = np.concatenate(best)
    return {"n": n, "min": float(v.min()), "p05": float(np.quantile(v, 0.05)), "constant": float(scaled.min()),
            "best_of_block": float(b.min()) if b.size else math.nan, "count": int(v.size)}


def realised_shift_box(system, offsets=1):
    """Range of the shift ``a`` visited by :func:`near_singularity_floor`, per axis."""
    c = system.coefficient_center
    return tuple(((-ci - 0.5 - offsets) / 2, (-ci + 0.5 + offsets) / 2) for ci in c)


def predicted_floor(system, nu_angle, offsets=1, steps=64):
    """``(1/2) inf_a (sum_j (I_j(nu, a) / I_j)^2)^(1/2)`` over the realised shift box.

    The channel integrals are equal for the shipped systems, so this is
    ``Delta / (2 I_0)`` with ``Delta`` restricted to the given normal.
    """
    box = realised_shift_box(system, offsets)
    if abs(box[0][0] - box[1][0]) > 1e-12 or abs(box[0][1] - box[1][1]) > 1e-12:
        raise ValueError("non-square shift box")
    Is = [system.channel_integrals[lab] for lab in system.first_order_labels]
    if abs(Is[0] - Is[1]) > 1e-9 * abs(Is[0]):
        raise ValueError("unequal channel integrals")
    est = robust_support_delta(system, shift_steps=steps, box=box[0], angles=[nu_angle])
    return 0.5 * est.value / abs(Is[0]), est


def plain_coefficients(scene_or_fn, system, n, curves=(), domain=None, params=None):
    params = params or ModelParams()
    if isinstance(scene_or_fn, Scene):
        img = sample(scene_or_fn, system, n)
    else:
        img = sample_field(scene_or_fn, curves, domain, system, n)
    return analyze(img, system, params.weights)


def stability_ratios(base, bump, system, n_range, ts):
    """``2^-2n sum |c_n[u + t b] - c_n[u]| / (t ||b||)`` per ``(n, t)``.

    ``||b||`` is the SBV norm ``||b||_1 + |Db|(domain)`` of the bump.  Also reports
    the per-channel sum, which bounds the aggregated difference and is linear in ``t``.
    """
    from .scene import make_scene

    b = smooth_from_spec(bump)
    norm = b.l1_norm() + b.total_variation(base.domain)
    rows = []
    for n in sorted(n_range):
        s0 = plain_coefficients(base, system, n)
        c0 = channel_aggregate(s0, 2).values
        for t in ts:
            pert = make_scene(base.domain, [base.smooth.spec(), {**b.spec(), "amplitude": t * b.amplitude}],
                              [c for c in base.curves], base.tube_width, base.margin)
            s1 = plain_coefficients(pert, system, n)
            c1 = channel_aggregate(s1, 2).values
            m = s0.mask
            agg = 2.0 ** (-2 * n) * float(np.abs(c1 - c0)[m].sum())
            per = 2.0 ** (-2 * n) * sum(float(np.abs(s1.channels[k] - s0.channels[k])[m].sum()) for k in s0.channels)
            rows.append({"n": n, "t": t, "C": agg / (t * norm), "C_channels": per / (t * norm)})
    return rows, norm


def recovery_sequence_energy(scene, system, m_range, n_of_m=lambda m: m + 3, alpha=1.0, params=None,
                             grid_level=None):
    """``R_n(u'_m)`` on the diagonal ``n = n_of_m(m)`` against ``R(u)``."""
    params = params or ModelParams(alpha=alpha)
    ref = analytic_regularity(scene, params.alpha)
    rows = []
    for m in sorted(m_range):
        n = n_of_m(m)
        if grid_level is not None and grid_level < n:
            raise ValueError("mollifier grid coarser than the lattice level")
        fn = mollified_field(scene, m)
        img = sample_field(fn, scene.curves, scene.domain, system, n)
        fld = two_scale(img, system, params)
        R = regularity_energy(fld, params.p)
        rows.append({"m": m, "n": n, "delta": fn.delta, "R_n": R, "R_ref": ref, "slack": R - ref})
    return rows
