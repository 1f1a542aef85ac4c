"""Graduated non-convexity restoration and an exhaustive oracle for tiny lattices.

The surrogate replaces each non-smooth piece of the model energy by a smooth
one of width ``eps``:

* clamp ``min(M, t)``      -> ``M - (M - t) * sigmoid((M - t) / eps)``
* channel norm ``|C|_2``   -> ``sqrt(|C|^2 + eps^2) - eps``  (``|C|_1`` by the same per channel)
* disk maximum             -> ``eps * log mean exp(c / eps)``

and descends on it with backtracking gradient steps while ``eps`` is lowered.
The soft maximum is normalised by the neighbourhood size, so it moves from the
disk mean (large ``eps``) to the disk maximum (``eps -> 0``) without the
``eps * log |B|`` upward bias that would saturate the clamp early on.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np
from scipy.special import expit

from . import kernels
from ._pykernels import _shift_slices, disk_offsets
from .energy import OperatorSpec, adjoint_operator, apply_operator
from .transform import ModelParams, coefficient_mask, correlate, correlate_adjoint, default_weights, disk_radius2


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverParams:
    model: ModelParams = ModelParams()
    schedule: tuple = (10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001)
    max_iter: int = 200
    tol: float = 1e-7
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    step0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.schedule, dtype=float)
        if len(s) == 0 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise ValueError("schedule must be strictly decreasing and positive")
        if self.model.p not in (1, 2):
            raise ValueError("solver supports p in {1, 2}")
        if self.model.q not in (1, 2):
            raise ValueError("solver supports q in {1, 2}")
        if self.model.r not in (1, math.inf):
            raise ValueError("solver supports r in {1, inf}")

    def to_dict(self):
        return {"model": self.model.to_dict(), "schedule": list(self.schedule), "max_iter": self.max_iter,
                "tol": self.tol, "armijo": self.armijo, "shrink": self.shrink, "grow": self.grow,
                "step0": self.step0, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["model"] = ModelParams.from_dict(d.get("model", {}))
        if "schedule" in d:
            d["schedule"] = tuple(d["schedule"])
        return cls(**d)


@dataclass
class SolveTrace:
    rounds: list = field(default_factory=list)
    image: object = None
    wall_time: float = 0.0

    CSV_FIELDS = ("round", "eps", "iterations", "surrogate", "iterate", "energy")

    def energies(self):
        return [r["energy"] for r in self.rounds]

    def to_csv(self):
        lines = [",".join(self.CSV_FIELDS)]
        for i, r in enumerate(self.rounds):
            lines.append(f"{i},{r['eps']!r},{r['iterations']},{r['surrogate']!r},{r['iterate']!r},{r['energy']!r}")
        return "\n".join(lines) + "\n"


class EnergyModel:
    """Exact and smoothed model energy for a fixed lattice, operator and data."""

    def __init__(self, data, spec, system, model):
        self.data = data
        self.spec = spec or OperatorSpec.identity()
        self.system = system
        self.model = model
        n = data.level
        self.h2 = data.h**2
        self.H, self.M = model.scale(n), model.clamp(n)
        w = model.weights if model.weights is not None else default_weights(system, n)
        self.filters = [(system.bank.channel(lab), wt) for lab, wt in w.items() if wt != 0]
        self.free = data.mask.copy()
        self.cmask = coefficient_mask(data.mask, system)
        self.rad2 = disk_radius2(self.H, data.h)
        self.log_count = np.log(np.maximum(kernels.disk_lr_sum(np.ones(data.shape), self.cmask, self.rad2, 1.0), 1.0))
        probe = apply_operator(self.spec, data.copy(np.zeros(data.shape)), system)
        self.fmask = probe.valid() & data.valid()

    # -- pieces

    def coefficients(self, u):
        u = np.where(self.free, u, 0.0)
        return [np.where(self.cmask, w * correlate(u, f), 0.0) for f, w in self.filters]

    def residual(self, u):
        img = self.data.copy(np.where(self.free, u, 0.0))
        Au = apply_operator(self.spec, img, self.system)
        return np.where(self.fmask, Au.values - self.data.values, 0.0)

    def fidelity(self, u):
        r = self.residual(u)
        return self.h2 * float(np.sum(r * r))

    def regularity(self, u):
        C = self.coefficients(u)
        q = self.model.q
        c = np.sqrt(sum(x * x for x in C)) if q == 2 else sum(np.abs(x) for x in C)
        if self.model.r == math.inf:
            a = kernels.disk_max(c, self.cmask, self.rad2)
        else:
            a = kernels.disk_lr_sum(c, self.cmask, self.rad2, self.model.r)
        ch = np.minimum(a, self.M)[self.cmask]
        return self.h2 * float(np.sum(ch**self.model.p))

    def energy(self, u):
        return self.regularity(u) + self.fidelity(u)

    # -- smoothed energy with gradient

    def smooth(self, u, eps):
        """Surrogate value and its gradient with respect to ``u`` (zero off the free set)."""
        C = self.coefficients(u)
        cm = self.cmask
        if self.model.q == 2:
            s = np.sqrt(sum(x * x for x in C) + eps * eps)
            c = s - eps
            dC = [x / s for x in C]
        else:
            ss = [np.sqrt(x * x + eps * eps) for x in C]
            c = sum(v - eps for v in ss)
            dC = [x / v for x, v in zip(C, ss)]
        c = np.where(cm, c, 0.0)
        if self.model.r == math.inf:
            lse = kernels.disk_lse(c, cm, self.rad2, eps)
            a = np.where(cm, lse - eps * self.log_count, 0.0)
        else:
            a = kernels.disk_lr_sum(c, cm, self.rad2, 1.0)
        x = (self.M - a) / eps
        sig = expit(x)
        ch = self.M - (self.M - a) * sig
        dch = sig + x * sig * (1 - sig)
        p = self.model.p
        val_r = self.h2 * float(np.sum(ch[cm] ** p))
        g_ch = np.where(cm, self.h2 * p * ch ** (p - 1), 0.0)
        g_a = g_ch * dch
        if self.model.r == math.inf:
            g_c = kernels.disk_lse_adjoint(c, cm, self.rad2, eps, lse, g_a)
        else:
            g_c = kernels.disk_lr_sum(g_a, cm, self.rad2, 1.0)
        g_c = np.where(cm, g_c, 0.0)
        grad = np.zeros(u.shape)
        for (f, w), d in zip(self.filters, dC):
            grad += w * correlate_adjoint(g_c * d, f)
        res = self.residual(u)
        val_f = self.h2 * float(np.sum(res * res))
        grad += 2 * self.h2 * adjoint_operator(self.spec, res, self.data)
        grad = np.where(self.free, grad, 0.0)
        return val_r + val_f, grad


def smooth_energy(image, spec, system, params, eps, data=None):
    """Surrogate energy and gradient of ``image`` against ``data`` (defaults to ``image``)."""
    model = params.model if isinstance(params, SolverParams) else params
    em = EnergyModel(data if data is not None else image, spec, system, model)
    return em.smooth(image.values, eps)


def initial_guess(data):
    """Data values with unobserved interior pixels filled by repeated neighbour averaging."""
    u = np.where(data.valid(), data.values, 0.0)
    known = data.valid().copy()
    todo = data.mask & ~known
    while todo.any():
        acc = np.zeros(u.shape)
        cnt = np.zeros(u.shape)
        for d0, d1 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            acc += np.roll(np.where(known, u, 0.0), (d0, d1), axis=(0, 1))
            cnt += np.roll(known.astype(float), (d0, d1), axis=(0, 1))
        fill = todo & (cnt > 0)
        if not fill.any():
            break
        u[fill] = acc[fill] / cnt[fill]
        known |= fill
        todo &= ~fill
    return u


def _descend(em, u, eps, params):
    val, g = em.smooth(u, eps)
    step = params.step0
    it = 0
    for it in range(1, params.max_iter + 1):
        gg = float(np.sum(g * g))
        if gg == 0.0:
            break
        while True:
            cand = u - step * g
            cval, cg = em.smooth(cand, eps)
            if np.isfinite(cval) and cval <= val - params.armijo * step * gg:
                break
            step *= params.shrink
            if step < 1e-14:
                return u, val, it
        rel = (val - cval) / max(abs(val), 1e-300)
        u, val, g = cand, cval, cg
        step *= params.grow
        if rel < params.tol:
            break
    if not np.isfinite(val):
        raise SolverError("non-finite surrogate energy")
    return u, val, it


def restore(data, spec, system, params=None, init=None):
    """Graduated non-convexity: descend on the surrogate for each ``eps`` of the schedule.

    Every stage warm-starts from the previous iterate.  The returned image is the
    one with the lowest exact energy seen at a stage end, and the ``energy``
    column of the trace records that running minimum (``iterate`` holds the
    exact energy of the stage's own iterate).
    """
    params = params or SolverParams()
    t0 = time.perf_counter()
    em = EnergyModel(data, spec, system, params.model)
    u = initial_guess(data) if init is None else np.asarray(init, dtype=float).copy()
    u = np.where(data.mask, u, 0.0)
    best = em.energy(u)
    best_u = u
    if not np.isfinite(best):
        raise SolverError("non-finite energy at the initial guess")
    trace = SolveTrace()
    for eps in params.schedule:
        u, sval, its = _descend(em, u, eps, params)
        e = em.energy(u)
        if not np.isfinite(e):
            trace.image = data.copy(best_u)
            trace.wall_time = time.perf_counter() - t0
            raise SolverError(f"non-finite energy at eps={eps}")
        if e <= best:
            best, best_u = e, u
        trace.rounds.append({"eps": float(eps), "iterations": its, "surrogate": float(sval),
                             "iterate": float(e), "energy": float(best)})
    trace.image = data.copy(best_u)
    trace.wall_time = time.perf_counter() - t0
    return trace


def exact_energy_batch(U, em):
    """Exact energies of a batch of images ``U`` (B, N0, N1)."""
    cm = em.cmask
    Us = np.where(em.free, U, 0.0)
    C = []
    for f, w in em.filters:
        acc = np.zeros(Us.shape)
        for m, t in f.tap_items():
            dst, src = _shift_slices(Us.shape[1:], *m)
            acc[(slice(None),) + dst] += t * Us[(slice(None),) + src]
        C.append(np.where(cm, 2 * w * acc, 0.0))
    c = np.sqrt(sum(x * x for x in C)) if em.model.q == 2 else sum(np.abs(x) for x in C)
    work = np.where(cm, c, -np.inf if em.model.r == math.inf else 0.0)
    agg = np.full(c.shape, -np.inf) if em.model.r == math.inf else np.zeros(c.shape)
    for di, dj in disk_offsets(em.rad2):
        dst, src = _shift_slices(c.shape[1:], di, dj)
        dst = (slice(None),) + dst
        vals = work[(slice(None),) + src]
        if em.model.r == math.inf:
            np.maximum(agg[dst], vals, out=agg[dst])
        else:
            agg[dst] += vals ** em.model.r
    if em.model.r != math.inf:
        agg = agg ** (1.0 / em.model.r)
    ch = np.where(cm, np.minimum(agg, em.M), 0.0)
    R = em.h2 * np.sum(ch**em.model.p, axis=(1, 2))
    if em.spec.kind == "identity" or em.spec.kind == "mask":
        res = np.where(em.fmask, Us - em.data.values, 0.0)
    else:
        res = np.stack([em.residual(x) for x in Us])
    return R + em.h2 * np.sum(res * res, axis=(1, 2))


def brute_force_min(data, spec, system, params=None, levels=(0.0, 0.25, 0.5, 0.75, 1.0), max_points=12,
                    max_levels=6, chunk=1 << 15):
    """Exhaustive minimum of the exact energy over all level assignments of the free pixels.

    Returns ``(energy, image_values)``.
    """
    params = params or SolverParams()
    model = params.model if isinstance(params, SolverParams) else params
    em = EnergyModel(data, spec, system, model)
    idx = np.argwhere(em.free)
    levels = np.asarray(levels, dtype=float)
    if len(idx) > max_points or len(levels) > max_levels:
        raise SolverError(f"oracle budget exceeded: {len(idx)} points, {len(levels)} levels")
    npts = len(idx)
    total = len(levels) ** npts
    best, arg = math.inf, None
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        digits = (codes[:, None] // len(levels) ** np.arange(npts)[None, :]) % len(levels)
        U = np.zeros((len(codes),) + data.shape)
        U[:, idx[:, 0], idx[:, 1]] = levels[digits]
        E = exact_energy_batch(U, em)
        k = int(np.argmin(E))
        if E[k] < best:
            best, arg = float(E[k]), U[k].copy()
    return best, arg
