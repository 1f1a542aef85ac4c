"""Weighted undecimated transform, channel and neighbourhood aggregation, truncation."""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import kernels
from ._pykernels import _shift_slices


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.  ``H`` and ``M`` default to ``2^(-n/2)`` and ``alpha / (2 H)``."""

    alpha: float = 1.0
    r: float = math.inf
    q: float = 2.0
    p: float = 1.0
    H: float = None
    M: float = None
    weights: dict = None

    def scale(self, n):
        return 2.0 ** (-n / 2) if self.H is None else float(self.H)

    def clamp(self, n):
        return self.alpha / (2 * self.scale(n)) if self.M is None else float(self.M)

    def to_dict(self):
        out = {k: getattr(self, k) for k in ("alpha", "r", "q", "p", "H", "M")}
        out["r"] = "inf" if out["r"] == math.inf else out["r"]
        out["q"] = "inf" if out["q"] == math.inf else out["q"]
        if self.weights is not None:
            out["weights"] = {f"{a},{b}": w for (a, b), w in self.weights.items()}
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("r", "q"):
            if k in d and d[k] in ("inf", "Infinity", None):
                d[k] = math.inf
        if d.get("weights"):
            d["weights"] = {tuple(int(v) for v in k.split(",")): float(w) for k, w in d["weights"].items()}
        return cls(**{k: d[k] for k in ("alpha", "r", "q", "p", "H", "M", "weights") if k in d})


def level_scales(n, alpha):
    H = 2.0 ** (-n / 2)
    return H, alpha / (2 * H)


@dataclass
class CoefficientStack:
    level: int
    channels: dict
    weights: dict
    mask: np.ndarray
    index0: tuple
    center: tuple

    @property
    def labels(self):
        return tuple(self.channels)

    @property
    def h(self):
        return 2.0 ** -self.level


@dataclass
class CoefficientGrid:
    """A scalar coefficient grid sharing the layout of its stack."""

    level: int
    values: np.ndarray
    mask: np.ndarray
    index0: tuple
    center: tuple

    @property
    def h(self):
        return 2.0 ** -self.level

    def locations(self):
        """Physical coordinates (N0, N1, 2) of the wavelet centre attached to each entry."""
        h = self.h
        i = (self.index0[0] + self.center[0] + np.arange(self.values.shape[0])) * h
        j = (self.index0[1] + self.center[1] + np.arange(self.values.shape[1])) * h
        return np.stack(np.meshgrid(i, j, indexing="ij"), axis=-1)


@dataclass
class TwoScaleField(CoefficientGrid):
    H: float = None
    M: float = None
    alpha: float = None
    r: float = math.inf
    q: float = 2.0
    p: float = 1.0
    meta: dict = field(default_factory=dict)

    def params(self):
        return {"level": self.level, "H": self.H, "M": self.M, "alpha": self.alpha,
                "r": "inf" if self.r == math.inf else self.r,
                "q": "inf" if self.q == math.inf else self.q, "p": self.p}


def default_weights(system, n):
    """``lambda_{n,j} = -2^(n-2) / I_j`` on the first-order channels."""
    if not system.channel_integrals:
        raise ValueError("frame system has no channel integrals")
    return {label: -(2.0 ** (n - 2)) / I for label, I in system.channel_integrals.items()}


def coefficient_mask(image_mask, system):
    """Points ``k`` whose whole stencil ``k + m`` lies on valid image points."""
    (l0, u0), (l1, u1) = system.coefficient_stencil
    out = np.ones_like(image_mask, dtype=bool)
    for m0 in range(l0, u0 + 1):
        for m1 in range(l1, u1 + 1):
            shifted = np.zeros_like(out)
            dst, src = _shift_slices(image_mask.shape, m0, m1)
            shifted[dst] = image_mask[src]
            out &= shifted
    return out


def correlate(u, f):
    """``2 * sum_m h[m] u[k + m]`` with zero outside (callers mask the border)."""
    out = np.zeros(u.shape)
    for m, t in f.tap_items():
        dst, src = _shift_slices(u.shape, *m)
        out[dst] += t * u[src]
    return 2.0 * out


def correlate_adjoint(g, f):
    """Adjoint of :func:`correlate`."""
    out = np.zeros(g.shape)
    for m, t in f.tap_items():
        dst, src = _shift_slices(g.shape, *m)
        out[src] += t * g[dst]
    return 2.0 * out


def analyze(image, system, weights=None):
    """Weighted coefficients ``c_{n,j}[k] = lambda_j * 2 sum_m h_j[m] u[k + m]``.

    The factor 2 is the quasi-affine normalisation of the finest-level filter in
    two dimensions.  Only channels with a nonzero weight are kept; entries whose
    stencil leaves the interior lattice are masked, never padded.
    """
    if weights is None:
        weights = default_weights(system, image.level)
    mask = coefficient_mask(image.mask, system)
    vals = np.where(image.mask, image.values, 0.0)
    channels = {}
    for label, w in weights.items():
        if w == 0:
            continue
        f = system.bank.channel(label)
        channels[tuple(label)] = np.where(mask, w * correlate(vals, f), 0.0)
    if not channels:
        raise ValueError("all channel weights are zero")
    return CoefficientStack(image.level, channels, dict(weights), mask, tuple(image.index0),
                            system.coefficient_center)


def channel_aggregate(stack, q=2.0):
    """Pointwise ``l^q`` norm across channels (``q = inf`` gives the max)."""
    arrs = np.stack([np.abs(c) for c in stack.channels.values()])
    if q == math.inf:
        agg = arrs.max(axis=0)
    elif q == 2:
        agg = np.sqrt((arrs**2).sum(axis=0))
    else:
        agg = (arrs**q).sum(axis=0) ** (1.0 / q)
    return CoefficientGrid(stack.level, np.where(stack.mask, agg, 0.0), stack.mask, stack.index0, stack.center)


def disk_radius2(H, h):
    """Squared neighbourhood radius in lattice units; the tiny inflation keeps boundary points."""
    return (H / h) ** 2 * (1 + 1e-12)


def neighborhood_aggregate(grid, H, r=math.inf):
    """``l^r`` accumulation over ``{l valid : |h l - h k| <= H}`` (max for ``r = inf``)."""
    if H <= 0:
        raise ValueError("H must be positive")
    rad2 = disk_radius2(H, grid.h)
    if r == math.inf:
        vals = kernels.disk_max(grid.values, grid.mask, rad2)
    else:
        vals = kernels.disk_lr_sum(grid.values, grid.mask, rad2, r)
    return replace(grid, values=vals)


def truncate(grid, M, **params):
    """Pointwise ``min(M, .)``; extra keyword arguments are recorded on the field."""
    if M <= 0:
        raise ValueError("M must be positive")
    vals = np.where(grid.mask, np.minimum(grid.values, M), 0.0)
    return TwoScaleField(grid.level, vals, grid.mask, grid.index0, grid.center, M=M, **params)


def two_scale(image, system, params=None):
    """Full pipeline ``analyze -> channel -> neighbourhood -> truncate`` for one image."""
    params = params or ModelParams()
    n = image.level
    H, M = params.scale(n), params.clamp(n)
    stack = analyze(image, system, params.weights)
    agg = neighborhood_aggregate(channel_aggregate(stack, params.q), H, params.r)
    return truncate(agg, M, H=H, alpha=params.alpha, r=params.r, q=params.q, p=params.p,
                    meta={"weights": {f"{a},{b}": w for (a, b), w in stack.weights.items()}})
