"""MRA wavelet frame systems: filter banks, the cascade algorithm and derived data.

Axis convention
---------------
Every 2-D array in this package is indexed ``[i, j]`` with axis 0 running along
the first physical coordinate ``x1`` and axis 1 along ``x2``.  The tensor channel
``(a, b)`` is ``h_a`` along axis 0 times ``h_b`` along axis 1, so channel
``(1, 0)`` differentiates along ``x1`` and ``(0, 1)`` along ``x2``.

Samples
-------
The cascade produces values on the dyadic grid ``x_q = q * 2**-depth``.  The
value stored at ``q`` is the value of the cascade iterate on the half-open cell
``[x_q, x_q + 2**-depth)``, i.e. iterates are piecewise constant.  All
quadratures here integrate that piecewise-constant representation exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
import math

import numpy as np


class FrameError(ValueError):
    """A filter bank or frame system violates a structural requirement."""


@dataclass(frozen=True)
class Filter:
    taps: np.ndarray
    offset: tuple
    label: tuple

    @property
    def support(self):
        """Inclusive index range of the taps, per axis."""
        return tuple((o, o + s - 1) for o, s in zip(self.offset, self.taps.shape))

    def tap_items(self):
        """Yield ``(index, value)`` for every nonzero tap."""
        for idx in zip(*np.nonzero(self.taps)):
            yield tuple(int(o + i) for o, i in zip(self.offset, idx)), float(self.taps[idx])


@dataclass(frozen=True)
class FilterBank:
    filters: tuple
    dimension: int
    dilation: int = 2
    first_order: tuple = None
    name: str = ""

    def __post_init__(self):
        if self.dilation != 2:
            raise FrameError("only dilation 2 is supported")
        if not self.filters:
            raise FrameError("empty filter bank")
        for f in self.filters:
            if f.taps.ndim != self.dimension or len(f.offset) != self.dimension:
                raise FrameError(f"filter {f.label} does not match dimension {self.dimension}")
        if abs(self.filters[0].taps.sum() - 1.0) > 1e-12:
            raise FrameError("low-pass taps must sum to 1")

    @property
    def lowpass(self):
        return self.filters[0]

    @property
    def labels(self):
        return tuple(f.label for f in self.filters)

    def channel(self, label):
        for f in self.filters:
            if f.label == tuple(label):
                return f
        raise KeyError(label)


def _filter_1d(taps, offset, label):
    return Filter(np.asarray(taps, dtype=float), (int(offset),), (int(label),))


def haar_bank():
    """Haar frame: ``h0 = [1, 1]/2``, ``h1 = [1, -1]/2`` at offsets 0, 1; phi = 1 on [0, 1]."""
    return FilterBank(
        (_filter_1d([0.5, 0.5], 0, 0), _filter_1d([0.5, -0.5], 0, 1)),
        dimension=1,
        name="haar",
    )


def linear_spline_bank():
    """Piecewise-linear frame with taps at offsets -1, 0, 1; phi is the hat on [-1, 1].

    The first-order filter is ``[s, 0, -s]`` with ``s = 1/(2*sqrt(2))``; the zero
    centre tap is what makes the unitary extension identities hold.
    """
    s = 1.0 / (2.0 * math.sqrt(2.0))
    return FilterBank(
        (
            _filter_1d([0.25, 0.5, 0.25], -1, 0),
            _filter_1d([s, 0.0, -s], -1, 1),
            _filter_1d([0.25, -0.5, 0.25], -1, 2),
        ),
        dimension=1,
        name="linear",
    )


def vanishing_order_1d(f, max_order=8, tol=1e-12):
    """Number of leading discrete moments ``sum_k h[k] k^p`` that vanish."""
    idx = np.arange(f.offset[0], f.offset[0] + f.taps.size, dtype=float)
    scale = np.abs(f.taps).sum()
    for p in range(max_order + 1):
        if abs(np.sum(f.taps * idx**p)) > tol * scale * max(1.0, np.abs(idx).max() ** p):
            return p
    return max_order + 1


def tensor_product(bank):
    """All 2-D products ``h_a (x) h_b``; channel ``(0, 0)`` first, then lexicographic."""
    if bank.dimension != 1:
        raise FrameError("tensor_product expects a 1-D bank")
    filters = []
    for fa, fb in product(bank.filters, repeat=2):
        filters.append(
            Filter(
                np.outer(fa.taps, fb.taps),
                (fa.offset[0], fb.offset[0]),
                (fa.label[0], fb.label[0]),
            )
        )
    first = None
    if len(bank.filters) > 1 and vanishing_order_1d(bank.filters[1]) == 1:
        labels = [f.label for f in filters]
        first = (labels.index((1, 0)), labels.index((0, 1)))
    return FilterBank(tuple(filters), dimension=2, first_order=first, name=f"{bank.name}2d")


def named_bank(name, tensor=True):
    """Look up a shipped bank by name (``haar`` or ``linear``)."""
    makers = {"haar": haar_bank, "linear": linear_spline_bank, "linear_spline": linear_spline_bank}
    if name not in makers:
        raise FrameError(f"unknown bank {name!r}; choose from haar, linear")
    bank = makers[name]()
    return tensor_product(bank) if tensor else bank


# ---------------------------------------------------------------- UEP


@dataclass(frozen=True)
class UepReport:
    partition_residual: float
    shift_residual: float
    n_freq: int

    def passed(self, tol=1e-12):
        return self.partition_residual <= tol and self.shift_residual <= tol


def _symbol(f, grids):
    """Evaluate ``sum_m h[m] exp(-i m . xi)`` on a tensor grid of frequencies."""
    out = np.asarray(f.taps, dtype=complex)
    # contract one axis at a time: out[m1, m2] -> out[xi1, m2] -> out[xi1, xi2]
    for axis, xi in enumerate(grids):
        m = np.arange(f.offset[axis], f.offset[axis] + f.taps.shape[axis])
        e = np.exp(-1j * np.outer(xi, m))
        out = np.tensordot(e, out, axes=([1], [axis]))
        out = np.moveaxis(out, 0, axis)
    return out


def verify_uep(bank, n_freq=256):
    """Max residuals of both unitary-extension identities on an ``n_freq`` grid per axis."""
    if n_freq < 2:
        raise ValueError("n_freq must be >= 2")
    d = bank.dimension
    xi = 2 * np.pi * np.arange(n_freq) / n_freq
    base = [_symbol(f, [xi] * d) for f in bank.filters]
    part = np.abs(sum(np.abs(s) ** 2 for s in base) - 1.0).max()
    shift = 0.0
    for nu in product((0.0, np.pi), repeat=d):
        if not any(nu):
            continue
        shifted = [_symbol(f, [xi + v for v in nu]) for f in bank.filters]
        total = sum(s * np.conj(t) for s, t in zip(base, shifted))
        shift = max(shift, float(np.abs(total).max()))
    return UepReport(float(part), shift, n_freq)


# ---------------------------------------------------------------- cascade


@dataclass(frozen=True)
class CascadeResult:
    """Dyadic samples of phi and every psi_j on one common grid.

    ``phi`` and ``psi[j]`` share ``origin`` (grid index of element ``[0, ..]``)
    and spacing ``2**-depth``.
    """

    phi: np.ndarray
    psi: tuple
    origin: tuple
    depth: int
    converged: bool
    increment: float

    @property
    def spacing(self):
        return 2.0 ** -self.depth

    def coords(self, axis):
        """Left endpoints ``x_q`` of the sample cells along ``axis``."""
        n = self.phi.shape[axis]
        return (self.origin[axis] + np.arange(n)) * self.spacing


def _cascade_phi(lowpass, depth):
    d = lowpass.taps.ndim
    v = np.ones((1,) * d)
    start = np.zeros(d, dtype=int)
    prev = None
    prev_start = None
    items = list(lowpass.tap_items())
    mins = np.array([min(m[a] for m, _ in items) for a in range(d)])
    maxs = np.array([max(m[a] for m, _ in items) for a in range(d)])
    gain = 2.0**d
    for i in range(depth):
        step = 2**i
        new_start = start + mins * step
        new_shape = np.array(v.shape) + (maxs - mins) * step
        new = np.zeros(tuple(new_shape))
        for m, h in items:
            lo = start + np.array(m) * step - new_start
            sl = tuple(slice(int(a), int(a) + s) for a, s in zip(lo, v.shape))
            new[sl] += gain * h * v
        prev, prev_start = v, start
        v, start = new, new_start
    return v, tuple(int(s) for s in start), prev, prev_start


def _upsampled_difference(v, start, prev, prev_start):
    """Sup-norm gap between the last iterate and the previous one refined by repetition."""
    if prev is None:
        return 0.0
    up = prev
    for axis in range(prev.ndim):
        up = np.repeat(up, 2, axis=axis)
    up_start = np.array(prev_start) * 2
    lo = np.minimum(up_start, np.array(start))
    hi = np.maximum(up_start + np.array(up.shape), np.array(start) + np.array(v.shape))
    a = np.zeros(tuple(hi - lo))
    b = np.zeros(tuple(hi - lo))
    a[tuple(slice(int(s - l), int(s - l) + n) for s, l, n in zip(start, lo, v.shape))] = v
    b[tuple(slice(int(s - l), int(s - l) + n) for s, l, n in zip(up_start, lo, up.shape))] = up
    return float(np.abs(a - b).max())


def cascade(bank, depth=8, tol=1e-2):
    """Refine the unit-cell indicator ``depth`` times with ``h0``; derive every psi_j.

    ``psi_j(x_q) = 2^d sum_m h_j[m] phi(2 x_q - m)`` is read off the phi samples at
    the grid index ``2q - m 2^depth``.  ``converged`` is False when the final
    refinement moved the iterate by more than ``tol`` in sup norm.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if abs(bank.lowpass.taps.sum() - 1.0) > 1e-12:
        raise FrameError("low-pass taps must sum to 1")
    d = bank.dimension
    phi, start, prev, prev_start = _cascade_phi(bank.lowpass, depth)
    increment = _upsampled_difference(phi, start, prev, prev_start)
    scale = 2**depth

    # common index box for phi and all psi_j
    lo = np.array(start)
    hi = np.array(start) + np.array(phi.shape)  # exclusive
    for f in bank.filters[1:]:
        for m, _ in f.tap_items():
            m = np.array(m)
            lo = np.minimum(lo, (np.array(start) + m * scale) // 2)
            hi = np.maximum(hi, -((-(np.array(start) + np.array(phi.shape) + m * scale)) // 2) + 1)
    lo = lo - 1
    hi = hi + 1
    shape = tuple(int(x) for x in hi - lo)
    phi_full = np.zeros(shape)
    phi_full[tuple(slice(int(s - l), int(s - l) + n) for s, l, n in zip(start, lo, phi.shape))] = phi

    grids = np.meshgrid(*[lo[a] + np.arange(shape[a]) for a in range(d)], indexing="ij")
    gain = 2.0**d
    psis = []
    for f in bank.filters:
        out = np.zeros(shape)
        for m, h in f.tap_items():
            idx = [2 * grids[a] - m[a] * scale - start[a] for a in range(d)]
            inside = np.ones(shape, dtype=bool)
            for a in range(d):
                inside &= (idx[a] >= 0) & (idx[a] < phi.shape[a])
            vals = np.zeros(shape)
            vals[inside] = phi[tuple(ix[inside] for ix in idx)]
            out += gain * h * vals
        psis.append(out)
    return CascadeResult(
        phi=phi_full,
        psi=tuple(psis),
        origin=tuple(int(x) for x in lo),
        depth=depth,
        converged=increment <= tol,
        increment=increment,
    )


# ---------------------------------------------------------------- frame system


def _closed_form_channel_integral(f):
    """``-1/2 sum_m h[m] m_axis`` for the axis the channel differentiates."""
    axis = 0 if f.label[0] == 1 else 1
    return -0.5 * sum(h * m[axis] for m, h in f.tap_items())


@dataclass
class FrameSystem:
    """A 2-D filter bank with cascade samples, anti-derivatives and derived constants.

    ``antiderivatives[j]`` holds point values at the grid nodes ``x_q`` of
    ``phi_j = (d_j)^{-1} psi_j`` for the two designated first-order channels
    (axis ``j`` integrated, the transverse axis piecewise constant).
    """

    bank: FilterBank
    samples: CascadeResult
    antiderivatives: dict
    channel_integrals: dict
    support_radius: float
    moment_tags: dict
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self):
        return self.samples.depth

    @property
    def first_order_labels(self):
        a, b = self.bank.first_order
        return self.bank.filters[a].label, self.bank.filters[b].label

    @property
    def first_order_axes(self):
        """Map channel label -> differentiated axis."""
        a, b = self.first_order_labels
        return {a: 0, b: 1}

    def psi(self, label):
        return self.samples.psi[self.bank.labels.index(tuple(label))]

    @cached_property
    def phi_unit_cells(self):
        """Integer cells ``o`` (lower corners) with ``phi`` nonzero on ``[o, o+1)^2``."""
        s = self.samples
        nz = np.argwhere(s.phi != 0)
        q = nz + np.array(s.origin)
        cells = np.unique(np.floor_divide(q, 2**s.depth), axis=0)
        return [tuple(int(v) for v in c) for c in cells]

    @cached_property
    def phi_support_box(self):
        """Closed support box of phi in integer units: ``((lo0, hi0), (lo1, hi1))``."""
        cells = np.array(self.phi_unit_cells)
        return tuple((int(cells[:, a].min()), int(cells[:, a].max()) + 1) for a in range(2))

    @cached_property
    def cell_projection(self):
        """Projection of phi on each unit cell onto ``{1, 2s-1} x {1, 2s-1}``.

        Returns ``(cells, beta)`` with ``beta[c, a, b] = (2a+1)(2b+1) int phi P_a P_b``
        where ``P_0 = 1`` and ``P_1 = 2s - 1`` on the local cell coordinate ``s``.
        """
        s = self.samples
        n = 2**s.depth
        t = np.arange(n + 1) / n
        p0 = np.diff(t)  # integral of 1 over each sub-cell
        p1 = np.diff(t * t - t)  # integral of 2s-1
        P = np.stack([p0, p1])  # (2, n)
        cells = self.phi_unit_cells
        beta = np.zeros((len(cells), 2, 2))
        for c, o in enumerate(cells):
            sl = []
            for a in range(2):
                start = o[a] * n - s.origin[a]
                sl.append(slice(start, start + n))
            block = s.phi[tuple(sl)]
            if block.shape != (n, n):
                raise FrameError("phi samples do not cover a full unit cell")
            beta[c] = np.einsum("ai,ij,bj->ab", P, block, P)
        beta *= np.array([[1.0, 3.0], [3.0, 9.0]])
        return cells, beta

    @cached_property
    def coefficient_stencil(self):
        """Inclusive tap index range shared by all channels, per axis."""
        lo = [min(f.support[a][0] for f in self.bank.filters) for a in range(2)]
        hi = [max(f.support[a][1] for f in self.bank.filters) for a in range(2)]
        return tuple(zip(lo, hi))

    @cached_property
    def coefficient_center(self):
        """Offset (in lattice units) from index ``k`` to the centre of its wavelet."""
        (lo0, hi0), (lo1, hi1) = self.phi_support_box
        st = self.coefficient_stencil
        return tuple(0.5 * (st[a][0] + st[a][1]) + 0.5 * ((lo0, lo1)[a] + (hi0, hi1)[a]) for a in range(2))

    @cached_property
    def closed_form_integrals(self):
        """Channel integrals from filter moments (independent of the cascade samples)."""
        out = {}
        for idx in self.bank.first_order:
            f = self.bank.filters[idx]
            out[f.label] = _closed_form_channel_integral(f)
        return out


def _cell_monomial_integrals(coords, dx, power):
    return ((coords + dx) ** (power + 1) - coords ** (power + 1)) / (power + 1)


def _moment_tag(psi, x0, x1, dx, max_degree=4, rel_tol=1e-9):
    scale = np.abs(psi).sum() * dx * dx
    if scale == 0:
        return None
    ext = max(np.abs(x0).max() + dx, np.abs(x1).max() + dx, 1.0)
    for deg in range(max_degree + 1):
        for a in range(deg, -1, -1):
            b = deg - a
            ma = _cell_monomial_integrals(x0, dx, a)
            mb = _cell_monomial_integrals(x1, dx, b)
            m = ma @ psi @ mb
            if abs(m) > rel_tol * scale * ext**deg:
                return (a, b)
    return None


def build_frame_system(bank, depth=8, sign_tol=1e-9):
    """Run the cascade and assemble anti-derivatives, channel integrals and constants.

    Raises :class:`FrameError` when an anti-derivative of a designated channel
    changes sign by more than ``sign_tol``.
    """
    if bank.dimension != 2 or bank.first_order is None:
        raise FrameError("build_frame_system needs a 2-D bank with designated first-order channels")
    samples = cascade(bank, depth)
    dx = samples.spacing
    anti = {}
    integrals = {}
    for idx in bank.first_order:
        f = bank.filters[idx]
        axis = 0 if f.label[0] == 1 else 1
        psi = samples.psi[idx]
        # value at node x_q is the exact integral of the piecewise-constant psi up to x_q
        csum = np.cumsum(psi, axis=axis) * dx
        A = np.zeros_like(psi)
        if axis == 0:
            A[1:] = csum[:-1]
        else:
            A[:, 1:] = csum[:, :-1]
        pos, neg = A.max(), A.min()
        if pos > sign_tol and neg < -sign_tol:
            raise FrameError(
                f"anti-derivative of channel {f.label} changes sign (range [{neg:.3g}, {pos:.3g}])"
            )
        anti[f.label] = A
        # A is piecewise linear along the axis and vanishes at both ends, so the node
        # sum is its trapezoid integral; across the axis it is cellwise constant
        integrals[f.label] = float(A.sum() * dx * dx)
        if integrals[f.label] == 0.0:
            raise FrameError(f"channel {f.label} has zero integral")
    x0 = samples.coords(0)
    x1 = samples.coords(1)
    radius = 0.0
    for f, psi in zip(bank.filters[1:], samples.psi[1:]):
        nz = np.argwhere(psi != 0)
        if nz.size == 0:
            continue
        c0 = np.concatenate([x0[nz[:, 0]], x0[nz[:, 0]] + dx])
        c1 = np.concatenate([x1[nz[:, 1]], x1[nz[:, 1]] + dx])
        radius = max(radius, float(np.sqrt(np.abs(c0).max() ** 2 + np.abs(c1).max() ** 2)))
        # tighter: farthest actual corner
        corners = []
        for s0 in (0.0, dx):
            for s1 in (0.0, dx):
                corners.append(np.hypot(x0[nz[:, 0]] + s0, x1[nz[:, 1]] + s1))
        radius = min(radius, float(np.max(corners))) if radius else float(np.max(corners))
    tags = {f.label: _moment_tag(psi, x0, x1, dx) for f, psi in zip(bank.filters, samples.psi)}
    return FrameSystem(
        bank=bank,
        samples=samples,
        antiderivatives=anti,
        channel_integrals=integrals,
        support_radius=radius,
        moment_tags=tags,
    )


def frame_system(name="haar", depth=8):
    """Shortcut: shipped bank by name, tensorised and assembled."""
    key = (name, depth)
    if key not in _SYSTEM_CACHE:
        _SYSTEM_CACHE[key] = build_frame_system(named_bank(name), depth)
    return _SYSTEM_CACHE[key]


_SYSTEM_CACHE = {}


# ---------------------------------------------------------------- robust support


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    nu: tuple
    shift: tuple
    integrals: tuple


def _square_area_above(t, nu0, nu1):
    """Area of ``{s in [0,1]^2 : s0*nu0 + s1*nu1 >= t}`` (vectorised over ``t``)."""
    t = np.asarray(t, dtype=float)
    # reflect negative components: s -> 1 - s flips the sign and shifts t
    if nu0 < 0:
        t = t - nu0
        nu0 = -nu0
    if nu1 < 0:
        t = t - nu1
        nu1 = -nu1
    a, b = sorted((nu0, nu1))
    if b == 0:
        return np.where(t <= 0, 1.0, 0.0)
    if a < 1e-15:
        return np.clip(1.0 - t / b, 0.0, 1.0)

    def G(x):
        x = np.maximum(x, 0.0)
        return 0.5 * x * x

    below = (G(t) - G(t - a) - G(t - b) + G(t - a - b)) / (a * b)
    return 1.0 - np.clip(below, 0.0, 1.0)


def halfplane_integrals(system, nu, shifts):
    """``I_j(nu, a) = int_{x.nu >= 0} psi_j(x - a) dx`` for each shift ``a`` (rows of ``shifts``).

    Exact for the piecewise-constant psi samples.
    """
    s = system.samples
    dx = s.spacing
    x0 = s.coords(0)
    x1 = s.coords(1)
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    thr = -(shifts @ np.asarray(nu, dtype=float))  # need z.nu >= -a.nu
    out = []
    for label in system.first_order_labels:
        psi = system.psi(label)
        nz = np.nonzero(psi)
        w = psi[nz] * dx * dx
        base = x0[nz[0]] * nu[0] + x1[nz[1]] * nu[1]  # projection of lower-left corner
        order = np.argsort(base)
        base = base[order]
        w = w[order]
        tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
        lo_ext = min(0.0, nu[0] * dx) + min(0.0, nu[1] * dx)
        hi_ext = max(0.0, nu[0] * dx) + max(0.0, nu[1] * dx)
        vals = np.empty(len(thr))
        for k, t in enumerate(thr):
            # cells with base + lo_ext >= t are fully above; base + hi_ext <= t fully below
            i_full = np.searchsorted(base, t - lo_ext, side="left")
            i_part = np.searchsorted(base, t - hi_ext, side="right")
            total = tail[i_full]
            if i_full > i_part:
                frac = _square_area_above((t - base[i_part:i_full]) / dx, nu[0], nu[1])
                total += float(np.dot(w[i_part:i_full], frac))
            vals[k] = total
        out.append(vals)
    return np.stack(out, axis=1)


def robust_support_delta(system, angle_steps=64, shift_steps=16, box=(-2.0, 1.0), angles=None):
    """Grid estimate of ``inf_{nu, a} (I_1^2 + I_2^2)^{1/2}`` over ``a in box^2``.

    Angles are ``2 pi i / angle_steps``; shifts are ``shift_steps + 1`` equispaced
    points per axis including both box ends, so doubling either count refines
    the grid by nesting and can only lower the estimate.
    """
    if (angles is None and angle_steps < 8) or shift_steps < 8:
        raise ValueError("need at least 8 steps")
    lo, hi = box
    a1 = np.linspace(lo, hi, shift_steps + 1)
    A0, A1 = np.meshgrid(a1, a1, indexing="ij")
    shifts = np.stack([A0.ravel(), A1.ravel()], axis=1)
    if angles is None:
        angles = 2 * np.pi * np.arange(angle_steps) / angle_steps
    best = (np.inf, None, None, None)
    for th in np.atleast_1d(angles):
        nu = (math.cos(th), math.sin(th))
        I = halfplane_integrals(system, nu, shifts)
        norm = np.sqrt((I**2).sum(axis=1))
        k = int(np.argmin(norm))
        if norm[k] < best[0]:
            best = (float(norm[k]), nu, tuple(shifts[k]), tuple(I[k]))
    return DeltaEstimate(*best)


def antiderivative_line_integral(system, label, nu, a, step=None):
    """``-nu_j * int_{x.nu = 0} phi_j(x - a) dH^1``: the line-integral form of ``I_j``."""
    s = system.samples
    dx = s.spacing
    axis = system.first_order_axes[tuple(label)]
    A = system.antiderivatives[tuple(label)]
    if step is None:
        step = dx / 8
    tau = np.array([-nu[1], nu[0]])
    extent = np.abs(np.array([s.coords(0)[[0, -1]], s.coords(1)[[0, -1]]])).max() * 2 + 2 * np.abs(a).max() + 1
    t = np.arange(-extent, extent, step) + step / 2
    z = np.outer(t, tau) - np.asarray(a, dtype=float)
    # continuous (linear) along the integrated axis, cellwise constant across
    u = (z[:, axis] / dx) - s.origin[axis]
    v = np.floor(z[:, 1 - axis] / dx).astype(int) - s.origin[1 - axis]
    i0 = np.floor(u).astype(int)
    frac = u - i0
    n_ax = A.shape[axis]
    n_tr = A.shape[1 - axis]
    ok = (i0 >= 0) & (i0 + 1 < n_ax) & (v >= 0) & (v < n_tr)
    vals = np.zeros(len(t))
    if axis == 0:
        vals[ok] = (1 - frac[ok]) * A[i0[ok], v[ok]] + frac[ok] * A[i0[ok] + 1, v[ok]]
    else:
        vals[ok] = (1 - frac[ok]) * A[v[ok], i0[ok]] + frac[ok] * A[v[ok], i0[ok] + 1]
    return -nu[axis] * float(vals.sum() * step)


# ---------------------------------------------------------------- FRMS container

FRMS_MAGIC = b"FRMS"
FRMS_VERSION = 1


def save_frame_system(system, path):
    """Write the binary ``FRMS`` container (layout documented in README)."""
    import struct

    bank = system.bank
    s = system.samples
    with open(path, "wb") as fh:
        fh.write(FRMS_MAGIC)
        fh.write(struct.pack("<IIII", FRMS_VERSION, bank.dimension, len(bank.filters), s.depth))
        fo = bank.first_order or (-1, -1)
        fh.write(struct.pack("<ii", *fo))
        fh.write(struct.pack("<ii", *s.origin))
        fh.write(struct.pack("<II", *s.phi.shape))
        fh.write(struct.pack("<d", system.support_radius))
        name = bank.name.encode()
        fh.write(struct.pack("<I", len(name)) + name)
        for f in bank.filters:
            fh.write(struct.pack("<ii", *f.label))
            fh.write(struct.pack("<ii", *f.offset))
            fh.write(struct.pack("<II", *f.taps.shape))
            fh.write(np.ascontiguousarray(f.taps, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(s.phi, dtype="<f8").tobytes())
        for psi in s.psi:
            fh.write(np.ascontiguousarray(psi, dtype="<f8").tobytes())
        for idx in bank.first_order or ():
            label = bank.filters[idx].label
            fh.write(struct.pack("<d", system.channel_integrals[label]))
            fh.write(np.ascontiguousarray(system.antiderivatives[label], dtype="<f8").tobytes())


def load_frame_system(path):
    """Read an ``FRMS`` container back into a :class:`FrameSystem`."""
    import struct

    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != FRMS_MAGIC:
        raise FrameError("not an FRMS file")
    pos = 4

    def take(fmt):
        nonlocal pos
        out = struct.unpack_from(fmt, data, pos)
        pos += struct.calcsize(fmt)
        return out

    def take_array(shape):
        nonlocal pos
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).astype(float)
        pos += 8 * n
        return arr

    version, dim, nch, depth = take("<IIII")
    if version != FRMS_VERSION:
        raise FrameError(f"unsupported FRMS version {version}")
    fo = take("<ii")
    origin = take("<ii")
    shape = take("<II")
    (radius,) = take("<d")
    (nlen,) = take("<I")
    name = data[pos : pos + nlen].decode()
    pos += nlen
    filters = []
    for _ in range(nch):
        label = take("<ii")
        offset = take("<ii")
        tshape = take("<II")
        filters.append(Filter(take_array(tshape), tuple(offset), tuple(label)))
    bank = FilterBank(tuple(filters), dimension=dim, first_order=None if fo[0] < 0 else tuple(fo), name=name)
    phi = take_array(shape)
    psis = tuple(take_array(shape) for _ in range(nch))
    anti = {}
    integrals = {}
    for idx in bank.first_order or ():
        label = bank.filters[idx].label
        (integrals[label],) = take("<d")
        anti[label] = take_array(shape)
    samples = CascadeResult(phi, psis, tuple(origin), depth, True, 0.0)
    dx = samples.spacing
    tags = {f.label: _moment_tag(p, samples.coords(0), samples.coords(1), dx) for f, p in zip(filters, psis)}
    return FrameSystem(bank, samples, anti, integrals, radius, tags)
