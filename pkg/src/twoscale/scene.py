"""Analytic piecewise-smooth test scenes and the lattice sampling operator."""

from dataclasses import dataclass, field
import math
import shlex

import numpy as np

from .geometry import Curve, GeometryError, boundary_distance, curve_separation, distance_to_set
from . import geometry


class SceneError(ValueError):
    pass


# ---------------------------------------------------------------- smooth families


class SmoothField:
    """Closed-form smooth field with exact gradient.  Subclasses set ``kind``."""

    kind = "abstract"

    def __call__(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def total_variation(self, box):
        """Closed-form ``int_box |grad u|`` or None when quadrature is needed."""
        return None

    def is_affine(self):
        return False

    def spec(self):
        raise NotImplementedError

    def __add__(self, other):
        return SumField((self, other))


@dataclass(frozen=True)
class ConstantField(SmoothField):
    value: float = 0.0
    kind = "constant"

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.value))

    def grad(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy()

    def total_variation(self, box):
        return 0.0

    def is_affine(self):
        return True

    def spec(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class AffineField(SmoothField):
    a: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    kind = "affine"

    def __call__(self, x, y):
        return self.a + self.b1 * np.asarray(x) + self.b2 * np.asarray(y)

    def grad(self, x, y):
        shape = np.broadcast(x, y).shape
        return np.full(shape, float(self.b1)), np.full(shape, float(self.b2))

    def total_variation(self, box):
        (x0, x1), (y0, y1) = box
        return math.hypot(self.b1, self.b2) * (x1 - x0) * (y1 - y0)

    def is_affine(self):
        return True

    def spec(self):
        return {"kind": "affine", "a": self.a, "b1": self.b1, "b2": self.b2}


@dataclass(frozen=True)
class SinusoidField(SmoothField):
    """``amplitude * sin(2 pi kx x) * sin(2 pi ky y)``."""

    amplitude: float = 1.0
    kx: float = 1.0
    ky: float = 1.0
    kind = "sinusoid"

    def __call__(self, x, y):
        return self.amplitude * np.sin(2 * np.pi * self.kx * np.asarray(x)) * np.sin(2 * np.pi * self.ky * np.asarray(y))

    def grad(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        wx, wy = 2 * np.pi * self.kx, 2 * np.pi * self.ky
        gx = self.amplitude * wx * np.cos(wx * x) * np.sin(wy * y)
        gy = self.amplitude * wy * np.sin(wx * x) * np.cos(wy * y)
        return gx, gy

    def spec(self):
        return {"kind": "sinusoid", "amplitude": self.amplitude, "kx": self.kx, "ky": self.ky}


@dataclass(frozen=True)
class BumpField(SmoothField):
    """``amplitude * (1 - |x - c|^2 / R^2)^3`` inside the disk of radius ``R``, zero outside."""

    center: tuple = (0.5, 0.5)
    radius: float = 0.25
    amplitude: float = 1.0
    kind = "bump"

    def _s(self, x, y):
        return ((np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2) / self.radius**2

    def __call__(self, x, y):
        s = self._s(x, y)
        return np.where(s < 1, self.amplitude * np.clip(1 - s, 0, None) ** 3, 0.0)

    def grad(self, x, y):
        s = self._s(x, y)
        f = np.where(s < 1, -6 * self.amplitude * np.clip(1 - s, 0, None) ** 2 / self.radius**2, 0.0)
        return f * (np.asarray(x) - self.center[0]), f * (np.asarray(y) - self.center[1])

    def _inside(self, box):
        (x0, x1), (y0, y1) = box
        c, R = self.center, self.radius
        return x0 <= c[0] - R and c[0] + R <= x1 and y0 <= c[1] - R and c[1] + R <= y1

    def total_variation(self, box):
        if self._inside(box):
            return 32 * math.pi * abs(self.amplitude) * self.radius / 35
        return None

    def l1_norm(self):
        return abs(self.amplitude) * math.pi * self.radius**2 / 4

    def spec(self):
        return {"kind": "bump", "center": list(self.center), "radius": self.radius, "amplitude": self.amplitude}


@dataclass(frozen=True)
class SumField(SmoothField):
    parts: tuple = ()
    kind = "sum"

    def __call__(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for p in self.parts:
            out = out + p(x, y)
        return out

    def grad(self, x, y):
        gx = np.zeros(np.broadcast(x, y).shape)
        gy = gx.copy()
        for p in self.parts:
            a, b = p.grad(x, y)
            gx, gy = gx + a, gy + b
        return gx, gy

    def total_variation(self, box):
        nonconst = [p for p in self.parts if not isinstance(p, ConstantField)]
        if len(nonconst) == 0:
            return 0.0
        if len(nonconst) == 1:
            return nonconst[0].total_variation(box)
        return None

    def is_affine(self):
        return all(p.is_affine() for p in self.parts)

    def spec(self):
        return [p.spec() for p in self.parts]


_FAMILIES = {
    "constant": ConstantField,
    "affine": AffineField,
    "sinusoid": SinusoidField,
    "bump": BumpField,
}


def smooth_from_spec(spec):
    """Build a smooth field from a dict ``{"kind": ..., params}`` or a list of them (summed)."""
    if spec is None:
        return ConstantField(0.0)
    if isinstance(spec, SmoothField):
        return spec
    if isinstance(spec, (list, tuple)):
        parts = tuple(smooth_from_spec(s) for s in spec)
        return parts[0] if len(parts) == 1 else SumField(parts)
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind not in _FAMILIES:
        raise SceneError(f"unknown smooth family {kind!r}")
    if "center" in spec:
        spec["center"] = tuple(float(v) for v in spec["center"])
    return _FAMILIES[kind](**spec)


def gradient_tv_quadrature(field, box, tol=1e-8, min_level=2, max_level=9):
    """``int_box |grad u|`` by composite 8-point Gauss on ``2^L x 2^L`` panels.

    Refines until two successive levels agree to ``tol``; returns ``(value, level)``.
    """
    xg, wg = np.polynomial.legendre.leggauss(8)
    (x0, x1), (y0, y1) = box
    prev = None
    for L in range(min_level, max_level + 1):
        m = 2**L
        ex = np.linspace(x0, x1, m + 1)
        ey = np.linspace(y0, y1, m + 1)
        hx, hy = (x1 - x0) / m, (y1 - y0) / m
        px = (ex[:-1, None] + 0.5 * hx * (xg + 1)).ravel()
        py = (ey[:-1, None] + 0.5 * hy * (xg + 1)).ravel()
        wx = np.tile(wg * 0.5 * hx, m)
        wy = np.tile(wg * 0.5 * hy, m)
        total = 0.0
        chunk = max(1, 2**20 // len(py))
        for s in range(0, len(px), chunk):
            X, Y = np.meshgrid(px[s : s + chunk], py, indexing="ij")
            gx, gy = field.grad(X, Y)
            total += float(wx[s : s + chunk] @ np.hypot(gx, gy) @ wy)
        if prev is not None and abs(total - prev) <= tol:
            return total, L
        prev = total
    return prev, max_level


# ---------------------------------------------------------------- scenes


def _curve_from_spec(spec):
    if isinstance(spec, Curve):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind")
    rho = float(spec.pop("rho", 1.0 if kind in geometry.JUMP_KINDS else 0.0))
    makers = {
        "circle": lambda: geometry.circle(spec["center"], spec["radius"], rho),
        "polygon": lambda: geometry.polygon(spec["vertices"], rho),
        "line": lambda: geometry.line(spec["point"], spec["direction"], rho),
        "segment": lambda: geometry.segment(spec["a"], spec["b"]),
        "arc": lambda: geometry.arc(spec["center"], spec["radius"], spec["start"], spec["span"]),
    }
    if kind not in makers:
        raise SceneError(f"unknown curve kind {kind!r}")
    return makers[kind]()


def curve_spec(curve):
    out = {"kind": curve.kind, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in curve.params.items()}}
    if curve.carries_jump:
        out["rho"] = curve.rho
    return out


@dataclass(frozen=True)
class Scene:
    domain: tuple
    smooth: SmoothField
    curves: tuple
    tube_width: float = 1 / 16
    margin: float = 1 / 16
    name: str = ""
    smooth_tv: float = field(default=None, compare=False)

    @property
    def area(self):
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) * (y1 - y0)

    def evaluate(self, pts):
        """Field values at points ``(..., 2)``; on a curve the "+" side is excluded (open regions)."""
        pts = np.asarray(pts, dtype=float)
        out = self.smooth(pts[..., 0], pts[..., 1])
        for c in self.curves:
            out = out + c.rho * c.region(pts)
        return out

    def __call__(self, pts):
        return self.evaluate(pts)

    def distance(self, pts):
        return distance_to_set(self.curves, pts, self.domain)

    def jump_length(self):
        return sum(c.length(self.domain) for c in self.curves)

    def to_spec(self):
        return {
            "domain": [list(self.domain[0]), list(self.domain[1])],
            "smooth": self.smooth.spec(),
            "curves": [curve_spec(c) for c in self.curves],
            "tube_width": self.tube_width,
            "margin": self.margin,
            "name": self.name,
        }


def make_scene(domain=((0.0, 1.0), (0.0, 1.0)), smooth_spec=None, curve_specs=(), tube_width=1 / 16, margin=1 / 16,
               name=""):
    """Validate and assemble a scene.

    Closed curves must stay ``margin`` away from the domain boundary; lines are
    only required to cross the domain.  Distinct curves must be at least
    ``tube_width`` apart.
    """
    (x0, x1), (y0, y1) = domain = tuple(tuple(map(float, d)) for d in domain)
    if not (x1 > x0 and y1 > y0):
        raise SceneError("empty domain")
    smooth = smooth_from_spec(smooth_spec)
    try:
        curves = tuple(_curve_from_spec(c) for c in curve_specs)
    except (GeometryError, KeyError) as exc:
        raise SceneError(f"invalid curve: {exc}") from exc
    for c in curves:
        if not c.carries_jump:
            raise SceneError(f"{c.kind} curves cannot be used as jump curves in a scene")
        if c.kind == "line":
            if c.clipped_line(domain) is None:
                raise SceneError("line does not cross the domain")
        elif boundary_distance(c, domain) < margin:
            raise SceneError(f"{c.kind} curve is closer than {margin} to the domain boundary")
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            if curve_separation(curves[i], curves[j], domain) < tube_width:
                raise SceneError(f"curves {i} and {j} are closer than the tube width {tube_width}")
    tv = smooth.total_variation(domain)
    return Scene(domain, smooth, curves, float(tube_width), float(margin), name, tv)


def disk_scene(radius=0.25, rho=1.0, center=(0.5, 0.5), smooth=None):
    return make_scene(smooth_spec=smooth, curve_specs=[{"kind": "circle", "center": center, "radius": radius, "rho": rho}],
                      name="disk")


def sinusoid_scene(amplitude=1.0, kx=1.0, ky=1.0):
    return make_scene(smooth_spec={"kind": "sinusoid", "amplitude": amplitude, "kx": kx, "ky": ky}, name="sinusoid")


def halfplane_scene(angle=0.0, rho=1.0, point=(0.5, 0.5)):
    """Jump of height ``rho`` on the side ``x . nu > point . nu`` with ``nu = (cos angle, sin angle)``."""
    # the "+" side is left of the direction, so rotate the normal clockwise
    direction = (math.sin(angle), -math.cos(angle))
    return make_scene(curve_specs=[{"kind": "line", "point": point, "direction": direction, "rho": rho}],
                      name="halfplane")


def evaluate(scene, pts):
    return scene.evaluate(pts)


def analytic_regularity(scene, alpha, tol=1e-8):
    """``int |grad u|`` off the jump set plus ``alpha`` times the jump length inside the domain."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    tv = scene.smooth_tv
    if tv is None:
        tv, _ = gradient_tv_quadrature(scene.smooth, scene.domain, tol=tol)
    return tv + alpha * scene.jump_length()


# ---------------------------------------------------------------- lattice images


@dataclass
class LatticeImage:
    """Values on the level-``n`` lattice ``O_n``.

    ``values[i, j]`` sits at the physical point ``h * (index0 + (i, j))``.
    ``mask`` marks the interior sublattice ``K_n``; ``observed`` (optional)
    flags which points carry data, for inpainting.
    """

    level: int
    values: np.ndarray
    mask: np.ndarray
    index0: tuple
    domain: tuple
    observed: np.ndarray = None

    @property
    def h(self):
        return 2.0 ** -self.level

    @property
    def shape(self):
        return self.values.shape

    def points(self):
        i = (self.index0[0] + np.arange(self.shape[0])) * self.h
        j = (self.index0[1] + np.arange(self.shape[1])) * self.h
        return np.stack(np.meshgrid(i, j, indexing="ij"), axis=-1)

    def valid(self):
        """Points that are interior and observed."""
        return self.mask if self.observed is None else self.mask & self.observed

    def copy(self, values=None):
        return LatticeImage(
            self.level,
            self.values.copy() if values is None else np.asarray(values, dtype=float),
            self.mask.copy(),
            tuple(self.index0),
            self.domain,
            None if self.observed is None else self.observed.copy(),
        )


def lattice_layout(domain, system, n):
    """Index range of ``O_n`` and the interior mask ``K_n`` for a frame system."""
    h = 2.0**-n
    (x0, x1), (y0, y1) = domain
    eps = 1e-9
    lo = (math.ceil(x0 / h - eps), math.ceil(y0 / h - eps))
    hi = (math.floor(x1 / h + eps), math.floor(y1 / h + eps))
    shape = (hi[0] - lo[0] + 1, hi[1] - lo[1] + 1)
    if min(shape) < 1:
        raise SceneError("domain too small for level n")
    box = system.phi_support_box
    masks = []
    for a, (l, u) in enumerate(((x0, x1), (y0, y1))):
        k = lo[a] + np.arange(shape[a])
        masks.append((k + box[a][0] >= l / h - eps) & (k + box[a][1] <= u / h + eps))
    return lo, shape, masks[0][:, None] & masks[1][None, :]


def empty_image(domain, system, n):
    lo, shape, mask = lattice_layout(domain, system, n)
    return LatticeImage(n, np.zeros(shape), mask, lo, tuple(tuple(d) for d in domain))


_G2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


def _legendre_weights(s):
    """Values of ``P_0 = 1`` and ``P_1 = 2s - 1`` at local coordinates ``s``."""
    return np.stack([np.ones_like(s), 2 * s - 1])


def _cell_moments(fn, cells, h, sub_origin, width, rule):
    """``int_{sub-square} u * P_a(s0) P_b(s1) ds`` for sub-squares of unit cells.

    ``cells`` (N, 2) integer cell indices; ``sub_origin`` (N, 2) local lower-left
    corners in [0, 1); ``width`` sub-square width (unit-cell units); ``rule`` is
    ``(nodes, weights)`` on [0, 1].  Returns (N, 2, 2).
    """
    nodes, weights = rule
    s0 = sub_origin[:, 0:1] + width * nodes[None, :]  # (N, q)
    s1 = sub_origin[:, 1:2] + width * nodes[None, :]
    X = h * (cells[:, 0:1, None] + s0[:, :, None])
    Y = h * (cells[:, 1:2, None] + s1[:, None, :])
    X, Y = np.broadcast_arrays(X, Y)
    vals = fn(np.stack([X, Y], axis=-1))  # (N, q, q)
    w = width * weights
    P0 = _legendre_weights(s0) * w  # (2, N, q)
    P1 = _legendre_weights(s1) * w
    return np.einsum("anq,nqr,bnr->nab", P0, vals, P1)


def _crossed(curves, centers, half_diag):
    if not curves:
        return np.zeros(len(centers), dtype=bool)
    return distance_to_set(curves, centers) <= half_diag * (1 + 1e-9)


def sample_field(fn, curves, domain, system, n, Q=6, chunk=1 << 16):
    """``T_n u[k] = 2^n <u, phi_{n,k}>`` for a field ``fn(points) -> values``.

    Unit cells of the pixel grid (in ``h = 2^-n`` units) that no curve crosses use a
    2x2 Gauss rule; crossed cells are split by a quadtree down to width
    ``2^-Q`` with a 4x4 midpoint rule on the crossed leaves.
    """
    h = 2.0**-n
    img = empty_image(domain, system, n)
    cells_off, beta = system.cell_projection
    lo = np.array(img.index0)
    (x0, x1), (y0, y1) = domain
    c_lo = np.array([math.ceil(x0 / h - 1e-9), math.ceil(y0 / h - 1e-9)])
    c_hi = np.array([math.floor(x1 / h + 1e-9), math.floor(y1 / h + 1e-9)])  # exclusive
    cshape = tuple(int(v) for v in c_hi - c_lo)
    gi, gj = np.meshgrid(c_lo[0] + np.arange(cshape[0]), c_lo[1] + np.arange(cshape[1]), indexing="ij")
    cells = np.stack([gi.ravel(), gj.ravel()], axis=1)
    mu = np.zeros((len(cells), 2, 2))
    gauss = (_G2, np.array([0.5, 0.5]))
    for s in range(0, len(cells), chunk):
        c = cells[s : s + chunk]
        mu[s : s + chunk] = _cell_moments(fn, c, h, np.zeros((len(c), 2)), 1.0, gauss)

    # adaptive refinement of crossed cells
    crossed = np.nonzero(_crossed(curves, h * (cells + 0.5), h * math.sqrt(0.5)))[0]
    if len(crossed):
        mu[crossed] = 0.0
        mid4 = ((np.arange(4) + 0.5) / 4, np.full(4, 0.25))
        owner = crossed
        origin = np.zeros((len(crossed), 2))
        width = 1.0
        quarter = np.array([[0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5]])
        for level in range(Q + 1):
            if level > 0:
                centers = h * (cells[owner] + origin + 0.5 * width)
                hit = _crossed(curves, centers, h * width * math.sqrt(0.5))
                smooth_leaf = ~hit
                for s in range(0, int(smooth_leaf.sum()), chunk):
                    idx = np.nonzero(smooth_leaf)[0][s : s + chunk]
                    np.add.at(mu, owner[idx], _cell_moments(fn, cells[owner[idx]], h, origin[idx], width, gauss))
                owner, origin = owner[hit], origin[hit]
            if level == Q:
                for s in range(0, len(owner), chunk):
                    sl = slice(s, s + chunk)
                    np.add.at(mu, owner[sl], _cell_moments(fn, cells[owner[sl]], h, origin[sl], width, mid4))
                break
            width *= 0.5
            owner = np.repeat(owner, 4)
            origin = np.repeat(origin, 4, axis=0) + np.tile(quarter * (2 * width), (len(origin), 1))
    mu = mu.reshape(cshape + (2, 2))

    out = np.zeros(img.shape)
    ki, kj = np.nonzero(img.mask)
    kk = np.stack([ki, kj], axis=1) + lo
    for o, b in zip(cells_off, beta):
        idx = kk + np.array(o) - c_lo
        out[ki, kj] += np.einsum("nab,ab->n", mu[idx[:, 0], idx[:, 1]], b)
    img.values = out
    return img


def sample(scene, system, n, Q=6):
    """Lattice image ``T_n u`` of a scene."""
    if 2.0**-n * system.support_radius >= scene.margin and any(c.kind != "line" for c in scene.curves):
        raise SceneError("pixel support exceeds the scene margin; increase n")
    return sample_field(scene.evaluate, scene.curves, scene.domain, system, n, Q)


# ---------------------------------------------------------------- mollifier


def clamp_spline(d, delta):
    """``g(d)``: identity on [0, delta], constant 2 delta beyond 2 delta, cubic blend between.

    The blend is ``delta * (1 + H(t))`` with ``H(t) = t + t^2 - t^3`` and
    ``t = (d - delta) / delta``; its slope peaks at 4/3.
    """
    d = np.asarray(d, dtype=float)
    t = np.clip((d - delta) / delta, 0.0, 1.0)
    blend = delta * (1 + t + t * t - t**3)
    return np.where(d <= delta, d, np.where(d >= 2 * delta, 2 * delta, blend))


def _bump_profile(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r < 1, np.exp(-1.0 / np.clip(1 - r * r, 1e-300, None)), 0.0)


def polar_rule(n_radial=16, n_angular=32):
    """Nodes ``y`` (N, 2) in the unit disk and weights summing to 1 for the radial bump."""
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * (xr + 1)
    wr = 0.5 * wr * r * _bump_profile(r)
    th = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    y = np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1).reshape(-1, 2)
    w = np.repeat(wr, n_angular) / n_angular
    return y, w / w.sum()


def mollified_field(scene, m, n_radial=16, n_angular=32):
    """Callable ``pts -> u'_m(pts)`` for the distance-adapted mollification of ``scene``."""
    if not scene.curves:
        raise SceneError("mollifier needs at least one curve")
    if m < 1:
        raise ValueError("m must be >= 1")
    delta = 2.0**-m * scene.margin
    if 2 * delta > scene.margin:
        raise SceneError("mollifier width exceeds the scene margin")
    y, w = polar_rule(n_radial, n_angular)
    affine = scene.smooth.is_affine()

    def fn(pts, chunk=1 << 12):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        d = scene.distance(flat)
        r = clamp_spline(d, delta)
        out = scene.evaluate(flat)
        # the averaged ball avoids every curve when r <= d, so the jump part is exact there,
        # and a symmetric average of an affine field is the centre value
        need = (r > d) if affine else (r > 0)
        idx = np.nonzero(need)[0]
        for s in range(0, len(idx), chunk):
            ii = idx[s : s + chunk]
            q = flat[ii, None, :] - r[ii, None, None] * y[None, :, :]
            out[ii] = scene.evaluate(q) @ w
        return out.reshape(pts.shape[:-1])

    fn.delta = delta
    return fn


def nonhomogeneous_mollify(scene, m, grid_level):
    """Samples of ``u'_m`` at the cell centres of the level-``grid_level`` grid inside the domain.

    Returns ``(points, values)`` with shapes (N0, N1, 2) and (N0, N1).
    """
    fn = mollified_field(scene, m)
    h = 2.0**-grid_level
    (x0, x1), (y0, y1) = scene.domain
    xs = np.arange(x0 + h / 2, x1, h)
    ys = np.arange(y0 + h / 2, y1, h)
    P = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    return P, fn(P)


# ---------------------------------------------------------------- scene file


def _parse_value(text):
    if "," in text:
        return [float(v) for v in text.split(",") if v]
    try:
        return float(text)
    except ValueError:
        return text


def _parse_params(tokens):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise SceneError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k == "vertices":
            vals = [float(t) for t in v.replace(";", ",").split(",") if t]
            out[k] = [tuple(vals[i : i + 2]) for i in range(0, len(vals), 2)]
        else:
            out[k] = _parse_value(v)
    return out


def parse_scene(text):
    """Parse the plain-text scene format (see README for the grammar)."""
    domain = ((0.0, 1.0), (0.0, 1.0))
    smooth, curves, extra = [], [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep or " " in key:
            raise SceneError(f"line {lineno}: expected 'key = value'")
        tokens = shlex.split(rest)
        try:
            if key == "domain":
                v = [float(t) for t in tokens]
                if len(v) != 4:
                    raise SceneError("domain needs x0 x1 y0 y1")
                domain = ((v[0], v[1]), (v[2], v[3]))
            elif key == "smooth":
                smooth.append({"kind": tokens[0], **_parse_params(tokens[1:])})
            elif key == "curve":
                curves.append({"kind": tokens[0], **_parse_params(tokens[1:])})
            elif key in ("tube_width", "margin"):
                extra[key] = float(tokens[0])
            elif key == "name":
                extra[key] = tokens[0]
            else:
                raise SceneError(f"unknown key {key!r}")
        except (IndexError, ValueError) as exc:
            raise SceneError(f"line {lineno}: {exc}") from exc
    return make_scene(domain, smooth or None, curves, **extra)


def load_scene(path):
    with open(path) as fh:
        return parse_scene(fh.read())


def format_scene(scene):
    """Inverse of :func:`parse_scene`."""

    def fmt(v):
        if isinstance(v, (list, tuple)):
            if v and isinstance(v[0], (list, tuple)):
                return ";".join(",".join(repr(float(a)) for a in p) for p in v)
            return ",".join(repr(float(a)) for a in v)
        return repr(float(v)) if isinstance(v, (int, float)) else str(v)

    (x0, x1), (y0, y1) = scene.domain
    lines = [f"domain = {x0!r} {x1!r} {y0!r} {y1!r}"]
    if scene.name:
        lines.append(f"name = {scene.name}")
    lines.append(f"tube_width = {scene.tube_width!r}")
    lines.append(f"margin = {scene.margin!r}")
    specs = scene.smooth.spec()
    for s in specs if isinstance(specs, list) else [specs]:
        s = dict(s)
        lines.append("smooth = " + " ".join([s.pop("kind")] + [f"{k}={fmt(v)}" for k, v in s.items()]))
    for c in scene.curves:
        s = curve_spec(c)
        lines.append("curve = " + " ".join([s.pop("kind")] + [f"{k}={fmt(v)}" for k, v in s.items()]))
    return "\n".join(lines) + "\n"
