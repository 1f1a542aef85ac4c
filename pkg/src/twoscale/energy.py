"""Discrete model energy, processing operators and their continuum consistency."""

from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math

import numpy as np

from .scene import LatticeImage, analytic_regularity, polar_rule, sample_field
from .transform import ModelParams, two_scale


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------- operators


def poly_bump(x, y, radius):
    """Compact kernel ``(1 - |x|^2 / s^2)^2`` on the disk of radius ``s``, unit mass."""
    s2 = (np.asarray(x) ** 2 + np.asarray(y) ** 2) / radius**2
    return np.where(s2 < 1, 3.0 / (math.pi * radius**2) * np.clip(1 - s2, 0, None) ** 2, 0.0)


@dataclass(frozen=True)
class OperatorSpec:
    """``identity``, ``convolution`` or ``mask``.

    Convolution: either ``taps`` (pixel units, centred, odd size) or a physical
    ``radius`` for the compact polynomial bump, resampled per level by
    area-weighted binning.  Mask: ``region`` is ``{"kind": "box", "x": [a, b],
    "y": [c, d]}`` or ``{"kind": "halfplane", "normal": [..], "offset": t}``
    (keeps ``x . normal >= t``).
    """

    kind: str = "identity"
    taps: tuple = None
    radius: float = None
    region: dict = None

    def __post_init__(self):
        if self.kind not in ("identity", "convolution", "mask"):
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if self.kind == "convolution" and (self.taps is None) == (self.radius is None):
            raise OperatorError("convolution needs exactly one of taps or radius")
        if self.kind == "mask" and not self.region:
            raise OperatorError("mask needs a region")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def box_blur(cls, size=3):
        return cls("convolution", taps=tuple(map(tuple, np.full((size, size), 1.0 / size**2))))

    @classmethod
    def bump(cls, radius):
        return cls("convolution", radius=float(radius))

    @classmethod
    def box_mask(cls, x, y):
        return cls("mask", region={"kind": "box", "x": list(map(float, x)), "y": list(map(float, y))})

    def to_dict(self):
        d = {"kind": self.kind}
        if self.taps is not None:
            d["taps"] = [list(r) for r in self.taps]
        if self.radius is not None:
            d["radius"] = self.radius
        if self.region is not None:
            d["region"] = self.region
        return d

    @classmethod
    def from_dict(cls, d):
        taps = d.get("taps")
        return cls(d["kind"], tuple(map(tuple, taps)) if taps is not None else None, d.get("radius"), d.get("region"))

    def in_region(self, pts):
        reg = self.region
        if reg["kind"] == "box":
            return ((pts[..., 0] >= reg["x"][0]) & (pts[..., 0] <= reg["x"][1])
                    & (pts[..., 1] >= reg["y"][0]) & (pts[..., 1] <= reg["y"][1]))
        if reg["kind"] == "halfplane":
            return pts @ np.asarray(reg["normal"], dtype=float) >= reg["offset"]
        raise OperatorError(f"unknown region kind {reg['kind']!r}")

    def kernel(self, n, sub=8):
        """Discrete taps at level ``n`` (normalised to unit sum)."""
        if self.taps is not None:
            k = np.asarray(self.taps, dtype=float)
        else:
            h = 2.0**-n
            R = int(math.ceil(self.radius / h - 0.5))
            xg, wg = np.polynomial.legendre.leggauss(sub)
            # sub-sample each pixel [o - 1/2, o + 1/2]^2 with a tensor Gauss rule
            offs = np.arange(-R, R + 1)
            pts = (offs[:, None] + 0.5 * xg[None, :]).ravel() * h
            w = np.tile(0.5 * wg, len(offs))
            X, Y = np.meshgrid(pts, pts, indexing="ij")
            vals = poly_bump(X, Y, self.radius) * np.outer(w, w) * h * h
            k = vals.reshape(len(offs), sub, len(offs), sub).sum(axis=(1, 3))
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise OperatorError("kernel must be a 2-D grid with odd sides")
        return k / k.sum()


def _phi_centre_points(image, system):
    c = [0.5 * (lo + hi) for lo, hi in system.phi_support_box]
    h = image.h
    i = (image.index0[0] + c[0] + np.arange(image.shape[0])) * h
    j = (image.index0[1] + c[1] + np.arange(image.shape[1])) * h
    return np.stack(np.meshgrid(i, j, indexing="ij"), axis=-1)


def apply_operator(spec, image, system=None):
    """Apply ``A_n``.  The result's ``mask`` marks where the output is defined.

    Convolution leaves entries whose stencil exits the interior undefined; mask
    keeps values on the region and flags the rest as unobserved.
    """
    out = image.copy()
    if spec.kind == "identity":
        return out
    if spec.kind == "convolution":
        k = spec.kernel(image.level)
        r0, r1 = k.shape[0] // 2, k.shape[1] // 2
        n0, n1 = image.shape
        if k.shape[0] > n0 or k.shape[1] > n1:
            raise OperatorError("kernel larger than the domain")
        u = np.where(image.mask, image.values, 0.0)
        acc = np.zeros(image.shape)
        cover = np.ones(image.shape, dtype=bool)
        P = np.pad(u, ((r0, r0), (r1, r1)))
        Pm = np.pad(image.mask, ((r0, r0), (r1, r1)))
        for a in range(k.shape[0]):
            for b in range(k.shape[1]):
                # A u[k] = sum_o K[o] u[k - o] with o = (a - r0, b - r1)
                sl = (slice(2 * r0 - a, 2 * r0 - a + n0), slice(2 * r1 - b, 2 * r1 - b + n1))
                acc += k[a, b] * P[sl]
                if k[a, b] != 0:
                    cover &= Pm[sl]
        out.values = np.where(cover, acc, 0.0)
        out.mask = cover & image.mask
        return out
    if system is None:
        raise OperatorError("mask operator needs the frame system to place pixels")
    keep = spec.in_region(_phi_centre_points(image, system))
    out.values = np.where(keep, image.values, 0.0)
    out.observed = keep if image.observed is None else keep & image.observed
    return out


def adjoint_operator(spec, residual, image):
    """``A_n^T`` applied to a residual grid defined where the forward output is defined."""
    if spec.kind in ("identity", "mask"):
        return residual
    k = spec.kernel(image.level)
    r0, r1 = k.shape[0] // 2, k.shape[1] // 2
    n0, n1 = residual.shape
    P = np.zeros((n0 + 2 * r0, n1 + 2 * r1))
    for a in range(k.shape[0]):
        for b in range(k.shape[1]):
            sl = (slice(2 * r0 - a, 2 * r0 - a + n0), slice(2 * r1 - b, 2 * r1 - b + n1))
            P[sl] += k[a, b] * residual
    return P[r0 : r0 + n0, r1 : r1 + n1]


def fidelity_energy(image, spec, data, system=None):
    """``h^2 sum (A_n u - f)^2`` over points where both sides are defined and observed."""
    if image.level != data.level or image.shape != data.shape:
        raise OperatorError("image and data live on different lattices")
    Au = apply_operator(spec, image, system)
    ok = Au.valid() & data.valid()
    return image.h**2 * float(np.sum((Au.values[ok] - data.values[ok]) ** 2))


def regularity_energy(field, p=None):
    """``h^2 sum_k c_hat[k]^p`` over the field's mask."""
    p = field.p if p is None else p
    return field.h**2 * float(np.sum(field.values[field.mask] ** p))


def continuum_operator(spec, scene, quad=(12, 24)):
    """Callable ``pts -> (A f)(pts)`` together with the curve set it may jump across."""
    if spec.kind == "identity":
        return scene.evaluate, scene.curves
    if spec.kind == "mask":
        return (lambda pts: np.where(spec.in_region(pts), scene.evaluate(pts), 0.0)), scene.curves
    if spec.radius is None:
        raise OperatorError("continuum action needs a physical-unit kernel")
    from .scene import SinusoidField, ConstantField, AffineField

    sm = scene.smooth
    if not scene.curves and isinstance(sm, (SinusoidField, ConstantField, AffineField)):
        # plane waves are eigenfunctions of an even radial kernel
        gain = 1.0
        if isinstance(sm, SinusoidField):
            gain = kernel_symbol(spec.radius, 2 * math.pi * math.hypot(sm.kx, sm.ky))
        return (lambda pts: gain * scene.evaluate(pts)), ()
    xr, wr = np.polynomial.legendre.leggauss(quad[0])
    r = 0.5 * (xr + 1) * spec.radius
    th = 2 * math.pi * (np.arange(quad[1]) + 0.5) / quad[1]
    y = np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], -1).reshape(-1, 2)
    w = (0.5 * spec.radius * wr * r * poly_bump(r, 0 * r, spec.radius))
    w = np.repeat(w, quad[1]) * (2 * math.pi / quad[1])
    w = w / w.sum()

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        out = np.zeros(len(flat))
        for s in range(0, len(flat), 4096):
            out[s : s + 4096] = scene.evaluate(flat[s : s + 4096, None, :] - y[None]) @ w
        return out.reshape(pts.shape[:-1])

    return fn, ()


def kernel_symbol(radius, freq, n=64):
    """``int kappa(x) cos(freq x_1) dx`` for the polynomial bump (radial quadrature)."""
    from scipy.special import j0

    xr, wr = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (xr + 1) * radius
    w = 0.5 * radius * wr
    return float(np.sum(w * 2 * math.pi * r * poly_bump(r, 0 * r, radius) * j0(freq * r)))


def consistency_residual(spec, scene, system, n, Q=6):
    """Grid-L2 norm of ``T_n(A f) - A_n T_n f`` over points where both are defined."""
    Tf = sample_field(scene.evaluate, scene.curves, scene.domain, system, n, Q)
    if spec.kind == "identity":
        return 0.0
    Af, curves = continuum_operator(spec, scene)
    TAf = sample_field(Af, curves, scene.domain, system, n, Q)
    ATf = apply_operator(spec, Tf, system)
    ok = ATf.mask & TAf.mask
    return math.sqrt(Tf.h**2 * float(np.sum((TAf.values[ok] - ATf.values[ok]) ** 2)))


# ---------------------------------------------------------------- reports


@dataclass
class EnergyReport:
    level: int
    R: float
    F: float
    E: float
    near: float = None
    off: float = None
    R_ref: float = None
    F_ref: float = None
    E_ref: float = None
    params: dict = field(default_factory=dict)

    CSV_FIELDS = ("n", "R_n", "F_n", "E_n", "near", "off", "R_ref", "F_ref", "E_ref")

    def row(self):
        return {"n": self.level, "R_n": self.R, "F_n": self.F, "E_n": self.E, "near": self.near,
                "off": self.off, "R_ref": self.R_ref, "F_ref": self.F_ref, "E_ref": self.E_ref}

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def reports_to_csv(reports, fh=None):
    own = fh is None
    fh = fh or io.StringIO()
    w = csv.DictWriter(fh, fieldnames=EnergyReport.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.row().items()})
    return fh.getvalue() if own else None


def split_near_off(field, curves, system, box=None):
    """Split ``R_n`` into the part within ``H + C_wav h`` of the curves and the rest."""
    vals = field.values ** field.p * field.h**2
    vals = np.where(field.mask, vals, 0.0)
    if not curves:
        return 0.0, float(vals.sum())
    from .geometry import distance_to_set

    d = distance_to_set(curves, field.locations())
    near = d <= field.H + system.support_radius * field.h
    n_sum = float(vals[near].sum())
    return n_sum, float(vals.sum()) - n_sum


def total_energy(image, system, params=None, spec=None, data=None, scene=None):
    """Compose the transform pipeline with the fidelity term into an :class:`EnergyReport`.

    With ``scene`` given, the near/off split and the continuum regularity
    reference are filled in.
    """
    params = params or ModelParams()
    spec = spec or OperatorSpec.identity()
    field_ = two_scale(image, system, params)
    R = regularity_energy(field_, params.p)
    F = 0.0 if data is None else fidelity_energy(image, spec, data, system)
    rep = EnergyReport(image.level, R, F, R + F, params={**params.to_dict(), "H": field_.H, "M": field_.M})
    if scene is not None:
        near, off = split_near_off(field_, scene.curves, system)
        # make the split sum exactly to R
        rep.near, rep.off = near, R - near
        rep.R_ref = analytic_regularity(scene, params.alpha)
    return rep
