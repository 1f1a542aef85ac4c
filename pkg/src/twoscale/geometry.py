"""Planar curves: distances, one-sided regions, lengths and per-cell intersection lengths.

Curve kinds
-----------
``circle``     closed; the jump region is the open disk.
``polygon``    closed polyline (vertices counter-clockwise); jump region is the interior.
``line``       infinite line through ``point`` with direction ``direction``; the jump
               region is the open half-plane to the left of the direction.
``segment``    open, geometry only (no jump region).
``arc``        open circular arc, geometry only.

The "+" side of every curve is the left of its traversal direction, so for
closed curves traversed counter-clockwise it is the enclosed region and a
jump height ``rho`` means ``u+ - u- = rho`` across the curve.
"""

from dataclasses import dataclass, field
import math

import numpy as np

JUMP_KINDS = ("circle", "polygon", "line")
CURVE_KINDS = JUMP_KINDS + ("segment", "arc")


class GeometryError(ValueError):
    pass


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return pts


def segment_distance(pts, a, b):
    """Euclidean distance from ``pts`` (..., 2) to the closed segment ``[a, b]``."""
    pts = _as_points(pts)
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    L2 = float(d @ d)
    rel = pts - a
    if L2 == 0.0:
        return np.hypot(rel[..., 0], rel[..., 1])
    t = np.clip((rel @ d) / L2, 0.0, 1.0)
    dx = rel[..., 0] - t * d[0]
    dy = rel[..., 1] - t * d[1]
    return np.hypot(dx, dy)


def _angle_in_span(theta, start, span):
    return np.mod(theta - start, 2 * np.pi) <= span


def _segments_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


@dataclass(frozen=True)
class Curve:
    kind: str
    params: dict = field(hash=False)
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise GeometryError(f"unknown curve kind {self.kind!r}")
        p = self.params
        if self.kind in ("circle", "arc"):
            if p["radius"] <= 0:
                raise GeometryError("radius must be positive")
        if self.kind == "arc" and not (0 < p["span"] <= 2 * np.pi):
            raise GeometryError("arc span must lie in (0, 2 pi]")
        if self.kind == "segment" and np.allclose(p["a"], p["b"]):
            raise GeometryError("degenerate segment")
        if self.kind == "line" and np.hypot(*p["direction"]) == 0:
            raise GeometryError("line direction must be nonzero")
        if self.kind == "polygon":
            v = np.asarray(p["vertices"], dtype=float)
            if v.ndim != 2 or len(v) < 3:
                raise GeometryError("polygon needs at least three vertices")
            if self._signed_area(v) <= 0:
                raise GeometryError("polygon vertices must be counter-clockwise")
            n = len(v)
            for i in range(n):
                for j in range(i + 1, n):
                    if j == i + 1 or (i == 0 and j == n - 1):
                        continue
                    if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                        raise GeometryError("polygon edges self-intersect")
        if self.carries_jump and self.rho == 0:
            raise GeometryError("zero jump height; omit the curve instead")
        if not self.carries_jump and self.rho != 0:
            raise GeometryError(f"{self.kind} curves cannot carry a jump")

    @staticmethod
    def _signed_area(v):
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def carries_jump(self):
        return self.kind in JUMP_KINDS

    def with_rho(self, rho):
        return Curve(self.kind, self.params, float(rho))

    # ----------------------------------------------------------- geometry

    def _edges(self):
        v = np.asarray(self.params["vertices"], dtype=float)
        return list(zip(v, np.roll(v, -1, axis=0)))

    def _line_frame(self):
        p = np.asarray(self.params["point"], dtype=float)
        d = np.asarray(self.params["direction"], dtype=float)
        d = d / np.hypot(*d)
        return p, d, np.array([-d[1], d[0]])

    def distance(self, pts):
        pts = _as_points(pts)
        k = self.kind
        if k == "circle":
            c = np.asarray(self.params["center"], dtype=float)
            return np.abs(np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1]) - self.params["radius"])
        if k == "arc":
            c = np.asarray(self.params["center"], dtype=float)
            R = self.params["radius"]
            rel = pts - c
            theta = np.arctan2(rel[..., 1], rel[..., 0])
            inside = _angle_in_span(theta, self.params["start"], self.params["span"])
            radial = np.abs(np.hypot(rel[..., 0], rel[..., 1]) - R)
            ends = [c + R * np.array([math.cos(a), math.sin(a)])
                    for a in (self.params["start"], self.params["start"] + self.params["span"])]
            de = np.minimum(*(np.hypot(pts[..., 0] - e[0], pts[..., 1] - e[1]) for e in ends))
            return np.where(inside, radial, de)
        if k == "segment":
            return segment_distance(pts, self.params["a"], self.params["b"])
        if k == "polygon":
            return np.min([segment_distance(pts, a, b) for a, b in self._edges()], axis=0)
        p, _, nrm = self._line_frame()
        return np.abs((pts - p) @ nrm)

    def region(self, pts):
        """Boolean mask of the "+" side (only for jump-carrying curves)."""
        pts = _as_points(pts)
        k = self.kind
        if k == "circle":
            c = self.params["center"]
            return np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1]) < self.params["radius"]
        if k == "line":
            p, _, nrm = self._line_frame()
            return (pts - p) @ nrm > 0
        if k == "polygon":
            x, y = pts[..., 0], pts[..., 1]
            inside = np.zeros(x.shape, dtype=bool)
            for a, b in self._edges():
                cond = (a[1] > y) != (b[1] > y)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                inside ^= cond & (x < xc)
            return inside
        raise GeometryError(f"{k} curves have no jump region")

    def clipped_line(self, box):
        """Endpoints of the line inside ``box = ((x0, x1), (y0, y1))``, or None."""
        p, d, _ = self._line_frame()
        lo, hi = -np.inf, np.inf
        for a in range(2):
            if abs(d[a]) < 1e-15:
                if not (box[a][0] <= p[a] <= box[a][1]):
                    return None
                continue
            t0 = (box[a][0] - p[a]) / d[a]
            t1 = (box[a][1] - p[a]) / d[a]
            lo, hi = max(lo, min(t0, t1)), min(hi, max(t0, t1))
        if hi <= lo:
            return None
        return p + lo * d, p + hi * d

    def length(self, box=None):
        k = self.kind
        if k == "circle":
            return 2 * np.pi * self.params["radius"]
        if k == "arc":
            return self.params["radius"] * self.params["span"]
        if k == "segment":
            return float(np.hypot(*(np.subtract(self.params["b"], self.params["a"]))))
        if k == "polygon":
            return float(sum(np.hypot(*(b - a)) for a, b in self._edges()))
        if box is None:
            raise GeometryError("a line has finite length only inside a box")
        ends = self.clipped_line(box)
        return 0.0 if ends is None else float(np.hypot(*(ends[1] - ends[0])))

    def _pieces(self, box=None):
        """Decompose into ('seg', a, b) and ('arc', center, R, start, span) primitives."""
        k = self.kind
        if k == "circle":
            return [("arc", np.asarray(self.params["center"], float), self.params["radius"], 0.0, 2 * np.pi)]
        if k == "arc":
            p = self.params
            return [("arc", np.asarray(p["center"], float), p["radius"], p["start"], p["span"])]
        if k == "segment":
            return [("seg", np.asarray(self.params["a"], float), np.asarray(self.params["b"], float))]
        if k == "polygon":
            return [("seg", a, b) for a, b in self._edges()]
        ends = self.clipped_line(box)
        return [] if ends is None else [("seg", ends[0], ends[1])]

    def sample_points(self, spacing, box=None):
        """Points along the curve at roughly uniform arc-length ``spacing``."""
        out = []
        for piece in self._pieces(box):
            if piece[0] == "seg":
                _, a, b = piece
                n = max(2, int(math.ceil(np.hypot(*(b - a)) / spacing)) + 1)
                t = np.linspace(0, 1, n)[:, None]
                out.append(a + t * (b - a))
            else:
                _, c, R, s, sp = piece
                n = max(2, int(math.ceil(R * sp / spacing)) + 1)
                th = s + np.linspace(0, sp, n)
                out.append(c + R * np.stack([np.cos(th), np.sin(th)], axis=1))
        if not out:
            return np.zeros((0, 2))
        return np.concatenate(out)

    def bbox(self, box=None):
        pts = self.sample_points(1e-3, box)
        if self.kind in ("circle", "arc"):
            c, R = np.asarray(self.params["center"], float), self.params["radius"]
            if self.kind == "circle":
                return (c[0] - R, c[0] + R), (c[1] - R, c[1] + R)
        return (pts[:, 0].min(), pts[:, 0].max()), (pts[:, 1].min(), pts[:, 1].max())

    def monotone_pieces(self, box=None):
        """Number of pieces on which both coordinates are monotone."""
        count = 0
        for piece in self._pieces(box):
            if piece[0] == "seg":
                count += 1
            else:
                _, _, _, s, sp = piece
                if sp >= 2 * np.pi - 1e-12:
                    count += 4
                    continue
                # coordinate extrema sit at multiples of pi/2; each interior one splits the arc
                q = np.pi / 2
                inner = math.ceil((s + sp) / q - 1e-12) - math.floor(s / q + 1e-12) - 1
                count += 1 + max(0, inner)
        return count

    def cell_lengths(self, width, origin=(0.0, 0.0), box=None):
        """Exact lengths of curve ∩ each cell of the grid ``origin + width * (i, j)``.

        Returns a dict ``{(i, j): length}``.  Each point of the curve is assigned to
        exactly one half-open cell.
        """
        ox, oy = origin
        acc = {}

        def add(mid, length):
            if length <= 0:
                return
            key = (int(math.floor((mid[0] - ox) / width)), int(math.floor((mid[1] - oy) / width)))
            acc[key] = acc.get(key, 0.0) + length

        for piece in self._pieces(box):
            if piece[0] == "seg":
                _, a, b = piece
                d = b - a
                ts = [0.0, 1.0]
                for ax, o in ((0, ox), (1, oy)):
                    if abs(d[ax]) < 1e-15:
                        continue
                    g0, g1 = sorted(((a[ax] - o) / width, (b[ax] - o) / width))
                    for g in range(int(math.ceil(g0)), int(math.floor(g1)) + 1):
                        t = (o + g * width - a[ax]) / d[ax]
                        if 0 < t < 1:
                            ts.append(t)
                ts = np.unique(ts)
                L = float(np.hypot(*d))
                for t0, t1 in zip(ts[:-1], ts[1:]):
                    add(a + 0.5 * (t0 + t1) * d, (t1 - t0) * L)
            else:
                _, c, R, s, sp = piece
                ths = [0.0, sp]
                for ax, o in ((0, ox), (1, oy)):
                    g0 = math.ceil((c[ax] - R - o) / width)
                    g1 = math.floor((c[ax] + R - o) / width)
                    for g in range(g0, g1 + 1):
                        v = (o + g * width - c[ax]) / R
                        if abs(v) > 1:
                            continue
                        base = math.acos(v) if ax == 0 else math.asin(v)
                        cands = (base, -base) if ax == 0 else (base, np.pi - base)
                        for th in cands:
                            rel = (th - s) % (2 * np.pi)
                            if 0 < rel < sp:
                                ths.append(rel)
                ths = np.unique(ths)
                for t0, t1 in zip(ths[:-1], ths[1:]):
                    tm = s + 0.5 * (t0 + t1)
                    add(c + R * np.array([math.cos(tm), math.sin(tm)]), R * (t1 - t0))
        return acc


def circle(center, radius, rho=1.0):
    return Curve("circle", {"center": tuple(map(float, center)), "radius": float(radius)}, float(rho))


def polygon(vertices, rho=1.0):
    return Curve("polygon", {"vertices": tuple(tuple(map(float, v)) for v in vertices)}, float(rho))


def line(point, direction, rho=1.0):
    return Curve("line", {"point": tuple(map(float, point)), "direction": tuple(map(float, direction))}, float(rho))


def segment(a, b):
    return Curve("segment", {"a": tuple(map(float, a)), "b": tuple(map(float, b))})


def arc(center, radius, start, span):
    return Curve(
        "arc", {"center": tuple(map(float, center)), "radius": float(radius), "start": float(start), "span": float(span)}
    )


def distance_to_set(curves, pts, box=None):
    """Distance from ``pts`` to the union of ``curves`` (``inf`` for an empty set)."""
    pts = _as_points(pts)
    out = np.full(pts.shape[:-1], np.inf)
    for c in curves:
        np.minimum(out, c.distance(pts), out=out)
    return out


def curve_separation(c1, c2, box=None, spacing=1e-3):
    """Sampled lower estimate of ``dist(c1, c2)`` (exact for two circles)."""
    if c1.kind == c2.kind == "circle":
        d = np.hypot(*np.subtract(c1.params["center"], c2.params["center"]))
        r1, r2 = c1.params["radius"], c2.params["radius"]
        return float(max(d - r1 - r2, abs(r1 - r2) - d, 0.0))
    pts = c1.sample_points(spacing, box)
    return float(max(0.0, c2.distance(pts).min() - spacing))


def boundary_distance(curve, box, spacing=1e-3):
    """Smallest distance from the curve to the boundary of ``box`` (negative if it leaves)."""
    pts = curve.sample_points(spacing, box)
    (x0, x1), (y0, y1) = box
    d = np.minimum.reduce([pts[:, 0] - x0, x1 - pts[:, 0], pts[:, 1] - y0, y1 - pts[:, 1]])
    return float(d.min())
