"""Bounded domains in C^n (n = 1, 2), boundary distance and uniform grids.

Points of C^n are stored as real arrays of length 2n ordered
``(x1, y1, ..., xn, yn)`` with ``z_k = x_k + i y_k``.  All ``*_points``
methods are vectorized over a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, ParameterError, UnsupportedKindError

__all__ = [
    "Domain",
    "Ball",
    "Annulus",
    "Polydisc",
    "HartogsTriangle",
    "GraphDomain",
    "DilatedDomain",
    "SublevelDomain",
    "Grid",
    "SublevelRegions",
    "CLOSED_FORM_GRAPHS",
    "sampled_graph",
    "contains",
    "boundary_distance",
    "sublevel_region",
    "dilated_domain",
    "verify_dilation_bounds",
    "DilationReport",
    "graph_boundary_samples",
    "brute_force_distance",
]

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def _as_points(z, dim):
    pts = np.asarray(z, dtype=float)
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} real coordinates, got shape {pts.shape}")
    return pts


def _moduli(pts):
    """|z_k| for every complex coordinate, shape (..., n)."""
    return np.hypot(pts[..., 0::2], pts[..., 1::2])


class Domain:
    """Base class for a bounded open domain in C^n."""

    kind = "abstract"

    def __init__(self, n):
        if n not in (1, 2):
            raise ParameterError("only complex dimension 1 or 2 is supported")
        self.n = n

    @property
    def dim(self):
        return 2 * self.n

    def bounding_box(self):
        """Return ``(lo, hi)`` arrays enclosing the closure of the domain."""
        raise NotImplementedError

    def contains_points(self, pts):
        raise NotImplementedError

    def distance_points(self, pts):
        """Distance to the boundary for points inside the domain."""
        raise NotImplementedError

    def in_extended_box(self, pts, pad):
        lo, hi = self.bounding_box()
        return np.all((pts >= lo - pad) & (pts <= hi + pad), axis=-1)


class Ball(Domain):
    kind = "ball"

    def __init__(self, center, radius):
        center = np.asarray(center, dtype=float)
        super().__init__(center.size // 2)
        if radius <= 0:
            raise ParameterError("ball radius must be positive")
        self.center = center
        self.radius = float(radius)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def contains_points(self, pts):
        return np.linalg.norm(pts - self.center, axis=-1) < self.radius

    def closure_contains_points(self, pts):
        return np.linalg.norm(pts - self.center, axis=-1) <= self.radius

    def distance_points(self, pts):
        return self.radius - np.linalg.norm(pts - self.center, axis=-1)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Annulus(Domain):
    """Spherical shell ``inner < |z - center| < outer``."""

    kind = "annulus"

    def __init__(self, inner, outer, center=None, n=1):
        if not 0 <= inner < outer:
            raise ParameterError("annulus needs 0 <= inner < outer")
        super().__init__(n)
        self.inner = float(inner)
        self.outer = float(outer)
        self.center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)

    def bounding_box(self):
        return self.center - self.outer, self.center + self.outer

    def contains_points(self, pts):
        r = np.linalg.norm(pts - self.center, axis=-1)
        return (r > self.inner) & (r < self.outer)

    def distance_points(self, pts):
        r = np.linalg.norm(pts - self.center, axis=-1)
        return np.minimum(r - self.inner, self.outer - r)


class Polydisc(Domain):
    kind = "polydisc"

    def __init__(self, radii, center=None):
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        super().__init__(radii.size)
        if np.any(radii <= 0):
            raise ParameterError("polydisc radii must be positive")
        self.radii = radii
        self.center = np.zeros(2 * self.n) if center is None else np.asarray(center, dtype=float)

    def bounding_box(self):
        r = np.repeat(self.radii, 2)
        return self.center - r, self.center + r

    def contains_points(self, pts):
        return np.all(_moduli(pts - self.center) < self.radii, axis=-1)

    def distance_points(self, pts):
        return np.min(self.radii - _moduli(pts - self.center), axis=-1)


class HartogsTriangle(Domain):
    """``{|z1| < |z2| < 1}`` in C^2."""

    kind = "hartogs_triangle"

    def __init__(self):
        super().__init__(2)

    def bounding_box(self):
        return -np.ones(4), np.ones(4)

    def contains_points(self, pts):
        m = _moduli(pts)
        return (m[..., 0] < m[..., 1]) & (m[..., 1] < 1.0)

    def distance_points(self, pts):
        # nearest cone point equalizes the two moduli at their mean
        m = _moduli(pts)
        return np.minimum(1.0 - m[..., 1], (m[..., 1] - m[..., 0]) / np.sqrt(2.0))


class SublevelDomain(Domain):
    """``{z in base : delta(z) > level}``; used for exhaustions."""

    kind = "sublevel"

    def __init__(self, base: Domain, level):
        super().__init__(base.n)
        self.base = base
        self.level = float(level)

    def bounding_box(self):
        return self.base.bounding_box()

    def contains_points(self, pts):
        out = self.base.contains_points(pts)
        if np.any(out):
            out = out.copy()
            out[out] = self.base.distance_points(pts[out]) > self.level
        return out

    def distance_points(self, pts):
        return self.base.distance_points(pts) - self.level


# -- graph domains -----------------------------------------------------------


def _neg_sqrt_abs(p):
    return -np.sqrt(np.linalg.norm(p, axis=-1))


def _neg_abs(p):
    return -np.linalg.norm(p, axis=-1)


def _zero(p):
    return np.zeros(p.shape[:-1])


CLOSED_FORM_GRAPHS = {
    "zero": _zero,
    "neg_sqrt_abs": _neg_sqrt_abs,
    "neg_abs": _neg_abs,
}


def sampled_graph(table, n):
    """Piecewise-linear interpolant through rows ``(x_1 .. x_{2n-1}, g)``."""
    table = np.atleast_2d(np.asarray(table, dtype=float))
    if table.shape[1] != 2 * n:
        raise ParameterError(f"graph samples need {2 * n} columns, got {table.shape[1]}")
    if n == 1:
        order = np.argsort(table[:, 0])
        xs, gs = table[order, 0], table[order, 1]
        if np.any(np.diff(xs) <= 0):
            raise ParameterError("graph sample abscissae must be distinct")

        def g(p):
            return np.interp(p[..., 0], xs, gs)

        g.nodes = xs[:, None]
        return g
    from scipy.interpolate import LinearNDInterpolator

    interp = LinearNDInterpolator(table[:, :-1], table[:, -1])

    def g(p):
        flat = p.reshape(-1, p.shape[-1])
        return interp(flat).reshape(p.shape[:-1])

    g.nodes = table[:, :-1]
    return g


class GraphDomain(Domain):
    """``{z in B_R : Im z_n < g(z', Re z_n) + offset}``.

    ``g`` acts on arrays of shape ``(..., 2n-1)`` and must be defined on the
    slice ball of radius ``slice_radius``.  The declared Hölder data are
    checked on a deterministic sample at construction.
    """

    kind = "graph"

    def __init__(
        self,
        g: Callable | str,
        holder_exponent=1.0,
        holder_constant=1.0,
        radius=1.0,
        n=1,
        offset=0.0,
        slice_radius=None,
        check_holder=True,
        curve_spacing=None,
    ):
        super().__init__(n)
        if isinstance(g, str):
            try:
                g = CLOSED_FORM_GRAPHS[g]
            except KeyError:
                raise ParameterError(f"unknown closed-form graph {g!r}") from None
        if not 0 < holder_exponent <= 1:
            raise ParameterError("Hölder exponent must lie in (0, 1]")
        if holder_constant <= 0:
            raise ParameterError("Hölder constant must be positive")
        self.g = g
        self.holder_exponent = float(holder_exponent)
        self.holder_constant = float(holder_constant)
        self.radius = float(radius)
        self.offset = float(offset)
        self.slice_radius = float(slice_radius) if slice_radius is not None else 1.5 * self.radius
        self.curve_spacing = curve_spacing or 2e-3 * self.radius
        self._cache = None
        if check_holder:
            worst = self.holder_violation()
            if worst > 0:
                raise ParameterError(
                    f"graph function violates the declared Hölder bound by {worst:.3g}"
                )

    # public helpers

    @property
    def gamma(self):
        return 1.0 / self.holder_exponent

    @property
    def beta_dil(self):
        return min(0.5, (2.0 * self.holder_constant) ** (-1.0 / self.holder_exponent))

    def graph(self, p):
        return self.g(p) + self.offset

    def holder_violation(self, n_samples=1000, seed=0):
        """Largest excess of ``|g(p)-g(q)|`` over ``c|p-q|^beta`` on a sample."""
        m = 2 * self.n - 1
        rng = np.random.default_rng(seed)
        p = rng.uniform(-1.0, 1.0, size=(n_samples, m))
        p *= self.slice_radius * rng.uniform(0, 1, size=(n_samples, 1)) ** (1 / m) / np.maximum(
            np.linalg.norm(p, axis=1, keepdims=True), 1e-300
        )
        nodes = getattr(self.g, "nodes", None)
        if nodes is not None:
            keep = np.linalg.norm(nodes, axis=1) <= self.slice_radius
            p = np.vstack([p, nodes[keep][:n_samples]])
        p = np.vstack([p, np.zeros((1, m))])
        gv = self.g(p)
        worst = 0.0
        for i in range(0, len(p), 256):
            d = np.linalg.norm(p[i : i + 256, None, :] - p[None, :, :], axis=-1)
            lhs = np.abs(gv[i : i + 256, None] - gv[None, :])
            rhs = self.holder_constant * d**self.holder_exponent
            worst = max(worst, float(np.max(lhs - rhs * (1 + 1e-9) - 1e-12)))
        return worst

    def shifted(self, t):
        """The dilation ``{z in B_{R+t} : Im z_n < g + offset + t}``."""
        return GraphDomain(
            self.g,
            self.holder_exponent,
            self.holder_constant,
            radius=self.radius + t,
            n=self.n,
            offset=self.offset + t,
            slice_radius=self.slice_radius,
            check_holder=False,
            curve_spacing=self.curve_spacing,
        )

    def bounding_box(self):
        return -self.radius * np.ones(self.dim), self.radius * np.ones(self.dim)

    def contains_points(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.linalg.norm(pts, axis=-1) < self.radius
        if np.any(out):
            sel = pts[out]
            out = out.copy()
            out[out] = sel[..., -1] < self.graph(sel[..., :-1])
        return out

    def _cap_condition(self, pts):
        """True where the radial projection onto the sphere lies on the boundary cap."""
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        proj = self.radius * pts / np.maximum(r, 1e-300)
        return proj[..., -1] <= self.graph(proj[..., :-1]) + 1e-15

    # boundary representation

    def _curve_1d(self):
        """Adaptively sampled graph arc inside the closed ball (n = 1)."""
        R = self.radius
        xs = np.linspace(-R, R, 20001)
        xs = np.union1d(xs, [0.0])
        phi = xs**2 + self.graph(xs[:, None]) ** 2 - R**2
        inside = phi <= 0
        if not np.any(inside):
            raise ParameterError("graph does not meet the ball")
        idx = np.flatnonzero(inside)
        lo_i, hi_i = idx[0], idx[-1]

        def bisect(a, b):
            # phi(a) <= 0 < phi(b) or vice versa
            fa = a**2 + self.graph(np.array([[a]]))[0] ** 2 - R**2
            for _ in range(80):
                m = 0.5 * (a + b)
                fm = m**2 + self.graph(np.array([[m]]))[0] ** 2 - R**2
                if (fm <= 0) == (fa <= 0):
                    a, fa = m, fm
                else:
                    b = m
            return a if fa <= 0 else b

        xa = bisect(xs[lo_i], xs[lo_i - 1]) if lo_i > 0 else xs[0]
        xb = bisect(xs[hi_i], xs[hi_i + 1]) if hi_i < len(xs) - 1 else xs[-1]
        x = np.union1d(np.linspace(xa, xb, 2001), [v for v in (0.0,) if xa < v < xb])
        for _ in range(40):
            y = self.graph(x[:, None])
            seg = np.hypot(np.diff(x), np.diff(y))
            long = seg > self.curve_spacing
            if not np.any(long):
                break
            x = np.union1d(x, 0.5 * (x[:-1][long] + x[1:][long]))
        y = self.graph(x[:, None])
        return x, np.column_stack([x, y])

    def _cloud_nd(self):
        """Graph surface sample cloud inside the closed ball (n = 2)."""
        R = self.radius
        m = 2 * self.n - 1
        k = 41
        axes = [np.linspace(-R, R, k)] * m
        params = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        params = params[np.linalg.norm(params, axis=1) <= R]
        pts = np.column_stack([params, self.graph(params)])
        keep = np.linalg.norm(pts, axis=1) <= R
        return params[keep], pts[keep], 2 * R / (k - 1)

    def _boundary(self):
        if self._cache is None:
            if self.n == 1:
                x, pts = self._curve_1d()
                self._cache = ("curve", x, pts, cKDTree(pts))
            else:
                params, pts, step = self._cloud_nd()
                self._cache = ("cloud", params, pts, cKDTree(pts), step)
        return self._cache

    def boundary_samples(self, count=None):
        """Points on the graph part of the boundary (sorted along the curve for n=1)."""
        cache = self._boundary()
        pts = cache[2]
        if count is not None and count < len(pts):
            pts = pts[np.linspace(0, len(pts) - 1, count).round().astype(int)]
        return pts

    def _graph_distance_1d(self, pts, k=4):
        _, x, curve, tree = self._boundary()
        k = min(k, len(curve))
        dv, iv = tree.query(pts, k=k)
        dv = np.atleast_2d(dv.T).T if dv.ndim == 1 else dv
        iv = np.atleast_2d(iv.T).T if iv.ndim == 1 else iv
        best = dv[:, 0].copy()
        last = len(x) - 1
        for j in range(k):
            i = iv[:, j]
            # a neighbour of the nearest vertex brackets the same local minimum
            sel = slice(None) if j == 0 else np.abs(i - iv[:, 0]) > 1
            a = x[np.maximum(i[sel] - 1, 0)]
            b = x[np.minimum(i[sel] + 1, last)]
            best[sel] = np.minimum(best[sel], self._golden_1d(pts[sel], a, b))
        return best

    def _golden_1d(self, pts, a, b, iters=48):
        def f(xv):
            d = np.hypot(pts[:, 0] - xv, pts[:, 1] - self.graph(xv[:, None]))
            # the arc leaves the closed ball outside the curve's parameter range
            r = np.hypot(xv, self.graph(xv[:, None]))
            return np.where(r <= self.radius * (1 + 1e-12), d, np.inf)

        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(iters):
            left = fc < fd
            a = np.where(left, a, c)
            b = np.where(left, d, b)
            new = np.where(left, b - _GOLDEN * (b - a), a + _GOLDEN * (b - a))
            fn = f(new)
            c, d = np.where(left, new, d), np.where(left, c, new)
            fc, fd = np.where(left, fn, fd), np.where(left, fc, fn)
        return np.minimum(np.minimum(fc, fd), f(0.5 * (a + b)))

    def _graph_distance_cloud(self, pts, k=4):
        _, params, cloud, tree, step = self._boundary()
        dv, iv = tree.query(pts, k=min(k, len(cloud)))
        dv = dv.reshape(len(pts), -1)
        iv = iv.reshape(len(pts), -1)
        best = dv[:, 0].copy()
        m = params.shape[1]
        for j in range(iv.shape[1]):
            p = params[iv[:, j]].copy()
            cur = dv[:, j].copy()
            s = step
            while s > 1e-9 * self.radius:
                improved = np.zeros(len(pts), dtype=bool)
                for axis in range(m):
                    for sign in (-1.0, 1.0):
                        q = p.copy()
                        q[:, axis] += sign * s
                        surf = np.column_stack([q, self.graph(q)])
                        ok = np.linalg.norm(surf, axis=1) <= self.radius
                        dq = np.where(ok, np.linalg.norm(pts - surf, axis=1), np.inf)
                        better = dq < cur
                        p[better] = q[better]
                        cur[better] = dq[better]
                        improved |= better
                if not np.any(improved):
                    s *= 0.5
            best = np.minimum(best, cur)
        return best

    def distance_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.n == 1:
            dg = self._graph_distance_1d(pts)
        else:
            dg = self._graph_distance_cloud(pts)
        cap = self._cap_condition(pts)
        dcap = np.where(cap, self.radius - np.linalg.norm(pts, axis=-1), np.inf)
        return np.minimum(dg, dcap)


class DilatedDomain(GraphDomain):
    """Vertical and radial dilation of a graph domain by ``t``."""

    kind = "graph"

    def __init__(self, base: GraphDomain, t):
        super().__init__(
            base.g,
            base.holder_exponent,
            base.holder_constant,
            radius=base.radius + t,
            n=base.n,
            offset=base.offset + t,
            slice_radius=base.slice_radius,
            check_holder=False,
            curve_spacing=base.curve_spacing,
        )
        self.base = base
        self.t = float(t)


# -- public operations ---------------------------------------------------------


def contains(d: Domain, z, pad=None) -> bool:
    """Membership of a single point; raises outside the padded bounding box."""
    z = _as_points(z, d.dim)
    lo, hi = d.bounding_box()
    pad = 1e-9 * float(np.max(hi - lo)) if pad is None else pad
    if not d.in_extended_box(z, pad):
        raise DomainError(f"point {z.tolist()} lies outside the bounding box")
    return bool(d.contains_points(z[None, :])[0])


def boundary_distance(d: Domain, z) -> float:
    z = _as_points(z, d.dim)
    if not d.contains_points(z[None, :])[0]:
        raise DomainError(f"point {z.tolist()} is not inside the domain")
    return float(d.distance_points(z[None, :])[0])


def dilated_domain(d: Domain, t) -> DilatedDomain:
    if not isinstance(d, GraphDomain):
        raise UnsupportedKindError(f"dilation is only defined for graph domains, not {d.kind}")
    if t <= 0:
        raise ParameterError("dilation parameter must be positive")
    if d.radius + t > d.slice_radius:
        raise ParameterError("dilation leaves the slice where g is defined")
    return DilatedDomain(d, t)


def graph_boundary_samples(d: GraphDomain, count=2000, cap_count=400):
    """Points on the whole boundary of a graph domain (graph part and spherical cap)."""
    graph_pts = d.boundary_samples(count)
    if d.n == 1:
        phi = np.linspace(-np.pi, np.pi, 8 * cap_count, endpoint=False)
        circ = d.radius * np.column_stack([np.cos(phi), np.sin(phi)])
    else:
        rng = np.random.default_rng(1)
        circ = rng.normal(size=(8 * cap_count, d.dim))
        circ *= d.radius / np.linalg.norm(circ, axis=1, keepdims=True)
    cap = circ[circ[:, -1] <= d.graph(circ[:, :-1])]
    if len(cap) > cap_count:
        cap = cap[np.linspace(0, len(cap) - 1, cap_count).round().astype(int)]
    return np.vstack([graph_pts, cap])


def brute_force_distance(boundary_pts, pts):
    """Minimum Euclidean distance from each point to a boundary sample set."""
    return cKDTree(boundary_pts).query(np.atleast_2d(pts))[0]


@dataclass
class DilationReport:
    gamma: float
    beta_dil: float
    tolerance: float
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(row["ok"] for row in self.rows)

    @property
    def worst_lower_margin(self):
        return min(row["lower_margin"] for row in self.rows)

    @property
    def worst_upper_margin(self):
        return min(row["upper_margin"] for row in self.rows)


def verify_dilation_bounds(
    d: GraphDomain, ts: Sequence[float], beta_dil=None, count=1500, tolerance=1e-6
) -> DilationReport:
    """Check ``beta_dil * t**gamma <= delta_{Omega^t}(z) <= t`` on boundary samples.

    ``gamma = 1/beta_H``; ``beta_dil`` defaults to ``min(1/2, (2c)^(-1/beta_H))``.
    Margins are ``delta - lower`` and ``t - delta``; both must be
    ``>= -tolerance``.  Violations produce a failed report, not an exception.
    """
    if not isinstance(d, GraphDomain):
        raise UnsupportedKindError("dilation certificates need a graph domain")
    gamma = d.gamma
    beta = d.beta_dil if beta_dil is None else float(beta_dil)
    zs = graph_boundary_samples(d, count=count)
    report = DilationReport(gamma=gamma, beta_dil=beta, tolerance=tolerance)
    for t in ts:
        dil = dilated_domain(d, t)
        delta = dil.distance_points(zs)
        lower = beta * t**gamma
        lo_m = float(np.min(delta - lower))
        up_m = float(np.min(t - delta))
        report.rows.append(
            {
                "t": float(t),
                "min_delta": float(np.min(delta)),
                "max_delta": float(np.max(delta)),
                "lower": lower,
                "lower_margin": lo_m,
                "upper_margin": up_m,
                "ok": lo_m >= -tolerance and up_m >= -tolerance,
            }
        )
    return report


# -- grids --------------------------------------------------------------------


class Grid:
    """Uniform grid on R^{2n} carrying an inside mask and the boundary distance.

    Node ``idx`` sits at ``origin + h * idx``.  ``delta`` is NaN outside the
    domain.  Arrays are read-only after construction.
    """

    def __init__(self, n, h, origin, shape, domain: Domain | None = None):
        if h <= 0:
            raise ParameterError("grid spacing must be positive")
        self.n = n
        self.h = float(h)
        self.origin = np.asarray(origin, dtype=float)
        self.shape = tuple(int(s) for s in shape)
        self.domain = domain
        if len(self.shape) != 2 * n or self.origin.size != 2 * n:
            raise ParameterError("grid shape and origin must have 2n entries")
        self.inside = np.zeros(self.shape, dtype=bool)
        self.delta = np.full(self.shape, np.nan)
        if domain is not None:
            pts = self.points()
            inside = domain.contains_points(pts)
            delta = np.full(len(pts), np.nan)
            if np.any(inside):
                delta[inside] = domain.distance_points(pts[inside])
            # nodes whose computed distance is not positive are treated as boundary
            inside &= ~(delta <= 0)
            self.inside = inside.reshape(self.shape)
            self.delta = np.where(inside, delta, np.nan).reshape(self.shape)
        self.inside.setflags(write=False)
        self.delta.setflags(write=False)

    @classmethod
    def covering(cls, domain: Domain, h=None, nodes_per_axis=None, cell_centered=False):
        """Grid over the domain's bounding box.

        Nodes are placed on integer multiples of ``h`` (``cell_centered=False``)
        or at cell centres of ``nodes_per_axis`` equal cells.
        """
        lo, hi = domain.bounding_box()
        if nodes_per_axis is not None:
            size = float(np.max(hi - lo))
            h = size / nodes_per_axis
            origin = lo + 0.5 * h if cell_centered else lo
            shape = [nodes_per_axis if cell_centered else nodes_per_axis + 1] * domain.dim
            return cls(domain.n, h, origin, shape, domain)
        if h is None:
            raise ParameterError("give either h or nodes_per_axis")
        start = np.floor(lo / h) - 1
        stop = np.ceil(hi / h) + 1
        shape = (stop - start + 1).astype(int)
        return cls(domain.n, h, start * h, shape, domain)

    def points(self):
        axes = [self.origin[k] + self.h * np.arange(s) for k, s in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(self.shape))

    def inside_points(self):
        """``(points, delta)`` of inside nodes in C order, computed once."""
        if getattr(self, "_inside_cache", None) is None:
            mask = self.inside.ravel()
            self._inside_cache = (self.points()[mask], self.delta.ravel()[mask])
        return self._inside_cache

    def node_point(self, idx):
        return self.origin + self.h * np.asarray(idx, dtype=float)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def metadata(self):
        return {
            "n": self.n,
            "h": self.h,
            "origin": self.origin.tolist(),
            "shape": list(self.shape),
        }


@dataclass
class SublevelRegions:
    t: float
    interior: np.ndarray  # delta > t
    shell: np.ndarray  # delta <= alpha t
    band: np.ndarray  # |delta - t| <= band_halfwidth
    band_halfwidth: float

    @property
    def empty_interior(self):
        return not np.any(self.interior)


def sublevel_region(g: Grid, t, alpha=1.0, band_halfwidth=None) -> SublevelRegions:
    """Node masks for ``Omega_t``, the shell ``Omega \\ Omega_{alpha t}`` and the band ``dOmega_t``."""
    if t < 0:
        raise ParameterError("t must be positive")
    w = g.h if band_halfwidth is None else band_halfwidth
    delta = np.where(g.inside, g.delta, -np.inf)
    return SublevelRegions(
        t=float(t),
        interior=g.inside & (delta > t),
        shell=g.inside & (delta <= alpha * t),
        band=g.inside & (np.abs(delta - t) <= w),
        band_halfwidth=float(w),
    )
