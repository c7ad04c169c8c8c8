"""Relative extremal function of a closed ball: closed-form C^1 oracle and grid envelopes.

The grid solver computes the largest grid function ``u <= 0`` with
``u = -1`` on the obstacle and ``u(x) <= avg_v u(x)`` for every complex
direction ``v`` of a fixed set, where ``avg_v`` is an 8-point circle average
of radius ``h`` in the complex line ``x + C v``.  Circle samples are
interpolated multilinearly.  Near the outer boundary or the obstacle a
sample is instead taken along its ray: if the ray leaves the free region
inside the sample's cell it is clipped at the crossing, where the boundary
value (0 outside, -1 on the obstacle) is used; otherwise it is interpolated
linearly between the node and the cell's far corner.  Each diameter is then
combined by linear interpolation at the centre.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError
from .geometry import Ball, Domain, Grid, SublevelDomain

log = logging.getLogger(__name__)

__all__ = [
    "complex_directions",
    "circle_offsets",
    "multilinear_stencil",
    "circle_average",
    "ScalarField",
    "EnvelopeOperator",
    "harmonic_oracle",
    "solve_harmonic_oracle",
    "solve_envelope_grid",
    "exhaustion_solve",
    "maximality_violations",
    "save_field",
    "load_field",
]

N_CIRCLE = 8
_BISECT_STEPS = 40


def complex_directions(n):
    """Fixed set of unit complex directions: the axes, plus the two diagonals in C^2."""
    if n == 1:
        return [np.array([1.0 + 0j])]
    r = 1.0 / np.sqrt(2.0)
    return [
        np.array([1.0 + 0j, 0.0]),
        np.array([0.0, 1.0 + 0j]),
        np.array([r + 0j, r + 0j]),
        np.array([r + 0j, -r + 0j]),
    ]


def circle_offsets(n):
    """Unit real offsets ``e^{i k pi/4} v`` as an array (n_dirs, 8, 2n)."""
    dirs = complex_directions(n)
    out = np.zeros((len(dirs), N_CIRCLE, 2 * n))
    for d, v in enumerate(dirs):
        for k in range(N_CIRCLE):
            w = np.exp(1j * np.pi * k / 4) * v
            out[d, k, 0::2] = w.real
            out[d, k, 1::2] = w.imag
    out[np.abs(out) < 1e-15] = 0.0
    return out


def multilinear_stencil(offset):
    """Corners and weights interpolating at ``offset`` (grid units) from the origin node.

    Returns ``(corners, weights)`` with integer corners of shape (m, dim).
    """
    offset = np.asarray(offset, dtype=float)
    lo = np.floor(offset + 1e-12)
    frac = offset - lo
    frac[np.abs(frac) < 1e-12] = 0.0
    active = np.flatnonzero(frac > 0)
    corners, weights = [], []
    for bits in product((0, 1), repeat=active.size):
        c = lo.copy()
        w = 1.0
        for a, b in zip(active, bits):
            c[a] += b
            w *= frac[a] if b else 1.0 - frac[a]
        corners.append(c)
        weights.append(w)
    return np.array(corners, dtype=int), np.array(weights)


def _padded(values, pad, fill):
    return np.pad(values, pad, mode="constant", constant_values=fill)


def circle_average(values, nodes, direction, n, fill=np.nan):
    """Plain 8-point circle average of radius h at grid nodes (no clipping).

    ``values`` is a full grid array, ``nodes`` an (m, 2n) integer index array.
    Values beyond the array are ``fill``.
    """
    offsets = circle_offsets(n)[direction]
    vp = _padded(values, 1, fill)
    acc = np.zeros(len(nodes))
    for k in range(N_CIRCLE):
        corners, weights = multilinear_stencil(offsets[k])
        for c, w in zip(corners, weights):
            acc += w * vp[tuple((nodes + c + 1).T)]
    return acc / N_CIRCLE


@dataclass
class ScalarField:
    """Per-node values on a grid; NaN outside the domain."""

    grid: Grid
    values: np.ndarray
    obstacle_mask: np.ndarray
    info: dict = field(default_factory=dict)
    operator: "EnvelopeOperator | None" = field(default=None, repr=False, compare=False)

    def inside_values(self):
        return self.values[self.grid.inside]


class EnvelopeOperator:
    """Discrete sub-mean-value operators, one sparse affine map per complex direction.

    ``apply(u)`` returns ``min(0, min_d (A_d u + b_d))`` on the free nodes.
    """

    def __init__(self, domain: Domain, obstacle: Ball, grid: Grid):
        self.domain = domain
        self.obstacle = obstacle
        self.grid = grid
        n = grid.n
        pts = grid.points()
        in_obstacle = obstacle.closure_contains_points(pts).reshape(grid.shape)
        self.obstacle_mask = grid.inside & in_obstacle
        self.free_mask = grid.inside & ~in_obstacle
        # 0 outside, 1 obstacle, 2 free; one layer of padding counts as outside
        status = np.zeros(grid.shape, dtype=np.int8)
        status[self.obstacle_mask] = 1
        status[self.free_mask] = 2
        self._status = _padded(status, 1, 0)
        self.free_nodes = np.argwhere(self.free_mask)
        self.n_free = len(self.free_nodes)
        index = np.full(grid.shape, -1, dtype=np.int64)
        index[self.free_mask] = np.arange(self.n_free)
        self._index = _padded(index, 1, -1)
        self.offsets = circle_offsets(n)
        self.n_dirs = len(self.offsets)
        self.matrices = []
        self.rhs = []
        self.clipped_fraction = 0.0
        self._build()

    def _free_points(self, pts):
        return self.domain.contains_points(pts) & ~self.obstacle.closure_contains_points(pts)

    def _crossing(self, x, e, lam):
        """First exit from the free set along ``x + s e``, ``0 < s <= lam``.

        Returns ``(found, s, boundary_value)`` arrays.
        """
        h = self.grid.h
        checks = np.union1d(lam * np.arange(1, 9) / 8.0, [h])
        checks = checks[checks <= lam * (1 + 1e-12)]
        m = len(x)
        found = np.zeros(m, dtype=bool)
        lo = np.zeros(m)
        hi = np.full(m, lam)
        prev = 0.0
        for s in checks:
            todo = ~found
            if not np.any(todo):
                break
            ok = self._free_points(x[todo] + s * e)
            hit = np.flatnonzero(todo)[~ok]
            found[hit] = True
            lo[hit] = prev
            hi[hit] = s
            prev = s
        idx = np.flatnonzero(found)
        a, b = lo[idx], hi[idx]
        xs = x[idx]
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (a + b)
            ok = self._free_points(xs + mid[:, None] * e)
            a = np.where(ok, mid, a)
            b = np.where(ok, b, mid)
        s_out = np.full(m, h)
        s_out[idx] = 0.5 * (a + b)
        bval = np.zeros(m)
        bval[idx] = np.where(self.obstacle.closure_contains_points(xs + b[:, None] * e), -1.0, 0.0)
        return found, s_out, bval

    def _build(self):
        g = self.grid
        h = g.h
        nodes = self.free_nodes
        x = g.origin + h * nodes
        rows = np.arange(self.n_free)
        padded_nodes = nodes + 1
        total = clipped = 0
        for d in range(self.n_dirs):
            dist = np.full((N_CIRCLE, self.n_free), h)
            mode = np.zeros((N_CIRCLE, self.n_free), dtype=np.int8)  # 0 interp, 1 ray, 2 clipped
            bvals = np.zeros((N_CIRCLE, self.n_free))
            stencils = []
            for k in range(N_CIRCLE):
                e = self.offsets[d, k]
                corners, weights = multilinear_stencil(e)
                lam = h / np.max(np.abs(e))
                # every direction in the set passes through the far corner of its cell
                far = np.rint(e * lam / h).astype(int)
                stencils.append((corners, weights, far, lam))
                clean = self._free_points(x + h * e)
                for c in corners:
                    clean &= self._status[tuple((padded_nodes + c).T)] == 2
                dirty = np.flatnonzero(~clean)
                if dirty.size:
                    found, s_, b_ = self._crossing(x[dirty], e, lam)
                    mode[k, dirty] = np.where(found, 2, 1)
                    dist[k, dirty] = s_
                    bvals[k, dirty] = b_
                total += self.n_free
                clipped += int(np.sum(mode[k] == 2))
            A = sp.csr_matrix((self.n_free, self.n_free))
            b = np.zeros(self.n_free)
            for k in range(N_CIRCLE):
                opp = (k + N_CIRCLE // 2) % N_CIRCLE
                coef = dist[opp] / (dist[k] + dist[opp]) / (N_CIRCLE // 2)
                clip = mode[k] == 2
                b[clip] += coef[clip] * bvals[k, clip]
                corners, weights, far, lam = stencils[k]
                r_all, c_all, v_all = [], [], []

                def add(sel, offset, w):
                    lin = tuple((padded_nodes[sel] + offset).T)
                    st = self._status[lin]
                    free = st == 2
                    r_all.append(rows[sel][free])
                    c_all.append(self._index[lin][free])
                    v_all.append(w * coef[sel][free])
                    obst = st == 1
                    b[sel[obst]] -= w * coef[sel][obst]

                sel = np.flatnonzero(mode[k] == 0)
                for c, w in zip(corners, weights):
                    add(sel, c, w)
                sel = np.flatnonzero(mode[k] == 1)
                add(sel, np.zeros_like(far), 1.0 - h / lam)
                add(sel, far, h / lam)
                A = A + sp.csr_matrix(
                    (np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
                    shape=(self.n_free, self.n_free),
                )
            A.sum_duplicates()
            self.matrices.append(A.tocsr())
            self.rhs.append(b)
        self.clipped_fraction = clipped / max(total, 1)

    # evaluation

    def direction_values(self, u, workers=1):
        """``A_d u + b_d`` for every direction, shape (n_dirs, n_free)."""
        out = np.empty((self.n_dirs, self.n_free))
        if workers <= 1 or self.n_free < 4 * workers:
            for d, (A, b) in enumerate(zip(self.matrices, self.rhs)):
                out[d] = A @ u + b
            return out
        bounds = np.linspace(0, self.n_free, workers + 1).astype(int)

        def task(args):
            d, lo, hi = args
            out[d, lo:hi] = self.matrices[d][lo:hi] @ u + self.rhs[d][lo:hi]

        jobs = [(d, bounds[i], bounds[i + 1]) for d in range(self.n_dirs) for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(task, jobs))
        return out

    def apply(self, u, workers=1):
        return np.minimum(0.0, self.direction_values(u, workers).min(axis=0))

    def to_field(self, u, info=None):
        values = np.full(self.grid.shape, np.nan)
        values[self.obstacle_mask] = -1.0
        values[self.free_mask] = u
        return ScalarField(self.grid, values, self.obstacle_mask.copy(), dict(info or {}), self)

    # solvers

    def _solve_policy_system(self, policy, x0=None):
        """Solve ``u = A_pi u + b_pi`` for a per-node direction choice."""
        M = sp.identity(self.n_free, format="csr")
        rhs = np.zeros(self.n_free)
        for d in range(self.n_dirs):
            mask = (policy == d).astype(float)
            if not mask.any():
                continue
            M = M - sp.diags(mask) @ self.matrices[d]
            rhs += mask * self.rhs[d]
        if self.grid.n == 1:
            return spla.spsolve(M.tocsc(), rhs)
        # I - A_pi is a diagonally dominant M-matrix; Jacobi-preconditioned
        # BiCGSTAB from the previous iterate is enough at these sizes
        M = M.tocsr()
        inv_diag = 1.0 / M.diagonal()
        pre = spla.LinearOperator(M.shape, lambda v: inv_diag * v)
        x, info = spla.bicgstab(M, rhs, x0=x0, rtol=1e-13, atol=0.0, maxiter=20000, M=pre)
        if info != 0:
            log.warning("BiCGSTAB returned status %d; falling back to a direct solve", info)
            x = spla.spsolve(M.tocsc(), rhs)
        return x

    def solve(self, tol=1e-10, max_iter=100000, method="policy", workers=1, max_policy_iter=100):
        """Fixed point of ``u <- apply(u)`` started from ``u = 0`` off the obstacle.

        ``method="jacobi"`` runs plain synchronous sweeps.  ``method="policy"``
        first jumps to the fixed point by policy iteration (monotone
        decreasing from the same start) and then confirms it with sweeps.
        """
        u = np.zeros(self.n_free)
        sweeps = policy_iters = 0
        if method == "policy" and self.n_free:
            # with b <= 0 and nonnegative weights the first policy solve is <= 0,
            # hence a supersolution, and Howard iterates decrease from there
            policy = np.zeros(self.n_free, dtype=int)
            u = np.minimum(self._solve_policy_system(policy), 0.0)
            rows = np.arange(self.n_free)
            for policy_iters in range(1, max_policy_iter + 1):
                if self.n_dirs == 1:
                    break
                vals = self.direction_values(u, workers)
                best = vals.argmin(axis=0)
                improves = vals[best, rows] < vals[policy, rows] - 1e-14
                if not np.any(improves):
                    break
                policy = np.where(improves, best, policy)
                u = np.minimum(self._solve_policy_system(policy, x0=u), 0.0)
        elif method not in ("policy", "jacobi"):
            raise ParameterError(f"unknown solver method {method!r}")
        residual = np.inf
        while sweeps < max_iter:
            new = self.apply(u, workers)
            residual = float(np.max(np.abs(new - u))) if self.n_free else 0.0
            u = new
            sweeps += 1
            if residual < tol:
                break
        converged = residual < tol
        info = {
            "method": method,
            "policy_iterations": policy_iters,
            "sweeps": sweeps,
            "iterations": policy_iters + sweeps,
            "residual": residual,
            "converged": bool(converged),
            "clipped_fraction": self.clipped_fraction,
        }
        if not converged:
            log.warning("envelope solver stopped at residual %.3e after %d sweeps", residual, sweeps)
        return self.to_field(u, info)


def harmonic_oracle(points, s0):
    """Closed-form extremal function of ``{|z| <= s0}`` in the unit disc."""
    if not 0 < s0 < 1:
        raise ParameterError("inner radius must lie in (0, 1)")
    r = np.linalg.norm(np.atleast_2d(points), axis=-1)
    return np.where(r <= s0, -1.0, np.log(np.maximum(r, 1e-300)) / np.log(1.0 / s0))


def solve_harmonic_oracle(s0, grid: Grid | None = None, h=1 / 256) -> ScalarField:
    """Oracle field on a grid over the unit disc."""
    if not 0 < s0 < 1:
        raise ParameterError("inner radius must lie in (0, 1)")
    if grid is None:
        grid = Grid.covering(Ball([0.0, 0.0], 1.0), h=h)
    pts = grid.points()
    vals = harmonic_oracle(pts, s0).reshape(grid.shape)
    obstacle = grid.inside & (np.linalg.norm(pts, axis=-1) <= s0).reshape(grid.shape)
    return ScalarField(
        grid, np.where(grid.inside, vals, np.nan), obstacle, {"method": "closed_form", "s0": s0}
    )


def _check_obstacle(domain: Domain, obstacle: Ball, grid: Grid):
    if not domain.contains_points(obstacle.center[None, :])[0]:
        raise ParameterError("obstacle centre lies outside the domain")
    margin = domain.distance_points(obstacle.center[None, :])[0] - obstacle.radius
    if margin <= 0:
        raise ParameterError("obstacle ball is not compactly contained in the domain")
    if obstacle.radius < 4 * grid.h * (1 - 1e-9):
        raise ParameterError("grid does not resolve the obstacle (need radius >= 4h)")
    return margin


def solve_envelope_grid(
    domain: Domain,
    obstacle: Ball,
    grid: Grid,
    tol=1e-10,
    max_iter=100000,
    method="policy",
    workers=1,
) -> ScalarField:
    _check_obstacle(domain, obstacle, grid)
    op = EnvelopeOperator(domain, obstacle, grid)
    return op.solve(tol=tol, max_iter=max_iter, method=method, workers=workers)


def exhaustion_solve(domain: Domain, obstacle: Ball, grid: Grid, levels, tol=1e-10, **kw):
    """Extremal functions of ``obstacle`` relative to ``{delta > level}`` for each level.

    Every returned field lives on ``grid`` (the full domain's grid) with value
    0 at nodes outside the level domain.  Levels whose domain does not contain
    the obstacle are skipped.  ``info["monotone_violation"]`` on each field
    records ``max(rho_next - rho_prev)`` against the previous kept level.
    """
    fields = []
    prev = None
    for level in levels:
        sub = SublevelDomain(domain, level) if level > 0 else SublevelDomain(domain, 0.0)
        margin = domain.distance_points(obstacle.center[None, :])[0] - obstacle.radius
        if margin <= level:
            log.warning("level %.4g skipped: obstacle not inside the exhaustion domain", level)
            continue
        g = Grid(grid.n, grid.h, grid.origin, grid.shape, sub)
        f = solve_envelope_grid(sub, obstacle, g, tol=tol, **kw)
        vals = np.where(grid.inside, np.where(g.inside, f.values, 0.0), np.nan)
        field_ = ScalarField(grid, vals, f.obstacle_mask, dict(f.info, level=level), f.operator)
        if prev is not None:
            diff = vals[grid.inside] - prev.values[grid.inside]
            field_.info["monotone_violation"] = float(np.max(diff))
        fields.append(field_)
        prev = field_
    return fields


def maximality_violations(field: ScalarField, count=50, bump=None, seed=0, tol=1e-10):
    """Bump random free nodes upward and count bumps that keep the field admissible.

    Returns the number of nodes (out of ``count``) whose increase by ``bump``
    (default ``2*tol``) did NOT break the sub-mean-value inequality anywhere;
    0 means the field is maximal at every probed node.
    """
    op = field.operator
    if op is None:
        raise ParameterError("field carries no operator")
    bump = 2 * tol if bump is None else bump
    u = field.values[op.free_mask]
    rng = np.random.default_rng(seed)
    picks = rng.choice(op.n_free, size=min(count, op.n_free), replace=False)
    survivors = 0
    for i in picks:
        v = u.copy()
        v[i] += bump
        # the bump can only break the inequality at node i or its stencil neighbours
        if np.all(v <= op.apply(v) + 1e-15):
            survivors += 1
    return survivors


def save_field(field: ScalarField, path):
    """Write ``i1 i2 [i3 i4] value`` rows after a JSON metadata header line."""
    g = field.grid
    meta = dict(g.metadata())
    if field.operator is not None:
        meta["obstacle_center"] = field.operator.obstacle.center.tolist()
        meta["obstacle_radius"] = field.operator.obstacle.radius
    meta["info"] = {k: v for k, v in field.info.items() if isinstance(v, (int, float, str, bool))}
    idx = np.argwhere(g.inside)
    vals = field.values[g.inside]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        for row, v in zip(idx, vals):
            fh.write(" ".join(str(int(i)) for i in row) + f" {v:.16e}\n")


def load_field(path) -> ScalarField:
    """Inverse of :func:`save_field`; the grid carries no distance field."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ValueError("missing field header")
        meta = json.loads(header[2:])
        table = np.loadtxt(fh, ndmin=2)
    g = Grid(meta["n"], meta["h"], meta["origin"], meta["shape"])
    dim = 2 * meta["n"]
    inside = np.zeros(g.shape, dtype=bool)
    values = np.full(g.shape, np.nan)
    if len(table):
        idx = tuple(table[:, :dim].astype(int).T)
        inside[idx] = True
        values[idx] = table[:, dim]
    if "obstacle_center" in meta:
        ball = Ball(meta["obstacle_center"], meta["obstacle_radius"])
        obstacle = inside & ball.closure_contains_points(g.points()).reshape(g.shape)
    else:
        obstacle = inside & (values == -1.0)
    inside.setflags(write=False)
    g.inside = inside
    return ScalarField(g, values, obstacle, meta.get("info", {}))
