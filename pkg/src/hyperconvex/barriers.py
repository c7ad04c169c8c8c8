"""Barrier families psi_t, the separation ratio kappa_alpha(t) and a Levi-form test.

Three families are provided:

``holder``
    ``log(1/delta_{Omega^{eps t}}) / log(2 / (beta_dil eps^gamma t^gamma))`` on a
    graph domain, using its vertical dilations.
``eta``
    ``log(1/delta_{Omega^{eps t}}) / log(2 / eta(eps t))`` for a general
    lower-bound function ``eta``.
``lipschitz``
    ``v_{eps t} / log(2 / (eps t))`` with ``v_s`` a distance-based model
    satisfying ``log(1/(delta+s)) - c <= v_s <= log(1/(delta+s))``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .envelope import ScalarField, circle_average, complex_directions
from .errors import DomainError, HypothesisError, ParameterError
from .geometry import Domain, GraphDomain, Grid, dilated_domain

__all__ = [
    "Eta",
    "make_eta",
    "BarrierParams",
    "BarrierFamily",
    "psi_holder",
    "psi_lipschitz",
    "psi_eta",
    "psi_field",
    "KappaResult",
    "kappa_alpha",
    "kappa_lower_bound_holder",
    "LeviReport",
    "levi_test",
    "barrier_invariants",
]


class Eta:
    """A continuous increasing function with ``0 < eta(t) < t`` near 0.

    ``log_value`` is primary so that very fast decay (``exp(-1/t)``) stays
    representable at tiny ``t``.
    """

    def __init__(self, name, log_value: Callable):
        self.name = name
        self._log = log_value

    def log_value(self, t):
        return self._log(np.asarray(t, dtype=float))

    def __call__(self, t):
        return np.exp(self.log_value(t))

    def __repr__(self):
        return f"Eta({self.name})"


def make_eta(spec: str, base_dir=None) -> Eta:
    """Build an eta function from a configuration string.

    Accepted forms: ``power:gamma=2`` (optionally ``,coef=0.25``), ``loglog``
    for ``t(-log t)^{log t}``, ``expinv`` for ``exp(-1/t)`` and
    ``samples:<path>`` for a two-column ``t eta`` table (log-linear interpolation).
    """
    spec = spec.strip()
    if spec == "loglog":
        # log eta = log t + log t * log(-log t)
        return Eta("loglog", lambda t: np.log(t) * (1.0 + np.log(-np.log(t))))
    if spec == "expinv":
        return Eta("expinv", lambda t: -1.0 / t)
    if spec.startswith("power"):
        opts = {"gamma": 2.0, "coef": 1.0}
        if ":" in spec:
            for item in spec.split(":", 1)[1].split(","):
                key, _, val = item.partition("=")
                if key.strip() not in opts:
                    raise ParameterError(f"unknown power-eta option {key!r}")
                opts[key.strip()] = float(val)
        gamma, coef = opts["gamma"], opts["coef"]
        if gamma < 1 or coef <= 0:
            raise ParameterError("power eta needs gamma >= 1 and coef > 0")
        return Eta(f"power:gamma={gamma:g},coef={coef:g}", lambda t: np.log(coef) + gamma * np.log(t))
    if spec.startswith("samples:"):
        path = spec.split(":", 1)[1]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        table = np.loadtxt(path, ndmin=2)
        ts, vals = table[:, 0], table[:, 1]
        order = np.argsort(ts)
        ts, vals = ts[order], vals[order]
        if np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
            raise ParameterError("sampled eta must be positive and increasing")
        lt, lv = np.log(ts), np.log(vals)
        return Eta(f"samples:{path}", lambda t: np.interp(np.log(t), lt, lv))
    raise ParameterError(f"unknown eta specification {spec!r}")


@dataclass
class BarrierParams:
    alpha: float = 0.1
    epsilon: float | None = None
    gamma: float = 1.0
    beta_dil: float = 1.0
    c_demailly: float = 0.0
    eta: Eta | None = None
    r0: float | None = None
    t0: float | None = None

    def __post_init__(self):
        if self.epsilon is None:
            self.epsilon = self.alpha
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.gamma < 1:
            raise ParameterError("gamma must be >= 1")
        if self.beta_dil <= 0:
            raise ParameterError("beta_dil must be positive")
        if self.c_demailly < 0:
            raise ParameterError("c_demailly must be nonnegative")
        if self.t0 is None:
            self.t0 = self.r0


class BarrierFamily:
    """One of the three psi_t families on a fixed domain.

    For ``lipschitz``, ``v_model(delta, s)`` defaults to ``log(1/(delta+s))``
    (valid with ``c_demailly = 0`` when ``-log delta`` is plurisubharmonic,
    e.g. on convex domains).
    """

    def __init__(self, kind, params: BarrierParams, domain: Domain, v_model=None):
        if kind not in ("holder", "lipschitz", "eta"):
            raise ParameterError(f"unknown barrier kind {kind!r}")
        if kind in ("holder", "eta") and not isinstance(domain, GraphDomain):
            raise ParameterError(f"{kind} barriers need a graph domain")
        if kind == "eta":
            if params.eta is None:
                raise ParameterError("eta barriers need an eta function")
            if params.alpha + params.epsilon >= 1:
                raise ParameterError("eta barriers need alpha + epsilon < 1")
        self.kind = kind
        self.params = params
        self.domain = domain
        self.v_model = v_model or (lambda delta, s: -np.log(delta + s))
        self._dilations = lru_cache(maxsize=64)(lambda s: dilated_domain(domain, s))

    def denominator(self, t):
        p = self.params
        s = p.epsilon * t
        if self.kind == "holder":
            return np.log(2.0 / (p.beta_dil * s**p.gamma))
        if self.kind == "eta":
            log_eta = float(p.eta.log_value(s))
            if not np.isfinite(log_eta):
                raise ParameterError("eta(eps t) must be positive")
            return np.log(2.0) - log_eta
        return np.log(2.0 / s)

    def _check_t(self, t):
        t0 = self.params.t0
        if not t > 0 or (t0 is not None and t > t0 * (1 + 1e-12)):
            raise ParameterError(f"t={t} outside (0, t0]")

    def dilation_distance(self, pts, t):
        """``delta_{Omega^{eps t}}`` at the given points."""
        dil = self._dilations(float(self.params.epsilon * t))
        return dil.distance_points(pts)

    def v(self, pts, s, delta=None):
        if delta is None:
            delta = self.domain.distance_points(pts)
        return self.v_model(delta, s)

    def psi_points(self, pts, t, delta=None):
        """Vectorized psi_t at points of the domain.

        ``delta`` (the base boundary distance) may be passed to avoid
        recomputation; it is only used by the lipschitz family.
        """
        pts = np.atleast_2d(pts)
        if self.kind == "lipschitz":
            self._check_t(t)
            s = self.params.epsilon * t
            return self.v(pts, s, delta) / self.denominator(t)
        dist = self.dilation_distance(pts, t)
        if np.any(dist <= 0):
            raise DomainError("point is not interior to the dilated domain")
        return -np.log(dist) / self.denominator(t)


def _single(f: BarrierFamily, kind, z, t):
    if f.kind != kind:
        raise ParameterError(f"family is {f.kind!r}, not {kind!r}")
    z = np.asarray(z, dtype=float)
    if not f.domain.contains_points(z[None, :])[0]:
        raise DomainError("point is not inside the domain")
    return float(f.psi_points(z[None, :], t)[0])


def psi_holder(f: BarrierFamily, z, t) -> float:
    return _single(f, "holder", z, t)


def psi_lipschitz(f: BarrierFamily, z, t) -> float:
    return _single(f, "lipschitz", z, t)


def psi_eta(f: BarrierFamily, z, t) -> float:
    return _single(f, "eta", z, t)


def psi_field(f: BarrierFamily, grid: Grid, t, mask=None) -> ScalarField:
    """psi_t at inside nodes (restricted to ``mask`` if given); NaN elsewhere."""
    mask = grid.inside if mask is None else (mask & grid.inside)
    values = np.full(grid.shape, np.nan)
    if np.any(mask):
        pts = grid.points()[mask.ravel()]
        values[mask] = f.psi_points(pts, t, delta=grid.delta[mask])
    return ScalarField(grid, values, np.zeros(grid.shape, dtype=bool), {"t": t, "family": f.kind})


@dataclass
class KappaResult:
    t: float
    value: float
    inf_shell: float
    sup_band: float
    band_halfwidth: float
    shell_nodes: int
    band_nodes: int


def kappa_alpha(f: BarrierFamily, t, grid: Grid, band_halfwidth=None) -> KappaResult:
    """Separation ratio from grid extrema over the shell and the boundary band of ``Omega_t``.

    The band extremum is taken over its outer half ``t <= delta <= t + w``
    (default ``w = h``): the nodes of the closure of ``Omega_t`` adjacent to
    its boundary.  Inner-half nodes sit at ``delta < t`` where psi_t is
    larger than anywhere on the true boundary, and for ``t < h`` they would
    overlap the shell.
    """
    p = f.params
    w = grid.h if band_halfwidth is None else band_halfwidth
    pts, delta = grid.inside_points()
    shell = delta <= p.alpha * t
    band = (delta >= t) & (delta <= t + w)
    n_shell, n_band = int(shell.sum()), int(band.sum())
    if n_shell == 0 or n_band == 0:
        raise HypothesisError(
            t, np.nan, np.nan, f"empty grid region at t={t:.6g} (shell {n_shell}, band {n_band} nodes)"
        )
    sel = shell | band
    psi = f.psi_points(pts[sel], t, delta=delta[sel])
    inf_shell = float(np.min(psi[shell[sel]]))
    sup_band = float(np.max(psi[band[sel]]))
    if not inf_shell > sup_band:
        raise HypothesisError(t, inf_shell, sup_band)
    value = (inf_shell - sup_band) / (1.0 - sup_band)
    if not 0 < value < 1:
        raise HypothesisError(t, inf_shell, sup_band, f"kappa={value} outside (0, 1) at t={t:.6g}")
    return KappaResult(
        t=float(t),
        value=float(value),
        inf_shell=inf_shell,
        sup_band=sup_band,
        band_halfwidth=float(w),
        shell_nodes=n_shell,
        band_nodes=n_band,
    )


def kappa_lower_bound_holder(params: BarrierParams, t):
    """Closed-form lower bound ``log(1/(a+e)) / log((2+2e) / (beta e^gamma t^(gamma-1)))``."""
    a, e, g, b = params.alpha, params.epsilon, params.gamma, params.beta_dil
    return np.log(1.0 / (a + e)) / np.log((2.0 + 2.0 * e) / (b * e**g * t ** (g - 1.0)))


@dataclass
class LeviReport:
    checked: int
    skipped: int
    worst_mean_value: float  # min over nodes/directions of avg - centre
    worst_eigenvalue: float  # min complex-Hessian eigenvalue
    tol: float
    worst_node: tuple | None = None

    @property
    def passed(self):
        return self.checked > 0 and self.worst_mean_value >= -self.tol and self.worst_eigenvalue >= -self.tol


def _complex_hessian(values, nodes, n, h):
    """Hermitian complex Hessian ``d^2 u / dz_j d zbar_k`` by central differences."""
    dim = 2 * n
    vp = np.pad(values, 1, mode="constant", constant_values=np.nan)
    base = nodes + 1

    def at(offset):
        return vp[tuple((base + offset).T)]

    u0 = at(np.zeros(dim, dtype=int))
    D = np.empty((len(nodes), dim, dim))
    eye = np.eye(dim, dtype=int)
    for i in range(dim):
        D[:, i, i] = (at(eye[i]) + at(-eye[i]) - 2 * u0) / h**2
        for j in range(i + 1, dim):
            D[:, i, j] = D[:, j, i] = (
                at(eye[i] + eye[j]) - at(eye[i] - eye[j]) - at(-eye[i] + eye[j]) + at(-eye[i] - eye[j])
            ) / (4 * h**2)
    H = np.empty((len(nodes), n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            H[:, j, k] = 0.25 * ((D[:, xj, xk] + D[:, yj, yk]) + 1j * (D[:, xj, yk] - D[:, yj, xk]))
    return H


def levi_test(field: ScalarField, sample=None, tol=None) -> LeviReport:
    """Sub-mean-value and complex-Hessian checks at sample nodes.

    ``sample`` is a boolean mask or an (m, 2n) index array; default is every
    node with a finite value.  Nodes whose 3^{2n} neighbourhood has a missing
    value are skipped and counted.  ``tol`` defaults to ``10 h``.
    """
    g = field.grid
    n = g.n
    tol = 10 * g.h if tol is None else tol
    values = field.values
    finite = np.isfinite(values)
    if sample is None:
        sample = finite
    nodes = np.argwhere(sample) if np.asarray(sample).dtype == bool else np.asarray(sample, dtype=int)
    # full stencil: the whole 3^{2n} block around the node
    fp = np.pad(finite, 1, mode="constant", constant_values=False)
    full = np.ones(len(nodes), dtype=bool)
    for off in np.ndindex(*(3,) * (2 * n)):
        full &= fp[tuple((nodes + np.array(off)).T)]
    checked = nodes[full]
    skipped = int((~full).sum())
    if len(checked) == 0:
        return LeviReport(0, skipped, np.inf, np.inf, tol)
    centre = values[tuple(checked.T)]
    worst_mv = np.inf
    for d in range(len(complex_directions(n))):
        gap = circle_average(values, checked, d, n) - centre
        worst_mv = min(worst_mv, float(np.min(gap)))
    eig = np.linalg.eigvalsh(_complex_hessian(values, checked, n, g.h))[:, 0]
    i = int(np.argmin(eig))
    return LeviReport(
        checked=len(checked),
        skipped=skipped,
        worst_mean_value=worst_mv,
        worst_eigenvalue=float(eig[i]),
        tol=tol,
        worst_node=tuple(int(v) for v in checked[i]),
    )


@dataclass
class BarrierInvariantReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r["ok"] for r in self.rows)


def barrier_invariants(f: BarrierFamily, grid: Grid, ts) -> BarrierInvariantReport:
    """``sup psi_t < 1`` over the grid and the separation hypothesis at every ``t``."""
    report = BarrierInvariantReport()
    for t in ts:
        psi = psi_field(f, grid, t).values
        sup = float(np.nanmax(psi))
        try:
            k = kappa_alpha(f, t, grid)
            kappa, sep = k.value, k.inf_shell - k.sup_band
        except HypothesisError as exc:
            kappa, sep = np.nan, exc.inf_shell - exc.sup_band
        ok = sup < 1 and np.isfinite(kappa) and sep > 0 and 0 < kappa < 1
        report.rows.append({"t": float(t), "sup_psi": sup, "kappa": kappa, "separation": sep, "ok": bool(ok)})
    return report
