"""Decay-bound quadrature and closed-form rate exponents.

The decay bound for shell depth ``r`` is

    exp(-(1 / log(1/alpha)) * integral_{r/alpha}^{r0} kappa(t) / t dt),

integrated with adaptive Simpson in ``u = log t`` (so the integrand is just
``kappa(exp(u))``).
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barriers import BarrierFamily, BarrierParams, Eta, kappa_alpha
from .errors import ParameterError
from .geometry import Grid

__all__ = [
    "QuadratureResult",
    "adaptive_simpson",
    "fixed_simpson",
    "family_kappa",
    "DecayBound",
    "decay_bound_integral",
    "decay_bounds_ladder",
    "constant_kappa_bound",
    "write_integrand_trace",
    "RateExponent",
    "holder_rate_exponent",
    "lipschitz_tau",
    "EtaClassification",
    "eta_divergence_test",
]

RTOL = 1e-6
ATOL = 1e-12


MAX_EVALS = 4000


@dataclass
class QuadratureResult:
    value: float
    error: float
    samples: dict  # node -> integrand value
    converged: bool = True
    piece_values: list = field(default_factory=list)
    piece_errors: list = field(default_factory=list)


def _panel(F, lo, hi, fa, fm, fb):
    mid = 0.5 * (lo + hi)
    fl, fr = F(0.5 * (lo + mid)), F(0.5 * (mid + hi))
    whole = (hi - lo) / 6 * (fa + 4 * fm + fb)
    halves = (mid - lo) / 6 * (fa + 4 * fl + fm) + (hi - mid) / 6 * (fm + 4 * fr + fb)
    diff = halves - whole
    return [lo, hi, fa, fl, fm, fr, fb, halves + diff / 15, abs(diff) / 15]


def adaptive_simpson(f: Callable, a, b, rtol=RTOL, atol=ATOL, panels=1, cache=None, breaks=None, max_evals=MAX_EVALS):
    """Globally adaptive Simpson on ``[a, b]``.

    The interval is cut at ``breaks`` (sorted, inside ``[a, b]``) into
    pieces, each split into equal initial panels (``panels`` in total,
    spread by width).  The panel with the largest Richardson error estimate
    is bisected until every tail sum ``piece_k + ... + piece_last`` meets
    ``max(atol, rtol * |value|)``, or ``max_evals`` integrand calls are used
    (``converged`` is then False).  Evaluations are memoized in ``cache``.
    """
    cache = {} if cache is None else cache

    def F(x):
        x = float(x)
        if x not in cache:
            cache[x] = float(f(x))
        return cache[x]

    if b <= a:
        return QuadratureResult(0.0, 0.0, cache, True, [0.0], [0.0])
    cuts = np.unique(np.concatenate([[a], np.asarray(breaks if breaks is not None else [], float), [b]]))
    cuts = cuts[(cuts >= a) & (cuts <= b)]
    heap, values, errors = [], [], []
    for k, (lo, hi) in enumerate(zip(cuts[:-1], cuts[1:])):
        m = max(1, int(round(panels * (hi - lo) / (b - a))))
        edges = np.linspace(lo, hi, m + 1)
        pv, pe = [], []
        for plo, phi in zip(edges[:-1], edges[1:]):
            p = _panel(F, plo, phi, F(plo), F(0.5 * (plo + phi)), F(phi))
            heapq.heappush(heap, (-p[8], plo, k, p))
            pv.append(p[7])
            pe.append(p[8])
        values.append(math.fsum(pv))
        errors.append(math.fsum(pe))

    def done():
        tv = np.cumsum(values[::-1])[::-1]
        te = np.cumsum(errors[::-1])[::-1]
        return bool(np.all(te <= np.maximum(atol, rtol * np.abs(tv))))

    converged = done()
    while not converged:
        if len(cache) + 2 > max_evals:
            break
        _, _, k, p = heapq.heappop(heap)
        lo, hi, fa, fl, fm, fr, fb, val, err = p
        mid = 0.5 * (lo + hi)
        left = _panel(F, lo, mid, fa, fl, fm)
        right = _panel(F, mid, hi, fm, fr, fb)
        values[k] += left[7] + right[7] - val
        errors[k] += left[8] + right[8] - err
        heapq.heappush(heap, (-left[8], lo, k, left))
        heapq.heappush(heap, (-right[8], mid, k, right))
        converged = done()
    # exact re-summation per piece for determinism
    pv = [[] for _ in values]
    pe = [[] for _ in values]
    for _, _, k, p in sorted(heap, key=lambda e: e[1]):
        pv[k].append(p[7])
        pe[k].append(p[8])
    values = [math.fsum(v) for v in pv]
    errors = [math.fsum(e) for e in pe]
    return QuadratureResult(math.fsum(values), math.fsum(errors), cache, converged, values, errors)


def fixed_simpson(f: Callable, a, b, nodes=21):
    """Composite Simpson with a fixed odd number of equally spaced nodes."""
    if nodes % 2 == 0 or nodes < 3:
        raise ParameterError("fixed Simpson needs an odd node count >= 3")
    x = np.linspace(a, b, nodes)
    y = np.array([f(v) for v in x])
    w = np.ones(nodes)
    w[1:-1:2], w[2:-1:2] = 4, 2
    return float((b - a) / (nodes - 1) / 3 * np.dot(w, y))


def family_kappa(f: BarrierFamily, grid: Grid, band_halfwidth=None) -> Callable:
    """``t -> kappa_alpha(t)`` from grid extrema, memoized."""
    memo = {}

    def kappa(t):
        t = float(t)
        if t not in memo:
            memo[t] = kappa_alpha(f, t, grid, band_halfwidth).value
        return memo[t]

    kappa.alpha = f.params.alpha
    return kappa


@dataclass
class DecayBound:
    r: float
    r0: float
    alpha: float
    value: float
    integral: float
    error_estimate: float
    converged: bool = True
    samples: list = field(default_factory=list)  # sorted (t, kappa)


def _resolve_kappa(kappa, alpha):
    if isinstance(kappa, tuple):
        f, grid = kappa
        kappa = family_kappa(f, grid)
        alpha = f.params.alpha if alpha is None else alpha
    elif alpha is None:
        alpha = getattr(kappa, "alpha", None)
    if alpha is None:
        raise ParameterError("alpha is required when kappa is a plain callable")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return kappa, float(alpha)


def decay_bound_integral(kappa, r, r0, alpha=None, rtol=RTOL, max_evals=MAX_EVALS) -> DecayBound:
    """Decay bound at depth ``r``.

    ``kappa`` is a callable ``t -> kappa_alpha(t)`` or a ``(family, grid)``
    pair.  ``r = alpha r0`` gives an empty range and the value 1.
    """
    return decay_bounds_ladder(kappa, [r], r0, alpha, rtol, max_evals)[0]


def decay_bounds_ladder(kappa, rs, r0, alpha=None, rtol=RTOL, max_evals=MAX_EVALS) -> list:
    """Decay bounds for several depths sharing one integration.

    The range ``[min r / alpha, r0]`` is split at every ``r_i / alpha``; one
    globally adaptive run refines until every tail sum meets the tolerance,
    so each bound is a tail sum of pieces.
    """
    kappa, alpha = _resolve_kappa(kappa, alpha)
    rs = np.asarray(rs, dtype=float)
    if r0 <= 0 or np.any(rs <= 0):
        raise ParameterError("r and r0 must be positive")
    if np.any(rs / alpha > r0 * (1 + 1e-12)):
        raise ParameterError("need r <= alpha r0")
    starts = np.minimum(np.log(rs / alpha), math.log(r0))
    lo, hi = float(starts.min()), math.log(r0)
    panels = max(1, int(math.ceil(4 * (hi - lo) / math.log(10))))
    q = adaptive_simpson(
        lambda u: kappa(math.exp(u)), lo, hi, rtol=rtol, panels=panels, breaks=starts, max_evals=max_evals
    )
    cuts = np.unique(np.concatenate([[lo], starts[(starts > lo) & (starts < hi)], [hi]]))
    L = math.log(1 / alpha)
    samples = sorted((math.exp(u), v) for u, v in q.samples.items())
    out = []
    for r, u0 in zip(rs, starts):
        first = int(np.searchsorted(cuts, u0 - 1e-12 * abs(u0)))
        integral = math.fsum(q.piece_values[first:]) if hi > lo else 0.0
        err = math.fsum(q.piece_errors[first:]) if hi > lo else 0.0
        lo_t = math.exp(u0)
        out.append(
            DecayBound(
                r=float(r),
                r0=float(r0),
                alpha=alpha,
                value=math.exp(-integral / L),
                integral=integral,
                error_estimate=err,
                converged=q.converged,
                samples=[s for s in samples if s[0] >= lo_t * (1 - 1e-12)],
            )
        )
    return out


def constant_kappa_bound(kappa0, r, r0, alpha):
    """Closed form ``(r / (alpha r0))^(kappa0 / log(1/alpha))``."""
    return (r / (alpha * r0)) ** (kappa0 / math.log(1 / alpha))


def write_integrand_trace(bound: DecayBound, path):
    """CSV ``t,kappa,integrand,partial_integral``; the partial integral runs from ``r/alpha``
    by trapezoid in ``log t`` over the sampled nodes."""
    t = np.array([s[0] for s in bound.samples])
    k = np.array([s[1] for s in bound.samples])
    u = np.log(t)
    partial = np.concatenate([[0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * np.diff(u))])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "kappa", "integrand", "partial_integral"])
        for row in zip(t, k, k / t, partial):
            w.writerow([f"{v:.16e}" for v in row])


@dataclass
class RateExponent:
    exponent: float  # log(1/(alpha+eps)) / ((gamma-1) log(1/alpha))
    supremal: float  # 1 / (gamma - 1)
    graph_target: float  # beta / (1 - beta) with beta = 1/gamma


def holder_rate_exponent(params: BarrierParams) -> RateExponent:
    """Exponent of the ``(-log r)^{-tau}`` rate for the Hölder family."""
    a, e, g = params.alpha, params.epsilon, params.gamma
    if g <= 1:
        raise ParameterError("gamma <= 1: use the Lipschitz rate instead")
    if a + e >= 1:
        raise ParameterError("need alpha + epsilon < 1")
    beta = 1.0 / g
    return RateExponent(
        exponent=math.log(1 / (a + e)) / ((g - 1) * math.log(1 / a)),
        supremal=1.0 / (g - 1),
        graph_target=beta / (1 - beta),
    )


def lipschitz_tau(params: BarrierParams) -> float:
    """Power-rate exponent ``tau`` for the Lipschitz family."""
    a, e, c = params.alpha, params.epsilon, params.c_demailly
    num = math.log((1 + e) / (a + e)) - c
    if num <= 0:
        raise ParameterError("c_demailly too large: log((1+eps)/(alpha+eps)) - c <= 0")
    return num / (math.log(1 / a) * (math.log((2 + 2 * e) / e) + c))


@dataclass
class EtaClassification:
    label: str  # "divergent" | "convergent" | "inconclusive"
    ladder: np.ndarray
    partial_integrals: np.ndarray
    cauchy_gap: float
    slopes: np.ndarray


def eta_divergence_test(eta: Eta, r0, steps=40, window=10, cauchy_tol=1e-6, slope_floor=1e-3) -> EtaClassification:
    """Classify ``integral_0^{r0} dt / (t log(t/eta(t)))``.

    Partial integrals ``I(a_k)`` over ``[a_k, r0]`` with ``a_k = r0 2^-k`` are
    computed for ``k <= steps``.  Convergent when the last ``window`` steps
    move ``I`` by at most ``cauchy_tol``; divergent when every slope of ``I``
    against ``log log(1/a)`` over those steps is at least ``slope_floor``.
    """
    if not 0 < r0 < 1:
        raise ParameterError("r0 must lie in (0, 1)")

    def integrand(u):
        t = math.exp(u)
        gap = u - float(eta.log_value(t))
        if not gap > 0:
            raise ParameterError(f"log(t/eta(t)) <= 0 at t={t:.6g}: eta(t) >= t")
        return 1.0 / gap

    ks = np.arange(steps + 1)
    a = r0 * 2.0 ** (-ks)
    u = np.log(a)
    cache = {}
    pieces = [adaptive_simpson(integrand, u[k + 1], u[k], rtol=1e-10, cache=cache).value for k in range(steps)]
    partial = np.concatenate([[0.0], np.cumsum(pieces)])
    tail = slice(steps - window, steps + 1)
    x = np.log(-np.log(a[tail]))
    slopes = np.diff(partial[tail]) / np.diff(x)
    gap = float(abs(partial[-1] - partial[steps - window]))
    if gap <= cauchy_tol:
        label = "convergent"
    elif np.all(slopes >= slope_floor):
        label = "divergent"
    else:
        label = "inconclusive"
    return EtaClassification(label, a, partial, gap, slopes)
