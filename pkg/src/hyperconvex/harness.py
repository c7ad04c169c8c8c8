"""Decay profiles M(t), inequality checks against solved fields and exponent fits."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierFamily, kappa_alpha
from .envelope import ScalarField
from .errors import HypothesisError, ParameterError

__all__ = [
    "geometric_ladder",
    "DecayProfile",
    "decay_profile",
    "CheckReport",
    "check_key_lemma",
    "check_comparison_inequality",
    "classify_hyperconvexity",
    "check_holder_rate",
    "check_lipschitz_rate",
    "write_decay_table",
    "write_fit_table",
]

SLACK_FACTOR = 5.0


def geometric_ladder(t_min, t_max, points_per_decade=4):
    """Log-spaced ladder including both endpoints."""
    if not 0 < t_min < t_max:
        raise ParameterError("need 0 < t_min < t_max")
    count = max(2, int(round(points_per_decade * np.log10(t_max / t_min))) + 1)
    return np.geomspace(t_min, t_max, count)


def _fit(x, y):
    """Least-squares slope and RMS residual of ``y ~ a + b x``."""
    if len(x) < 2:
        return np.nan, np.nan
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[1]), float(np.sqrt(np.mean(resid**2)))


@dataclass
class DecayProfile:
    ts: np.ndarray
    M: np.ndarray
    h: float
    skipped: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted_exponent_log: float = np.nan
    residual_log: float = np.nan
    fitted_exponent_power: float = np.nan
    residual_power: float = np.nan

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.M) >= 0))

    def at(self, t):
        i = int(np.argmin(np.abs(np.log(self.ts / t))))
        if not np.isclose(self.ts[i], t, rtol=1e-12):
            raise ParameterError(f"t={t} is not on the profile ladder")
        return float(self.M[i])


def decay_profile(field: ScalarField, ladder) -> DecayProfile:
    """``M(t) = max(-rho)`` over inside nodes with ``delta <= t``.

    Ladder entries with an empty shell are skipped with a warning.  Both
    exponents are fitted on the smallest-t half of the kept entries (those
    with ``M > 0``).
    """
    g = field.grid
    ladder = np.sort(np.asarray(ladder, dtype=float))
    delta = g.delta[g.inside]
    neg = -field.values[g.inside]
    order = np.argsort(delta, kind="stable")
    delta, running = delta[order], np.maximum.accumulate(neg[order])
    count = np.searchsorted(delta, ladder, side="right")
    empty = count == 0
    if np.any(empty):
        warnings.warn(f"empty shell at t={ladder[empty].tolist()}; entries skipped", stacklevel=2)
    ts = ladder[~empty]
    M = running[count[~empty] - 1]
    prof = DecayProfile(ts=ts, M=M, h=g.h, skipped=ladder[empty])
    use = M > 0
    tf, Mf = ts[use], M[use]
    half = tf[: max(2, (len(tf) + 1) // 2)] if len(tf) >= 2 else tf
    Mh = Mf[: len(half)]
    if len(half) >= 2 and np.all(half < 1):
        slope, res = _fit(np.log(-np.log(half)), np.log(Mh))
        prof.fitted_exponent_log, prof.residual_log = -slope, res
        prof.fitted_exponent_power, prof.residual_power = _fit(np.log(half), np.log(Mh))
    return prof


@dataclass
class CheckReport:
    """Row-wise result of an inequality check; ``rows`` hold dicts with a ``status`` key."""

    name: str
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self):
        return len(self.rows) > 0 and all(r["status"] == "pass" for r in self.rows)

    @property
    def worst(self):
        if not self.rows:
            return None
        return min(self.rows, key=lambda r: r["margin"])


def check_key_lemma(profile: DecayProfile, bounds: list, h=None) -> CheckReport:
    """``M(r) <= bound(r) (1 + 5h/r)`` at each bound's depth ``r``."""
    h = profile.h if h is None else h
    report = CheckReport("key_lemma", notes={"slack": f"{SLACK_FACTOR:g}*h/r", "h": h})
    for b in bounds:
        try:
            M = profile.at(b.r)
        except ParameterError:
            raise ParameterError(f"profile and bounds do not share the ladder point r={b.r}") from None
        slack = SLACK_FACTOR * h / b.r
        margin = b.value * (1 + slack) - M
        report.rows.append(
            {"t": b.r, "M": M, "bound": b.value, "margin": margin, "status": "pass" if margin >= 0 else "fail"}
        )
    return report


def check_comparison_inequality(field: ScalarField, f: BarrierFamily, t, tol=None) -> CheckReport:
    """``(1 - psi_t(z)) M(t) >= (1 - sup_band psi_t) (-rho(z))`` on the shell ``delta <= t``.

    The left side gets the relative slack ``5h/t``; ``tol`` (default ``1e-9``)
    absorbs solver round-off.
    """
    g = field.grid
    tol = 1e-9 if tol is None else tol
    k = kappa_alpha(f, t, g)
    pts, delta = g.inside_points()
    shell = delta <= t
    if not np.any(shell):
        raise HypothesisError(t, k.inf_shell, k.sup_band, f"empty shell at t={t:.6g}")
    rho = field.values[g.inside][shell]
    M = float(np.max(-rho))
    psi = f.psi_points(pts[shell], t, delta=delta[shell])
    slack = SLACK_FACTOR * g.h / t
    lhs = (1 - psi) * M * (1 + slack)
    rhs = (1 - k.sup_band) * (-rho)
    margin = lhs - rhs + tol
    idx = np.argwhere(g.inside)[shell]
    report = CheckReport("comparison", notes={"t": t, "slack": slack, "sup_band": k.sup_band, "M": M})
    bad = np.flatnonzero(margin < 0)
    report.notes["offending_nodes"] = [tuple(int(v) for v in idx[i]) for i in bad[:50]]
    report.rows.append(
        {
            "t": float(t),
            "M": M,
            "bound": float(np.min(lhs - rhs)),
            "margin": float(np.min(margin)),
            "status": "pass" if bad.size == 0 else "fail",
        }
    )
    return report


def classify_hyperconvexity(profile: DecayProfile, decades=2.0) -> str:
    """``hyperconvex-consistent``, ``obstructed`` or ``inconclusive``.

    Needs the kept ladder to span ``decades``; otherwise ``inconclusive``.
    """
    ts, M = profile.ts, profile.M
    if len(ts) < 2 or np.log10(ts[-1] / ts[0]) < decades - 1e-9:
        return "inconclusive"
    lo, hi = M[0], M[-1]
    if hi > 0 and lo <= 0.5 * hi and profile.monotone and lo < hi:
        return "hyperconvex-consistent"
    if lo >= 0.9 * hi:
        return "obstructed"
    return "inconclusive"


def check_holder_rate(profile: DecayProfile, tau) -> CheckReport:
    """One-point calibration ``C = M(t_max) (-log t_max)^tau``, then
    ``M(t) <= C (-log t)^{-tau} (1 + 5h/t)`` at every smaller ladder point."""
    ts, M = profile.ts, profile.M
    C = M[-1] * (-np.log(ts[-1])) ** tau
    report = CheckReport("holder_rate", notes={"tau": tau, "C": float(C)})
    for t, m in zip(ts[:-1], M[:-1]):
        curve = C * (-np.log(t)) ** (-tau)
        margin = curve * (1 + SLACK_FACTOR * profile.h / t) - m
        report.rows.append(
            {"t": float(t), "M": float(m), "bound": float(curve), "margin": float(margin),
             "status": "pass" if margin >= 0 else "fail"}
        )
    if not profile.fitted_exponent_log > 0:
        report.rows.append({"t": np.nan, "M": np.nan, "bound": 0.0,
                            "margin": float(profile.fitted_exponent_log), "status": "fail"})
    return report


def check_lipschitz_rate(profile: DecayProfile, tau, allowance=0.05) -> CheckReport:
    margin = profile.fitted_exponent_power - (tau - allowance)
    report = CheckReport("lipschitz_rate", notes={"tau": tau, "allowance": allowance})
    report.rows.append(
        {"t": np.nan, "M": np.nan, "bound": tau - allowance, "margin": float(margin),
         "status": "pass" if margin >= 0 else "fail"}
    )
    return report


def _fmt(v):
    return f"{v:.16e}"


def write_decay_table(report: CheckReport, path):
    """CSV ``t,M,bound,margin,status``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "M", "bound", "margin", "status"])
        for r in report.rows:
            w.writerow([_fmt(r["t"]), _fmt(r["M"]), _fmt(r["bound"]), _fmt(r["margin"]), r["status"]])


def write_fit_table(profile: DecayProfile, path, extra=()):
    """CSV ``name,value,residual``; ``extra`` adds ``(name, value, residual)`` rows."""
    rows = [
        ("fitted_exponent_log", profile.fitted_exponent_log, profile.residual_log),
        ("fitted_exponent_power", profile.fitted_exponent_power, profile.residual_power),
        *extra,
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "value", "residual"])
        for name, value, res in rows:
            w.writerow([name, _fmt(value), _fmt(res)])
