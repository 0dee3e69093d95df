"""Bespoke mean-variance portfolios and the risk-to-return curve.

For a risk limit ``tau`` (annualized standard deviation) the bespoke portfolio
maximizes ``mu.a`` subject to ``a' Sigma a <= tau**2`` and ``sum(a) == 1``,
optionally with ``a >= 0``.  The solver never inverts ``Sigma``: it runs
projected gradient ascent on the Lagrangian ``mu.a - lam * a' Sigma a`` and
bisects on ``lam`` until the risk constraint is met.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfeasibleRiskError, ModelError, ParameterError
from .market_io import AssetUniverse

INNER_TOL = 1e-10
INNER_MAX_ITER = 50_000
RISK_GAP = 1e-10  # in standard-deviation units
LAMBDA_CEILING = 1e16


def _solve(universe, lam, a0, long_only, lmax):
    mu = universe.mu
    sigma = universe.sigma
    step = 1.0 / (2.0 * lam * lmax)
    if long_only:
        a, _ = kernels.ascent_simplex(mu, sigma, lam, a0, step, INNER_MAX_ITER, INNER_TOL)
    else:
        a, _ = kernels.ascent_affine(mu, sigma, lam, a0, step, INNER_MAX_ITER, INNER_TOL)
    if not np.all(np.isfinite(a)):
        raise ModelError("objective is unbounded on the feasible set (singular covariance)")
    return a


def _variance(universe, a):
    return float(a @ universe.sigma @ a)


def _risk(universe, a):
    return math.sqrt(max(_variance(universe, a), 0.0))


def _min_variance(universe, long_only, lmax, subset=None):
    m = universe.size
    idx = np.arange(m) if subset is None else np.asarray(subset)
    sub = AssetUniverse(
        tuple(universe.names[j] for j in idx),
        np.zeros(len(idx)),
        universe.sigma[np.ix_(idx, idx)],
    )
    a0 = np.full(len(idx), 1.0 / len(idx))
    if lmax <= 0.0:
        a_sub = a0
    else:
        a_sub = _solve(sub, 1.0, a0, long_only, lmax)
    a = np.zeros(m)
    a[idx] = a_sub
    return a


def bespoke_return(universe: AssetUniverse, tau: float, long_only: bool = True):
    """Return ``(r(tau), weights)`` for one risk threshold."""
    if universe.size == 0:
        raise ModelError("empty universe")
    if not (tau >= 0.0) or not math.isfinite(tau):
        raise ParameterError(f"risk threshold must be finite and >= 0, got {tau!r}")
    return _bespoke(universe, float(tau), long_only, _lmax(universe), None)


def _lmax(universe):
    return float(max(np.linalg.eigvalsh(universe.sigma).max(), 0.0))


def _bespoke(universe, tau, long_only, lmax, warm):
    mu = universe.mu
    m = universe.size

    if long_only:
        top = np.flatnonzero(mu >= mu.max() - 1e-15)
        a_top = _min_variance(universe, True, lmax, top) if len(top) > 1 else np.eye(m)[top[0]]
        if _risk(universe, a_top) <= tau + RISK_GAP:
            return float(mu @ a_top), a_top
        if tau == 0.0:
            riskless = np.flatnonzero(np.diag(universe.sigma) == 0.0)
            if len(riskless):
                a0 = np.eye(m)[riskless[np.argmax(mu[riskless])]]
                return float(mu @ a0), a0
    elif np.ptp(mu) == 0.0 or lmax == 0.0:
        if lmax == 0.0 and np.ptp(mu) > 0.0:
            raise ModelError("objective is unbounded: riskless assets with different returns")
        a_mv = _min_variance(universe, False, lmax)
        if tau < _risk(universe, a_mv) - RISK_GAP:
            raise InfeasibleRiskError(tau, _risk(universe, a_mv))
        return float(mu @ a_mv), a_mv

    a_mv = _min_variance(universe, long_only, lmax)
    min_risk = _risk(universe, a_mv)
    if tau < min_risk - RISK_GAP:
        raise InfeasibleRiskError(tau, min_risk)

    a_start = np.full(m, 1.0 / m) if warm is None else warm
    # bracket: risk(lam) is non-increasing in lam
    lo, hi = 0.0, 1.0
    a_hi = _solve(universe, hi, a_start, long_only, lmax)
    while _risk(universe, a_hi) > tau + RISK_GAP and hi < LAMBDA_CEILING:
        lo = hi
        hi *= 4.0
        a_hi = _solve(universe, hi, a_hi, long_only, lmax)
    if _risk(universe, a_hi) > tau + RISK_GAP:
        # target sits on the minimum-variance boundary
        return float(mu @ a_hi), a_hi
    if lo == 0.0:
        lo = hi
        a_lo = a_hi
        while _risk(universe, a_lo) <= tau:
            hi, a_hi = lo, a_lo
            lo *= 0.25
            if lo < 1e-300:
                return float(mu @ a_hi), a_hi
            a_lo = _solve(universe, lo, a_lo, long_only, lmax)

    a_mid = a_hi
    for _ in range(400):
        if abs(_risk(universe, a_hi) - tau) <= RISK_GAP:
            break
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        a_mid = _solve(universe, mid, a_mid, long_only, lmax)
        if _risk(universe, a_mid) > tau:
            lo = mid
        else:
            hi, a_hi = mid, a_mid
    return float(mu @ a_hi), a_hi


@dataclass(frozen=True)
class ReturnCurve:
    """Optimal return and weights at a sorted set of risk thresholds."""

    taus: np.ndarray
    returns: np.ndarray
    weights: np.ndarray
    names: tuple[str, ...] = ()
    long_only: bool = True

    def __post_init__(self):
        for name in ("taus", "returns", "weights"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def B(self) -> float:
        return float(self.returns.max()) if len(self.returns) else 0.0

    def __len__(self):
        return len(self.taus)

    def points(self):
        return {float(t): (float(r), w.copy()) for t, r, w in zip(self.taus, self.returns, self.weights)}

    def __call__(self, tau):
        """Piecewise-linear interpolation of the return between grid points."""
        tau = np.asarray(tau, dtype=np.float64)
        lo, hi = self.taus[0], self.taus[-1]
        if np.any(tau < lo - 1e-15) or np.any(tau > hi + 1e-15):
            raise ParameterError(f"tau outside curve range [{lo}, {hi}]")
        return np.interp(tau, self.taus, self.returns)

    def derivative(self, tau):
        """Slope of the curve from central differences on the grid."""
        if len(self.taus) < 2:
            return np.zeros_like(np.asarray(tau, dtype=np.float64))
        slopes = np.gradient(self.returns, self.taus)
        return np.interp(tau, self.taus, slopes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        m = self.weights.shape[1] if self.weights.ndim == 2 else 0
        writer.writerow(["tau", "return", *(f"w_{j + 1}" for j in range(m))])
        for t, r, w in zip(self.taus, self.returns, self.weights):
            writer.writerow([f"{t:.12g}", f"{r:.12g}", *(f"{x:.12g}" for x in w)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ReturnCurve":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        header = rows[0]
        if header[:2] != ["tau", "return"]:
            raise ValueError("curve CSV must start with columns tau,return")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1], data[:, 2:], tuple(header[2:]))


def build_curve(universe: AssetUniverse, thresholds, long_only: bool = True) -> ReturnCurve:
    """Solve every requested threshold and repair tiny monotonicity violations.

    Duplicate thresholds are merged.  The running-maximum repair carries the
    weights of the best point seen so far.
    """
    taus = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if np.any(np.diff(taus) < 0):
        raise ParameterError("thresholds must be sorted ascending")
    if np.any(taus < 0):
        raise ParameterError("thresholds must be >= 0")
    taus = np.unique(taus)
    if universe.size == 0:
        raise ModelError("empty universe")
    lmax = _lmax(universe)
    rets = np.empty(len(taus))
    weights = np.empty((len(taus), universe.size))
    warm = None
    for k, t in enumerate(taus):
        try:
            rets[k], weights[k] = _bespoke(universe, float(t), long_only, lmax, warm)
        except InfeasibleRiskError as exc:
            raise InfeasibleRiskError(float(t), exc.min_risk) from None
        warm = weights[k]
    for k in range(1, len(taus)):
        if rets[k] < rets[k - 1]:
            rets[k] = rets[k - 1]
            weights[k] = weights[k - 1]
    return ReturnCurve(taus, rets, weights, universe.names, long_only)
