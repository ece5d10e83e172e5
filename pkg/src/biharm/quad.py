"""Deterministic quadrature for products of (possibly shifted) piecewise powers.

Every integral in the toolkit has the form

    int_lo^hi  prod_j  f_j(shift_j + r)  [dr or dr/r]

where each f_j is an exact piecewise power law.  Between breakpoints the
integrand is smooth and is handled by fixed-order Gauss panels, log-spaced
and doubled until the value stabilizes.  The origin piece and the infinite
tail are never truncated numerically: they are summed in closed form via
binomial series of the shifted factors, which converge geometrically because
the series region is kept below half the smallest shift.  Divergence is
reported through a flag (not an exception) so finiteness checks can consume
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .radial import PiecewisePower

_INF = float("inf")
_GAUSS_ORDER = 16
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_ORDER)


@dataclass(frozen=True)
class Factor:
    """One multiplicand f(shift + r) with f piecewise power."""

    pp: PiecewisePower
    shift: float = 0.0

    def __post_init__(self):
        if self.shift < 0:
            raise ParameterError(f"factor shift must be >= 0, got {self.shift}")


@dataclass(frozen=True)
class PowerIntegrand:
    """Product of shifted piecewise-power factors, optionally against dr/r."""

    factors: tuple[Factor, ...]
    log_measure: bool = True

    def __post_init__(self):
        if not self.factors:
            raise ParameterError("need at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        for f in self.factors:
            out = out * f.pp.eval(f.shift + r)
        if self.log_measure:
            out = out / r
        return out

    def breakpoints(self, lo: float, hi: float):
        """Radii where any factor switches piece, restricted to (lo, hi)."""
        pts = set()
        for f in self.factors:
            for b in f.pp.bounds:
                if 0.0 < b < _INF:
                    r = b - f.shift
                    if lo < r < hi:
                        pts.add(r)
        return sorted(pts)


@dataclass(frozen=True)
class QuadratureResult:
    """Value and reliability data for one integral.

    ``tail_exponent`` is the exponent of T -> int_T^inf of the integrand
    (integrand exponent + 1); a nonnegative value means the tail diverges,
    zero being the logarithmic case.
    """

    value: float
    abs_error_estimate: float
    tail_exponent: float
    diverged: bool = False


def analytic_tail(q: float, T: float) -> QuadratureResult:
    """Closed form of int_T^inf r**(-q-1) dr: T**(-q)/q for q > 0, else divergent."""
    if not T > 0:
        raise ParameterError(f"tail start must be positive, got {T}")
    if q <= 0:
        return QuadratureResult(_INF, _INF, -q, diverged=True)
    return QuadratureResult(T ** (-q) / q, 0.0, -q, diverged=False)


def _binom_coeffs(sigma: float, k_max: int) -> np.ndarray:
    """Coefficients of (1+x)**sigma up to x**k_max."""
    c = np.empty(k_max + 1)
    c[0] = 1.0
    for k in range(1, k_max + 1):
        c[k] = c[k - 1] * (sigma - k + 1) / k
    return c


def _shifted_series(shifted, k_max: int) -> np.ndarray:
    """Product series prod (1 + x_j*u)**sigma_j as coefficients of u**k.

    The ratios x_j are at most 1/2 by construction of the series regions, so
    the coefficients stay bounded and the series converges geometrically.
    """
    d = np.zeros(k_max + 1)
    d[0] = 1.0
    for sigma, x in shifted:
        c = _binom_coeffs(sigma, k_max) * x ** np.arange(k_max + 1)
        d = np.convolve(d, c)[: k_max + 1]
    return d


def _series_sum(d: np.ndarray, term_fn, x_ratio: float):
    """Sum d_k * term_fn(k) with a geometric remainder estimate.

    ``x_ratio`` bounds the geometric decay of successive terms (<= 1/2 by
    construction of the series regions).
    """
    total = 0.0
    last = 0.0
    for k in range(d.size):
        t = d[k] * term_fn(k)
        total += t
        last = abs(t)
        if k > 8 and last <= 1e-17 * max(abs(total), 1e-300):
            break
    remainder = last * x_ratio / (1.0 - x_ratio) if x_ratio < 1.0 else last
    return total, remainder


def _series_terms(integrand: PowerIntegrand, at_origin: bool):
    """(pure r-exponent, coefficient, shifted-factor list).

    At the origin the relevant pieces are those active as r -> 0+; at the
    tail those active as r -> inf.  Shifted factors are returned as
    (sigma, shift) pairs for the binomial product series.
    """
    q = -1.0 if integrand.log_measure else 0.0
    coef = 1.0
    shifted = []
    for f in integrand.factors:
        pp = f.pp
        if at_origin:
            if f.shift == 0.0:
                q += pp.exps[0]
                coef *= pp.coefs[0]
            else:
                j = pp.piece_at(f.shift)
                coef *= pp.coefs[j] * f.shift ** pp.exps[j]
                shifted.append((pp.exps[j], f.shift))
        else:
            q += pp.exps[-1]
            coef *= pp.coefs[-1]
            if f.shift > 0.0:
                shifted.append((pp.exps[-1], f.shift))
    return q, coef, shifted


def _origin_piece(integrand: PowerIntegrand, eps: float):
    """Closed-form integral over (0, eps); assumes eps below every breakpoint
    and at most half of every positive shift.

    With u = r/eps each shifted factor is (1 + (eps/shift) u)**sigma, and
        int_0^eps r**q u**k dr = eps**(q+1) / (q+k+1).
    """
    q, coef, shifted = _series_terms(integrand, at_origin=True)
    if coef == 0.0:
        return 0.0, 0.0, q, False
    if q <= -1.0:
        return _INF, _INF, q, True
    ratios = [(sigma, eps / sh) for sigma, sh in shifted]
    x_max = max((x for _, x in ratios), default=0.0)
    k_max = 80
    while True:
        d = _shifted_series(ratios, k_max)
        value, rem = _series_sum(d, lambda k: 1.0 / (q + k + 1), x_max)
        tail_term = abs(d[-1]) / (q + k_max + 1)
        if ratios and tail_term > 1e-15 * max(abs(value), 1e-300) and k_max < 1280:
            k_max *= 2
            continue
        scale = coef * eps ** (q + 1.0)
        return scale * value, abs(scale) * (rem + tail_term), q, False


def _tail_piece(integrand: PowerIntegrand, start: float):
    """Closed-form integral over (start, inf); assumes start beyond every
    breakpoint and at least twice every shift.

    With u = start/r each shifted factor is (1 + (shift/start) u)**sigma, and
        int_start^inf r**q u**k dr = start**(q+1) / (k-q-1).
    """
    q, coef, shifted = _series_terms(integrand, at_origin=False)
    if coef == 0.0:
        return 0.0, 0.0, q, False
    if q + 1.0 >= 0.0:
        return _INF, _INF, q, True
    ratios = [(sigma, sh / start) for sigma, sh in shifted]
    x_max = max((x for _, x in ratios), default=0.0)
    k_max = 80
    while True:
        d = _shifted_series(ratios, k_max)
        value, rem = _series_sum(d, lambda k: 1.0 / (k - q - 1), x_max)
        tail_term = abs(d[-1]) / (k_max - q - 1)
        if ratios and tail_term > 1e-15 * max(abs(value), 1e-300) and k_max < 1280:
            k_max *= 2
            continue
        scale = coef * start ** (q + 1.0)
        return scale * value, abs(scale) * (rem + tail_term), q, False


def _gauss_zone(integrand: PowerIntegrand, seams, level: int):
    """Gauss panels in log space over consecutive seams at a refinement level.

    Panel counts scale with each segment's log width and double per level;
    evaluation is a single vectorized pass over all panels.
    """
    t = np.log(np.asarray(seams, dtype=float))
    widths = np.diff(t)
    n_panels = (1 << level) * np.maximum(1, np.ceil(widths / 2.0).astype(np.int64))
    total_panels = int(n_panels.sum())
    seg_start = np.repeat(t[:-1], n_panels)
    panel_h = np.repeat(widths / n_panels, n_panels)
    within = np.arange(total_panels) - np.repeat(np.cumsum(n_panels) - n_panels, n_panels)
    mid = seg_start + (within + 0.5) * panel_h
    half = 0.5 * panel_h
    tt = mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    r = np.exp(tt)
    vals = integrand.eval(r.ravel()).reshape(r.shape) * r
    total = float(np.sum(vals * _GAUSS_WEIGHTS[None, :] * half[:, None]))
    return total, tt.size


def integrate(integrand: PowerIntegrand, lo: float = 0.0, hi: float = _INF,
              rel_tol: float = 1e-12, max_nodes: int = 1 << 20) -> QuadratureResult:
    """Integrate a shifted power product over (lo, hi), hi possibly infinite.

    The result value is within ``abs_error_estimate`` of the true integral;
    a divergent origin or tail sets the ``diverged`` flag instead of raising.
    """
    if lo < 0 or hi <= lo:
        raise ParameterError(f"need 0 <= lo < hi, got ({lo}, {hi})")

    q_tail, coef_tail, _ = _series_terms(integrand, at_origin=False)
    tail_exponent = q_tail + 1.0

    value = 0.0
    abs_err = 0.0

    # -- infinite tail: closed form beyond a start that clears every
    #    breakpoint and doubles every shift
    bps_all = integrand.breakpoints(0.0, _INF)
    if math.isinf(hi):
        if coef_tail != 0.0 and tail_exponent >= 0.0:
            return QuadratureResult(_INF, _INF, tail_exponent, diverged=True)
        t_start = max([1.0, lo] + [2.0 * f.shift for f in integrand.factors] + bps_all)
        tv, te, _, _ = _tail_piece(integrand, t_start)
        value += tv
        abs_err += te
        zone_hi = t_start
    else:
        zone_hi = hi

    # -- origin: closed form below every breakpoint and half of every shift
    if lo == 0.0:
        q0, coef0, _ = _series_terms(integrand, at_origin=True)
        if coef0 != 0.0 and q0 <= -1.0:
            return QuadratureResult(_INF, _INF, tail_exponent, diverged=True)
        caps = [1.0, zone_hi] + [b for b in bps_all if b > 0]
        caps += [0.5 * f.shift for f in integrand.factors if f.shift > 0]
        for f in integrand.factors:
            if f.shift > 0:
                j = f.pp.piece_at(f.shift)
                nxt = f.pp.bounds[j + 1]
                if not math.isinf(nxt):
                    caps.append(nxt - f.shift)
        eps = 0.5 * min(c for c in caps if c > 0)
        eps = min(eps, zone_hi)
        ov, oe, _, _ = _origin_piece(integrand, eps)
        value += ov
        abs_err += oe
        zone_lo = eps
    else:
        zone_lo = lo

    # -- numeric middle zone
    if zone_hi > zone_lo * (1.0 + 1e-15):
        seams = [zone_lo] + integrand.breakpoints(zone_lo, zone_hi) + [zone_hi]
        prev = None
        level = 0
        while True:
            cur, nodes = _gauss_zone(integrand, seams, level)
            if prev is not None:
                change = abs(cur - prev)
                if change <= rel_tol * max(abs(cur), 1e-300) or nodes * 2 > max_nodes:
                    value += cur
                    abs_err += change
                    break
            prev = cur
            level += 1
    return QuadratureResult(value, abs_err, tail_exponent, diverged=False)
