"""Green-kernel machinery: the composed biharmonic kernel, radial potential
operators in three kernel modes, annulus lower bounds, and a Euclidean Monte
Carlo oracle.

Kernel modes
------------
split-comparison
    (G phi)(rho) = int g(rho+r) phi(r) v(r) dr/r + int g(r) phi(rho+r) v(r) dr/r,
    the two-sided comparable reduction of the manifold potential for radial
    monotone sources.
surrogate-exact
    kernel max(rho, r)**(-gamma) against the measure alpha * r**(alpha-1) dr;
    the exact inverse of the surrogate radial operator in `spectral`.
euclidean-exact
    kernel max(rho, r)**(2-n) against the sphere-area measure; exact for the
    Newtonian kernel by the spherical mean value property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentIntegralError, ParameterError
from .profiles import ManifoldProfile, SourceProfile, profile_piecewise
from .quad import Factor, PowerIntegrand, QuadratureResult, integrate
from .radial import PiecewisePower, RadialFunction, pp_product

_INF = float("inf")

MODE_SPLIT = "split-comparison"
MODE_SURROGATE = "surrogate-exact"
MODE_EUCLIDEAN = "euclidean-exact"
KERNEL_MODES = (MODE_SPLIT, MODE_SURROGATE, MODE_EUCLIDEAN)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R**n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel mode plus the profile it draws exponents from."""

    mode: str
    prof: ManifoldProfile

    def __post_init__(self):
        if self.mode not in KERNEL_MODES:
            raise ParameterError(f"kernel mode must be one of {KERNEL_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class ProfilePowerSource:
    """Product of profile powers, e.g. psi * f**(a*p), with optional support cutoff."""

    factors: tuple
    coef: float = 1.0
    support: tuple = (0.0, _INF)

    def to_piecewise(self, prof: ManifoldProfile, src: SourceProfile | None) -> PiecewisePower:
        pp = PiecewisePower.single(self.coef, 0.0)
        for kind, power in self.factors:
            pp = pp_product(pp, profile_piecewise(kind, prof, src, power))
        lo, hi = self.support
        if lo > 0.0 or hi != _INF:
            pp = pp.restricted(lo, hi)
        return pp


@dataclass(frozen=True)
class BallSource:
    """Indicator of the ball of given radius, scaled by height."""

    radius: float
    height: float = 1.0

    @property
    def support_radius(self) -> float:
        return self.radius

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r <= self.radius, self.height, 0.0)
        return out if out.ndim else float(out)

    def to_piecewise(self) -> PiecewisePower:
        return PiecewisePower((0.0, self.radius, _INF), (self.height, 0.0), (0.0, 0.0))


def source_piecewise(source, prof: ManifoldProfile, src: SourceProfile | None) -> PiecewisePower:
    if isinstance(source, PiecewisePower):
        return source
    if isinstance(source, RadialFunction):
        return source.as_piecewise()
    if isinstance(source, ProfilePowerSource):
        return source.to_piecewise(prof, src)
    if isinstance(source, BallSource):
        return source.to_piecewise()
    raise ParameterError(f"unsupported source type {type(source).__name__}")


def compose_green(prof: ManifoldProfile, rho: float,
                  rel_tol: float = 1e-12) -> QuadratureResult:
    """The 1-D reduction of the composed Green kernel at separation rho:

        int_0^inf g(rho + r) g(r) v(r) dr/r.

    Finite exactly when gamma > alpha/2; otherwise the result carries the
    diverged flag (the tail exponent being alpha - 2*gamma).
    """
    if not rho > 0:
        raise ParameterError(f"separation rho must be positive, got {rho}")
    g = profile_piecewise("g", prof)
    v = profile_piecewise("v", prof)
    integrand = PowerIntegrand((Factor(g, float(rho)), Factor(g, 0.0), Factor(v, 0.0)),
                               log_measure=True)
    return integrate(integrand, 0.0, _INF, rel_tol=rel_tol)


@dataclass(frozen=True)
class AnnulusBound:
    """Normalized lower bound for the composed kernel on an annulus shell."""

    value: float
    exponent: float


def annulus_lower_bound(prof: ManifoldProfile, radius: float) -> AnnulusBound:
    """radius**(-(2*gamma-alpha)) with all comparability constants set to 1."""
    if not radius >= 1.0:
        raise ParameterError(f"annulus bound is defined for radius >= 1, got {radius}")
    exponent = float(prof.alpha) - 2.0 * float(prof.gamma)
    return AnnulusBound(radius ** exponent, exponent)


# -- max-kernel potentials (surrogate / euclidean) ---------------------------

def _max_kernel_data(spec: KernelSpec):
    if spec.mode == MODE_SURROGATE:
        kernel_exp = -float(spec.prof.gamma)
        measure = PiecewisePower.single(float(spec.prof.alpha), float(spec.prof.alpha) - 1.0)
    else:
        n = spec.prof.dim_n
        kernel_exp = 2.0 - n
        measure = PiecewisePower.single(sphere_area(n), n - 1.0)
    return kernel_exp, measure


def _piece_integrals(bounds, coefs, exps, extra_exp):
    """Exact integrals of each finite piece with an extra power folded in."""
    vals = np.zeros(len(coefs))
    for j in range(len(coefs)):
        a, b = bounds[j], bounds[j + 1]
        if math.isinf(b) or coefs[j] == 0.0:
            continue
        e = exps[j] + extra_exp
        if a == 0.0:
            vals[j] = coefs[j] * b ** (e + 1.0) / (e + 1.0) if e > -1.0 else _INF
        elif e == -1.0:
            vals[j] = coefs[j] * math.log(b / a)
        else:
            vals[j] = coefs[j] * (b ** (e + 1.0) - a ** (e + 1.0)) / (e + 1.0)
    return vals


def _partial_from_left(bounds, coefs, exps, extra_exp, idx, rho):
    lo = np.asarray(bounds, dtype=float)[idx]
    c = np.asarray(coefs)[idx]
    e = np.asarray(exps)[idx] + extra_exp
    out = np.zeros_like(rho)
    nz = c != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        reg = nz & (e != -1.0)
        out[reg] = c[reg] * (rho[reg] ** (e[reg] + 1.0) - lo[reg] ** (e[reg] + 1.0)) / (e[reg] + 1.0)
        logc = nz & (e == -1.0)
        out[logc] = c[logc] * np.log(rho[logc] / lo[logc])
    return out


def _max_kernel_values(spec: KernelSpec, weighted: PiecewisePower, rho: np.ndarray) -> np.ndarray:
    """potential(rho) = rho**kexp * int_0^rho w + int_rho^inf r**kexp w."""
    kexp, _ = _max_kernel_data(spec)
    b, c, e = weighted.bounds, weighted.coefs, weighted.exps

    if c[0] != 0.0 and e[0] <= -1.0:
        raise DivergentIntegralError(
            f"potential source diverges at the origin: integrand exponent {e[0]} <= -1",
            location="origin", exponent=e[0])
    if c[-1] != 0.0 and e[-1] + kexp >= -1.0:
        raise DivergentIntegralError(
            f"potential tail diverges: integrand exponent {e[-1] + kexp} >= -1",
            location="tail", exponent=e[-1] + kexp)

    inner_full = _piece_integrals(b, c, e, 0.0)
    prefix = np.concatenate([[0.0], np.cumsum(inner_full)])

    # per-piece integrals with the kernel folded in; the final (infinite)
    # piece gets its closed-form tail
    outer_full = _piece_integrals(b, c, e, kexp)
    if math.isinf(b[-1]) and c[-1] != 0.0:
        et = e[-1] + kexp
        outer_full[-1] = (-c[-1] * b[-2] ** (et + 1.0) / (et + 1.0)
                          if b[-2] > 0.0 else _INF)
    suffix = np.concatenate([np.cumsum(outer_full[::-1])[::-1], [0.0]])

    rho = np.asarray(rho, dtype=float)
    idx = np.clip(np.searchsorted(b, rho, side="right") - 1, 0, len(c) - 1)
    inner = prefix[idx] + _partial_from_left(b, c, e, 0.0, idx, rho)
    outer = suffix[idx + 1] + (
        _piece_integrals_at(b, c, e, kexp, idx, rho))
    pos = rho > 0
    first = np.zeros_like(rho)
    first[pos] = rho[pos] ** kexp * inner[pos]
    values = first + outer
    zero_mask = rho == 0.0
    if np.any(zero_mask):
        if c[0] != 0.0 and e[0] + kexp <= -1.0:
            raise DivergentIntegralError(
                f"potential at rho=0 diverges: origin exponent {e[0] + kexp} <= -1",
                location="origin", exponent=e[0] + kexp)
        values[zero_mask] = suffix[0]
    return values


def _piece_integrals_at(bounds, coefs, exps, extra_exp, idx, rho):
    """int_rho^(piece end) of the piece containing each rho, kernel folded."""
    hi = np.asarray(bounds, dtype=float)[idx + 1]
    c = np.asarray(coefs)[idx]
    e = np.asarray(exps)[idx] + extra_exp
    out = np.zeros_like(rho)
    nz = (c != 0.0) & (rho > 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fin = nz & np.isfinite(hi)
        reg = fin & (e != -1.0)
        out[reg] = c[reg] * (hi[reg] ** (e[reg] + 1.0) - rho[reg] ** (e[reg] + 1.0)) / (e[reg] + 1.0)
        logc = fin & (e == -1.0)
        out[logc] = c[logc] * np.log(hi[logc] / rho[logc])
        inf_piece = nz & ~np.isfinite(hi)
        out[inf_piece] = -c[inf_piece] * rho[inf_piece] ** (e[inf_piece] + 1.0) / (e[inf_piece] + 1.0)
    return out


def _split_values(spec: KernelSpec, src_pp: PiecewisePower, rho: np.ndarray,
                  rel_tol: float) -> np.ndarray:
    g = profile_piecewise("g", spec.prof)
    v = profile_piecewise("v", spec.prof)
    values = np.empty(rho.size)
    for i, r0 in enumerate(rho):
        t1 = integrate(PowerIntegrand((Factor(g, float(r0)), Factor(src_pp, 0.0), Factor(v, 0.0))),
                       rel_tol=rel_tol)
        t2 = integrate(PowerIntegrand((Factor(g, 0.0), Factor(src_pp, float(r0)), Factor(v, 0.0))),
                       rel_tol=rel_tol)
        if t1.diverged or t2.diverged:
            bad = t1 if t1.diverged else t2
            raise DivergentIntegralError(
                f"split potential diverges: tail exponent {bad.tail_exponent} >= 0",
                location="tail", exponent=bad.tail_exponent)
        values[i] = t1.value + t2.value
    return values


def potential_values(spec: KernelSpec, source, rho,
                     source_profile: SourceProfile | None = None,
                     rel_tol: float = 1e-10) -> np.ndarray:
    """Kernel-integral values at the given radii (allows rho = 0 in the
    max-kernel modes)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    src_pp = source_piecewise(source, spec.prof, source_profile)
    if all(c == 0.0 for c in src_pp.coefs):
        return np.zeros(rho.size)
    if any(c < 0.0 for c in src_pp.coefs):
        raise ParameterError("potential sources must be nonnegative")
    if spec.mode == MODE_SPLIT:
        if np.any(rho <= 0):
            raise ParameterError("split-comparison potentials need rho > 0")
        return _split_values(spec, src_pp, rho, rel_tol)
    _, measure = _max_kernel_data(spec)
    weighted = pp_product(src_pp, measure)
    return _max_kernel_values(spec, weighted, rho)


def potential(spec: KernelSpec, source, grid=None,
              source_profile: SourceProfile | None = None,
              rel_tol: float = 1e-10) -> RadialFunction:
    """Apply the kernel integral operator to a nonnegative radial source.

    Positivity is preserved and the operator is monotone in the source.
    Divergent origin/tail behavior raises DivergentIntegralError carrying the
    failing exponent.
    """
    if grid is None:
        if isinstance(source, RadialFunction):
            grid = source.grid
        else:
            raise ParameterError("potential needs a target grid for closed-form sources")
    grid = np.asarray(grid, dtype=float)
    values = potential_values(spec, source, grid, source_profile, rel_tol)
    if np.all(values == 0.0):
        return RadialFunction.zero(grid)
    return RadialFunction.from_values(grid, values)


# -- Monte Carlo oracle for the euclidean-exact mode -------------------------

def mc_oracle(n: int, x_radius: float, src, samples: int, seed: int,
              batch: int = 1 << 19):
    """Unbiased Monte Carlo estimate of int_{R^n} |x-y|**(2-n) src(|y|) dy.

    Two importance-sampling regimes, both unbiased and reproducible for a
    fixed seed.  When the evaluation point sits inside or near the source
    support, the distance t = |x-y| is sampled with density 2t/t_max**2 on
    (0, t_max), t_max = |x| + support radius, which exactly cancels the
    kernel singularity.  When the point is far outside (|x| >= 2 * support)
    the kernel is bounded, and points y are sampled uniformly in the support
    ball.  Returns (estimate, standard error).
    """
    if n < 5:
        raise ParameterError(f"oracle is for n >= 5 (kernel exponent 2-n), got n={n}")
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    support = float(src.support_radius)
    if support <= 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    far_field = x_radius >= 2.0 * support

    total = 0.0
    total_sq = 0.0
    remaining = int(samples)
    while remaining > 0:
        m = min(batch, remaining)
        z = rng.standard_normal((m, n))
        omega1 = z[:, 0] / np.linalg.norm(z, axis=1)
        if far_field:
            # y uniform in the support ball; kernel bounded away from x
            ball_vol = math.pi ** (n / 2.0) * support ** n / math.gamma(n / 2.0 + 1.0)
            y_radius = support * rng.random(m) ** (1.0 / n)
            dist = np.sqrt(x_radius ** 2 - 2.0 * x_radius * y_radius * omega1 + y_radius ** 2)
            f = ball_vol * dist ** (2.0 - n) * np.asarray(src(y_radius), dtype=float)
        else:
            t_max = x_radius + support
            t = t_max * np.sqrt(rng.random(m))
            y_radius = np.sqrt(x_radius ** 2 + 2.0 * x_radius * t * omega1 + t ** 2)
            f = (sphere_area(n) * t_max ** 2 / 2.0) * np.asarray(src(y_radius), dtype=float)
        total += float(np.sum(f))
        total_sq += float(np.sum(f * f))
        remaining -= m
    mean = total / samples
    var = max(total_sq / samples - mean ** 2, 0.0) * samples / (samples - 1)
    stderr = math.sqrt(var / samples)
    return mean, stderr
