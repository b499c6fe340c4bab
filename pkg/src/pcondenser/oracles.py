"""
Analytic oracles
================

Closed forms and quadratures used as ground truth: radial condenser
capacities in (weighted) R^n, the R^n p-Green function, the 1D weighted
half-line potential, and the volume-growth hyperbolicity test.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate

from .errors import RejectionError
from .model_space import sphere_area

QUAD_ABS = 1e-12


def _gamma_exp(n, p):
    return (p - n) / (p - 1)


def radial_condenser_capacity(n, p, r, s, weight=None):
    """cap_p(B_r, B_s) in R^n, optionally with a radial weight w(rho).

    Unweighted, p != n:
        omega_{n-1} ((n-p)/(p-1))^{p-1} |r^{(p-n)/(p-1)} - s^{(p-n)/(p-1)}|^{1-p}
    Unweighted, p = n:
        omega_{n-1} log(s/r)^{1-n}
    Weighted: (int_r^s (omega_{n-1} rho^{n-1} w)^{1/(1-p)} d rho)^{1-p}.
    s = inf is allowed.
    """
    if not 0 < r < s:
        raise RejectionError("need 0 < r < s")
    if not p > 1:
        raise RejectionError("need p > 1")
    omega = sphere_area(n)
    if weight is not None:
        return radial_capacity_quadrature(n, p, r, s, weight)
    if p == n:
        if math.isinf(s):
            return 0.0
        return omega * math.log(s / r) ** (1 - n)
    g = _gamma_exp(n, p)
    if math.isinf(s):
        if p > n:
            return 0.0
        diff = r**g
    else:
        diff = abs(r**g - s**g)
    return omega * abs((n - p) / (p - 1)) ** (p - 1) * diff ** (1 - p)


def radial_capacity_quadrature(n, p, r, s, weight=None):
    """Euler-Lagrange reduction: (int_r^s (omega rho^{n-1} w)^{1/(1-p)})^{1-p}."""
    omega = sphere_area(n)

    def integrand(rho):
        w = 1.0 if weight is None else float(weight(rho))
        return (omega * rho ** (n - 1) * w) ** (1.0 / (1.0 - p))

    with warnings.catch_warnings():
        # quad flags round-off once it is at machine precision; not an error here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        # purely relative: the integral can be far below any fixed absolute tolerance
        opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
        if math.isinf(s):
            total = (integrate.quad(integrand, r, 2 * r, **opts)[0]
                     + integrate.quad(integrand, 2 * r, math.inf, **opts)[0])
        else:
            total = integrate.quad(integrand, r, s, **opts)[0]
    if not np.isfinite(total):
        return 0.0
    return total ** (1.0 - p)


def green_constant(n, p):
    """C_{n,p} = ((p-1)/(n-p)) omega_{n-1}^{1/(1-p)}."""
    if not 1 < p < n:
        raise RejectionError("the R^n Green function needs 1 < p < n")
    return (p - 1) / (n - p) * sphere_area(n) ** (1.0 / (1.0 - p))


def rn_green(n, p, rho):
    """C_{n,p} rho^{(p-n)/(p-1)}, normalized so cap({u >= b}, R^n) = b^{1-p}."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise RejectionError("distance must be positive")
    return green_constant(n, p) * rho ** _gamma_exp(n, p)


def rn_green_level_radius(n, p, b):
    """Radius of the superlevel ball {rn_green >= b}."""
    return (b / green_constant(n, p)) ** (1.0 / _gamma_exp(n, p))


@dataclass
class HalfLineOracle:
    """alpha_r and u_r for the weighted half-line (r, inf)."""

    p: float
    r: float
    alpha: float
    weight: object
    energy: float

    def _g(self, t):
        return _weight_power(self.weight, t, 1.0 / (1.0 - self.p))

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        with warnings.catch_warnings():
            # far-out tails are below round-off; quad's warning is not an error here
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for k, xk in enumerate(x):
                if xk <= self.r:
                    out[k] = 1.0
                else:
                    out[k] = integrate.quad(self._g, xk, math.inf, epsabs=QUAD_ABS,
                                            epsrel=1e-12, limit=200)[0] / self.alpha
        return out


def _weight_power(weight, t, e):
    """w(t)^e for e < 0, reading an overflowing weight as +inf (so the power is 0)."""
    try:
        w = float(weight(t))
    except OverflowError:
        return 0.0
    return w**e if math.isfinite(w) else 0.0


def tail_exponent(fun, start, samples=9):
    """Log-log slope of a positive integrand over t in start + 2^k."""
    t = start + 2.0 ** np.arange(samples)
    try:
        vals = np.array([float(fun(x)) for x in t])
    except OverflowError:
        return -math.inf
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        # underflow to 0 means faster than any power
        return -math.inf
    return float(np.polyfit(np.log(t[-4:]), np.log(vals[-4:]), 1)[0])


def oned_weighted(weight, r, p):
    """alpha_r = int_r^inf w^{1/(1-p)} and the p-harmonic u_r on (r, inf).

    Raises RejectionError when the integrand's tail decays no faster than 1/t.
    The energy identity int_r^inf w |u_r'|^p = alpha_r^{1-p} is checked by an
    independent quadrature of w |u_r'|^p.
    """
    g = lambda t: _weight_power(weight, t, 1.0 / (1.0 - p))
    slope = tail_exponent(g, max(r, 0.0) + 1.0)
    if slope >= -1.0 - 1e-3:
        raise RejectionError(
            f"int_r^inf w^(1/(1-p)) diverges: integrand tail exponent {slope:.4g} >= -1")
    alpha = integrate.quad(g, r, math.inf, epsabs=QUAD_ABS, epsrel=1e-13, limit=400)[0]
    def deriv_p(t):
        gt = g(t)
        return float(weight(t)) * (gt / alpha) ** p if gt > 0 else 0.0
    energy = integrate.quad(deriv_p, r, math.inf, epsabs=QUAD_ABS, epsrel=1e-13, limit=400)[0]
    expected = alpha ** (1.0 - p)
    if abs(energy - expected) > 1e-8 * max(1.0, expected):
        raise RejectionError(
            f"energy identity failed: {energy!r} vs alpha^(1-p) = {expected!r}")
    return HalfLineOracle(p, r, alpha, weight, energy)


# -- hyperbolicity -----------------------------------------------------------

@dataclass(frozen=True)
class VolumeGrowthProfile:
    """mu(B(x0, rho)) as a power law c rho^q or as tabulated (rho, mu) samples."""

    c: float = None
    q: float = None
    rho: np.ndarray = None
    mu: np.ndarray = None

    def __post_init__(self):
        if self.rho is not None:
            rho = np.asarray(self.rho, dtype=float)
            mu = np.asarray(self.mu, dtype=float)
            if rho.shape != mu.shape or rho.size < 4:
                raise RejectionError("tabulated profile needs >= 4 matching samples")
            if np.any(np.diff(rho) <= 0):
                raise RejectionError("profile radii must increase")
            if np.any(mu <= 0) or np.any(np.diff(mu) < 0):
                raise RejectionError("profile must be positive and nondecreasing")
            object.__setattr__(self, "rho", rho)
            object.__setattr__(self, "mu", mu)
        elif self.c is None or self.q is None:
            raise RejectionError("profile needs (c, q) or tabulated samples")
        elif self.c <= 0 or self.q < 0:
            raise RejectionError("power-law profile needs c > 0 and q >= 0")

    @classmethod
    def euclidean(cls, n):
        return cls(c=sphere_area(n) / n, q=float(n))

    @property
    def analytic(self):
        return self.rho is None

    def __call__(self, rho):
        if self.analytic:
            return self.c * np.asarray(rho, dtype=float) ** self.q
        return np.interp(rho, self.rho, self.mu)


@dataclass
class HyperbolicityVerdict:
    verdict: str
    integral: float
    exponent: float
    branch: str


def classify_hyperbolicity(profile, p, upper=None, band=0.05):
    """Hyperbolic iff int_1^inf (rho / mu(B(x0, rho)))^{1/(p-1)} d rho < inf.

    Power laws c rho^q are decided analytically: the integrand decays like
    rho^{-(q-1)/(p-1)}, so the test is (q-1)/(p-1) > 1. Tabulated profiles fit
    q over the last decade of samples and report inconclusive when the decay
    exponent is within band of 1.
    """
    if not p > 1:
        raise RejectionError("need p > 1")
    integrand = lambda rho: (rho / float(profile(rho))) ** (1.0 / (p - 1))
    if profile.analytic:
        expo = (profile.q - 1) / (p - 1)
        P = 1e3 if upper is None else upper
        integral = integrate.quad(integrand, 1.0, P, epsabs=QUAD_ABS, limit=400)[0]
        verdict = "hyperbolic" if expo > 1 else "parabolic"
        return HyperbolicityVerdict(verdict, integral, expo, "analytic")
    rho, mu = profile.rho, profile.mu
    tail = rho >= rho[-1] / 10.0
    if tail.sum() < 3:
        tail = np.zeros(rho.size, dtype=bool)
        tail[-3:] = True
    q = float(np.polyfit(np.log(rho[tail]), np.log(mu[tail]), 1)[0])
    expo = (q - 1) / (p - 1)
    mask = rho >= 1.0
    xs = rho[mask]
    integral = float(integrate.trapezoid((xs / mu[mask]) ** (1.0 / (p - 1)), xs)) if xs.size > 1 else 0.0
    if abs(expo - 1.0) <= band:
        verdict = "inconclusive"
    else:
        verdict = "hyperbolic" if expo > 1 else "parabolic"
    return HyperbolicityVerdict(verdict, integral, expo, "tabulated")


def profile_from_graph(graph, center, radii):
    """Tabulated mu(B(center, rho)) from node-measure sums."""
    d = graph.distances_from(center)
    mu = np.array([graph.node_measure[d < r].sum() for r in radii])
    return VolumeGrowthProfile(rho=np.asarray(radii, dtype=float), mu=mu)
