"""Inter-purchase time distributions: maximum-likelihood fits, AIC ranking, Q-Q/P-P points.

Families and parameterizations
------------------------------
ParetoLomax    f(x) = a s^a / (x + s)^(a+1),    x > 0      (shape a, scale s)
ParetoClassic  f(x) = a m^a / x^(a+1),          x >= m     (shape a, scale m)
LogNormal      log x ~ Normal(mu, sigma)
Weibull        f(x) = (k/l) (x/l)^(k-1) exp(-(x/l)^k)      (shape k, scale l)
Gamma          f(x) = x^(k-1) exp(-x/t) / (Gamma(k) t^k)   (shape k, scale t)

The Pareto fitted to day gaps is the Lomax (Pareto type II) form; the
classic form is kept as a separate family because its support starts at the
scale parameter. Every family has two parameters, fitted and differentiated
in log space (``mu`` stays on its natural scale for LogNormal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DataError, DegenerateSampleError, EmptySampleError, SpendSeqError

FAMILIES = ("ParetoLomax", "ParetoClassic", "LogNormal", "Weibull", "Gamma")
PARAM_NAMES = {
    "ParetoLomax": ("shape", "scale"),
    "ParetoClassic": ("shape", "scale"),
    "LogNormal": ("mu", "sigma"),
    "Weibull": ("shape", "scale"),
    "Gamma": ("shape", "scale"),
}
N_PARAMS = 2
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
_LOG_2PI = math.log(2 * math.pi)


@dataclass
class FittedDistribution:
    family: str
    params: dict
    loglik: float = float("nan")
    aic: float = float("nan")
    n: int = 0
    error: str | None = None
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return self.error is None

    @property
    def values(self) -> tuple:
        return tuple(self.params[k] for k in PARAM_NAMES[self.family])

    def logpdf(self, x):
        return logpdf(self.family, self.values, x)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return cdf(self.family, self.values, x)

    def ppf(self, p):
        return ppf(self.family, self.values, p)


def make_distribution(family: str, *values) -> FittedDistribution:
    """Unfitted distribution with known parameters, e.g. for sampling."""
    _check_family(family)
    if len(values) != N_PARAMS:
        raise ValueError(f"{family} takes {N_PARAMS} parameters")
    _check_params(family, values)
    return FittedDistribution(family, dict(zip(PARAM_NAMES[family], map(float, values))))


def _check_family(family):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _check_params(family, values):
    a, b = values
    if family == "LogNormal":
        if not b > 0:
            raise ValueError("sigma must be positive")
    elif not (a > 0 and b > 0):
        raise ValueError("shape and scale must be positive")


# ---------------------------------------------------------------- densities

def logpdf(family, values, x):
    x = np.asarray(x, dtype=float)
    a, b = values
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "ParetoLomax":
            out = math.log(a) - math.log(b) - (a + 1) * np.log1p(x / b)
            return np.where(x >= 0, out, -np.inf)
        if family == "ParetoClassic":
            out = math.log(a) + a * math.log(b) - (a + 1) * np.log(x)
            return np.where(x >= b, out, -np.inf)
        if family == "LogNormal":
            lx = np.log(x)
            out = -lx - math.log(b) - 0.5 * _LOG_2PI - 0.5 * ((lx - a) / b) ** 2
            return np.where(x > 0, out, -np.inf)
        if family == "Weibull":
            t = x / b
            out = math.log(a) - math.log(b) + (a - 1) * np.log(t) - t**a
            return np.where(x > 0, out, -np.inf)
        if family == "Gamma":
            out = (a - 1) * np.log(x) - x / b - special.gammaln(a) - a * math.log(b)
            return np.where(x > 0, out, -np.inf)
    _check_family(family)


def cdf(family, values, x):
    x = np.asarray(x, dtype=float)
    a, b = values
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "ParetoLomax":
            return np.where(x > 0, -np.expm1(-a * np.log1p(np.maximum(x, 0) / b)), 0.0)
        if family == "ParetoClassic":
            return np.where(x > b, -np.expm1(a * np.log(b / np.maximum(x, b))), 0.0)
        if family == "LogNormal":
            return np.where(x > 0, special.ndtr((np.log(x) - a) / b), 0.0)
        if family == "Weibull":
            return np.where(x > 0, -np.expm1(-((np.maximum(x, 0) / b) ** a)), 0.0)
        if family == "Gamma":
            return special.gammainc(a, np.maximum(x, 0) / b)
    _check_family(family)


def ppf(family, values, p):
    p = np.asarray(p, dtype=float)
    a, b = values
    if family == "ParetoLomax":
        return b * np.expm1(-np.log1p(-p) / a)
    if family == "ParetoClassic":
        return b * np.exp(-np.log1p(-p) / a)
    if family == "LogNormal":
        return np.exp(a + b * special.ndtri(p))
    if family == "Weibull":
        return b * (-np.log1p(-p)) ** (1.0 / a)
    if family == "Gamma":
        return b * special.gammaincinv(a, p)
    _check_family(family)


# ------------------------------------------------- log-space parameterization

def to_log_params(family, values):
    a, b = values
    if family == "LogNormal":
        return np.array([a, math.log(b)])
    return np.array([math.log(a), math.log(b)])


def from_log_params(family, theta):
    if family == "LogNormal":
        return (float(theta[0]), float(math.exp(theta[1])))
    return (float(math.exp(theta[0])), float(math.exp(theta[1])))


def mean_loglik(family, theta, x) -> float:
    """Mean log-likelihood at log-space parameters ``theta``."""
    return float(np.mean(logpdf(family, from_log_params(family, theta), x)))


def mean_loglik_gradient(family, theta, x) -> np.ndarray:
    """Analytic gradient of :func:`mean_loglik` with respect to ``theta``.

    For ParetoClassic the scale component is the derivative at the support
    boundary, which stays positive at the maximum-likelihood point.
    """
    x = np.asarray(x, dtype=float)
    a, b = from_log_params(family, theta)
    if family == "ParetoLomax":
        return np.array([1.0 - a * np.mean(np.log1p(x / b)), a - (a + 1) * np.mean(b / (x + b))])
    if family == "ParetoClassic":
        return np.array([1.0 + a * (math.log(b) - np.mean(np.log(x))), a])
    if family == "LogNormal":
        z = (np.log(x) - a) / b
        return np.array([np.mean(z) / b, np.mean(z * z) - 1.0])
    if family == "Weibull":
        lt = np.log(x / b)
        tk = np.exp(a * lt)
        return np.array([1.0 + a * (np.mean(lt) - np.mean(tk * lt)), a * (np.mean(tk) - 1.0)])
    if family == "Gamma":
        return np.array(
            [a * (np.mean(np.log(x)) - special.digamma(a) - math.log(b)), np.mean(x) / b - a]
        )
    _check_family(family)


# --------------------------------------------------------------- estimators

def _fit_lognormal(x):
    lx = np.log(x)
    mu, sigma = lx.mean(), lx.std()
    if not sigma > 0:
        raise DegenerateSampleError("LogNormal needs spread in log(x)")
    return (float(mu), float(sigma)), 0


def _fit_classic(x):
    xm = float(x.min())
    spread = float(np.sum(np.log(x / xm)))
    if not spread > 0:
        raise DegenerateSampleError("ParetoClassic shape diverges when every value equals the minimum")
    return (x.size / spread, xm), 0


def _fit_gamma(x):
    mean = x.mean()
    s = math.log(mean) - np.log(x).mean()
    if not s > 1e-14:
        raise DegenerateSampleError("Gamma needs spread (log mean == mean log)")
    k = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for it in range(1, NEWTON_MAX_ITER + 1):
        f = math.log(k) - special.digamma(k) - s
        fp = 1.0 / k - special.polygamma(1, k)
        step = f / fp
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) <= NEWTON_TOL * k:
            k = k_new
            return (k, mean / k), it
        k = k_new
    raise ConvergenceError("Gamma shape Newton iteration did not converge", last=(k, mean / k))


def _fit_weibull(x):
    lx = np.log(x)
    if not lx.std() > 0:
        raise DegenerateSampleError("Weibull needs spread")
    lmax = lx.max()
    ly = lx - lmax  # <= 0, keeps y**k bounded
    mean_lx = lx.mean()
    k = 1.2825 / lx.std()
    for it in range(1, NEWTON_MAX_ITER + 1):
        yk = np.exp(k * ly)
        s0, s1, s2 = yk.sum(), (yk * ly).sum(), (yk * ly * ly).sum()
        g = s1 / s0 + lmax - 1.0 / k - mean_lx
        gp = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k)
        k_new = k - g / gp
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) <= NEWTON_TOL * k:
            k = k_new
            scale = math.exp(lmax) * np.mean(np.exp(k * ly)) ** (1.0 / k)
            return (k, float(scale)), it
        k = k_new
    raise ConvergenceError("Weibull shape Newton iteration did not converge", last=(k, float("nan")))


def _lomax_hessian(theta, x):
    a, b = math.exp(theta[0]), math.exp(theta[1])
    q = b / (x + b)
    M = np.mean(np.log1p(x / b))
    P = np.mean(q)
    dP = np.mean(q * (1 - q))
    return np.array([[-a * M, a * (1 - P)], [a * (1 - P), -(a + 1) * dP]])


def _fit_lomax(x):
    m, v = x.mean(), x.var()
    if not v > 0:
        raise DegenerateSampleError("ParetoLomax needs spread")
    if v > m * m:
        a0 = 2 * v / (v - m * m)
        theta0 = np.array([math.log(a0), math.log(m * (a0 - 1))])
    else:
        theta0 = np.array([math.log(2.0), math.log(m)])

    def objective(theta):
        return -mean_loglik("ParetoLomax", theta, x), -mean_loglik_gradient("ParetoLomax", theta, x)

    res = optimize.minimize(
        objective, theta0, jac=True, method="BFGS", options={"gtol": 1e-9, "maxiter": 500}
    )
    theta = res.x
    iterations = int(res.nit)
    # a few exact Newton steps tighten the stationarity BFGS stops short of
    for _ in range(20):
        g = mean_loglik_gradient("ParetoLomax", theta, x)
        if np.linalg.norm(g) < 1e-12:
            break
        H = _lomax_hessian(theta, x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1.0:
            break
        theta = theta - step
        iterations += 1
    values = from_log_params("ParetoLomax", theta)
    g = mean_loglik_gradient("ParetoLomax", theta, x)
    if not np.all(np.isfinite(theta)) or theta.max() > 25:
        raise ConvergenceError(
            "ParetoLomax likelihood has no finite maximum for this sample", last=values
        )
    if np.linalg.norm(g) > 1e-6:
        raise ConvergenceError(
            f"ParetoLomax quasi-Newton stopped with gradient norm {np.linalg.norm(g):.3g}",
            last=values,
        )
    return values, iterations


_FITTERS = {
    "ParetoLomax": _fit_lomax,
    "ParetoClassic": _fit_classic,
    "LogNormal": _fit_lognormal,
    "Weibull": _fit_weibull,
    "Gamma": _fit_gamma,
}


def aic(loglik: float, k: int) -> float:
    if k < 0:
        raise ValueError("parameter count must be non-negative")
    return 2.0 * k - 2.0 * loglik


def _as_sample(sample):
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 10:
        raise DataError(f"need at least 10 observations, got {x.size}")
    if not np.all(np.isfinite(x)) or x.min() <= 0:
        raise DataError("observations must be finite and positive")
    return x


def fit_mle(sample, family: str) -> FittedDistribution:
    """Maximum-likelihood fit of one family.

    Raises DegenerateSampleError for samples without the spread a family
    needs, and ConvergenceError (carrying the last iterate) when the solver
    stalls.
    """
    _check_family(family)
    x = _as_sample(sample)
    values, iterations = _FITTERS[family](x)
    ll = float(np.sum(logpdf(family, values, x)))
    return FittedDistribution(
        family,
        dict(zip(PARAM_NAMES[family], map(float, values))),
        ll,
        aic(ll, N_PARAMS),
        x.size,
        None,
        iterations,
    )


def compare_families(sample, families=FAMILIES) -> list[FittedDistribution]:
    """Fit every family and sort by AIC; failed fits go last with the error text attached."""
    x = _as_sample(sample)
    ok, failed = [], []
    for family in families:
        try:
            ok.append(fit_mle(x, family))
        except SpendSeqError as exc:
            failed.append(
                FittedDistribution(family, {}, float("nan"), float("inf"), x.size, f"{type(exc).__name__}: {exc}")
            )
    ok.sort(key=lambda f: (f.aic, FAMILIES.index(f.family)))
    return ok + failed


def qq_pp_points(sample, fitted: FittedDistribution, max_points=None):
    """Q-Q and P-P point sets at plotting positions (i - 0.5)/n.

    Returns ``(qq, pp)``, two arrays of shape (m, 2): qq rows are
    (empirical quantile, theoretical quantile), pp rows are
    (empirical probability, theoretical probability). ``max_points`` thins
    both evenly over the sorted sample, always keeping the extremes.
    """
    if not fitted.converged:
        raise DataError(f"cannot plot an unconverged {fitted.family} fit")
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    idx = np.arange(n)
    if max_points is not None and n > max_points:
        idx = np.unique(np.linspace(0, n - 1, max_points).round().astype(int))
    p = (idx + 0.5) / n
    xs = x[idx]
    qq = np.column_stack([xs, fitted.ppf(p)])
    pp = np.column_stack([p, fitted.cdf(xs)])
    return qq, pp


def sample_distribution(fitted: FittedDistribution, n: int, seed) -> np.ndarray:
    """Inverse-CDF draws from a seeded generator; same seed gives the same draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return fitted.ppf(rng.random(n))


def extract_gaps(sequences, merge_variant="day") -> np.ndarray:
    """Pooled gaps between consecutive purchase-days.

    ``merge_variant="day"`` measures gaps between a user's distinct purchase
    days, whatever the app; ``"app"`` measures them per (user, app).
    """
    chunks = []
    for seq in sequences.values():
        if merge_variant == "day":
            days = np.unique(np.fromiter((e[1] for e in seq.entries), dtype=np.int64))
            if days.size > 1:
                chunks.append(np.diff(days))
        elif merge_variant == "app":
            per_app = {}
            for app, day, _ in seq.entries:
                per_app.setdefault(app, []).append(day)
            for app in sorted(per_app):
                d = np.unique(per_app[app])
                if d.size > 1:
                    chunks.append(np.diff(d))
        else:
            raise ValueError("merge_variant must be 'day' or 'app'")
    if not chunks:
        raise EmptySampleError("no user has two or more purchase days")
    return np.concatenate(chunks).astype(float)


def integrate_density(fitted: FittedDistribution) -> float:
    """Numerical integral of the density over its support (adaptive quadrature)."""
    from scipy import integrate

    lo = fitted.params["scale"] if fitted.family == "ParetoClassic" else 0.0
    # split at the median so quad sees the bulk before the tail
    mid = float(fitted.ppf(0.5))
    f = lambda t: float(fitted.pdf(t))  # noqa: E731
    a, _ = integrate.quad(f, lo, mid, limit=200, epsabs=1e-12, epsrel=1e-10)
    b, _ = integrate.quad(f, mid, np.inf, limit=200, epsabs=1e-12, epsrel=1e-10)
    return a + b
