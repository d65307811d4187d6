"""Fitting routines: fixed-point updates, moment-norm polytope search,
MLE baselines, and the Jacobian symmetry diagnostic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.cluster import KMeans

from .errors import (
    DegenerateConcentrationError,
    DirectionUndefinedError,
    DomainCoverageError,
    FitError,
)
from .models import FisherBingham, Gaussian, Quartic, SphericalMixture, VonMisesFisher, unwrap
from .moments import estimating_mean
from .validation import as_array2d, as_generator, check_unit_rows

KAPPA_MAX = 1e3


@dataclass
class FitResult:
    params: object
    iterations: int
    converged: bool
    final_residual: float
    trace: list | None = None
    flags: list = field(default_factory=list)


@dataclass
class HomotopySchedule:
    """gamma path from 0 to the target plus a polytope budget per stage.

    Early stages get small budgets on purpose: with heavy contamination the
    gamma = 0 estimating equations have their root at a corrupted solution,
    and an early stage allowed to converge there drags the continuation into
    the wrong basin.  A short warm-up keeps the iterate near the robust
    initialization until the density weights take over.
    """

    gamma_path: np.ndarray
    inner_iterations: "int | np.ndarray" = 2000

    def __post_init__(self):
        self.gamma_path = np.atleast_1d(np.asarray(self.gamma_path, dtype=float))
        if self.gamma_path[0] != 0.0:
            raise ValueError("homotopy path must start at 0")
        if np.any(np.diff(self.gamma_path) <= 0):
            raise ValueError("homotopy path must be strictly increasing")
        self.inner_iterations = np.broadcast_to(
            np.asarray(self.inner_iterations, dtype=int), self.gamma_path.shape
        ).copy()
        if np.any(self.inner_iterations < 1):
            raise ValueError("inner_iterations must be positive")

    @classmethod
    def to_target(cls, gamma_target, stages=5, inner_iterations=None):
        if gamma_target == 0.0:
            budget = 4000 if inner_iterations is None else inner_iterations
            return cls(np.array([0.0]), budget)
        if inner_iterations is None:
            inner_iterations = np.full(stages, 150)
            inner_iterations[-1] = 4000
        return cls(np.linspace(0.0, gamma_target, stages), inner_iterations)


def _stable_weights(log_w):
    """exp(log_w - max): same ratios, immune to log_u offsets."""
    return np.exp(log_w - np.max(log_w))


# ----------------------------------------------------------------- Gaussian


def gaussian_fixed_point(X, gamma, init=None, tol=1e-8, max_iter=500, store_trace=False):
    """Weighted-moment iteration for the Gaussian gamma estimator.

    mu <- sum w x / sum w,  Sigma <- (gamma+1) sum w (x-mu)(x-mu)' / sum w,
    with w = u(x)^gamma held fixed within each step.  gamma = 0 lands on the
    sample moments in one step.
    """
    X = as_array2d(X, "X")
    n, d = X.shape
    if n <= d:
        raise ValueError("need n > d observations")
    if init is None:
        mean = X.mean(axis=0)
        cov = _regularized(np.cov(X.T, ddof=0).reshape(d, d))
    else:
        mean = init.mean.copy()
        cov = init.covariance.copy()

    flags = []
    trace = [] if store_trace else None
    eta = 1.0
    prev_step = np.inf
    converged = False
    step = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        prec = _safe_inverse(cov, flags)
        delta = X - mean
        log_w = gamma * (-0.5 * np.einsum("ni,ij,nj->n", delta, prec, delta))
        w = _stable_weights(log_w)
        sw = w.sum()
        mu_new = (w @ X) / sw
        centered = X - mu_new
        cov_new = (gamma + 1.0) * (w[:, None] * centered).T @ centered / sw
        cov_new = _regularized(cov_new, flags)

        mu_next = mean + eta * (mu_new - mean)
        cov_next = cov + eta * (cov_new - cov)
        step = max(np.max(np.abs(mu_next - mean)), np.max(np.abs(cov_next - cov)))
        mean, cov = mu_next, cov_next
        if store_trace:
            trace.append((mean.copy(), cov.copy()))
        if step < tol:
            converged = True
            break
        if step > prev_step * 1.5 and eta > 0.125:
            eta /= 2.0
            if "damped" not in flags:
                flags.append("damped")
        prev_step = step

    params = Gaussian(mean=mean, precision=_safe_inverse(cov, flags))
    return FitResult(params, it, converged, float(step), trace, flags)


def _regularized(cov, flags=None):
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        if flags is not None and "regularized" not in flags:
            flags.append("regularized")
        return cov + 1e-8 * np.eye(cov.shape[0])


def _safe_inverse(cov, flags=None):
    try:
        return np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        if flags is not None and "regularized" not in flags:
            flags.append("regularized")
        return np.linalg.inv(cov + 1e-8 * np.eye(cov.shape[0]))


# ---------------------------------------------------------------------- vMF


def vmf_fixed_point(X, gamma, init=None, tol=1e-8, max_iter=500, kappa_max=KAPPA_MAX):
    """Fixed-point update for the vMF gamma estimator (weights fixed per step)."""
    X = check_unit_rows(as_array2d(X, "X"))
    n, d = X.shape
    if init is None:
        mu, kappa = _vmf_moment_init(X, kappa_max)
    else:
        mu, kappa = init.mu.copy(), float(init.kappa)

    flags = []
    converged = False
    step = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        t = X @ mu
        w = _stable_weights(gamma * kappa * t)
        sw = w.sum()
        resultant = (w @ X) / sw
        norm_r = np.linalg.norm(resultant)
        if norm_r < 1e-12:
            raise DirectionUndefinedError("weighted resultant vanished")
        m1 = (w @ t) / sw
        m2 = (w @ t**2) / sw
        if m2 >= 1.0 - 1e-10:
            raise DegenerateConcentrationError("all observations coincide")
        mu_new = resultant / norm_r
        kappa_new = float(np.clip((d - 1.0) * m1 / (1.0 - m2), 0.0, kappa_max))
        step = max(np.linalg.norm(mu_new - mu), abs(kappa_new - kappa))
        mu, kappa = mu_new, kappa_new
        if step < tol:
            converged = True
            break
    if kappa >= kappa_max:
        flags.append("kappa-capped")
    return FitResult(VonMisesFisher(mu=mu, kappa=kappa), it, converged, float(step), None, flags)


def _vmf_moment_init(X, kappa_max):
    n, d = X.shape
    R = X.sum(axis=0)
    norm_r = np.linalg.norm(R)
    if norm_r < 1e-12:
        raise DirectionUndefinedError("resultant vanished; mean direction undefined")
    rbar = min(norm_r / n, 1.0 - 1e-9)
    kappa0 = rbar * (d - rbar**2) / (1.0 - rbar**2)
    return R / norm_r, float(np.clip(kappa0, 0.0, kappa_max))


def vmf_mle(X, kappa_max=KAPPA_MAX):
    """Maximum likelihood: mean direction plus the Bessel-ratio equation
    A_nu(kappa) = I_{nu+1}(kappa)/I_nu(kappa) = mean resultant length."""
    X = check_unit_rows(as_array2d(X, "X"))
    n, d = X.shape
    R = X.sum(axis=0)
    norm_r = np.linalg.norm(R)
    if norm_r < 1e-12:
        return FitResult(VonMisesFisher(mu=np.eye(d)[0], kappa=0.0), 0, True, 0.0, None, ["uniform"])
    mu = R / norm_r
    rbar = norm_r / n
    flags = []
    if rbar < 1e-12:
        kappa, iters = 0.0, 0
    elif rbar >= 1.0 - 1e-12:
        kappa, iters = kappa_max, 0
        flags.append("kappa-capped")
    else:
        kappa, iters = _solve_bessel_ratio(d, rbar, kappa_max)
        if kappa >= kappa_max:
            flags.append("kappa-capped")
    return FitResult(VonMisesFisher(mu=mu, kappa=kappa), iters, True, 0.0, None, flags)


def bessel_ratio(nu, kappa):
    """I_{nu+1}(kappa) / I_nu(kappa) by a modified-Lentz continued fraction."""
    if kappa == 0.0:
        return 0.0
    tiny = 1e-300
    f = tiny
    c = f
    d_ = 0.0
    for k in range(1, 400):
        b = 2.0 * (nu + k) / kappa
        d_ = b + d_
        if d_ == 0.0:
            d_ = tiny
        c = b + 1.0 / c
        if c == 0.0:
            c = tiny
        d_ = 1.0 / d_
        delta = c * d_
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return f


def _solve_bessel_ratio(d, rbar, kappa_max):
    """Safeguarded Newton for A_nu(kappa) = rbar, seeded by the standard
    closed-form approximation kappa0 = rbar (d - rbar^2) / (1 - rbar^2)."""
    nu = d / 2.0 - 1.0
    kappa = rbar * (d - rbar**2) / (1.0 - rbar**2)
    kappa = min(max(kappa, 1e-8), kappa_max)
    lo, hi = 1e-12, kappa_max
    for it in range(1, 200):
        a = bessel_ratio(nu, kappa)
        resid = a - rbar
        if resid > 0:
            hi = kappa
        else:
            lo = kappa
        deriv = 1.0 - a * a - (2.0 * nu + 1.0) / kappa * a
        if deriv <= 0:
            new = 0.5 * (lo + hi)
        else:
            new = kappa - resid / deriv
            if not (lo < new < hi):
                new = 0.5 * (lo + hi)
        if abs(new - kappa) < 1e-12 * (1.0 + kappa):
            return new, it
        kappa = new
    return kappa, 200


# -------------------------------------------------------- moment-norm search


@dataclass
class FamilyParameterization:
    """Maps between an unconstrained theta vector and a model instance."""

    name: str
    pack: callable
    unpack: callable
    perturb_scale: float = 0.3


def quartic_parameterization(bound=50.0):
    """Raw theta with a sanity box: outside it the weighted moment norm has
    spurious minima (a super-peaked density concentrates all normalized
    weight on a handful of points)."""

    def unpack(theta):
        if np.max(np.abs(theta)) > bound:
            raise ValueError("theta outside the search box")
        return Quartic(theta[0], theta[1], theta[2])

    return FamilyParameterization("quartic", lambda m: unwrap(m).theta.copy(), unpack)


def fisher_bingham_parameterization(d):
    """xi stacked with the free upper-triangular entries of B; B[d-1,d-1] is
    determined by the traceless constraint."""
    idx = [(j, k) for j in range(d) for k in range(j, d) if not (j == k == d - 1)]

    def pack(model):
        m = unwrap(model)
        return np.concatenate([m.xi, [m.B[j, k] for j, k in idx]])

    def unpack(theta):
        xi = theta[:d]
        B = np.zeros((d, d))
        for (j, k), v in zip(idx, theta[d:]):
            B[j, k] = v
            B[k, j] = v
        B[d - 1, d - 1] = -np.trace(B)
        return FisherBingham(xi=xi, B=B)

    return FamilyParameterization("fisher_bingham", pack, unpack)


def nmm_parameterization(n_components, dim, box=6.0):
    """Mixture weights as logits (last fixed at 0), means raw, precisions in log.

    Logits and log-precisions are clipped to +/-box, which walls off the
    degenerate component-drop roots (weight -> 0 with variance -> inf) that
    the gamma = 0 homotopy stage can otherwise wander into under heavy
    contamination.
    """
    J, d = n_components, dim

    def pack(model):
        m = unwrap(model)
        logits = np.clip(np.log(m.weights[:-1]) - np.log(m.weights[-1]), -box, box)
        log_lams = np.clip(np.log(m.precisions), -box, box)
        return np.concatenate([logits, m.means.ravel(), log_lams])

    def unpack(theta):
        logits = np.concatenate([np.clip(theta[: J - 1], -box, box), [0.0]])
        w = np.exp(logits - logits.max())
        w /= w.sum()
        means = theta[J - 1 : J - 1 + J * d].reshape(J, d)
        lams = np.exp(np.clip(theta[J - 1 + J * d :], -box, box))
        return SphericalMixture(weights=w, means=means, precisions=lams)

    return FamilyParameterization("nmm", pack, unpack, perturb_scale=0.2)


def solve_moment_norm(
    param: FamilyParameterization,
    X,
    gamma,
    theta0,
    restarts=5,
    rng=None,
    tol=1e-8,
    residual_tol="strict",
    maxiter=None,
    xatol=1e-9,
    canonical=False,
):
    """Minimize ||mean estimating function||^2 by Nelder-Mead with restarts.

    residual_tol="strict" marks the fit converged only when the residual norm
    drops below 1e2*tol (exactly determined systems); residual_tol=None keeps
    the optimizer's own convergence flag (overdetermined stacks, where the
    sample moment norm at the root is Op(1/sqrt(n)) rather than 0).
    """
    rng = as_generator(rng)
    X = as_array2d(X, "X")
    theta0 = np.asarray(theta0, dtype=float)

    BAD = 1e300  # large finite penalty: inf makes the polytope bookkeeping NaN

    def objective(theta):
        try:
            model = param.unpack(theta)
        except (ValueError, np.linalg.LinAlgError):
            return BAD
        # mean-one weights: same roots, but no degenerate descent direction
        # where every raw u^gamma weight underflows to zero
        vals = estimating_mean(model, X, gamma, normalize_weights=True).values
        if not np.all(np.isfinite(vals)):
            return BAD
        return float(vals @ vals)

    options = {"xatol": xatol, "fatol": 1e-18, "maxiter": maxiter or 400 * theta0.size}
    starts = [theta0]
    for _ in range(restarts):
        starts.append(
            theta0
            + param.perturb_scale * rng.standard_normal(theta0.size) * (1.0 + np.abs(theta0))
        )

    best = None
    total_iter = 0
    for start in starts:
        res = minimize(objective, start, method="Nelder-Mead", options=options)
        total_iter += res.nit
        if best is None or res.fun < best.fun:
            best = res

    residual = float(np.sqrt(best.fun)) if best.fun < 1e299 else np.inf
    if residual_tol == "strict":
        converged = residual < 1e2 * tol
    else:
        converged = bool(best.success) and np.isfinite(residual)
    return FitResult(param.unpack(best.x), total_iter, converged, residual, None, [])


# ------------------------------------------------------------------ quartic


def quartic_score_matching(X, trim=0.0):
    """Closed-form gamma=0 estimate: the estimating function is linear in theta.

    trim drops the largest-|x| fraction first, giving a contamination-proof
    starting point for the gamma > 0 polytope search (from a flat start the
    weighted equations cannot tell outliers from bulk and track a corrupted
    root).
    """
    x = as_array2d(X, "X")[:, 0]
    if trim > 0.0:
        x = x[np.abs(x) <= np.quantile(np.abs(x), 1.0 - trim)]
    m = lambda p: float(np.mean(x**p))
    A = np.array(
        [
            [1.0, 2.0 * m(1), 4.0 * m(3)],
            [2.0 * m(1), 4.0 * m(2), 8.0 * m(4)],
            [4.0 * m(3), 8.0 * m(4), 16.0 * m(6)],
        ]
    )
    b = np.array([0.0, -2.0, -12.0 * m(2)])
    theta = np.linalg.solve(A, b)
    theta[2] = min(theta[2], -1e-3)
    return theta


def quartic_gamma_fit(X, gamma, init=None, restarts=5, rng=None, maxiter=None, trim=0.1):
    theta0 = quartic_score_matching(X, trim=trim) if init is None else np.asarray(init, float)
    return solve_moment_norm(
        quartic_parameterization(), X, gamma, theta0, restarts=restarts, rng=rng, maxiter=maxiter
    )


def quartic_mle(X, init=None, restarts=2, rng=None, drop=60.0, grid_size=4001):
    """MLE with the normalizer computed by quadrature for every candidate."""
    X = as_array2d(X, "X")
    x = X[:, 0]
    rng = as_generator(rng)
    theta0 = quartic_score_matching(X) if init is None else np.asarray(init, float)

    def negloglik(theta, drop_=drop):
        if theta[2] >= -1e-8 or np.max(np.abs(theta)) > 1e6:
            return 1e300
        model = Quartic(*theta)
        return -(float(np.mean(model.log_u(X))) - _quartic_log_z(model, drop_, grid_size))

    options = {"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400 * 3}
    starts = [theta0] + [
        theta0 + 0.3 * rng.standard_normal(3) * (1.0 + np.abs(theta0)) for _ in range(restarts)
    ]
    best = None
    total = 0
    for start in starts:
        res = minimize(negloglik, start, method="Nelder-Mead", options=options)
        total += res.nit
        if res.fun < 1e299 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitError("quartic MLE failed from every start")

    model = Quartic(*best.x)
    if abs(_quartic_log_z(model, drop, grid_size) - _quartic_log_z(model, 2 * drop, grid_size)) > 1e-6:
        wider = minimize(
            lambda t: negloglik(t, 2 * drop), best.x, method="Nelder-Mead", options=options
        )
        total += wider.nit
        model = Quartic(*wider.x)
        if (
            abs(_quartic_log_z(model, 2 * drop, grid_size) - _quartic_log_z(model, 4 * drop, grid_size))
            > 1e-6
        ):
            raise DomainCoverageError("quartic MLE quadrature domain did not stabilize")
        best = wider
    return FitResult(model, total, bool(best.success), float(best.fun), None, [])


def _quartic_log_z(model, drop, grid_size):
    lo, hi = model.support_interval(drop)
    xs = np.linspace(lo, hi, grid_size)
    lu = model.log_u(xs[:, None])
    m = lu.max()
    h = xs[1] - xs[0]
    vals = np.exp(lu - m)
    return m + np.log(np.trapezoid(vals, dx=h))


# -------------------------------------------------------------------- NMM


def trimmed_kmeans_init(X, n_components, rng=None, trim=0.1, max_reseed=10):
    """Trimmed k-means centers with within-cluster robust (MAD) scales."""
    X = as_array2d(X, "X")
    n, d = X.shape
    rng = as_generator(rng)
    for _ in range(max_reseed):
        km = KMeans(
            n_clusters=n_components,
            n_init=5,
            random_state=int(rng.integers(2**31 - 1)),
        ).fit(X)
        labels = km.labels_
        dist = np.linalg.norm(X - km.cluster_centers_[labels], axis=1)
        keep = dist <= np.quantile(dist, 1.0 - trim)
        weights = np.empty(n_components)
        means = np.empty((n_components, d))
        precisions = np.empty(n_components)
        ok = True
        for j in range(n_components):
            rows = X[keep & (labels == j)]
            if rows.shape[0] < d + 1:
                ok = False
                break
            means[j] = rows.mean(axis=0)
            dev = np.abs(rows - means[j])
            sigma = 1.4826 * np.median(dev)
            precisions[j] = 1.0 / max(sigma**2, 1e-6)
            weights[j] = rows.shape[0]
        if ok:
            weights /= weights.sum()
            return weights, means, precisions
    raise FitError(f"k-means produced an empty cluster {max_reseed} times")


def nmm_fit(
    X,
    n_components,
    gamma_target=0.3,
    schedule=None,
    init=None,
    rng=None,
    restarts=0,
    trim=0.1,
):
    """Homotopy moment-norm fit for the spherical normal mixture.

    Starts from trimmed k-means and walks gamma from 0 to the target,
    warm-starting each polytope search from the previous stage.  Because the
    gamma = 0 root is itself corrupted under heavy contamination (and the
    continuation then tracks the wrong root family), the final candidate pool
    also contains a direct gamma-target solve from the robust initialization;
    the winner is the candidate with the higher trimmed mean log-likelihood
    (the mixture density is fully normalized, so log-likelihoods are
    comparable across candidates, and trimming keeps the comparison robust).
    """
    X = as_array2d(X, "X")
    n, d = X.shape
    J = int(n_components)
    n_params = (J - 1) + J * d + J
    if n < 10 * n_params:
        raise ValueError(f"need n >= {10 * n_params} for {n_params} parameters")
    rng = as_generator(rng)
    if schedule is None:
        schedule = HomotopySchedule.to_target(gamma_target)
    if init is None:
        init = trimmed_kmeans_init(X, J, rng, trim=trim)
    param = nmm_parameterization(J, d)
    theta_init = param.pack(SphericalMixture(*init))

    theta = theta_init
    fit = None
    total_iter = 0
    flags = []
    for stage, gma in enumerate(schedule.gamma_path):
        fit = solve_moment_norm(
            param,
            X,
            gma,
            theta,
            restarts=0,
            rng=rng,
            residual_tol=None,
            maxiter=int(schedule.inner_iterations[stage]),
        )
        theta = param.pack(fit.params)
        total_iter += fit.iterations
        flags.extend(fit.flags)

    candidates = [fit]
    if len(schedule.gamma_path) > 1:
        direct = solve_moment_norm(
            param,
            X,
            gamma_target,
            theta_init,
            restarts=restarts,
            rng=rng,
            residual_tol=None,
            maxiter=int(schedule.inner_iterations[-1]),
        )
        total_iter += direct.iterations
        candidates.append(direct)

    keep = int(np.ceil((1.0 - trim) * n))

    def trimmed_loglik(model):
        lp = np.sort(model.log_u(X))[n - keep :]
        return float(np.mean(lp))

    best = max(candidates, key=lambda f: trimmed_loglik(f.params))
    if len(candidates) > 1 and best is candidates[1]:
        flags.append("homotopy-overridden")

    mixture = unwrap(best.params)
    # renormalize weights onto the simplex (softmax already guarantees this;
    # kept as an explicit contract)
    w = mixture.weights / mixture.weights.sum()
    params = SphericalMixture(weights=w, means=mixture.means, precisions=mixture.precisions)
    return FitResult(params, total_iter, best.converged, best.final_residual, None, flags)


def nmm_em_mle(X, n_components, init=None, tol=1e-8, max_iter=500, variance_floor=1e-6, rng=None):
    """EM for the spherical mixture MLE with a monotone log-likelihood check."""
    from scipy.special import logsumexp

    X = as_array2d(X, "X")
    n, d = X.shape
    J = int(n_components)
    rng = as_generator(rng)
    if init is None:
        init = trimmed_kmeans_init(X, J, rng, trim=0.0)
    weights, means, precisions = (np.array(a, dtype=float, copy=True) for a in init)

    flags = []
    prev_ll = -np.inf
    converged = False
    it = 0
    step = np.inf
    for it in range(1, max_iter + 1):
        sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        lc = (
            np.log(weights)[None, :]
            + 0.5 * d * (np.log(precisions) - np.log(2 * np.pi))[None, :]
            - 0.5 * precisions[None, :] * sq
        )
        norm = logsumexp(lc, axis=1)
        ll = float(norm.sum())
        if ll < prev_ll - 1e-8 * (1.0 + abs(prev_ll)):
            raise FitError(f"EM log-likelihood decreased at iteration {it}")
        r = np.exp(lc - norm[:, None])
        nj = r.sum(axis=0)
        if np.any(nj < 1e-10):
            raise FitError("EM component collapsed to zero responsibility")
        new_w = nj / n
        new_means = (r.T @ X) / nj[:, None]
        sq_new = ((X[:, None, :] - new_means[None, :, :]) ** 2).sum(axis=2)
        var = (r * sq_new).sum(axis=0) / (d * nj)
        floored = var < variance_floor
        if np.any(floored):
            var = np.maximum(var, variance_floor)
            if "variance-floored" not in flags:
                flags.append("variance-floored")
        new_prec = 1.0 / var

        step = max(
            np.max(np.abs(new_w - weights)),
            np.max(np.abs(new_means - means)),
            np.max(np.abs(new_prec - precisions)) / (1.0 + np.max(precisions)),
        )
        weights, means, precisions = new_w, new_means, new_prec
        prev_ll = ll
        if step < tol:
            converged = True
            break
    params = SphericalMixture(weights=weights, means=means, precisions=precisions)
    return FitResult(params, it, converged, float(step), None, flags)


# ------------------------------------------------------------- diagnostics


def canonical_parameterization(model):
    """Theta packing that matches the canonical estimating-function order."""
    fam = unwrap(model)
    if isinstance(fam, Gaussian):
        d = fam.dim
        pairs = [(j, k) for j in range(d) for k in range(j, d)]

        def pack(m):
            m = unwrap(m)
            return np.concatenate([m.mean, [m.precision[j, k] for j, k in pairs]])

        def unpack(theta):
            mean = theta[:d]
            prec = np.zeros((d, d))
            for (j, k), v in zip(pairs, theta[d:]):
                prec[j, k] = v
                prec[k, j] = v
            return Gaussian(mean=mean, precision=prec)

        return FamilyParameterization("gaussian", pack, unpack)
    if isinstance(fam, Quartic):
        return quartic_parameterization()
    raise TypeError(f"no canonical parameterization for {type(fam).__name__}")


def jacobian_symmetry_diagnostic(model, X, gamma, rel_step=1e-5):
    """||J - J'||_F / ||J||_F for the finite-difference Jacobian of the mean
    canonical estimating function at the model's parameters."""
    X = as_array2d(X, "X")
    param = canonical_parameterization(model)
    theta0 = param.pack(model)
    k = theta0.size

    def ubar(theta):
        return estimating_mean(param.unpack(theta), X, gamma, canonical=True).values

    J = np.zeros((k, k))
    for i in range(k):
        h = rel_step * (1.0 + abs(theta0[i]))
        up = theta0.copy()
        dn = theta0.copy()
        up[i] += h
        dn[i] -= h
        J[:, i] = (ubar(up) - ubar(dn)) / (2.0 * h)
    return float(np.linalg.norm(J - J.T) / np.linalg.norm(J))
