"""Rank-one spiked-matrix estimation.

Observation model: Y = (lambda/n) theta theta^T + GOE noise, with the
entries of theta drawn from a unit-second-moment prior.  Everything
reduces to the scalar channel y = mu Theta + tau G:

- the posterior mean h(y) = E{Theta | y} is the Bayes denoiser applied
  entrywise by AMP;
- with gamma = (mu/tau)^2, the effective-SNR map F(gamma) =
  E{ E{Theta | sqrt(gamma) Theta + G}^2 } drives the one-dimensional
  recursion gamma_(k+1) = lambda^2 F(gamma_k);
- gamma_alg is the smallest stable fixed point of that map, and
  gamma_bayes the global minimizer of the scalar potential
  Psi(gamma) = gamma^2/(4 lambda^2) - gamma/2 + I(gamma), whose critical
  points are exactly the fixed points of lambda^2 F (I is the mutual
  information of the channel, dI/dgamma = (1 - F)/2).

Overlap convention: rho = sqrt(gamma / (1 + gamma)), which is
mu / sqrt(mu^2 + tau^2) under the identities mu = gamma/lambda,
tau^2 = gamma/lambda^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

from .ensembles import PriorSpec, SpikedInstance
from .errors import DivergedError, InvalidInputError

_GH_NODES = 128
_gh_z, _gh_w = hermegauss(_GH_NODES)
_gh_w = _gh_w / math.sqrt(2 * math.pi)


def bayes_denoiser(prior: PriorSpec, mu: float, tau: float):
    """Posterior mean y -> E{Theta | mu Theta + tau G = y}.

    Closed forms: tanh for the symmetric two-point prior, a linear map
    for the Gaussian prior; general discrete priors use a stable
    log-space finite sum over atoms.
    """
    if tau <= 0:
        raise InvalidInputError("denoiser needs tau > 0")
    if prior.is_gaussian:
        c = mu / (mu * mu + tau * tau)
        return lambda y: c * np.asarray(y, dtype=float)
    if prior.kind == "rademacher":
        c = mu / (tau * tau)
        return lambda y: np.tanh(c * np.asarray(y, dtype=float))
    atoms = prior.atoms
    logw = np.log(prior.weights)

    def h(y):
        y = np.asarray(y, dtype=float)
        # log p_i(y) = log w_i - (y - mu v_i)^2 / (2 tau^2), atom axis last
        ll = logw - (y[..., None] - mu * atoms) ** 2 / (2 * tau * tau)
        ll -= logsumexp(ll, axis=-1, keepdims=True)
        return np.exp(ll) @ atoms

    return h


def F_of_gamma(prior: PriorSpec, gamma: float) -> float:
    """F(gamma) = E{ E{Theta | sqrt(gamma) Theta + G}^2 }."""
    if gamma < 0:
        raise InvalidInputError("gamma must be nonnegative")
    if prior.is_gaussian:
        return gamma / (1.0 + gamma)
    if gamma == 0.0:
        return prior.mean**2
    mu = math.sqrt(gamma)
    h = bayes_denoiser(prior, mu, 1.0)
    total = 0.0
    for v, p in zip(prior.atoms, prior.weights):
        y = mu * v + _gh_z
        total += p * float(_gh_w @ h(y) ** 2)
    return total


def mmse(prior: PriorSpec, gamma: float) -> float:
    return prior.second_moment - F_of_gamma(prior, gamma)


def mutual_information(prior: PriorSpec, gamma: float) -> float:
    """I(gamma) for the channel y = sqrt(gamma) Theta + G."""
    if gamma < 0:
        raise InvalidInputError("gamma must be nonnegative")
    if prior.is_gaussian:
        return 0.5 * math.log1p(gamma)
    if gamma == 0.0:
        return 0.0
    mu = math.sqrt(gamma)
    atoms = prior.atoms
    logw = np.log(prior.weights)
    total = 0.0
    for v, p in zip(atoms, prior.weights):
        y = mu * v + _gh_z                       # G = gh nodes
        # log p(y|theta=v) - log p(y), densities share the Gaussian factor
        ll_cond = -(_gh_z**2) / 2
        ll_marg = logsumexp(logw - (y[:, None] - mu * atoms) ** 2 / 2, axis=-1)
        total += p * float(_gh_w @ (ll_cond - ll_marg))
    return total


def psi(prior: PriorSpec, lam: float, gamma: float, b: float = 0.0) -> float:
    """Scalar potential whose critical points in gamma are the fixed
    points of gamma -> lambda^2 F(gamma); normalized so Psi(0; 0) = 0
    for centered priors."""
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    return gamma * gamma / (4 * lam * lam) - gamma / 2 - b * gamma / 2 + mutual_information(prior, gamma)


def psi_prime(prior: PriorSpec, lam: float, gamma: float, b: float = 0.0, step: float = 1e-5) -> float:
    """Central-difference derivative of `psi` in gamma."""
    lo = max(gamma - step, 0.0)
    hi = gamma + step
    return (psi(prior, lam, hi, b) - psi(prior, lam, lo, b)) / (hi - lo)


def se_scalar_recursion(
    prior: PriorSpec, lam: float, steps: int, gamma_init: float,
    fp_tol: float = 1e-10,
) -> list[dict]:
    """Iterate gamma_(k+1) = lambda^2 F(gamma_k), recording
    (mu_k, tau_k, gamma_k) with mu = gamma/lambda, tau^2 = gamma/lambda^2.
    Stops early once |gamma_(k+1) - gamma_k| < fp_tol."""
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    if gamma_init < 0:
        raise InvalidInputError("gamma_init must be nonnegative")
    gamma = float(gamma_init)
    out = []
    for _ in range(steps):
        mu = gamma / lam
        tau = math.sqrt(gamma) / lam if gamma > 0 else 0.0
        out.append({"gamma": gamma, "mu": mu, "tau": tau})
        nxt = lam * lam * F_of_gamma(prior, gamma)
        if abs(nxt - gamma) < fp_tol:
            gamma = nxt
            mu = gamma / lam
            tau = math.sqrt(gamma) / lam if gamma > 0 else 0.0
            out.append({"gamma": gamma, "mu": mu, "tau": tau})
            break
        gamma = nxt
    return out


def gamma_alg(prior: PriorSpec, lam: float, tol: float = 1e-12) -> float:
    """Smallest stable fixed point: inf{gamma > 0 : lambda^2 F(gamma) < gamma}.

    Scans a dense bracket for the first downcrossing of
    g(gamma) = lambda^2 F(gamma) - gamma and bisects it; returns 0 when
    the map sits strictly below the diagonal near the origin.
    """
    if lam < 0:
        raise InvalidInputError("lambda must be nonnegative")
    if lam == 0.0:
        return 0.0

    def g(x):
        return lam * lam * F_of_gamma(prior, x) - x

    lo = 1e-8
    if g(lo) < 0:
        # below the diagonal immediately: the infimum of the set is 0
        return 0.0
    gmax = max(10.0, 4.0 * lam * lam)
    grid = np.linspace(lo, gmax, 400)
    prev = lo
    for x in grid[1:]:
        if g(x) < 0:
            a, bnd = prev, x
            for _ in range(200):
                mid = (a + bnd) / 2
                if g(mid) < 0:
                    bnd = mid
                else:
                    a = mid
                if bnd - a < tol:
                    break
            return (a + bnd) / 2
        prev = x
    raise InvalidInputError("no downcrossing of lambda^2 F(gamma) - gamma found in the bracket")


def rho_from_gamma(gamma: float) -> float:
    """Overlap rho = sqrt(gamma / (1 + gamma))."""
    return math.sqrt(gamma / (1.0 + gamma)) if gamma > 0 else 0.0


def gamma_bayes(prior: PriorSpec, lam: float) -> float:
    """Global minimizer of Psi(gamma; b=0) over gamma >= 0, refined at
    every fixed point of lambda^2 F."""
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    gmax = 4.0 * lam * lam + 10.0
    grid = np.linspace(0.0, gmax, 600)
    vals = np.array([psi(prior, lam, float(x)) for x in grid])
    candidates = {float(grid[int(np.argmin(vals))]), 0.0}
    # every fixed point of lambda^2 F is a critical point of Psi
    candidates.update(_fixed_points(prior, lam, gmax))
    best_g, best_v = 0.0, psi(prior, lam, 0.0)
    for c in candidates:
        c = _golden_refine(lambda x: psi(prior, lam, x), max(c - 0.2, 0.0), c + 0.2)
        v = psi(prior, lam, c)
        if v < best_v - 1e-15 or (abs(v - best_v) < 1e-15 and c < best_g):
            best_g, best_v = c, v
    return best_g


def _fixed_points(prior: PriorSpec, lam: float, gmax: float) -> list[float]:
    def g(x):
        return lam * lam * F_of_gamma(prior, x) - x

    pts = []
    grid = np.linspace(1e-8, gmax, 500)
    vals = [g(float(x)) for x in grid]
    for i in range(len(grid) - 1):
        if vals[i] == 0.0 or (vals[i] > 0) != (vals[i + 1] > 0):
            a, bnd = float(grid[i]), float(grid[i + 1])
            for _ in range(100):
                mid = (a + bnd) / 2
                if (g(mid) > 0) == (vals[i] > 0):
                    a = mid
                else:
                    bnd = mid
            pts.append((a + bnd) / 2)
    return pts


def _golden_refine(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    lo = max(lo, 0.0)
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def scalar_overlap_recursion(
    prior: PriorSpec,
    lam: float,
    steps: int,
    perturbation=None,
    gamma_init: float = 0.3,
) -> float:
    """Asymptotic overlap of AMP with a (possibly perturbed) denoiser,
    computed by deterministic quadrature on the scalar channel.

    With perturbation None this reproduces rho_alg from an informative
    start; adding any fixed perturbation to the posterior mean must
    strictly lower the result, which is how denoiser optimality is
    verified without finite-n noise.
    """
    if lam <= 0 or gamma_init <= 0:
        raise InvalidInputError("need lam > 0 and an informative start")
    mu = gamma_init / lam
    tau = math.sqrt(gamma_init) / lam
    atoms = prior.atoms if not prior.is_gaussian else None
    for _ in range(steps):
        h0 = bayes_denoiser(prior, mu, tau)
        if perturbation is None:
            h = h0
        else:
            h = lambda y: h0(y) + perturbation(y)
        e_th = 0.0
        e_h2 = 0.0
        if prior.is_gaussian:
            zq = _gh_z
            for gnode, gw in zip(zq, _gh_w):
                y = mu * zq + tau * gnode
                hv = h(y)
                e_th += gw * float(_gh_w @ (zq * hv))
                e_h2 += gw * float(_gh_w @ hv**2)
        else:
            for v, p in zip(atoms, prior.weights):
                y = mu * v + tau * _gh_z
                hv = h(y)
                e_th += p * v * float(_gh_w @ hv)
                e_h2 += p * float(_gh_w @ hv**2)
        mu = lam * e_th
        tau = math.sqrt(max(e_h2, 1e-300))
    return mu / math.sqrt(mu * mu + tau * tau)


def threshold_table(prior: PriorSpec, lams: list[float]) -> list[dict]:
    """Rows (lambda, gamma_alg, rho_alg, gamma_bayes, rho_bayes)."""
    rows = []
    for lam in lams:
        ga = gamma_alg(prior, lam)
        gb = gamma_bayes(prior, lam) if lam > 0 else 0.0
        rows.append({
            "lambda": lam,
            "gamma_alg": ga,
            "rho_alg": rho_from_gamma(ga),
            "gamma_bayes": gb,
            "rho_bayes": rho_from_gamma(gb),
        })
    return rows


def threshold_table_csv(prior: PriorSpec, lams: list[float]) -> str:
    lines = ["lambda,gamma_alg,rho_alg,gamma_bayes,rho_bayes"]
    for r in threshold_table(prior, lams):
        lines.append(
            f"{r['lambda']:.10g},{r['gamma_alg']:.10g},{r['rho_alg']:.10g},"
            f"{r['gamma_bayes']:.10g},{r['rho_bayes']:.10g}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bayes-AMP driver


@dataclass
class BayesAmpResult:
    theta_hat: np.ndarray
    overlaps: np.ndarray          # |<theta*, theta^k>| / (||theta*|| ||theta^k||)
    gammas: np.ndarray            # scalar-SE track
    spectral_init: bool


def run_bayes_amp(instance: SpikedInstance, steps: int, seed: int = 0) -> BayesAmpResult:
    """AMP with Bayes denoisers and scalar-SE-tracked (mu_k, tau_k).

    Non-centered priors start from the prior mean; centered priors use
    the top eigenvector of Y (power iteration) scaled to the signal-to-
    noise level the spectral theory predicts, gamma_spec = lambda^2 - 1.
    """
    if steps < 1:
        raise InvalidInputError("need at least one step")
    prior = instance.prior
    lam = instance.lam
    y = instance.y
    theta_star = instance.theta
    n = instance.n
    norm_star = float(np.linalg.norm(theta_star))

    spectral = abs(prior.mean) < 1e-12
    if spectral:
        if lam <= 1.0:
            # no informative spectral direction below the bulk edge;
            # start from pure noise and let the recursion speak
            rng = np.random.Generator(np.random.Philox(key=seed))
            theta = rng.standard_normal(n)
            gamma = 1e-6
        else:
            v = _power_top(y, iters=200)
            gamma = lam * lam - 1.0
            mu = gamma / lam
            tau2 = gamma / (lam * lam)
            theta = math.sqrt(n * (mu * mu + tau2)) * v
    else:
        gamma = lam * lam * prior.mean**2
        theta = np.full(n, prior.mean)

    overlaps = []
    gammas = [gamma]
    f_prev = None
    theta_prev = None
    for _ in range(steps):
        mu = gamma / lam if gamma > 0 else 0.0
        tau = math.sqrt(gamma) / lam if gamma > 0 else 1e-9
        h = bayes_denoiser(prior, mu, max(tau, 1e-9))
        fk = h(theta)
        new = y @ fk
        if f_prev is not None:
            db = _mean_derivative(h, theta)
            new -= db * f_prev
        if not np.all(np.isfinite(new)):
            raise DivergedError("Bayes-AMP iterate diverged", step=len(overlaps))
        f_prev = fk
        theta_prev = theta
        theta = new
        denom = norm_star * float(np.linalg.norm(theta))
        overlaps.append(abs(float(theta_star @ theta)) / denom if denom > 0 else 0.0)
        gamma = lam * lam * F_of_gamma(prior, gamma)
        gammas.append(gamma)
    return BayesAmpResult(
        theta_hat=theta,
        overlaps=np.array(overlaps),
        gammas=np.array(gammas),
        spectral_init=spectral,
    )


def _mean_derivative(h, theta: np.ndarray, step: float = 1e-6) -> float:
    return float(np.mean((h(theta + step) - h(theta - step)) / (2 * step)))


def _power_top(y: np.ndarray, iters: int = 200) -> np.ndarray:
    n = y.shape[0]
    v = np.cos(np.arange(n, dtype=float))
    v /= np.linalg.norm(v)
    shift = 1.5 * float(np.linalg.norm(y)) / math.sqrt(n)
    for _ in range(iters):
        w = y @ v + shift * v
        nw = float(np.linalg.norm(w))
        if nw == 0:
            break
        v = w / nw
    return v
