"""Mixed p-spin Hamiltonians.

The energy of a configuration sigma in R^n is

    H(sigma) = sum_k sqrt(xi_k) / n^((k-1)/2) * <G_k, sigma^(tensor k)>,

with one Gaussian coefficient tensor G_k per active degree k of the
mixing polynomial xi(t) = sum_k xi_k t^k.  For any two configurations,
E{H(s1) H(s2)} = n * xi(<s1, s2>/n), which is what the covariance probe
checks.  Small systems can be solved exactly by enumerating {-1,+1}^n;
those oracles (ground state, free energy) anchor the tests of every
approximate method in the package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp

from .errors import InvalidInputError, ResourceLimitError

# hard caps: exhaustive enumeration and dense tensor storage
ENUM_MAX_N = 22
DENSE_MAX_ORDER = 4
DENSE_MAX_ENTRIES = 200_000_000
_ENUM_BLOCK = 1 << 14


@dataclass(frozen=True)
class MixingPolynomial:
    """xi(t) = sum_{k>=2} xi_k t^k with nonnegative coefficients.

    `coefficients` maps degree k -> xi_k.  Degrees with xi_k == 0 are
    dropped at construction.
    """

    coefficients: dict[int, float]

    def __post_init__(self):
        cleaned = {}
        for k, c in sorted(self.coefficients.items()):
            if k < 2 or int(k) != k:
                raise InvalidInputError(f"mixing degree must be an integer >= 2, got {k}")
            if c < 0:
                raise InvalidInputError(f"mixing coefficient xi_{k} = {c} is negative")
            if c > 0:
                cleaned[int(k)] = float(c)
        if not cleaned:
            raise InvalidInputError("mixing polynomial has no positive coefficient")
        object.__setattr__(self, "coefficients", cleaned)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(self.coefficients)

    @property
    def max_degree(self) -> int:
        return max(self.coefficients)

    def _check_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > 1):
            raise InvalidInputError("mixing polynomial evaluated outside [0, 1]")
        return t

    def value(self, t):
        t = self._check_domain(t)
        return sum(c * t**k for k, c in self.coefficients.items())

    def prime(self, t):
        t = self._check_domain(t)
        return sum(k * c * t ** (k - 1) for k, c in self.coefficients.items())

    def second(self, t):
        t = self._check_domain(t)
        return sum(k * (k - 1) * c * t ** (k - 2) for k, c in self.coefficients.items())

    def second_antiderivative(self, t):
        """Exact int_0^t xi''(s) ds = xi'(t) - xi'(0)."""
        t = self._check_domain(t)
        return self.prime(t) - self.prime(np.zeros_like(t))

    def t_second_integral(self, lo: float, hi: float) -> float:
        """Exact int_lo^hi s * xi''(s) ds = sum_k (k-1) xi_k (hi^k - lo^k)."""
        self._check_domain([lo, hi])
        return sum((k - 1) * c * (hi**k - lo**k) for k, c in self.coefficients.items())

    def sqrt_second_integral(self, atol: float = 1e-9) -> float:
        """Adaptive quadrature of int_0^1 sqrt(xi''(t)) dt."""
        val, _ = quad(lambda t: math.sqrt(self.second(t)), 0.0, 1.0,
                      epsabs=atol, epsrel=1e-12, limit=200)
        return val


def xi_eval(mixing: MixingPolynomial, t):
    return mixing.value(t)


def xi_prime(mixing: MixingPolynomial, t):
    return mixing.prime(t)


def xi_second(mixing: MixingPolynomial, t):
    return mixing.second(t)


def symmetrize_tensor(raw: np.ndarray) -> np.ndarray:
    """Average a dense order-k tensor over all index permutations."""
    k = raw.ndim
    if k == 1:
        return raw.copy()
    acc = np.zeros_like(raw)
    for perm in itertools.permutations(range(k)):
        acc += np.transpose(raw, perm)
    acc /= math.factorial(k)
    return acc


@dataclass(frozen=True)
class PSpinInstance:
    """Disorder realization: one pre-symmetrized tensor per active degree."""

    n: int
    mixing: MixingPolynomial
    tensors: dict[int, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if set(self.tensors) != set(self.mixing.degrees):
            raise InvalidInputError("tensor orders do not match the active mixing degrees")
        for k, g in self.tensors.items():
            if g.shape != (self.n,) * k:
                raise InvalidInputError(f"order-{k} tensor has shape {g.shape}, expected {(self.n,) * k}")


def _check_sigma(instance: PSpinInstance, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (instance.n,):
        raise InvalidInputError(f"configuration has shape {sigma.shape}, expected ({instance.n},)")
    if not np.all(np.isfinite(sigma)):
        raise InvalidInputError("configuration contains non-finite entries")
    return sigma


def energy(instance: PSpinInstance, sigma: np.ndarray) -> float:
    """Unnormalized H(sigma); divide by n for the intensive value."""
    sigma = _check_sigma(instance, sigma)
    n = instance.n
    total = 0.0
    for k, g in instance.tensors.items():
        contraction = g
        for _ in range(k):
            contraction = contraction @ sigma
        total += math.sqrt(instance.mixing.coefficients[k]) * n ** (-(k - 1) / 2) * contraction
    return float(total)


def energy_density(instance: PSpinInstance, sigma: np.ndarray) -> float:
    return energy(instance, sigma) / instance.n


def gradient(instance: PSpinInstance, m: np.ndarray) -> np.ndarray:
    """Exact gradient of `energy`.

    Uses the symmetric-tensor identity: the derivative of <G, m^(k)> for
    symmetrized G is k * G contracted with k-1 copies of m.
    """
    m = _check_sigma(instance, m)
    n = instance.n
    out = np.zeros(n)
    for k, g in instance.tensors.items():
        contraction = g
        for _ in range(k - 1):
            contraction = contraction @ m
        out += k * math.sqrt(instance.mixing.coefficients[k]) * n ** (-(k - 1) / 2) * contraction
    return out


def _spin_block(n: int, start: int, stop: int) -> np.ndarray:
    """Rows start..stop-1 of the {-1,+1}^n table in lexicographic order.

    Ordering: row index m maps to signs via the bits of m, most
    significant bit first, 0 -> -1.  Increasing m is then exactly
    lexicographic order with -1 < +1.
    """
    m = np.arange(start, stop, dtype=np.uint64)[:, None]
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)[None, :]
    bits = (m >> shifts) & np.uint64(1)
    return 2.0 * bits.astype(np.float64) - 1.0


def _block_energies(instance: PSpinInstance, spins: np.ndarray) -> np.ndarray:
    n = instance.n
    out = np.zeros(spins.shape[0])
    for k, g in instance.tensors.items():
        scale = math.sqrt(instance.mixing.coefficients[k]) * n ** (-(k - 1) / 2)
        if k == 2:
            vals = np.einsum("bi,ij,bj->b", spins, g, spins, optimize=True)
        elif k == 3:
            vals = np.einsum("ijk,bi,bj,bk->b", g, spins, spins, spins, optimize=True)
        elif k == 4:
            vals = np.einsum("ijkl,bi,bj,bk,bl->b", g, spins, spins, spins, spins, optimize=True)
        else:
            raise ResourceLimitError(f"enumeration not supported for order {k}")
        out += scale * vals
    return out


def _check_enumerable(n: int):
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if n > ENUM_MAX_N:
        raise ResourceLimitError(f"enumeration capped at n <= {ENUM_MAX_N}, got {n}")


def brute_force_opt(instance: PSpinInstance) -> tuple[float, np.ndarray]:
    """Exact max of H(sigma)/n over {-1,+1}^n.

    Ties break to the lexicographically smallest sigma (with -1 < +1),
    so reruns are reproducible.
    """
    _check_enumerable(instance.n)
    n = instance.n
    best_val = -np.inf
    best_sigma = None
    for start in range(0, 1 << n, _ENUM_BLOCK):
        spins = _spin_block(n, start, min(start + _ENUM_BLOCK, 1 << n))
        vals = _block_energies(instance, spins)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_sigma = spins[i].copy()
    return best_val / n, best_sigma


def brute_force_opt_quadratic(a: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact max of <sigma, A sigma> / (2n) for a symmetric matrix A."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError("matrix must be square")
    _check_enumerable(n)
    best_val = -np.inf
    best_sigma = None
    for start in range(0, 1 << n, _ENUM_BLOCK):
        spins = _spin_block(n, start, min(start + _ENUM_BLOCK, 1 << n))
        vals = np.einsum("bi,ij,bj->b", spins, a, spins, optimize=True)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_sigma = spins[i].copy()
    return best_val / (2 * n), best_sigma


def free_energy(instance: PSpinInstance, beta: float) -> float:
    """phi_n(beta) = (1/n) log sum_sigma exp(beta H(sigma)).

    Accumulated in log space block by block, so it never overflows.
    """
    if beta <= 0:
        raise InvalidInputError("beta must be positive")
    _check_enumerable(instance.n)
    n = instance.n
    running = -np.inf
    for start in range(0, 1 << n, _ENUM_BLOCK):
        spins = _spin_block(n, start, min(start + _ENUM_BLOCK, 1 << n))
        vals = beta * _block_energies(instance, spins)
        running = np.logaddexp(running, logsumexp(vals))
    return float(running) / n


def covariance_probe(
    mixing: MixingPolynomial,
    n: int,
    pairs: list[tuple[np.ndarray, np.ndarray]],
    num_instances: int,
    rng: np.random.Generator,
    batch: int = 200,
) -> list[dict]:
    """Empirical vs predicted disorder covariance of (H(s1), H(s2)).

    For each configuration pair, draws `num_instances` fresh coefficient
    tensors and compares the sample covariance against n*xi(overlap/n).
    Returns one report row per pair with a standard-error z score.
    """
    if n > 100:
        raise ResourceLimitError("covariance probe capped at n <= 100")
    if num_instances < 1000:
        raise InvalidInputError("need at least 10^3 instances for a stable probe")
    rows = []
    degrees = mixing.degrees
    for s1, s2 in pairs:
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        h1 = np.zeros(num_instances)
        h2 = np.zeros(num_instances)
        done = 0
        while done < num_instances:
            b = min(batch, num_instances - done)
            for k in degrees:
                g = rng.standard_normal((b,) + (n,) * k)
                scale = math.sqrt(mixing.coefficients[k]) * n ** (-(k - 1) / 2)
                c1 = g
                c2 = g
                for _ in range(k):
                    c1 = c1 @ s1
                    c2 = c2 @ s2
                h1[done:done + b] += scale * c1
                h2[done:done + b] += scale * c2
            done += b
        overlap = float(s1 @ s2)
        # raw polynomial sum: overlaps may be negative, unlike xi's [0,1] domain
        predicted = n * sum(c * (overlap / n) ** k for k, c in mixing.coefficients.items())
        empirical = float(np.mean(h1 * h2) - np.mean(h1) * np.mean(h2))
        prods = h1 * h2
        se = float(np.std(prods, ddof=1) / math.sqrt(num_instances))
        rows.append({
            "overlap": overlap,
            "predicted": predicted,
            "empirical": empirical,
            "stderr": se,
            "z": (empirical - predicted) / se if se > 0 else 0.0,
        })
    return rows
