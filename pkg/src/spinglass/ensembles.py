"""Seeded generation of every random object used by the package.

All randomness flows through `Seed`, a (master, label) pair hashed into
a Philox counter-based generator.  The same pair gives bit-identical
output on any platform and under any thread count, and independent
labels give independent streams, so experiments parallelize without a
shared generator.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ResourceLimitError
from .hamiltonian import (
    DENSE_MAX_ENTRIES,
    DENSE_MAX_ORDER,
    MixingPolynomial,
    PSpinInstance,
    symmetrize_tensor,
)


@dataclass(frozen=True)
class Seed:
    """Master seed plus a stream label (a path such as "goe/0")."""

    master: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.master < 2**64:
            raise InvalidInputError("master seed must fit in 64 unsigned bits")

    def child(self, suffix: str) -> "Seed":
        label = f"{self.label}/{suffix}" if self.label else suffix
        return Seed(self.master, label)

    def rng(self) -> np.random.Generator:
        """Fresh generator for this (master, label) pair."""
        digest = hashlib.blake2b(
            self.master.to_bytes(8, "little") + self.label.encode("utf-8"),
            digest_size=16,
        ).digest()
        key = int.from_bytes(digest, "little")
        return np.random.Generator(np.random.Philox(key=key))


def _as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


def sample_goe(n: int, seed) -> np.ndarray:
    """Symmetric matrix with independent N(0, 1/n) off-diagonal entries
    and N(0, 2/n) diagonal entries."""
    if n < 1:
        raise InvalidInputError("GOE dimension must be >= 1")
    rng = _as_seed(seed).rng()
    m = rng.standard_normal((n, n))
    # in-place symmetrization keeps the peak footprint at one matrix
    _symmetrize_inplace(m)
    m /= math.sqrt(2 * n)
    return m


def _symmetrize_inplace(m: np.ndarray, block: int = 1024):
    n = m.shape[0]
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        for j0 in range(i0, n, block):
            j1 = min(j0 + block, n)
            upper = m[i0:i1, j0:j1]
            lower = m[j0:j1, i0:i1]
            s = upper + lower.T
            m[i0:i1, j0:j1] = s
            m[j0:j1, i0:i1] = s.T


def sample_pspin(mixing: MixingPolynomial, n: int, seed) -> PSpinInstance:
    """Fresh disorder: one i.i.d. N(0,1) tensor per active degree,
    symmetrized once at construction."""
    if n < 1:
        raise InvalidInputError("dimension must be >= 1")
    if mixing.max_degree > DENSE_MAX_ORDER:
        raise ResourceLimitError(
            f"dense tensors limited to order {DENSE_MAX_ORDER}, mixing has degree {mixing.max_degree}"
        )
    if n**mixing.max_degree > DENSE_MAX_ENTRIES:
        raise ResourceLimitError(
            f"order-{mixing.max_degree} tensor at n={n} exceeds the dense storage budget"
        )
    base = _as_seed(seed)
    tensors = {}
    for k in mixing.degrees:
        rng = base.child(f"order{k}").rng()
        raw = rng.standard_normal((n,) * k)
        tensors[k] = (raw + raw.T) / 2 if k == 2 else symmetrize_tensor(raw)
    return PSpinInstance(n=n, mixing=mixing, tensors=tensors)


# ---------------------------------------------------------------------------
# priors for the spiked model


@dataclass(frozen=True)
class PriorSpec:
    """Scalar prior with unit second moment.

    kind is one of "rademacher", "gaussian", "sparse" (three-point
    0, +-1/sqrt(eps)), or "twopoint" (values a, b with weights p, 1-p).
    Discrete priors expose `atoms`/`weights`; the Gaussian prior is
    handled in closed form wherever it appears.
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("rademacher", "gaussian", "sparse", "twopoint"):
            raise InvalidInputError(f"unknown prior kind {self.kind!r}")
        if self.kind == "sparse":
            if len(self.params) != 1 or not 0 < self.params[0] <= 1:
                raise InvalidInputError("sparse prior needs eps in (0, 1]")
        if self.kind == "twopoint":
            if len(self.params) != 3:
                raise InvalidInputError("twopoint prior needs (a, b, p)")
            a, b, p = self.params
            if not 0 < p < 1:
                raise InvalidInputError("twopoint weight p must lie in (0, 1)")
            if abs(p * a * a + (1 - p) * b * b - 1.0) > 1e-12:
                raise InvalidInputError("twopoint prior must have unit second moment")

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    @property
    def atoms(self) -> np.ndarray:
        if self.kind == "rademacher":
            return np.array([-1.0, 1.0])
        if self.kind == "sparse":
            eps = self.params[0]
            v = 1.0 / math.sqrt(eps)
            return np.array([-v, 0.0, v])
        if self.kind == "twopoint":
            return np.array([self.params[0], self.params[1]])
        raise InvalidInputError("gaussian prior has no atoms")

    @property
    def weights(self) -> np.ndarray:
        if self.kind == "rademacher":
            return np.array([0.5, 0.5])
        if self.kind == "sparse":
            eps = self.params[0]
            return np.array([eps / 2, 1.0 - eps, eps / 2])
        if self.kind == "twopoint":
            p = self.params[2]
            return np.array([p, 1.0 - p])
        raise InvalidInputError("gaussian prior has no atoms")

    @property
    def mean(self) -> float:
        if self.is_gaussian:
            return 0.0
        return float(self.atoms @ self.weights)

    @property
    def second_moment(self) -> float:
        if self.is_gaussian:
            return 1.0
        return float((self.atoms**2) @ self.weights)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_gaussian:
            return rng.standard_normal(n)
        idx = rng.choice(len(self.atoms), size=n, p=self.weights)
        return self.atoms[idx]


def rademacher_prior() -> PriorSpec:
    return PriorSpec("rademacher")


def gaussian_prior() -> PriorSpec:
    return PriorSpec("gaussian")


def sparse_rademacher_prior(eps: float) -> PriorSpec:
    return PriorSpec("sparse", (float(eps),))


def two_point_prior(a: float, b: float, p: float) -> PriorSpec:
    return PriorSpec("twopoint", (float(a), float(b), float(p)))


@dataclass(frozen=True)
class SpikedInstance:
    """Observation Y = (lambda/n) theta theta^T + GOE noise, with the
    planted vector retained for overlap measurements."""

    y: np.ndarray
    theta: np.ndarray
    lam: float
    prior: PriorSpec

    @property
    def n(self) -> int:
        return self.theta.shape[0]


def sample_spiked(n: int, lam: float, prior: PriorSpec, seed) -> SpikedInstance:
    """Rank-one spiked matrix.  With lam = 0 the observation is exactly
    the GOE draw of the same stream label."""
    if lam < 0:
        raise InvalidInputError("signal strength must be nonnegative")
    base = _as_seed(seed)
    y = sample_goe(n, base)
    theta = prior.sample(n, base.child("theta").rng())
    if lam > 0:
        y = y + (lam / n) * np.outer(theta, theta)
    return SpikedInstance(y=y, theta=theta, lam=float(lam), prior=prior)


# ---------------------------------------------------------------------------
# random trees and potentials (fixtures for belief propagation)


def sample_tree(n: int, seed, max_degree: int | None = None) -> list[tuple[int, int]]:
    """Uniformly random labeled tree on n vertices via a Pruefer sequence.

    If max_degree is given, sequences are resampled until the degree
    bound holds (fine for the small fixtures this is used for).
    """
    if n < 1:
        raise InvalidInputError("tree needs at least one vertex")
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    rng = _as_seed(seed).rng()
    while True:
        pruefer = rng.integers(0, n, size=n - 2)
        if max_degree is not None:
            counts = np.bincount(pruefer, minlength=n) + 1
            if counts.max() > max_degree:
                continue
        return _pruefer_to_edges(list(pruefer), n)


def _pruefer_to_edges(pruefer: list[int], n: int) -> list[tuple[int, int]]:
    degree = [1] * n
    for v in pruefer:
        degree[v] += 1
    edges = []
    import heapq

    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in pruefer:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return edges


def sample_potentials(
    edges: list[tuple[int, int]], alphabet_size: int, seed
) -> dict[tuple[int, int], np.ndarray]:
    """Strictly positive pairwise tables, one per edge, keyed (i, j) with i < j."""
    if alphabet_size < 1:
        raise InvalidInputError("alphabet size must be >= 1")
    rng = _as_seed(seed).rng()
    tables = {}
    for (i, j) in edges:
        tables[(min(i, j), max(i, j))] = np.exp(
            rng.normal(0.0, 0.7, size=(alphabet_size, alphabet_size))
        )
    return tables
