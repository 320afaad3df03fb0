"""General AMP iteration and its state-evolution limit.

The iteration on a symmetric matrix A is

    x^(k+1) = A f_k(x^(<=k); z) - sum_{j=1..k} b_{k,j} f_(j-1)(x^(<=j-1); z),
    b_{k,j} = (1/n) sum_i  d f_k / d x^j  evaluated row-wise,

with entrywise nonlinearities f_k.  The memory ("Onsager") term makes
the empirical row distribution of the iterates asymptotically Gaussian
with covariance Q given by the state-evolution recursion

    Q_{k+1,j+1} = E{ f_k(X^(<=k); Z) f_j(X^(<=j); Z) },

which `state_evolution` computes by Monte Carlo (with a Gauss-Hermite
fast path when each f_k reads only the latest iterate).  `se_compare`
tabulates empirical averages of test functions against their SE
predictions, which is how the engine is validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import DivergedError, InvalidInputError, NumericError

_FD_STEP = 1e-6


@dataclass
class NonlinearitySchedule:
    """Per-step entrywise functions f_k(x^0, ..., x^k; z).

    Each function receives the stacked iterate matrix xs of shape
    (k+1, n) and the side vector z, and returns an n-vector.  Partial
    derivatives may be supplied analytically (`partials[k][j]`, same
    calling convention); otherwise central differences with step 1e-6
    are used.  `latest_only` marks schedules where f_k reads x^k alone,
    enabling exact quadrature in state evolution.
    """

    funcs: list
    partials: list | None = None
    lipschitz: float = 1.0
    latest_only: bool = False

    def __len__(self) -> int:
        return len(self.funcs)

    def apply(self, k: int, xs: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.funcs[k](xs, z)

    def partial(self, k: int, j: int, xs: np.ndarray, z: np.ndarray) -> np.ndarray:
        """d f_k / d x^j, analytic when available, else central differences."""
        if self.partials is not None and self.partials[k] is not None:
            p = self.partials[k].get(j) if isinstance(self.partials[k], dict) else None
            if p is not None:
                return p(xs, z)
        shifted = xs.copy()
        shifted[j] = xs[j] + _FD_STEP
        hi = self.funcs[k](shifted, z)
        shifted[j] = xs[j] - _FD_STEP
        lo = self.funcs[k](shifted, z)
        return (hi - lo) / (2 * _FD_STEP)


def tanh_schedule(steps: int) -> NonlinearitySchedule:
    """f_k(x^(<=k)) = tanh(x^k), the classic testbed."""
    funcs = [(lambda xs, z: np.tanh(xs[-1])) for _ in range(steps)]
    partials = [{k: (lambda xs, z: 1.0 - np.tanh(xs[-1]) ** 2)} for k in range(steps)]
    return NonlinearitySchedule(funcs=funcs, partials=partials, lipschitz=1.0, latest_only=True)


def identity_schedule(steps: int) -> NonlinearitySchedule:
    funcs = [(lambda xs, z: xs[-1].copy()) for _ in range(steps)]
    partials = [{k: (lambda xs, z: np.ones_like(xs[-1]))} for k in range(steps)]
    return NonlinearitySchedule(funcs=funcs, partials=partials, lipschitz=1.0, latest_only=True)


@dataclass
class AmpTrajectory:
    xs: np.ndarray            # (K+1, n): x^0 .. x^K
    z: np.ndarray
    fs: np.ndarray            # (K, n): f_k evaluated along the run
    onsager: np.ndarray       # (K, K): b[k, j-1] = b_{k,j}
    onsager_method: list      # "analytic" or "fd" per step

    @property
    def steps(self) -> int:
        return self.xs.shape[0] - 1

    def gram(self) -> np.ndarray:
        n = self.xs.shape[1]
        return (self.xs @ self.xs.T) / n

    def to_csv(self) -> str:
        g = self.gram()
        lines = ["step_i,step_j,gram"]
        for i in range(g.shape[0]):
            for j in range(g.shape[1]):
                lines.append(f"{i},{j},{g[i, j]:.10g}")
        return "\n".join(lines) + "\n"


def onsager(schedule: NonlinearitySchedule, xs: np.ndarray, z: np.ndarray, k: int) -> tuple[np.ndarray, str]:
    """Coefficients b_{k,j} = (1/n) sum_i d_j f_k for j = 1..k."""
    if xs.shape[0] < k + 1:
        raise InvalidInputError("trajectory too short for the requested step")
    bs = np.empty(k)
    has_analytic = (
        schedule.partials is not None
        and schedule.partials[k] is not None
        and isinstance(schedule.partials[k], dict)
    )
    for j in range(1, k + 1):
        if schedule.latest_only and j < k:
            bs[j - 1] = 0.0
            continue
        bs[j - 1] = float(np.mean(schedule.partial(k, j, xs[: k + 1], z)))
    method = "analytic" if has_analytic else "fd"
    return bs, method


def amp_run(
    a: np.ndarray,
    schedule: NonlinearitySchedule,
    x0: np.ndarray,
    z: np.ndarray | None = None,
    steps: int | None = None,
    with_onsager: bool = True,
) -> AmpTrajectory:
    """Run the iteration for `steps` steps (cost O(steps * n^2)).

    x0 and z must be independent of A; there is no memory term at the
    first application because of that independence.  Setting
    `with_onsager=False` deletes the correction, which is the negative
    control showing why the term matters.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError("matrix must be square")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise InvalidInputError("x0 must be an n-vector")
    z = np.zeros(n) if z is None else np.asarray(z, dtype=float)
    steps = len(schedule) if steps is None else steps
    if steps > len(schedule):
        raise InvalidInputError("schedule shorter than the requested number of steps")

    xs = np.empty((steps + 1, n))
    xs[0] = x0
    fs = np.empty((steps, n))
    btable = np.zeros((steps, steps))
    methods = []
    for k in range(steps):
        fk = schedule.apply(k, xs[: k + 1], z)
        fs[k] = fk
        new = a @ fk
        if with_onsager and k >= 1:
            bs, method = onsager(schedule, xs, z, k)
            btable[k, :k] = bs
            methods.append(method)
            new -= bs @ fs[:k]  # b_{k,j} multiplies f_(j-1)
        else:
            methods.append("none")
        if not np.all(np.isfinite(new)):
            raise DivergedError(f"AMP iterate diverged at step {k + 1}", step=k + 1)
        xs[k + 1] = new
    return AmpTrajectory(xs=xs, z=z, fs=fs, onsager=btable, onsager_method=methods)


# ---------------------------------------------------------------------------
# state evolution


@dataclass
class SEState:
    """Covariance of the Gaussian iterates after each step.

    q[k, j] approximates E{X_k X_j} for k, j >= 1; the law of (X_0, Z)
    is whatever the sampler provided."""

    q: np.ndarray
    stderr: np.ndarray
    mc_samples: int

    def check_psd(self, tol: float = 1e-10) -> float:
        eig = np.linalg.eigvalsh((self.q + self.q.T) / 2)
        if eig.min() < -tol * max(1.0, eig.max()):
            raise NumericError(f"state-evolution covariance lost PSD: min eig {eig.min():.3e}")
        return float(eig.min())


def state_evolution(
    schedule: NonlinearitySchedule,
    init_sampler,
    steps: int,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> SEState:
    """Monte Carlo recursion for Q with common random numbers.

    `init_sampler(ns, rng)` returns (x0, z) sample vectors of length ns.
    Gaussian iterates are built incrementally from a Cholesky square
    root that grows one column per step, so the same normal draws are
    reused across steps.
    """
    if mc_samples < 10_000:
        raise InvalidInputError("state evolution needs at least 10^4 samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    x0, z = init_sampler(mc_samples, rng)
    gs = rng.standard_normal((steps, mc_samples))  # common random numbers
    xs = np.empty((steps + 1, mc_samples))
    xs[0] = x0
    q = np.zeros((steps, steps))
    se = np.zeros((steps, steps))
    fs = np.empty((steps, mc_samples))

    chol = np.zeros((steps, steps))
    for k in range(steps):
        fk = schedule.apply(k, xs[: k + 1], z)
        fs[k] = fk
        for j in range(k + 1):
            prod = fk * fs[j]
            q[k, j] = q[j, k] = float(np.mean(prod))
            se[k, j] = se[j, k] = float(np.std(prod, ddof=1) / math.sqrt(mc_samples))
        # extend the Cholesky factor of q by one row and draw X_(k+1)
        row = q[k, : k + 1]
        if k == 0:
            chol[0, 0] = math.sqrt(max(row[0], 0.0))
        else:
            lower = chol[:k, :k] + 1e-14 * np.eye(k)  # ridge guards rank deficiency
            sol = np.linalg.solve(lower, row[:k])
            rem = row[k] - float(sol @ sol)
            if rem < -1e-8 * max(1.0, abs(row[k])):
                raise NumericError(f"SE covariance lost PSD at step {k + 1}: residual {rem:.3e}")
            chol[k, :k] = sol
            chol[k, k] = math.sqrt(max(rem, 0.0))
        if k + 1 <= steps:
            xs[k + 1] = chol[k, : k + 1] @ gs[: k + 1]
    return SEState(q=q, stderr=se, mc_samples=mc_samples)


def state_evolution_diag_quadrature(
    schedule: NonlinearitySchedule,
    q11: float,
    steps: int,
    nodes: int = 201,
) -> np.ndarray:
    """Exact diagonal recursion for latest-only schedules with centered
    Gaussian X_1: q_(k+1) = E f_k(sqrt(q_k) G)^2 by Gauss-Hermite."""
    if not schedule.latest_only:
        raise InvalidInputError("quadrature fast path needs a latest-only schedule")
    zq, wq = hermegauss(nodes)
    wq = wq / math.sqrt(2 * math.pi)
    diag = [q11]
    for k in range(1, steps):
        xk = math.sqrt(max(diag[-1], 0.0)) * zq
        stack = np.zeros((k + 1, nodes))
        stack[-1] = xk
        vals = schedule.apply(k, stack, np.zeros(nodes))
        diag.append(float(wq @ vals**2))
    return np.array(diag)


def se_compare(
    trajectory: AmpTrajectory,
    se_state: SEState,
    test_functions: dict | None = None,
) -> dict:
    """Empirical averages (1/n) sum_i psi(x_i) against SE expectations.

    Default tests are the Gram entries <x^k, x^j>/n vs Q_{kj}.  Custom
    pseudo-Lipschitz tests map a name to (psi(xs_rows), E psi) pairs.
    """
    g = trajectory.gram()
    k = se_state.q.shape[0]
    rows = []
    for i in range(1, min(g.shape[0], k + 1)):
        for j in range(1, i + 1):
            pred = se_state.q[i - 1, j - 1]
            emp = g[i, j]
            rows.append({
                "test": f"x{i}.x{j}/n",
                "empirical": float(emp),
                "predicted": float(pred),
                "deviation": float(emp - pred),
            })
    if test_functions:
        for name, (psi, expected) in test_functions.items():
            emp = float(np.mean(psi(trajectory.xs, trajectory.z)))
            rows.append({
                "test": name,
                "empirical": emp,
                "predicted": float(expected),
                "deviation": emp - float(expected),
            })
    max_dev = max(abs(r["deviation"]) for r in rows) if rows else 0.0
    return {"rows": rows, "max_deviation": max_dev}


def report_to_csv(report: dict) -> str:
    lines = ["test,empirical,predicted,deviation"]
    for r in report["rows"]:
        lines.append(f"{r['test']},{r['empirical']:.10g},{r['predicted']:.10g},{r['deviation']:.10g}")
    return "\n".join(lines) + "\n"
