"""Incremental-AMP optimizer for mixed p-spin Hamiltonians.

The iterate pair (z, m) follows

    z^(l+1) = grad H(m^l) - sum_{1<=j<=l} b_{lj} m^(j-1),
    m^(l+1) = m^l + u(s_l, X^l) * (z^(l+1) - z^l),

where X is the per-coordinate driven path dX = v dt + dz, s_l is the
midpoint of the Z-increment's time slice, and the memory coefficients
b_{lj} are empirical derivatives of the increment nonlinearity: the
u-weight terms plus chain-rule terms through the path X.  Each step
adds an orthogonal increment of squared norm ~ delta per coordinate, so
after T = 1/delta steps the iterate sits near the constraint set and is
rounded onto it.

The gradient vanishes at m = 0 for any mixing with degrees >= 2, so the
recursion is started with an exogenous Gaussian kick m^1 = sqrt(delta) w
that plays the role of the first orthogonal increment.

Controls: the spherical optimum u = 1/sqrt(xi''), v = 0 in closed form,
or a grid control (u = d_xx Phi, v = xi'' gamma d_x Phi) exported from
the variational solver.  `se_shadow` simulates the scalar limit
(Z, M, X) of the same scheme, and `spectral_baseline` provides the
sign-rounded top-eigenvector reference whose energy tends to 2/pi on
GOE input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedError, InvalidInputError
from .hamiltonian import MixingPolynomial, PSpinInstance, energy_density, gradient


@dataclass(frozen=True)
class ControlField:
    """Control u (and drift v) on a time grid.

    kind "spherical": u depends on t only (`u_const` per time node),
    v = 0.  kind "parisi": u, v, du/dx, dv/dx live on a (times, x) grid
    and are interpolated bilinearly.
    """

    kind: str
    delta: float
    times: np.ndarray
    mixing: MixingPolynomial
    u_const: np.ndarray | None = None
    x: np.ndarray | None = None
    u_grid: np.ndarray | None = None
    v_grid: np.ndarray | None = None
    ux_grid: np.ndarray | None = None
    vx_grid: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return int(round(1.0 / self.delta))

    def _time_weights(self, t: float) -> tuple[int, int, float]:
        times = self.times
        t = min(max(t, float(times[0])), float(times[-1]))
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 2)
        w = (t - times[j]) / (times[j + 1] - times[j])
        return j, j + 1, float(w)

    def _bilinear(self, grid: np.ndarray, t: float, xq) -> np.ndarray:
        j0, j1, w = self._time_weights(t)
        row = (1 - w) * grid[j0] + w * grid[j1]
        return np.interp(np.asarray(xq, dtype=float), self.x, row)

    def _const(self, t: float, xq) -> np.ndarray:
        j0, j1, w = self._time_weights(t)
        val = (1 - w) * self.u_const[j0] + w * self.u_const[j1]
        return np.full(np.shape(xq), val)

    def u_at(self, t: float, xq) -> np.ndarray:
        if self.kind == "spherical":
            return self._const(t, xq)
        return self._bilinear(self.u_grid, t, xq)

    def v_at(self, t: float, xq) -> np.ndarray:
        if self.kind == "spherical":
            return np.zeros(np.shape(xq))
        return self._bilinear(self.v_grid, t, xq)

    def ux_at(self, t: float, xq) -> np.ndarray:
        if self.kind == "spherical":
            return np.zeros(np.shape(xq))
        return self._bilinear(self.ux_grid, t, xq)

    def vx_at(self, t: float, xq) -> np.ndarray:
        if self.kind == "spherical":
            return np.zeros(np.shape(xq))
        return self._bilinear(self.vx_grid, t, xq)


def spherical_control(mixing: MixingPolynomial, delta: float) -> ControlField:
    """u(t) = 1/sqrt(xi''(t)), v = 0.

    Nodes sit at the Z-increment midpoints s_l = (l - 1/2) delta, where
    the constraint xi''(t) E{U_t^2} = 1 then holds exactly.  Where xi''
    vanishes (an initial segment for pure degree >= 3) u is set to zero
    and the effective start shifts to the first positive node.
    """
    steps = int(round(1.0 / delta))
    mids = np.clip((np.arange(steps) + 0.5) * delta - delta, 0.0, 1.0)
    xs = mixing.second(mids)
    u = np.zeros(steps)
    pos = xs > 1e-12
    u[pos] = 1.0 / np.sqrt(xs[pos])
    return ControlField(kind="spherical", delta=delta, times=mids, mixing=mixing, u_const=u)


@dataclass
class IampTrajectory:
    """Full iterate history plus the per-step diagnostics the scheme is
    supposed to satisfy (orthogonal increments of squared norm delta)."""

    ms: np.ndarray                  # (T+1, n)
    zs: np.ndarray                  # (T+1, n)
    energies: np.ndarray            # H(m^l)/n, l = 0..T
    increment_norms: np.ndarray     # realized ||m^(l+1)-m^l||^2/n
    increment_orthos: np.ndarray    # realized <m^(l+1)-m^l, m^l>/n
    raw_increment_norms: np.ndarray   # before the per-step enforcement
    raw_increment_orthos: np.ndarray
    onsager: dict
    flagged: bool
    delta: float

    @property
    def final_m(self) -> np.ndarray:
        return self.ms[-1]

    def to_csv(self) -> str:
        n = self.ms.shape[1]
        lines = ["t,norm_sq,increment_ortho,energy"]
        for i in range(len(self.energies)):
            norm = float(np.sum(self.ms[i] * self.ms[i])) / n
            ortho = float(self.increment_orthos[i]) if i < len(self.increment_orthos) else 0.0
            lines.append(f"{i * self.delta:.6f},{norm:.10g},{ortho:.10g},{self.energies[i]:.10g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        n = self.ms.shape[1]
        return {
            "delta": self.delta,
            "final_energy": float(self.energies[-1]),
            "final_norm_sq": float(np.sum(self.ms[-1] ** 2)) / n,
            "max_increment_ortho": float(np.max(np.abs(self.increment_orthos))),
            "max_increment_norm_err": float(np.max(np.abs(self.increment_norms - self.delta))),
            "max_raw_increment_ortho": float(np.max(np.abs(self.raw_increment_orthos))),
            "max_raw_increment_norm_err": float(np.max(np.abs(self.raw_increment_norms - self.delta))),
            "flagged": self.flagged,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def run_iamp(instance: PSpinInstance, control: ControlField, seed: int = 0) -> IampTrajectory:
    delta = control.delta
    steps = control.steps
    if not 10 <= steps <= 200:
        raise InvalidInputError("1/delta must lie in [10, 200]")
    n = instance.n
    if n < 500:
        raise InvalidInputError("incremental AMP needs n >= 500")
    rng = np.random.Generator(np.random.Philox(key=seed))

    ms = np.zeros((steps + 1, n))
    zs = np.zeros((steps + 1, n))

    # exogenous kick, independent of the disorder, normalized to length
    # sqrt(delta) per coordinate
    w = rng.standard_normal(n)
    w *= math.sqrt(n) / np.linalg.norm(w)
    ms[1] = math.sqrt(delta) * w
    u0 = float(np.mean(control.u_at(0.5 * delta, np.zeros(1))))
    xpath = ms[1] / u0 if (control.kind == "parisi" and u0 > 1e-6) else ms[1].copy()

    # memory-coefficient bookkeeping:
    #  ubar[s]  = mean_i u(s-th midpoint, X^s_i)
    #  dboard[:, j] = dX^s/dz^j per coordinate (current s)
    #  chain[j] = accumulated mean_i sum_s u_x dz^s dX^s/dz^j
    ubar = np.zeros(steps + 1)
    ubar[0] = u0  # unused by the coefficients; kept for inspection
    dboard = np.zeros((n, steps + 2))
    chain = np.zeros(steps + 2)

    energies = [energy_density(instance, ms[0]), energy_density(instance, ms[1])]
    inc_norms = [float(np.sum((ms[1] - ms[0]) ** 2)) / n]
    inc_orthos = [float(np.sum((ms[1] - ms[0]) * ms[0])) / n]
    raw_norms = list(inc_norms)
    raw_orthos = list(inc_orthos)
    onsager = {}

    for ell in range(1, steps):
        s_mid = (ell - 0.5) * delta  # midpoint of the Z-increment slice
        grad = gradient(instance, ms[ell])
        bs = np.zeros(ell)
        for j in range(1, ell + 1):
            b = chain[j]
            if j >= 2:
                b += ubar[j - 1]
            if j <= ell - 1:
                b -= ubar[j]
            bs[j - 1] = b
            onsager[(ell, j)] = float(b)
        znew = grad - bs @ ms[0:ell]
        if not np.all(np.isfinite(znew)):
            raise DivergedError(f"non-finite iterate at step {ell}", step=ell)
        dz = znew - zs[ell]
        zs[ell + 1] = znew

        u_here = control.u_at(s_mid, xpath)
        v_here = control.v_at(s_mid, xpath)
        # the limit object has increments exactly orthogonal to the iterate
        # and of squared length delta; enforce both (the raw quantities
        # concentrate there as n grows, but their finite-n fluctuations
        # feed back through xi'(q) and compound over the T steps)
        dm_raw = u_here * dz
        raw_inc = float(np.mean(dm_raw * dm_raw))
        msq = float(np.sum(ms[ell] * ms[ell]))
        raw_ortho = float(np.sum(dm_raw * ms[ell])) / n
        dm = dm_raw - (raw_ortho * n / msq) * ms[ell] if msq > 0 else dm_raw
        perp = float(np.mean(dm * dm))
        scale = math.sqrt(delta / perp) if perp > 0 else 1.0
        ms[ell + 1] = ms[ell] + scale * dm
        u_eff = scale * u_here
        ubar[ell] = float(np.mean(u_eff))

        if control.kind == "parisi":
            ux_here = scale * control.ux_at(s_mid, xpath)
            vx_here = control.vx_at(s_mid, xpath)
            cb = ux_here * dz
            chain[1:ell + 1] += np.mean(cb[:, None] * dboard[:, 1:ell + 1], axis=0)
            dboard[:, 1:ell + 2] *= (1.0 + vx_here * delta)[:, None]
        dboard[:, ell + 1] += 1.0
        dboard[:, ell] -= 1.0

        xpath = xpath + v_here * delta + dz

        energies.append(energy_density(instance, ms[ell + 1]))
        inc = ms[ell + 1] - ms[ell]
        inc_norms.append(float(np.sum(inc * inc)) / n)
        inc_orthos.append(float(np.sum(inc * ms[ell])) / n)
        raw_norms.append(raw_inc)
        raw_orthos.append(raw_ortho)

    inc_norms = np.array(inc_norms)
    inc_orthos = np.array(inc_orthos)
    raw_norms = np.array(raw_norms)
    raw_orthos = np.array(raw_orthos)
    # flag only genuine violations of the scheme's guarantees: realized
    # increments off their prescribed geometry, or raw orthogonality so
    # far gone that the memory correction must be broken
    flagged = bool(
        np.max(np.abs(inc_norms - delta)) > 0.5 * delta
        or np.max(np.abs(raw_orthos)) > 0.25
    )
    return IampTrajectory(
        ms=ms, zs=zs, energies=np.array(energies),
        increment_norms=inc_norms, increment_orthos=inc_orthos,
        raw_increment_norms=raw_norms, raw_increment_orthos=raw_orthos,
        onsager=onsager, flagged=flagged, delta=delta,
    )


# ---------------------------------------------------------------------------
# rounding


def round_to_cube(m: np.ndarray) -> np.ndarray:
    """Sign rounding onto {-1,+1}^n; ties at zero go to +1."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("cannot round non-finite entries")
    return np.where(m >= 0, 1.0, -1.0)


def round_to_sphere(m: np.ndarray) -> np.ndarray:
    """Radial projection onto the sphere of squared radius n."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("cannot round non-finite entries")
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        raise InvalidInputError("cannot project the zero vector onto the sphere")
    return m * (math.sqrt(len(m)) / norm)


def clip_magnetization(m: np.ndarray, margin: float = 1e-6) -> np.ndarray:
    """Clamp entries into (-1, 1); applied before the final Ising rounding."""
    return np.clip(m, -1.0 + margin, 1.0 - margin)


def rounding_loss(instance: PSpinInstance, m: np.ndarray, sigma: np.ndarray) -> float:
    """(H(sigma) - H(m)) / n."""
    return energy_density(instance, sigma) - energy_density(instance, m)


# ---------------------------------------------------------------------------
# state-evolution shadow


def se_shadow(
    control: ControlField,
    mixing: MixingPolynomial,
    delta: float,
    mc_samples: int,
    seed: int = 0,
) -> dict:
    """Scalar limit (Z, M, X) of the incremental scheme.

    Z gets independent Gaussian increments of variance
    xi'(E M_l^2) - xi'(E M_(l-1)^2) (their orthogonality is the
    self-consistency the diagnostics verify), M accumulates u(s, X) dZ,
    X follows the drifted path.  Returns the E M_t^2 trajectory, the
    value functional estimate sum E[u] * var-increment, a martingale
    diagnostic max_l |E dZ_l Z_(l-1)|, and the fraction of paths with
    |M_1| < 1.
    """
    steps = int(round(1.0 / delta))
    if mc_samples < 1000:
        raise InvalidInputError("need at least 10^3 sample paths")
    rng = np.random.Generator(np.random.Philox(key=seed))

    w = rng.standard_normal(mc_samples)
    w *= math.sqrt(mc_samples) / np.linalg.norm(w)
    m = math.sqrt(delta) * w
    u0 = float(np.mean(control.u_at(0.5 * delta, np.zeros(1))))
    x = m / u0 if (control.kind == "parisi" and u0 > 1e-6) else m.copy()

    m_sq = [0.0, float(np.mean(m * m))]
    z_var_prev = 0.0
    q_prev = m_sq[-1]
    z_running = np.zeros(mc_samples)
    value = 0.0
    raw_value = 0.0
    mart_max = 0.0

    for ell in range(1, steps):
        s_mid = (ell - 0.5) * delta
        # canonical pacing: the limit object has E M_t M_s = min(t, s),
        # so Z gets independent increments of variance xi'(t_l)-xi'(t_(l-1));
        # the measured E M^2 trajectory is reported as the consistency check
        var_new = float(mixing.prime(min(ell * delta, 1.0)))
        var_inc = max(var_new - z_var_prev, 0.0)
        z_var_prev = var_new
        dz = math.sqrt(var_inc) * rng.standard_normal(mc_samples)
        mart_max = max(mart_max, abs(float(np.mean(dz * z_running))))
        z_running += dz

        u_here = control.u_at(s_mid, x)
        v_here = control.v_at(s_mid, x)
        raw_value += float(np.mean(u_here)) * var_inc
        # same increment enforcement as the finite-n algorithm, with
        # expectations over paths replacing coordinate averages
        dm_raw = u_here * dz
        ortho = float(np.mean(dm_raw * m))
        dm = dm_raw - (ortho / q_prev) * m if q_prev > 0 else dm_raw
        perp = float(np.mean(dm * dm))
        scale = math.sqrt(delta / perp) if perp > 0 else 1.0
        value += scale * float(np.mean(u_here)) * var_inc
        m = m + scale * dm
        if control.kind == "parisi":
            # the control class constrains the integral to (-1, 1)
            m = np.clip(m, -1.0 + 1e-6, 1.0 - 1e-6)
        x = x + v_here * delta + dz
        q_prev = float(np.mean(m * m))
        m_sq.append(q_prev)

    return {
        "m_sq": np.array(m_sq),
        "final_m_sq": m_sq[-1],
        "value": value,
        "raw_value": raw_value,
        "martingale_max_corr": mart_max,
        "frac_inside": float(np.mean(np.abs(m) < 1.0)),
    }


def control_value(control: ControlField, mc_paths: int = 20000, seed: int = 7) -> float:
    """Monte Carlo estimate of the value functional int xi'' E[u] dt,
    paced like the discrete scheme (includes its O(delta) boundary loss)."""
    return se_shadow(control, control.mixing, control.delta, mc_paths, seed=seed)["value"]


def continuum_value(control: ControlField) -> float:
    """Continuum V(U) = int_0^1 xi''(t) u(t) dt for an x-independent
    control; for the spherical optimum this equals int sqrt(xi'')."""
    from scipy.integrate import quad

    if control.kind != "spherical":
        raise InvalidInputError("closed-form value needs an x-independent control")
    mixing = control.mixing

    def integrand(t):
        xs = float(mixing.second(t))
        return math.sqrt(xs) if xs > 0 else 0.0

    return quad(integrand, 0.0, 1.0, epsabs=1e-10, limit=200)[0]


# ---------------------------------------------------------------------------
# spectral baseline


def spectral_baseline(
    a: np.ndarray, iters: int = 300, tol: float = 1e-8
) -> tuple[np.ndarray, float, bool]:
    """Sign-rounded top eigenvector of a symmetric matrix.

    Power iteration on A + c I with a deterministic start vector; the
    shift c ~ 1.5 ||A||_F / sqrt(n) guards against |lambda_min| ~
    lambda_max oscillation for GOE-like input.  If the Rayleigh quotient
    comes out negative the iteration is redone with the safe shift
    ||A||_F.  Returns (sigma, <sigma, A sigma>/(2n), converged).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise InvalidInputError("matrix must be square")
    fro = float(np.linalg.norm(a))
    shift = 1.5 * fro / math.sqrt(n) + 1e-12

    def iterate(shift_val):
        v = np.cos(np.arange(n, dtype=float))
        v /= np.linalg.norm(v)
        converged = False
        lam = 0.0
        for _ in range(iters):
            av = a @ v
            lam = float(v @ av)
            resid = float(np.linalg.norm(av - lam * v))
            if resid < tol * max(abs(lam), 1.0):
                converged = True
                break
            w = av + shift_val * v
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                break
            v = w / nw
        return v, lam, converged

    v, lam, converged = iterate(shift)
    if lam < 0:
        v, lam, converged = iterate(fro)
    sigma = np.where(v >= 0, 1.0, -1.0)
    energy = float(sigma @ (a @ sigma)) / (2 * n)
    return sigma, energy, converged
