import math

import numpy as np
import pytest

from spinglass import iamp
from spinglass.ensembles import Seed, sample_goe, sample_pspin
from spinglass.errors import DivergedError, InvalidInputError
from spinglass.hamiltonian import (
    MixingPolynomial,
    brute_force_opt_quadratic,
    energy_density,
)

SK = MixingPolynomial({2: 0.5})


def test_spherical_control_closed_forms():
    ctl = iamp.spherical_control(SK, 1 / 40)
    assert np.allclose(ctl.u_const, 1.0)  # xi'' = 1 everywhere
    assert iamp.continuum_value(ctl) == pytest.approx(1.0, abs=1e-9)
    # constraint xi''(t) u(t)^2 = 1 exactly at the control's own nodes
    xs = SK.second(ctl.times)
    assert np.allclose(xs * ctl.u_const**2, 1.0)

    ctl3 = iamp.spherical_control(MixingPolynomial({3: 1.0}), 1 / 40)
    assert iamp.continuum_value(ctl3) == pytest.approx(2 * math.sqrt(6) / 3, abs=1e-8)
    pos = MixingPolynomial({3: 1.0}).second(ctl3.times) > 1e-12
    assert np.allclose(
        MixingPolynomial({3: 1.0}).second(ctl3.times[pos]) * ctl3.u_const[pos] ** 2, 1.0
    )


def test_run_iamp_guards():
    ctl = iamp.spherical_control(SK, 1 / 5)  # too coarse
    inst = sample_pspin(SK, 600, Seed(0, "guard"))
    with pytest.raises(InvalidInputError):
        iamp.run_iamp(inst, ctl)
    ctl = iamp.spherical_control(SK, 1 / 20)
    small = sample_pspin(SK, 100, Seed(0, "small"))
    with pytest.raises(InvalidInputError):
        iamp.run_iamp(small, ctl)


def test_run_iamp_diverged_error_names_step():
    # a corrupted coupling tensor poisons the gradient with NaN
    inst = sample_pspin(SK, 600, Seed(1, "blow"))
    inst.tensors[2][0, 0] = np.nan
    ctl = iamp.spherical_control(SK, 1 / 20)
    with pytest.raises(DivergedError) as exc:
        iamp.run_iamp(inst, ctl, seed=0)
    assert exc.value.step is not None


def test_spherical_run_diagnostics():
    inst = sample_pspin(SK, 2000, Seed(2, "diag"))
    ctl = iamp.spherical_control(SK, 1 / 40)
    traj = iamp.run_iamp(inst, ctl, seed=1)
    delta = traj.delta
    # realized increments carry exactly the prescribed geometry
    assert np.max(np.abs(traj.increment_norms - delta)) <= 0.1 * delta
    assert np.max(np.abs(traj.increment_orthos)) <= 1e-10
    # raw (pre-enforcement) quantities concentrate there too
    assert np.max(np.abs(traj.raw_increment_orthos)) <= 0.05
    # norm budget
    assert 0.9 <= float(traj.final_m @ traj.final_m) / 2000 <= 1.0 + 1e-9
    assert not traj.flagged
    # csv export shape
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,norm_sq,increment_ortho,energy"
    assert len(lines) == len(traj.energies) + 1


def test_spherical_energy_single_seed():
    inst = sample_pspin(SK, 4000, Seed(1234, "rep/0"))
    ctl = iamp.spherical_control(SK, 1 / 40)
    traj = iamp.run_iamp(inst, ctl, seed=1)
    sigma = iamp.round_to_sphere(traj.final_m)
    assert energy_density(inst, sigma) >= 0.90
    # shadow value tracks the pre-rounding energy
    sh = iamp.se_shadow(ctl, SK, 1 / 40, 20_000, seed=3)
    assert abs(sh["value"] - traj.energies[-1]) <= 0.03


def test_shadow_sphere_msq_and_martingale():
    delta = 1 / 40
    ctl = iamp.spherical_control(SK, delta)
    sh = iamp.se_shadow(ctl, SK, delta, 30_000, seed=5)
    ts = np.minimum(np.arange(len(sh["m_sq"])) * delta, 1.0)
    assert np.max(np.abs(sh["m_sq"] - ts)) <= 2 * delta
    assert sh["final_m_sq"] == pytest.approx(1.0, abs=2 * delta)
    assert sh["martingale_max_corr"] < 0.01


def test_shadow_ising_stays_inside(sk_control, sk_mixing):
    sh = iamp.se_shadow(sk_control, sk_mixing, sk_control.delta, 30_000, seed=6)
    assert sh["frac_inside"] >= 0.99
    assert abs(sh["raw_value"] - 0.763168) <= 0.02


def test_shadow_value_matches_ising_energy(sk_control, sk_mixing):
    inst = sample_pspin(SK, 4000, Seed(1234, "shadowcmp"))
    traj = iamp.run_iamp(inst, sk_control, seed=2)
    sh = iamp.se_shadow(sk_control, sk_mixing, sk_control.delta, 30_000, seed=4)
    assert abs(sh["value"] - traj.energies[-1]) <= 0.03


def test_ising_run_single_seed(sk_control):
    inst = sample_pspin(SK, 4000, Seed(1234, "rep/0"))
    traj = iamp.run_iamp(inst, sk_control, seed=1)
    clipped = iamp.clip_magnetization(traj.final_m)
    sigma = iamp.round_to_cube(clipped)
    e_sigma = energy_density(inst, sigma)
    assert e_sigma >= 0.68
    assert np.max(np.abs(traj.raw_increment_orthos)) <= 0.05
    # measured rounding loss against the trajectory's own output
    assert abs(e_sigma - traj.energies[-1]) <= 0.05
    # terminal magnetization map: most coordinates near the corners
    assert np.mean(np.abs(clipped) > 0.5) > 0.8


def test_rounding_rules():
    assert np.array_equal(iamp.round_to_cube(np.array([1.0, -1.0])), [1.0, -1.0])
    assert np.array_equal(iamp.round_to_cube(np.zeros(3)), np.ones(3))
    m = np.array([0.3, -2.0, 0.0])
    s = iamp.round_to_sphere(m)
    assert float(s @ s) == pytest.approx(3.0)
    with pytest.raises(InvalidInputError):
        iamp.round_to_sphere(np.zeros(4))
    with pytest.raises(InvalidInputError):
        iamp.round_to_cube(np.array([np.inf]))
    clipped = iamp.clip_magnetization(np.array([2.0, -3.0, 0.5]))
    assert np.max(np.abs(clipped)) < 1.0


def test_monotone_improvement_in_delta():
    # mean spherical energy is nondecreasing as delta shrinks (within 1 SE)
    means, ses = [], []
    for delta_inv in (20, 40, 80):
        ctl = iamp.spherical_control(SK, 1.0 / delta_inv)
        vals = []
        for rep in range(5):
            inst = sample_pspin(SK, 2000, Seed(50 + delta_inv, f"rep/{rep}"))
            traj = iamp.run_iamp(inst, ctl, seed=rep)
            vals.append(energy_density(inst, iamp.round_to_sphere(traj.final_m)))
        means.append(np.mean(vals))
        ses.append(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    assert means[1] >= means[0] - ses[0] - ses[1]
    assert means[2] >= means[1] - ses[1] - ses[2]


def test_spectral_baseline_rank_one_and_oracle_bound():
    n = 200
    a = np.outer(np.ones(n), np.ones(n)) / n
    sigma, e, converged = iamp.spectral_baseline(a)
    assert converged
    assert np.all(sigma == sigma[0])
    assert e == pytest.approx(0.5)

    small = sample_goe(14, Seed(9, "oracle"))
    opt, _ = brute_force_opt_quadratic(small)
    _, e_spec, _ = iamp.spectral_baseline(small)
    assert e_spec <= opt + 1e-12


def test_spectral_baseline_goe_single_seed():
    a = sample_goe(4000, Seed(77, "goe/base"))
    _, e, _ = iamp.spectral_baseline(a)
    assert abs(e - 2 / math.pi) < 0.04  # single-seed slack; 5-seed mean in acceptance
