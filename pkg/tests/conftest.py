"""Shared fixtures.

The SK variational minimizer is expensive (tens of seconds), is needed
by several test modules, and acceptance criterion 1 requires running it
through the CLI.  A single session-scoped CLI run provides the value,
the profile, and the exported control for everyone.
"""

import json
import os

import numpy as np
import pytest

from spinglass import cli, parisi
from spinglass.hamiltonian import MixingPolynomial


@pytest.fixture(scope="session")
def sk_mixing():
    return MixingPolynomial({2: 0.5})


@pytest.fixture(scope="session")
def sk_parisi_run(tmp_path_factory):
    """cmd_parisi on the SK mixing (Ising, K=3, default grid), returning
    (report dict, profile dict, out dir)."""
    out = str(tmp_path_factory.mktemp("parisi_sk"))
    rc = cli.main([
        "parisi", "--xi", "0.5:2", "--boundary", "ising", "--rsb", "3",
        "--seed", "1234", "--out", out,
    ])
    assert rc == 0
    with open(os.path.join(out, "report.json")) as fh:
        report = json.load(fh)
    with open(os.path.join(out, "profile.json")) as fh:
        profile = json.load(fh)
    return report, profile, out


@pytest.fixture(scope="session")
def sk_profile(sk_parisi_run):
    _, prof, _ = sk_parisi_run
    return parisi.RSBProfile(
        breakpoints=tuple(prof["breakpoints"]), values=tuple(prof["values"])
    )


@pytest.fixture(scope="session")
def sk_control(sk_profile, sk_mixing):
    """Grid control at delta = 1/40 exported from the SK minimizer."""
    delta = 1.0 / 40
    times = np.round(np.arange(0.0, 1.0 + delta / 2, delta), 12)
    sol = parisi.solve_pde(sk_profile, sk_mixing, "ising", times=times)
    return parisi.export_control(sol, sk_profile, delta=delta)


@pytest.fixture(scope="session")
def sk_solution(sk_profile, sk_mixing):
    delta = 1.0 / 40
    times = np.round(np.arange(0.0, 1.0 + delta / 2, delta), 12)
    return parisi.solve_pde(sk_profile, sk_mixing, "ising", times=times)
