"""Mean-field spin glass toolkit.

Numerical building blocks for dense random optimization and estimation:

- seeded random ensembles (GOE matrices, Gaussian coupling tensors,
  rank-one spiked observations, random trees),
- mixed p-spin Hamiltonians with exact gradients and small-n
  enumeration oracles,
- the zero-temperature Parisi variational problem (Cole-Hopf PDE solver
  and profile optimization, Ising and spherical constraint sets),
- approximate message passing with empirically estimated memory
  corrections and its state-evolution limit,
- Bayes-optimal AMP for rank-one matrix estimation with scalar
  fixed-point threshold solvers,
- the incremental-AMP optimizer driven by a control field,
- belief propagation on pairwise graphical models.
"""

from . import amp, bp, ensembles, hamiltonian, iamp, parisi, spiked
from .errors import (
    DivergedError,
    InvalidInputError,
    NumericError,
    ResourceLimitError,
    SpinGlassError,
)

__version__ = "0.1.0"

__all__ = [
    "amp",
    "bp",
    "ensembles",
    "hamiltonian",
    "iamp",
    "parisi",
    "spiked",
    "SpinGlassError",
    "InvalidInputError",
    "ResourceLimitError",
    "NumericError",
    "DivergedError",
    "__version__",
]
