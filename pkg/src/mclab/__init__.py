"""mclab: a desk-scale Monte Carlo laboratory for multiple-interface
scaling limits.

Subpackages follow the pipeline: exact kernels (``special_fn``), scalar
partition functions (``partition``), driving-function SDEs (``sde``),
radial Loewner chains (``loewner``), lattice experiments (``ising_mc``),
and the experiment runner (``harness``).
"""

from ._backend import BACKEND, backend_name

__all__ = ["BACKEND", "backend_name"]
__version__ = "0.1.0"
