"""Complete samplers assembled from the acceptance and integration atoms.

Each sampler module exposes ``init(position, target, ...)``, a
``build_kernel(...)`` constructor returning a pure transition function
``kernel(key, state, target)``, and an ``as_algorithm(target, ...)``
convenience that packages both behind the library-wide init/step protocol.
"""

from . import ghmc, hmc, mala, nuts, rwm

__all__ = ["rwm", "mala", "hmc", "ghmc", "nuts"]
