"""Composable building blocks for Bayesian inference.

The library is a kit of small statistical atoms (acceptance rules,
a symplectic integrator, resamplers, step-size and metric adaptation)
assembled into complete algorithms: Metropolis samplers, Hamiltonian
samplers with dynamic trajectories, tempered sequential Monte Carlo,
stochastic-gradient samplers, and mean-field variational inference.

Everything follows one protocol: algorithms are pairs of pure functions,
``init(position)`` and ``step(key, state) -> (state, info)``, with
randomness supplied through explicit splittable keys.  The same inputs
always reproduce the same outputs, bit for bit, which makes runs
replayable and chains safe to execute concurrently.

Top-level factories (:func:`rwm`, :func:`mala`, :func:`hmc`, :func:`ghmc`,
:func:`nuts`, :func:`sgld`, :func:`sghmc`, :func:`meanfield_vi`) bind a
target and hyperparameters; the per-module ``build_kernel`` constructors
expose the same transitions with every argument explicit.
"""

from . import adaptation, core, diagnostics, integrator, mcmc, proposal, rng, sgmcmc, smc, targets, vi
from .adaptation import build_schedule, find_reasonable_step_size, window_adaptation
from .core import ApproxAlgorithm, ChainError, SamplingAlgorithm, Target, run_chain
from .diagnostics import effective_sample_size, split_rhat, summarize
from .integrator import dense_metric, diagonal_metric, identity_metric, leapfrog, trajectory
from .mcmc.ghmc import as_algorithm as ghmc
from .mcmc.hmc import as_algorithm as hmc
from .mcmc.mala import as_algorithm as mala
from .mcmc.nuts import as_algorithm as nuts
from .mcmc.rwm import as_algorithm as rwm
from .rng import RngKey, fold_in, make_key, normal_vector, split_key, uniform, uniform_vector
from .sgmcmc import make_gradient_estimator
from .sgmcmc import sghmc_algorithm as sghmc
from .sgmcmc import sgld_algorithm as sgld
from .smc import run_tempered_smc, smc_step
from .vi import adam, meanfield_vi, sgd

__all__ = [
    "__version__",
    "adaptation",
    "core",
    "diagnostics",
    "integrator",
    "mcmc",
    "proposal",
    "rng",
    "sgmcmc",
    "smc",
    "targets",
    "vi",
    "ApproxAlgorithm",
    "ChainError",
    "RngKey",
    "SamplingAlgorithm",
    "Target",
    "adam",
    "build_schedule",
    "dense_metric",
    "diagonal_metric",
    "effective_sample_size",
    "find_reasonable_step_size",
    "fold_in",
    "ghmc",
    "hmc",
    "identity_metric",
    "leapfrog",
    "make_gradient_estimator",
    "make_key",
    "mala",
    "meanfield_vi",
    "normal_vector",
    "nuts",
    "run_chain",
    "run_tempered_smc",
    "rwm",
    "sgd",
    "sghmc",
    "sgld",
    "smc_step",
    "split_key",
    "split_rhat",
    "summarize",
    "trajectory",
    "uniform",
    "uniform_vector",
    "window_adaptation",
]

__version__ = "0.1.0"
