"""Nonequilibrium single-qubit thermometry of an Ohmic bosonic bath.

A qubit probe couples to the bath through (1-alpha)*sigma_z + alpha*sigma_x,
interpolating between pure dephasing and pure dissipation.  The package
integrates the resulting generalized Bloch equations with time-dependent
bath kernels, quantifies information backflow through re-coherence, and
computes the quantum/classical Fisher information of temperature estimates.
"""

from .spectral import SpectralDensity, thermal_factor
from .kernels import (
    KERNEL_NAMES,
    KernelParams,
    KernelSet,
    QuadratureConfig,
    decoherence_exponent,
    kernel_F,
    kernel_G,
    kernel_K,
    kernel_L,
    kernel_R,
    kernel_X,
    kernels_at,
    precompute,
    rebuild_for_temperature,
)
from .dynamics import BlochState, ProbeConfig, Trajectory, dephasing_oracle, integrate, rhs
from .witness import WitnessReport, coherence, non_markovianity, steady_coherence
from .metrology import (
    MetrologyResult,
    StencilConfig,
    cfi,
    d_bloch_dT,
    five_point_derivative,
    markov_comparator,
    qcrb,
    qfi,
)
from .errors import (
    ConfigurationError,
    DomainError,
    IntegrationError,
    NumericError,
    QuadratureError,
)

__version__ = "0.1.0"
