"""Entanglement gain from photon subtraction on two-mode squeezed vacuum.

The heralded state's partial transpose is block diagonal in the total
kept photon number; :mod:`~subtract_sim.blocks` builds those blocks,
:mod:`~subtract_sim.entanglement` turns them into log-negativity, gain and
rate, :mod:`~subtract_sim.analytic` provides closed forms for the cases
that have them and :mod:`~subtract_sim.oracle` a brute-force Fock-space
reference. :mod:`~subtract_sim.optimize` searches the rate over squeezing
and tap settings.
"""
from .analytic import (apd_probabilities, empirical_fit_alpha_opt, empirical_fit_lossy,
                       lossless_asymmetric, lossless_symmetric, lossy_symmetric,
                       pnrd_probability)
from .blocks import BlockSet, assemble, coefficient, reduce_asymmetric
from .entanglement import (Metrics, antidiagonal_log_negativity, log_negativity, metrics,
                           tmss_log_negativity)
from .errors import (ConfigError, DomainError, ImpossibleEventError, PrecisionWarning,
                     ResourceError, SubtractSimError, UnsupportedStructureError)
from .evaluate import evaluate
from .model import (ArmTransmissivities, Config, ModeParams, Strategy, TruncationPolicy,
                    build_arm_unitary, mode_coefficients)
from .optimize import (OptimizationResult, loss_threshold, maximize_rate, max_gain,
                       strategy_frontier)
from .oracle import conditioned_density, expand_state, oracle_evaluate, oracle_metrics

__version__ = "0.1.0"
