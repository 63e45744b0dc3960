"""Decompositions of maximum-entropy laws and sum-capacity bounds for the
two-user optical intensity multiple-access channel.

Modules:
    dists     scalar distributions with closed-form CF, mean and entropy
    maxent    truncated exponential / geometric moments
    numerics  root finding, 1-D maximisation, certified series sums
    decomp    constructive decompositions and their certificates
    capacity  single-user and MAC capacity bounds, sweeps and audits
    cli       the ``oimac`` command

All information quantities are in nats.
"""
from . import capacity, decomp, dists, maxent, numerics
from .capacity import ChannelConfig, Family, snr_to_sigma, sweep
from .decomp import verify_split
from .dists import from_dict

__version__ = "0.1.0"

__all__ = ["capacity", "decomp", "dists", "maxent", "numerics", "ChannelConfig", "Family",
           "snr_to_sigma", "sweep", "verify_split", "from_dict", "__version__"]
