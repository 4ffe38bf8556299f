"""Bohmian trajectories in 1+1 dimensions with and without a preferred foliation.

Submodules:

- :mod:`nolawbohm.nr`: non-relativistic guiding equation and equivariance test.
- :mod:`nolawbohm.dirac`: multi-time Dirac wave functions, currents and Poincare maps.
- :mod:`nolawbohm.foliation`: spacelike leaves and foliations.
- :mod:`nolawbohm.hbd`: hypersurface Bohm-Dirac integration and covariance checks.
- :mod:`nolawbohm.ensemble`: equilibrium ensembles on leaves and their transport.
- :mod:`nolawbohm.events` and :mod:`nolawbohm.nolaw`: foliation-free events and P*.
- :mod:`nolawbohm.cli`: the ``nolawbohm`` batch command.
"""

from ._validation import (
    DegenerateStepError,
    DomainError,
    EnvelopeError,
    FailureBudgetError,
    NodeProximityError,
    PhysicsError,
)
from .dirac import (
    DiracPacket,
    MultiTimeWaveFunction,
    PoincareTransform,
    apply_poincare,
    density_and_currents,
    normalization,
    rho_sigma,
)
from .ensemble import cross_foliation_test, equivariance_rel, estimate_event_prob, run_ensemble, sample_on_leaf
from .estimators import BohmianEnsemble, LowerProbability
from .events import FALSE, TRUE, Region, event_from_dict
from .foliation import CurvedFoliation, DeformedFoliation, FlatFoliation, FlatLeaf, GraphLeaf, SinShape, TanhShape
from .hbd import covariance_check, integrate_batch, integrate_hbd, overlap_check
from .nolaw import (
    FoliationFamily,
    check_capacity_properties,
    covariance_p_star,
    default_family,
    is_typical,
    p_mu,
    p_star,
    p_star_prime,
)
from .nr import GaussianPacket, GaussianWaveFunction, GridWaveFunction, nr_equivariance, nr_integrate

__version__ = "0.1.0"

__all__ = [
    "BohmianEnsemble",
    "CurvedFoliation",
    "DeformedFoliation",
    "DegenerateStepError",
    "DiracPacket",
    "DomainError",
    "EnvelopeError",
    "FALSE",
    "FailureBudgetError",
    "FlatFoliation",
    "FlatLeaf",
    "FoliationFamily",
    "GaussianPacket",
    "GaussianWaveFunction",
    "GraphLeaf",
    "GridWaveFunction",
    "LowerProbability",
    "MultiTimeWaveFunction",
    "NodeProximityError",
    "PhysicsError",
    "PoincareTransform",
    "Region",
    "SinShape",
    "TRUE",
    "TanhShape",
    "apply_poincare",
    "check_capacity_properties",
    "covariance_check",
    "covariance_p_star",
    "cross_foliation_test",
    "default_family",
    "density_and_currents",
    "equivariance_rel",
    "estimate_event_prob",
    "event_from_dict",
    "integrate_batch",
    "integrate_hbd",
    "is_typical",
    "normalization",
    "nr_equivariance",
    "nr_integrate",
    "overlap_check",
    "p_mu",
    "p_star",
    "p_star_prime",
    "rho_sigma",
    "run_ensemble",
    "sample_on_leaf",
]
