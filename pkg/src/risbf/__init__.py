"""RIS-aided mmWave downlink: joint hybrid beamforming and RIS phase design.

Transmit power minimization under per-user SINR constraints via a
two-layer penalty method with Riemannian manifold optimization, plus a
low-complexity sequential design (max-min RIS phases, OMP analog
beamforming, duality-based digital power control) and a seeded Monte
Carlo experiment harness.
"""

from ._kernels import active_backend
from .channel import (
    ArrayGeometry,
    ChannelSet,
    ClusterSpec,
    PathLossModel,
    generate_scenario,
    path_loss_db,
    sample_cluster_channel,
    upa_response,
)
from .individual import individual_solve, ris_max_min
from .manifold import QuadraticUnitModulusObjective, RcgOptions, rcg_minimize
from .penalty import PenaltyState, solve
from .system import BeamformingSolution, SystemConfig, all_sinrs, transmit_power

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "BeamformingSolution",
    "ChannelSet",
    "ClusterSpec",
    "PathLossModel",
    "PenaltyState",
    "QuadraticUnitModulusObjective",
    "RcgOptions",
    "SystemConfig",
    "active_backend",
    "all_sinrs",
    "generate_scenario",
    "individual_solve",
    "path_loss_db",
    "rcg_minimize",
    "ris_max_min",
    "sample_cluster_channel",
    "solve",
    "transmit_power",
    "upa_response",
]
