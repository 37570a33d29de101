"""Analysis and simulation of downlink rate in two-tier LoS/NLoS massive-MIMO networks."""

from .association import (
    AssociationReport,
    Branch,
    association_probabilities,
    conditional_moment,
    mean_loads,
    serving_distance_pdf,
    zeta1,
    zeta2,
)
from .channel import (
    LoSProfile,
    NetworkConfig,
    PropagationModel,
    Tier,
    biased_received_power,
    dbm_to_mw,
    derived_constants,
    los_probability,
    mw_to_dbm,
    paper_config,
    paper_model,
    path_loss,
)
from .errors import ConfigError, ConvergenceError, DegenerateBranchError

__version__ = "0.1.0"
