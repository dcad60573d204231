"""System-level RIS deployment simulator."""

from .scene import (BandConfig, BaseStation, BuildingPrism, CandidateSite, Point3, SceneMap,
                    SceneError, SceneValidationError, UESample, CBAND, MMWAVE, generate_manhattan,
                    load_scene, los_trace, ris_candidates, ue_grid)
from .propagation import (LinkBudget, RISUnit, SNRRecord, direct_link_dbm, fresnel_ratio, fspl_db,
                          noise_floor_dbm, ris_path_gain_db, snr_map, ue_snr)
from .deployment import (DeploymentResult, PlacementState, RISDeployment, coverage_fraction,
                         run_greedy, score_candidate, sweep_sizes)
from .metrics import (RateReport, SNRDistribution, ccdf_at, fresnel_distribution, percentile_snr,
                      rate_report, shannon_rate)

__version__ = "0.1.0"
