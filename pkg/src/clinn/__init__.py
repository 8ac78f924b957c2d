"""Training workbench for conservation-law-informed networks.

Submodules: `problems` (benchmark cases and collocation grids), `oracle`
(closed-form reference solutions), `network` (residual tanh nets),
`diffengine` (reverse-mode tape with dual-number forward sweeps), `loss`
(the six-term composite objective), `indicator` / `shockgeom`
(discontinuity detection and jump geometry), `trainer` (Adam loop with
adaptive refinement), `evalreport` (metrics and plots), `cli` and
`harness` (command line and experiment matrix).
"""

# cli and harness are import-on-use so `python3 -m clinn.cli` stays clean
from . import (diffengine, evalreport, indicator, loss, network,
               oracle, problems, shockgeom, trainer)
from .evalreport import MetricsRecord, improvement_ratio, mse
from .loss import LossContext, LossWeights, preset_weights
from .network import Architecture
from .problems import CASE_IDS, get_problem, sample_grid
from .trainer import RarSchedule, train

__version__ = "0.1.0"

__all__ = [
    "Architecture", "CASE_IDS", "LossContext", "LossWeights",
    "MetricsRecord", "RarSchedule", "diffengine", "evalreport",
    "get_problem", "improvement_ratio", "indicator", "loss", "mse",
    "network", "oracle", "preset_weights", "problems", "sample_grid",
    "shockgeom", "train", "trainer",
]
