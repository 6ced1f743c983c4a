"""Support alignment: support divergences, relaxed 1D transport, and
adversarial alignment with history buffers."""

from .asa import AlignmentMode, HistoryBuffer, TrainConfig, alignment_loss, asa_step, run_training
from .supportdiv import IntervalUnion, hausdorff, sliced_ssd, ssd_continuous_mc, ssd_discrete
from .transport1d import (
    GroundMetric,
    brute_force_ot_1d,
    nn_assignment_1d,
    relaxed_ot_1d,
    symmetric_relaxed_cost,
    wasserstein1_1d,
)

__version__ = "0.1.0"
