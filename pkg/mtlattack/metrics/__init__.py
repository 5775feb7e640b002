# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Relative performance metrics of multi-task attacks.
#
# License: MIT
# -----------------------------------------------------------------------------

from .metric_snapshot import MetricSnapshot, MetricValue
from .relative_metrics import (
    ArpResult, TransferabilityReport, ara, arp, clamp_unit, rank_correlation, relative_loss_change,
    transferability,
)
