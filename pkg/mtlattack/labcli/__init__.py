# -----------------------------------------------------------------------------
# File: __init__.py
# Description: The experiment runner: grid execution, subcommands, tables,
#              plots and the command line.
#
# License: MIT
# -----------------------------------------------------------------------------

from .grid_runner import GridCell, GridRunner, RecordStore, load_records
from .commands import (
    COMMANDS, RunContext, cmd_advtrain, cmd_attack, cmd_diagnose, cmd_report, cmd_sweep, cmd_train,
)
