# -----------------------------------------------------------------------------
# File: version.py
# Description: Single source of truth for the package version metadata.
#
# License: MIT
# -----------------------------------------------------------------------------

__version__ = "0.3.0"
