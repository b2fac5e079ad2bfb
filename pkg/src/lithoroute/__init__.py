"""Confidence-routed lithology classification.

A lightweight base classifier labels every depth; low-confidence depths are
escalated to a panel of reasoning personas fed with tool-built evidence, and
the merged result is refined for stratigraphic continuity.
"""

__version__ = "0.1.0"
