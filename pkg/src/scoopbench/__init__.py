"""Semantics workbench for a mini SCOOP-style concurrent language.

Compiles programs to control-flow graphs, explores their state spaces
under two pluggable execution models (request queues and queues of
queues), detects deadlocks and property violations, and reports
discrepancies between the two semantics.
"""

from scoopbench.lang import parse, validate
from scoopbench.cfg import build_cfg, export_cfg_dot
from scoopbench.runtime import initial_configuration, canonical_key, is_terminal
from scoopbench.execmodel import get_model
from scoopbench.scheduler import local_fixpoint, successors
from scoopbench.explorer import explore, extract_trace

__all__ = [
    "parse",
    "validate",
    "build_cfg",
    "export_cfg_dot",
    "initial_configuration",
    "canonical_key",
    "is_terminal",
    "get_model",
    "local_fixpoint",
    "successors",
    "explore",
    "extract_trace",
]

__version__ = "0.1.0"
