"""Robustness sanitizer for C11-style (RC20) atomics.

Programs in a small litmus DSL are run under sequential consistency with
location-clock instrumentation that flags executions whose behaviour could
differ under the weaker model.  A brute-force execution-graph oracle gives
ground truth for small programs.
"""

from .lang import parse

__all__ = ["parse"]
__version__ = "0.1.0"
