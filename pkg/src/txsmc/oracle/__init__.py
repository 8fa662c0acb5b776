"""Independent ground truth for the explorer."""

from .axiomatic import GuardExceeded, enumerate_executions, enumerate_weak_traces

__all__ = ["GuardExceeded", "enumerate_executions", "enumerate_weak_traces"]
