"""Stateless model checking of transactional programs under causal consistency."""

from .dpor import ExplorationReport, ExploreConfig, explore
from .models import Model
from .prog import parse_file, parse_program

__all__ = ["ExplorationReport", "ExploreConfig", "Model", "explore", "parse_file", "parse_program"]
__version__ = "0.1.0"
