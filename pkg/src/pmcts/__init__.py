"""Prompt-based Monte Carlo Tree Search with visit-decayed exploration and
length-gated rollout policies."""

from .search import MctsConfig, SearchResult, SimulationPolicy, run_search
from .tree import SearchTree

__all__ = ["MctsConfig", "SearchResult", "SearchTree", "SimulationPolicy", "run_search"]
