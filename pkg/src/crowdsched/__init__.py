"""Conflict-graph scheduling of UAVs, workers and charging vehicles."""

from .graph import GraphNode, WeightedGraph, build_graph, has_conflict
from .ils import IlsParams, Solution, solve_ils
from .model import Action, Scenario, load_scenario, save_scenario
from .mpq import MpqParams, solve_mpq
from .scenario_gen import RANDOM_1, GenParams, generate
from .sim import EpisodeResult, InvariantViolation, run_episode

__all__ = [
    "Action", "EpisodeResult", "GenParams", "GraphNode", "IlsParams", "InvariantViolation",
    "MpqParams", "RANDOM_1", "Scenario", "Solution", "WeightedGraph", "build_graph", "generate",
    "has_conflict", "load_scenario", "run_episode", "save_scenario", "solve_ils", "solve_mpq",
]
