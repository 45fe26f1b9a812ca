"""
geoclt

Exact counting, uniform sampling and central limit experiments for closed
geodesics of free groups acting on the hyperbolic plane.
"""

__version__ = "1.0.0"
__author__ = "geoclt developers"

from .coding_graph import (
    CodingGraph, ConjugacyClass, GraphPath, GroupWord, build_free_group_graph,
    count_primitive_cycles, enumerate_cycles, load_graph, trace_power
)
from .parry_markov import (
    ParryChain, SeededRng, UniformCycleSampler, build_parry_chain, perron_frobenius,
    sample_path, sample_uniform_cycle
)
from .hyperbolic import (
    FuchsianRep, HPoint, MoebiusMatrix, load_representation, pair_of_pants_rep,
    schottky_from_matrices
)
from .experiments import run_clt, ks_statistic
from .reporter import Reporter
from .cli import main

__all__ = [
    "CodingGraph", "ConjugacyClass", "GraphPath", "GroupWord", "build_free_group_graph",
    "count_primitive_cycles", "enumerate_cycles", "load_graph", "trace_power",
    "ParryChain", "SeededRng", "UniformCycleSampler", "build_parry_chain", "perron_frobenius",
    "sample_path", "sample_uniform_cycle",
    "FuchsianRep", "HPoint", "MoebiusMatrix", "load_representation", "pair_of_pants_rep",
    "schottky_from_matrices",
    "run_clt", "ks_statistic", "Reporter", "main",
]
