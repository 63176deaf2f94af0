"""Maximal common functions and zero-discussion secret key capacity for finite linear sources."""

from .gf_linalg import (FieldMatrix, FieldSpec, Infeasible, Subspace, column_space, join, meet,
                        null_space, parse_matrix, rank, rref, solve_factor)
from .linear_source import (CapacityReport, LinearSourceSpec, McfResult, bivariate_identities,
                            capacity, export_discrete, hypergraphical, load_spec, mcf,
                            subset_entropy)
from .discrete_source import (DiscreteSource, McfLabeling, Partition, capacity_oracle, entropy,
                              ergodic_decomposition, multivariate_mi, mutual_information,
                              verify_double_markov)
from .keygen_sim import ExtractorPlan, SimReport, build_extractor, simulate

__version__ = "0.1.0"

__all__ = [
    "CapacityReport", "DiscreteSource", "ExtractorPlan", "FieldMatrix", "FieldSpec", "Infeasible",
    "LinearSourceSpec", "McfLabeling", "McfResult", "Partition", "SimReport", "Subspace",
    "bivariate_identities", "build_extractor", "capacity", "capacity_oracle", "column_space",
    "entropy", "ergodic_decomposition", "export_discrete", "hypergraphical", "join", "load_spec",
    "mcf", "meet", "multivariate_mi", "mutual_information", "null_space", "parse_matrix", "rank",
    "rref", "simulate", "solve_factor", "subset_entropy", "verify_double_markov",
]
