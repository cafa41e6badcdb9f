"""Constraint-aware differentially private tabular data synthesis."""

from .accounting import (
    BudgetReport,
    PrivacyConfig,
    RdpCurve,
    SearchRanges,
    gaussian_rdp,
    search_parameters,
    sgm_rdp,
    to_eps_delta,
    total_rdp,
)
from .constraints import DenialConstraint, Predicate, ViolationSet, load_dcs, parse_dc
from .data import (
    AttributeSpec,
    Dataset,
    RandomSource,
    Schema,
    categorical,
    load_dataset,
    load_schema,
    numerical,
    quantize,
    save_dataset,
    save_schema,
    unquantize,
)
from .sequencing import SchemaSequence, apply_domain_optimizations, sequence

__all__ = [
    "AttributeSpec",
    "BudgetReport",
    "Dataset",
    "DenialConstraint",
    "Predicate",
    "PrivacyConfig",
    "RandomSource",
    "RdpCurve",
    "Schema",
    "SchemaSequence",
    "SearchRanges",
    "ViolationSet",
    "apply_domain_optimizations",
    "categorical",
    "gaussian_rdp",
    "load_dataset",
    "load_dcs",
    "load_schema",
    "numerical",
    "parse_dc",
    "quantize",
    "save_dataset",
    "save_schema",
    "search_parameters",
    "sequence",
    "sgm_rdp",
    "to_eps_delta",
    "total_rdp",
    "unquantize",
]

__version__ = "0.1.0"
