"""Bundled example data: the credit-card fraud network and the college-plans table."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .core import DataSet, NetworkStructure, ParameterSet
from .io import load_csv, load_network, read_counts_file


def data_path(name: str) -> Path:
    """Filesystem path of a bundled data file."""
    return Path(str(resources.files("bdnet") / "data" / name))


def fraud_prior_network() -> ParameterSet:
    """Fraud/Gas/Jewelry/Age/Sex network with its hand-assessed CPTs."""
    return load_network(data_path("fraud_prior.json")).params


def fraud_structures() -> tuple[NetworkStructure, NetworkStructure]:
    """S1 (the prior network's structure) and S2 (S1 plus Age -> Gas)."""
    return (
        load_network(data_path("fraud_s1.json")).structure,
        load_network(data_path("fraud_s2.json")).structure,
    )


def fraud_data() -> DataSet:
    """The ten imagined fraud cases."""
    return load_csv(data_path("fraud.csv"), fraud_prior_network().structure.variables)


def sewell_shah() -> DataSet:
    """10,318 cases over SEX, SES, IQ, PE and CP, expanded from the count table."""
    return read_counts_file(data_path("sewell_shah.tab"))
