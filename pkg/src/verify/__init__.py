"""ε-certificates, set-value sampling and the Markov regression test."""

from .certificate import (
    ConstantPrice,
    EpsilonCertificate,
    FilterPrice,
    PathPrice,
    certify,
    certify_solution,
    setvalue_probe,
)
from .markov import MarkovReport, markov_test, toy_sg_paths

__all__ = [
    "ConstantPrice",
    "EpsilonCertificate",
    "FilterPrice",
    "MarkovReport",
    "PathPrice",
    "certify",
    "certify_solution",
    "markov_test",
    "setvalue_probe",
    "toy_sg_paths",
]
