"""Certificates, Carleman checks and exact characteristics for transport equations du/dt + H(t).grad u = 0."""

from .certificate import AdmissibilityCertificate, AdmissibilityError, build_certificate, combine_constants
from .field import VectorField, direction_persistence_time, reflect_extend
from .geometry import SpatialDomain

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityCertificate", "AdmissibilityError", "SpatialDomain", "VectorField", "build_certificate",
    "combine_constants", "direction_persistence_time", "reflect_extend",
]
