"""Artifact persistence: CSV/JSON writers, run manifests, solution archives and reports."""

from .artifacts import RunManifest, default_output_root, read_json, write_csv, write_json

__all__ = [
    "RunManifest",
    "default_output_root",
    "read_json",
    "write_csv",
    "write_json",
]
