"""Validation of run manifests and certificates against the published schemas."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping

import jsonschema

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "schemas"


@lru_cache()
def _load_schema(name: str) -> dict[str, Any]:
    """Load and cache a JSON schema from ``schemas/``."""

    schema_path = SCHEMA_DIR / name
    with schema_path.open(encoding="utf-8") as handle:
        return json.load(handle)


def _validate(payload: Mapping[str, Any], name: str) -> None:
    validator = jsonschema.Draft202012Validator(_load_schema(name))
    validator.validate(dict(payload))


def validate_run_manifest(manifest: Mapping[str, Any]) -> None:
    """Raise :class:`jsonschema.ValidationError` if ``manifest`` is malformed."""

    _validate(manifest, "run_manifest.schema.json")


def validate_certificate(certificate: Mapping[str, Any]) -> None:
    """Raise :class:`jsonschema.ValidationError` if ``certificate`` is malformed."""

    _validate(certificate, "certificate.schema.json")


__all__ = ["SCHEMA_DIR", "validate_certificate", "validate_run_manifest"]
