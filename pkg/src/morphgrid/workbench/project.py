"""Project directory: the only persistence layer.

A project is a directory with a manifest and one subdirectory per document
category.  Documents are addressed by category and name; writes validate the
document, are serialized under a lock, and use content-hash ETags for
optimistic concurrency.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from ..errors import InvalidDocument
from ..grid import BendingUnitSpec, design_from_dict
from ..materials import card_from_dict

PROJECT_FORMAT_VERSION = 1

CATEGORIES = {
    "materials": ".matcard.json",
    "designs": ".grid.json",
    "observations": ".obs.csv",
    "measurements": ".csv",
}


class VersionConflict(Exception):
    """ETag precondition failed on a concurrent write."""


def _etag(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def validate_document(category: str, data: bytes) -> None:
    """Category-specific validation; raises InvalidDocument on failure."""
    if category in ("materials", "designs"):
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InvalidDocument(f"invalid JSON: {exc}") from exc
        if category == "materials":
            card_from_dict(doc)
            return
        design, materials = design_from_dict(doc)
        for m in design.members:
            names = (
                (m.spec.actuator_material, m.spec.constraint_material)
                if isinstance(m.spec, BendingUnitSpec) else (m.spec.material,)
            )
            for name in names:
                if name not in materials:
                    raise InvalidDocument(
                        f"member {m.id!r} references material {name!r} "
                        f"missing from the materials map"
                    )
    # CSV categories are validated when consumed by their pipeline step.


class Project:
    """Manifest-backed document store rooted at a directory."""

    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()

    @classmethod
    def open(cls, root, create: bool = True) -> "Project":
        project = cls(root)
        manifest = project.root / "manifest.json"
        if not manifest.exists():
            if not create:
                raise FileNotFoundError(f"{manifest} does not exist")
            project.root.mkdir(parents=True, exist_ok=True)
            for category in CATEGORIES:
                (project.root / category).mkdir(exist_ok=True)
            (project.root / "results").mkdir(exist_ok=True)
            project._write_manifest({category: {} for category in CATEGORIES})
        return project

    def _manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _read_manifest(self) -> dict:
        with open(self._manifest_path(), encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("kind") != "project_manifest" \
                or doc.get("format_version") != PROJECT_FORMAT_VERSION:
            raise InvalidDocument(f"{self._manifest_path()}: not a supported manifest")
        return doc

    def _write_manifest(self, entries: dict) -> None:
        doc = {
            "format_version": PROJECT_FORMAT_VERSION,
            "kind": "project_manifest",
            **{category: dict(sorted(entries.get(category, {}).items()))
               for category in CATEGORIES},
        }
        with open(self._manifest_path(), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")

    def list_documents(self, category: str) -> list[str]:
        if category not in CATEGORIES:
            raise KeyError(category)
        return sorted(self._read_manifest()[category])

    def document_path(self, category: str, name: str) -> Path:
        if category not in CATEGORIES:
            raise KeyError(category)
        entries = self._read_manifest()[category]
        if name not in entries:
            raise FileNotFoundError(f"{category}/{name}")
        return self.root / entries[name]

    def get_document(self, category: str, name: str) -> tuple[bytes, str]:
        """Document bytes and their content-hash ETag."""
        data = self.document_path(category, name).read_bytes()
        return data, _etag(data)

    def put_document(self, category: str, name: str, data: bytes,
                     expected_etag: str | None = None) -> str:
        """Validate and store a document; returns the new ETag.

        Raises VersionConflict when ``expected_etag`` no longer matches the
        stored content, InvalidDocument when validation fails.
        """
        if category not in CATEGORIES:
            raise KeyError(category)
        if not name or "/" in name or name.startswith("."):
            raise InvalidDocument(f"invalid document name {name!r}")
        validate_document(category, data)
        with self._lock:
            entries = self._read_manifest()
            existing = entries[category].get(name)
            if expected_etag is not None:
                current = None
                if existing is not None:
                    current = _etag((self.root / existing).read_bytes())
                if current != expected_etag:
                    raise VersionConflict(
                        f"{category}/{name}: expected {expected_etag}, have {current}"
                    )
            rel = f"{category}/{name}{CATEGORIES[category]}"
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            entries[category][name] = rel
            self._write_manifest(entries)
        return _etag(data)

    def results_dir(self, job_id: str) -> Path:
        return self.root / "results" / job_id

    def validate_manifest(self) -> list[str]:
        """Names of manifest entries whose files are missing."""
        entries = self._read_manifest()
        missing = []
        for category in CATEGORIES:
            for name, rel in entries[category].items():
                if not (self.root / rel).exists():
                    missing.append(f"{category}/{name}")
        return missing
