"""Project persistence, pipeline orchestration, CLI, and the local HTTP API."""

from .project import Project, VersionConflict  # noqa: F401
from .jobs import JobRecord, JobStore, content_hash  # noqa: F401
