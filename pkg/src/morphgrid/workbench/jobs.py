"""In-process job store with content-hash caching and bounded parallelism.

A job's identity is the hash of its kind, parameters, and the content hashes
of every file it reads.  Submitting the same work twice returns the first
record — queued, running, or finished — so identical requests never compute
twice within a service lifetime.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

JOB_FORMAT_VERSION = 1
JOB_KINDS = ("ingest", "calibrate", "shoot", "simulate", "measure", "report")
LOG_EXCERPT_CHARS = 2000


def content_hash(kind: str, params: Mapping, file_hashes: Mapping[str, str]) -> str:
    payload = json.dumps(
        {"kind": kind, "params": params, "files": dict(sorted(file_hashes.items()))},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class JobRecord:
    id: str
    kind: str
    inputs_hash: str
    params: dict
    status: str = "queued"  # queued -> running -> done | failed
    outputs: dict = field(default_factory=dict)
    log: str = ""
    created_at: float = field(default_factory=time.time)
    finished_at: float | None = None

    def to_dict(self) -> dict:
        return {
            "format_version": JOB_FORMAT_VERSION,
            "kind": "job_record",
            "id": self.id,
            "job": {
                "kind": self.kind,
                "status": self.status,
                "inputs_hash": self.inputs_hash,
                "params": self.params,
                "outputs": self.outputs,
                "log": self.log[-LOG_EXCERPT_CHARS:],
            },
        }


class JobStore:
    """Run jobs on a bounded pool, dedup by input hash."""

    def __init__(self, runner: Callable[[JobRecord], dict], max_workers: int = 2):
        self._runner = runner
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._lock = threading.Lock()
        self._by_id: dict[str, JobRecord] = {}
        self._by_hash: dict[str, str] = {}

    def submit(self, kind: str, params: dict, inputs_hash: str) -> JobRecord:
        if kind not in JOB_KINDS:
            raise ValueError(f"unknown job kind {kind!r}")
        with self._lock:
            existing = self._by_hash.get(inputs_hash)
            if existing is not None:
                return self._by_id[existing]
            job_id = inputs_hash[:12]
            record = JobRecord(id=job_id, kind=kind, inputs_hash=inputs_hash,
                               params=dict(params))
            self._by_id[job_id] = record
            self._by_hash[inputs_hash] = job_id
        self._executor.submit(self._run, record)
        return record

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._by_id.get(job_id)

    def _run(self, record: JobRecord) -> None:
        with self._lock:
            record.status = "running"
        try:
            outputs = self._runner(record)
        except Exception:
            with self._lock:
                record.status = "failed"
                record.log = traceback.format_exc()
                record.finished_at = time.time()
            return
        with self._lock:
            record.status = "done"
            record.outputs = outputs
            record.finished_at = time.time()

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)
