"""Background job execution for the service.

Jobs run on a small thread pool; each gets its own working directory for
output files.  Cancellation is cooperative: the runner's progress
callback raises once the job's cancel flag is set, and the experiment
layer's cleanup-on-failure then removes partial output.
"""

from __future__ import annotations

import threading
import time
import traceback
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional


class JobCancelled(Exception):
    pass


# runner(workdir, progress) -> result dict
Runner = Callable[[Path, Callable[[float, str], None]], dict]


@dataclass
class Job:
    id: str
    kind: str
    workdir: Path
    status: str = "queued"
    progress: float = 0.0
    message: str = ""
    error: Optional[str] = None
    created: float = field(default_factory=time.time)
    started: Optional[float] = None
    finished: Optional[float] = None
    result: Optional[dict] = None
    cancel_event: threading.Event = field(default_factory=threading.Event, repr=False)
    future: Optional[Future] = field(default=None, repr=False)

    def info(self) -> dict:
        return {"id": self.id, "kind": self.kind, "status": self.status,
                "progress": round(self.progress, 4), "message": self.message,
                "error": self.error, "created": self.created,
                "started": self.started, "finished": self.finished}

    def files(self) -> list[str]:
        if not self.workdir.is_dir():
            return []
        return sorted(p.name for p in self.workdir.iterdir() if p.is_file())


class JobStore:
    """Thread-safe registry running jobs on a bounded executor."""

    def __init__(self, root: Path, workers: int = 2):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers,
                                        thread_name_prefix="socialdht-job")

    def submit(self, kind: str, runner: Runner) -> Job:
        job_id = uuid.uuid4().hex[:12]
        job = Job(id=job_id, kind=kind, workdir=self.root / job_id)
        job.workdir.mkdir(parents=True, exist_ok=True)
        with self._lock:
            self._jobs[job_id] = job
        job.future = self._pool.submit(self._execute, job, runner)
        return job

    def _execute(self, job: Job, runner: Runner) -> None:
        job.status = "running"
        job.started = time.time()

        def progress(frac: float, message: str) -> None:
            if job.cancel_event.is_set():
                raise JobCancelled(job.id)
            job.progress = min(1.0, max(0.0, float(frac)))
            job.message = message

        try:
            if job.cancel_event.is_set():
                raise JobCancelled(job.id)
            job.result = runner(job.workdir, progress)
            job.status = "done"
            job.progress = 1.0
        except JobCancelled:
            job.status = "cancelled"
        except Exception as exc:
            job.status = "failed"
            job.error = f"{type(exc).__name__}: {exc}"
            job.message = traceback.format_exc(limit=3)
        finally:
            job.finished = time.time()

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self._jobs.get(job_id)

    def list(self) -> list[Job]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.created)

    def cancel(self, job_id: str) -> Optional[Job]:
        job = self.get(job_id)
        if job is None:
            return None
        job.cancel_event.set()
        if job.status == "queued" and job.future is not None and job.future.cancel():
            job.status = "cancelled"
            job.finished = time.time()
        return job

    def shutdown(self) -> None:
        for job in self.list():
            job.cancel_event.set()
        self._pool.shutdown(wait=False, cancel_futures=True)
