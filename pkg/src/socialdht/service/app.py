"""HTTP facade over the experiment runners.

Long runs are submitted as jobs and polled; results are JSON summaries
plus the per-replicate CSV/checkpoint files, downloadable verbatim so
clients get byte-identical artifacts.
"""

from __future__ import annotations

import os
import tempfile
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

import socialdht
from socialdht import kernels
from socialdht.datasets import (DatasetUnavailable, MANIFEST, canonical_name,
                                default_data_dir, fetch)
from socialdht.engine import GossipConfig
from socialdht.experiments import (ExperimentSpec, compare_schemes,
                                   metrics_from_checkpoint, run_experiment,
                                   run_ordering_comparison, run_q4_relabel)
from socialdht.service.jobs import JobStore
from socialdht.service.models import (DatasetStatus, EmbedRequest, FetchRequest,
                                      JobFileList, JobInfo, MetricsRequest,
                                      OrderingsRequest, RelabelRequest,
                                      SchemesRequest)


def _engine_config(req: EmbedRequest) -> GossipConfig:
    return GossipConfig(**req.engine.model_dump())


def _experiment_spec(req: EmbedRequest, workdir: Path,
                     data_dir: Optional[Path]) -> ExperimentSpec:
    return ExperimentSpec(
        dataset=req.dataset,
        config=_engine_config(req),
        k=req.k,
        replicates=req.replicates,
        seeds=req.seeds,
        outdir=workdir,
        metrics_every=req.metrics_every,
        data_dir=data_dir,
        allow_fetch=req.allow_fetch,
        allow_synthetic=req.allow_synthetic,
        save_checkpoints=req.save_checkpoints,
        latency_sample_cap=req.latency_sample_cap,
    )


def create_app(state_dir: Optional[Path] = None,
               data_dir: Optional[Path] = None,
               workers: int = 2) -> FastAPI:
    """Build the service; directories default to env/state conventions.

    ``state_dir`` (env SOCIALDHT_STATE, else a fresh temp dir) holds job
    working directories; ``data_dir`` follows the dataset module default.
    """
    if state_dir is None:
        env = os.environ.get("SOCIALDHT_STATE")
        state_dir = Path(env) if env else Path(tempfile.mkdtemp(prefix="socialdht-state-"))
    state_dir = Path(state_dir)
    data_dir = Path(data_dir) if data_dir is not None else default_data_dir()
    store = JobStore(state_dir / "jobs", workers=workers)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        store.shutdown()

    app = FastAPI(title="socialdht", version=socialdht.__version__,
                  lifespan=lifespan)
    app.state.store = store
    app.state.data_dir = data_dir

    @app.get("/health")
    def health():
        return {"status": "ok", "version": socialdht.__version__,
                "numba": kernels.USING_NUMBA}

    @app.get("/datasets", response_model=list[DatasetStatus])
    def datasets():
        out = []
        for info in MANIFEST.values():
            out.append(DatasetStatus(
                name=info.name, url=info.url, filename=info.filename,
                directed=info.directed, nodes=info.nodes,
                listed_edges=info.listed_edges,
                present=(data_dir / info.filename).exists(),
                synthetic_fallback=info.synthetic_fallback,
                synthetic_cached=(data_dir / f"{info.name}-synthetic.txt").exists(),
            ))
        return out

    @app.post("/datasets/fetch", response_model=DatasetStatus)
    def datasets_fetch(req: FetchRequest):
        name = canonical_name(req.name)
        info = MANIFEST.get(name)
        if info is None:
            raise HTTPException(404, f"unknown dataset {req.name!r}")
        try:
            fetch(name, data_dir=data_dir, force=req.force)
        except DatasetUnavailable as exc:
            raise HTTPException(502, str(exc))
        return DatasetStatus(
            name=info.name, url=info.url, filename=info.filename,
            directed=info.directed, nodes=info.nodes,
            listed_edges=info.listed_edges, present=True,
            synthetic_fallback=info.synthetic_fallback,
            synthetic_cached=(data_dir / f"{info.name}-synthetic.txt").exists(),
        )

    @app.post("/jobs/embed", response_model=JobInfo, status_code=202)
    def submit_embed(req: EmbedRequest):
        def runner(workdir, progress):
            return run_experiment(_experiment_spec(req, workdir, data_dir),
                                  progress=progress)
        return store.submit("embed", runner).info()

    @app.post("/jobs/orderings", response_model=JobInfo, status_code=202)
    def submit_orderings(req: OrderingsRequest):
        def runner(workdir, progress):
            return run_ordering_comparison(_experiment_spec(req, workdir, data_dir),
                                           progress=progress)
        return store.submit("orderings", runner).info()

    @app.post("/jobs/schemes", response_model=JobInfo, status_code=202)
    def submit_schemes(req: SchemesRequest):
        def runner(workdir, progress):
            return compare_schemes(_experiment_spec(req, workdir, data_dir),
                                   schemes=req.schemes, progress=progress)
        return store.submit("schemes", runner).info()

    @app.post("/jobs/relabel", response_model=JobInfo, status_code=202)
    def submit_relabel(req: RelabelRequest):
        def runner(workdir, progress):
            return run_q4_relabel(n=req.n, k=req.k, seeds=req.seeds,
                                  iterations=req.iterations, outdir=workdir,
                                  scheme=req.scheme,
                                  metrics_every=req.metrics_every,
                                  latency_sample_cap=req.latency_sample_cap,
                                  strength_modes=req.strength_modes,
                                  progress=progress)
        return store.submit("relabel", runner).info()

    @app.post("/jobs/metrics", response_model=JobInfo, status_code=202)
    def submit_metrics(req: MetricsRequest):
        checkpoint = Path(req.checkpoint)
        if not checkpoint.is_file():
            raise HTTPException(404, f"no such checkpoint {req.checkpoint!r}")

        def runner(workdir, progress):
            progress(0.0, "recomputing metrics")
            result = metrics_from_checkpoint(
                checkpoint, req.dataset, data_dir=data_dir,
                allow_fetch=req.allow_fetch,
                allow_synthetic=req.allow_synthetic,
                latency_sample_cap=req.latency_sample_cap)
            (workdir / "metrics.csv").write_text(result["csv"])
            return result
        return store.submit("metrics", runner).info()

    def _job_or_404(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(404, f"no such job {job_id!r}")
        return job

    @app.get("/jobs", response_model=list[JobInfo])
    def list_jobs():
        return [j.info() for j in store.list()]

    @app.get("/jobs/{job_id}", response_model=JobInfo)
    def job_status(job_id: str):
        return _job_or_404(job_id).info()

    @app.delete("/jobs/{job_id}", response_model=JobInfo)
    def cancel_job(job_id: str):
        job = store.cancel(job_id)
        if job is None:
            raise HTTPException(404, f"no such job {job_id!r}")
        return job.info()

    @app.get("/jobs/{job_id}/result")
    def job_result(job_id: str):
        job = _job_or_404(job_id)
        if job.status != "done":
            raise HTTPException(409, f"job {job_id} is {job.status}")
        return job.result

    @app.get("/jobs/{job_id}/files", response_model=JobFileList)
    def job_files(job_id: str):
        job = _job_or_404(job_id)
        return JobFileList(id=job.id, files=job.files())

    @app.get("/jobs/{job_id}/files/{name}", response_class=PlainTextResponse)
    def job_file(job_id: str, name: str):
        job = _job_or_404(job_id)
        if name not in job.files():
            raise HTTPException(404, f"job {job_id} has no file {name!r}")
        return (job.workdir / name).read_text()

    return app
