"""Command line front end.

Every experiment subcommand is a thin client of the HTTP service: it
submits a job, polls until completion, downloads the produced files, and
prints the JSON summary to stdout.  Without ``--server`` an embedded
server is started in-process for the duration of the call, so the CLI
works standalone while exercising the exact same code path.

Progress goes to stderr; stdout carries only machine-readable output.
"""

from __future__ import annotations

import json
import sys
import threading
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import click
import httpx
from click.core import ParameterSource

SCHEMES = ("random", "direct", "greedy", "smart")
METRICS = ("ring_distance", "hop_count")
ORDERINGS = ("random", "ascending", "descending")
STRENGTHS = ("common_neighbors", "id_distance")


def eprint(*args) -> None:
    print(*args, file=sys.stderr, flush=True)


# --------------------------------------------------------------------------
# config file: plain "key = value" lines, # comments, keys match flag names


def _load_config(path: Path) -> dict[str, str]:
    cfg = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _apply_config(ctx: click.Context, values: dict) -> dict:
    """Fill defaults from --config; explicit flags always win."""
    path = values.pop("config", None)
    if not path:
        return values
    cfg = _load_config(Path(path))
    params = {p.name: p for p in ctx.command.params}
    for key, raw in cfg.items():
        if key not in params or key == "config":
            raise click.ClickException(f"{path}: unknown config key {key!r}")
        if ctx.get_parameter_source(key) == ParameterSource.COMMANDLINE:
            continue
        param = params[key]
        if getattr(param, "is_flag", False):
            values[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            values[key] = param.type.convert(raw, param, ctx)
    return values


def _parse_int_list(text: Optional[str], flag: str) -> Optional[list[int]]:
    if text is None or text == "":
        return None
    try:
        return [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError:
        raise click.ClickException(f"{flag} expects a comma-separated integer list, got {text!r}")


def _cap(value: int) -> Optional[int]:
    # 0 disables the cap (exhaustive latency regardless of size)
    return None if value == 0 else value


# --------------------------------------------------------------------------
# service plumbing


@contextmanager
def _service_client(server: Optional[str], state_dir: Optional[Path],
                    data_dir: Optional[Path]):
    if server:
        with httpx.Client(base_url=server.rstrip("/"), timeout=120.0) as client:
            yield client
        return
    import uvicorn

    from socialdht.service import create_app

    app = create_app(state_dir=state_dir, data_dir=data_dir)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    embedded = uvicorn.Server(config)
    thread = threading.Thread(target=embedded.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15.0
    while not embedded.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise click.ClickException("embedded server failed to start")
        time.sleep(0.02)
    port = embedded.servers[0].sockets[0].getsockname()[1]
    try:
        with httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=120.0) as client:
            yield client
    finally:
        embedded.should_exit = True
        thread.join(timeout=10)


def _check(resp: httpx.Response) -> httpx.Response:
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"server returned {resp.status_code}: {detail}")
    return resp


def _run_job(client: httpx.Client, kind: str, payload: dict, outdir: Path,
             poll: float) -> dict:
    job = _check(client.post(f"/jobs/{kind}", json=payload)).json()
    job_id = job["id"]
    eprint(f"submitted {kind} job {job_id}")
    last_message = None
    try:
        while True:
            job = _check(client.get(f"/jobs/{job_id}")).json()
            if job["message"] and job["message"] != last_message:
                eprint(f"[{100 * job['progress']:5.1f}%] {job['message']}")
                last_message = job["message"]
            if job["status"] in ("done", "failed", "cancelled"):
                break
            time.sleep(poll)
    except KeyboardInterrupt:
        eprint(f"cancelling job {job_id}")
        client.delete(f"/jobs/{job_id}")
        raise
    if job["status"] != "done":
        raise click.ClickException(f"job {job_id} {job['status']}: {job.get('error')}")
    result = _check(client.get(f"/jobs/{job_id}/result")).json()
    names = _check(client.get(f"/jobs/{job_id}/files")).json()["files"]
    outdir.mkdir(parents=True, exist_ok=True)
    for name in names:
        text = _check(client.get(f"/jobs/{job_id}/files/{name}")).text
        (outdir / name).write_text(text)
    eprint(f"wrote {len(names)} file(s) to {outdir}")
    return result


# --------------------------------------------------------------------------
# shared option groups


def service_options(fn):
    for deco in reversed([
        click.option("--server", default=None, metavar="URL",
                     help="Use a running service instead of an embedded one."),
        click.option("--state-dir", type=click.Path(path_type=Path), default=None,
                     help="Job state directory for the embedded server."),
        click.option("--data-dir", type=click.Path(path_type=Path), default=None,
                     help="Dataset cache directory (default: SOCIALDHT_DATA)."),
        click.option("--poll-interval", type=float, default=0.5, show_default=True,
                     help="Job status polling period in seconds."),
        click.option("--config", type=click.Path(exists=True, path_type=Path),
                     default=None, help="key=value file supplying flag defaults."),
    ]):
        fn = deco(fn)
    return fn


def engine_options(fn):
    for deco in reversed([
        click.option("--scheme", type=click.Choice(SCHEMES), default="direct",
                     show_default=True),
        click.option("--metric", type=click.Choice(METRICS), default="ring_distance",
                     show_default=True),
        click.option("--ordering", type=click.Choice(ORDERINGS), default="random",
                     show_default=True),
        click.option("--iterations", type=int, default=500, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--smart-width", type=int, default=5, show_default=True),
        click.option("--strength-mode", type=click.Choice(STRENGTHS),
                     default="common_neighbors", show_default=True),
        click.option("--literal-abs", is_flag=True,
                     help="Use literal |id_i - id_j| instead of circular distance."),
        click.option("--iteration-unit", type=click.Choice(["sweep", "attempt"]),
                     default="sweep", show_default=True),
    ]):
        fn = deco(fn)
    return fn


def run_options(fn):
    for deco in reversed([
        click.option("--k", type=int, default=None,
                     help="Long links per node (default: ceil(log2 n))."),
        click.option("--replicates", type=int, default=5, show_default=True),
        click.option("--seeds", default=None, metavar="LIST",
                     help="Comma-separated seeds; overrides --seed/--replicates."),
        click.option("--metrics-every", type=int, default=10, show_default=True,
                     help="Full metric cadence in iterations (0: ends only)."),
        click.option("--latency-sample-cap", type=int, default=200_000,
                     show_default=True, help="Max routed pairs per latency "
                     "estimate (0: exhaustive)."),
        click.option("--no-fetch", is_flag=True, help="Never download datasets."),
        click.option("--no-synthetic", is_flag=True,
                     help="Fail instead of substituting a synthetic graph."),
        click.option("--no-checkpoints", is_flag=True,
                     help="Skip writing final ring checkpoints."),
        click.option("--outdir", type=click.Path(path_type=Path), default=Path("runs"),
                     show_default=True),
    ]):
        fn = deco(fn)
    return fn


def _common_payload(opts: dict) -> dict:
    return {
        "dataset": opts["dataset"],
        "engine": {
            "scheme": opts["scheme"], "metric": opts["metric"],
            "ordering": opts["ordering"], "iterations": opts["iterations"],
            "seed": opts["seed"], "smart_width": opts["smart_width"],
            "strength_mode": opts["strength_mode"],
            "literal_abs": opts["literal_abs"],
            "iteration_unit": opts["iteration_unit"],
        },
        "k": opts["k"],
        "replicates": opts["replicates"],
        "seeds": _parse_int_list(opts["seeds"], "--seeds"),
        "metrics_every": opts["metrics_every"],
        "latency_sample_cap": _cap(opts["latency_sample_cap"]),
        "allow_fetch": not opts["no_fetch"],
        "allow_synthetic": not opts["no_synthetic"],
        "save_checkpoints": not opts["no_checkpoints"],
    }


def _emit(result: dict) -> None:
    click.echo(json.dumps(result, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(package_name="socialdht")
def main() -> None:
    """Embed social graphs onto a Symphony ring and measure the effect."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8323, show_default=True)
@click.option("--state-dir", type=click.Path(path_type=Path), default=None)
@click.option("--data-dir", type=click.Path(path_type=Path), default=None)
@click.option("--workers", type=int, default=2, show_default=True,
              help="Concurrent job slots.")
def serve(host: str, port: int, state_dir: Optional[Path],
          data_dir: Optional[Path], workers: int) -> None:
    """Run the experiment service in the foreground."""
    import uvicorn

    from socialdht.service import create_app

    app = create_app(state_dir=state_dir, data_dir=data_dir, workers=workers)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@service_options
@click.pass_context
def datasets(ctx: click.Context, **kwargs) -> None:
    """List known datasets and their local availability."""
    opts = _apply_config(ctx, kwargs)
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        _emit(_check(client.get("/datasets")).json())


@main.command()
@click.argument("names", nargs=-1, required=True)
@click.option("--force", is_flag=True, help="Re-download even if present.")
@service_options
@click.pass_context
def fetch(ctx: click.Context, names: tuple[str, ...], force: bool, **kwargs) -> None:
    """Download one or more datasets listed in the manifest."""
    opts = _apply_config(ctx, kwargs)
    statuses = []
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        for name in names:
            eprint(f"fetching {name}")
            resp = _check(client.post("/datasets/fetch",
                                      json={"name": name, "force": force}))
            statuses.append(resp.json())
    _emit(statuses)


@main.command()
@click.argument("dataset")
@engine_options
@run_options
@service_options
@click.pass_context
def embed(ctx: click.Context, dataset: str, **kwargs) -> None:
    """Refine one dataset's placement and record per-iteration metrics."""
    opts = _apply_config(ctx, kwargs)
    opts["dataset"] = dataset
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        result = _run_job(client, "embed", _common_payload(opts),
                          Path(opts["outdir"]), opts["poll_interval"])
    _emit(result)


@main.command()
@click.argument("dataset")
@engine_options
@run_options
@service_options
@click.pass_context
def orderings(ctx: click.Context, dataset: str, **kwargs) -> None:
    """Compare random/ascending/descending initiator orderings."""
    opts = _apply_config(ctx, kwargs)
    opts["dataset"] = dataset
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        result = _run_job(client, "orderings", _common_payload(opts),
                          Path(opts["outdir"]), opts["poll_interval"])
    _emit(result)


@main.command()
@click.argument("dataset")
@click.option("--schemes", "schemes_", default=",".join(SCHEMES), show_default=True,
              metavar="LIST", help="Comma-separated peer-selection schemes.")
@engine_options
@run_options
@service_options
@click.pass_context
def schemes(ctx: click.Context, dataset: str, schemes_: str, **kwargs) -> None:
    """Compare peer-selection schemes on one dataset."""
    opts = _apply_config(ctx, kwargs)
    opts["dataset"] = dataset
    payload = _common_payload(opts)
    payload["schemes"] = [s.strip() for s in schemes_.split(",") if s.strip()]
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        result = _run_job(client, "schemes", payload,
                          Path(opts["outdir"]), opts["poll_interval"])
    _emit(result)


@main.command()
@click.option("--n", type=int, default=10000, show_default=True,
              help="Ring size for the self-embedding scenario.")
@click.option("--k", type=int, default=None,
              help="Long links per node (default: ceil(log2 n)).")
@click.option("--seeds", default=None, metavar="LIST",
              help="Comma-separated replicate seeds (default: 0..4).")
@click.option("--iterations", type=int, default=500, show_default=True)
@click.option("--scheme", type=click.Choice(SCHEMES), default="direct",
              show_default=True)
@click.option("--metrics-every", type=int, default=25, show_default=True)
@click.option("--latency-sample-cap", type=int, default=200_000, show_default=True)
@click.option("--strength-modes", default="id_distance,common_neighbors",
              show_default=True, metavar="LIST")
@click.option("--outdir", type=click.Path(path_type=Path), default=Path("runs"),
              show_default=True)
@service_options
@click.pass_context
def relabel(ctx: click.Context, **kwargs) -> None:
    """Re-embed a Symphony overlay's own finger graph onto a fresh ring."""
    opts = _apply_config(ctx, kwargs)
    payload = {
        "n": opts["n"], "k": opts["k"],
        "seeds": _parse_int_list(opts["seeds"], "--seeds"),
        "iterations": opts["iterations"], "scheme": opts["scheme"],
        "metrics_every": opts["metrics_every"],
        "latency_sample_cap": _cap(opts["latency_sample_cap"]),
        "strength_modes": [s.strip() for s in opts["strength_modes"].split(",")
                           if s.strip()],
    }
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        result = _run_job(client, "relabel", payload,
                          Path(opts["outdir"]), opts["poll_interval"])
    _emit(result)


@main.command()
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--dataset", required=True,
              help="Graph the checkpointed placement belongs to.")
@click.option("--latency-sample-cap", type=int, default=200_000, show_default=True)
@click.option("--no-fetch", is_flag=True)
@click.option("--no-synthetic", is_flag=True)
@click.option("--outdir", type=click.Path(path_type=Path), default=Path("runs"),
              show_default=True)
@service_options
@click.pass_context
def metrics(ctx: click.Context, checkpoint: Path, **kwargs) -> None:
    """Recompute the metric suite from a saved ring checkpoint.

    The checkpoint path must be visible to the server processing the job
    (trivially true for the embedded server).
    """
    opts = _apply_config(ctx, kwargs)
    payload = {
        "checkpoint": str(Path(checkpoint).resolve()),
        "dataset": opts["dataset"],
        "allow_fetch": not opts["no_fetch"],
        "allow_synthetic": not opts["no_synthetic"],
        "latency_sample_cap": _cap(opts["latency_sample_cap"]),
    }
    with _service_client(opts["server"], opts["state_dir"], opts["data_dir"]) as client:
        result = _run_job(client, "metrics", payload,
                          Path(opts["outdir"]), opts["poll_interval"])
    result.pop("csv", None)
    _emit(result)


if __name__ == "__main__":
    main()
