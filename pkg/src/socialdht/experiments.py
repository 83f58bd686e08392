"""Seeded experiment runners emitting per-iteration CSVs and summaries.

Each runner resolves a dataset, executes one refinement per replicate
seed, writes one CSV per replicate plus a JSON summary with per-seed and
mean/stddev aggregates, and cleans up partial output on failure.  Gains
are always computed against the same run's iteration-0 row.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from socialdht.datasets import resolve_dataset
from socialdht.engine import GossipConfig, initialize, run
from socialdht.graph import SocialGraph, write_edge_list
from socialdht.metrics import (IterationReport, MetricsOptions, measure_snapshot,
                               render_csv, write_csv)
from socialdht.overlay import build_ring, default_k, load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

ProgressFn = Callable[[float, str], None]


@dataclass
class ExperimentSpec:
    """One experiment: dataset, engine config, replicates, output location."""

    dataset: str
    config: GossipConfig = field(default_factory=GossipConfig)
    k: Optional[int] = None
    replicates: int = 5
    seeds: Optional[Sequence[int]] = None
    outdir: Path = Path("runs")
    metrics_every: int = 10
    data_dir: Optional[Path] = None
    allow_fetch: bool = True
    allow_synthetic: bool = True
    save_checkpoints: bool = True
    latency_sample_cap: Optional[int] = 200_000
    tag: Optional[str] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.outdir = Path(self.outdir)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.config.seed + r for r in range(self.replicates)]

    def default_tag(self) -> str:
        c = self.config
        name = Path(self.dataset).stem if Path(self.dataset).suffix else self.dataset
        return f"{name}_{c.scheme}_{c.metric}_{c.ordering}"


def latency_gain(reports: Sequence[IterationReport]) -> Optional[float]:
    """Percent latency reduction of the last measured row vs row 0."""
    base = reports[0].avg_latency
    final = reports[-1].avg_latency
    if base is None or final is None or base == 0:
        return None
    return (base - final) / base * 100.0


def decay_iteration(reports: Sequence[IterationReport],
                    threshold: float = 0.01) -> Optional[int]:
    """First iteration from which the per-iteration swap fraction stays
    below ``threshold`` for the rest of the run; None if it never does."""
    candidate: Optional[int] = None
    for r in reports:
        if r.iteration == 0 or r.per_iter_fraction is None:
            continue
        if r.per_iter_fraction >= threshold:
            candidate = None
        elif candidate is None:
            candidate = r.iteration
    return candidate


def _seed_summary(seed: int, reports: Sequence[IterationReport]) -> dict:
    first, last = reports[0], reports[-1]
    return {
        "seed": seed,
        "iterations": last.iteration,
        "baseline_latency": first.avg_latency,
        "final_latency": last.avg_latency,
        "latency_gain_pct": latency_gain(reports),
        "cum_migration_fraction": last.cum_fraction,
        "unique_mover_fraction": last.unique_mover_fraction,
        "decay_iteration": decay_iteration(reports),
        "baseline_rel_finger": first.rel_finger,
        "final_rel_finger": last.rel_finger,
        "baseline_rel_ihop": [first.rel_1hop, first.rel_2hop, first.rel_3hop],
        "final_rel_ihop": [last.rel_1hop, last.rel_2hop, last.rel_3hop],
    }


def _aggregate(per_seed: list[dict]) -> dict:
    """Mean and stddev over the numeric per-seed summary fields."""
    out = {}
    for key in per_seed[0]:
        if key == "seed":
            continue
        vals = [s[key] for s in per_seed]
        if all(isinstance(v, (int, float)) and v is not None for v in vals):
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            out[key] = {"mean": mean, "std": math.sqrt(var)}
        elif all(isinstance(v, list) for v in vals) and all(
                x is not None for v in vals for x in v):
            means = [sum(col) / len(col) for col in zip(*vals)]
            stds = [math.sqrt(sum((x - m) ** 2 for x in col) / len(col))
                    for col, m in zip(zip(*vals), means)]
            out[key] = {"mean": means, "std": stds}
    return out


class _OutputTracker:
    """Removes every file written so far if the experiment dies midway."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _config_dict(config: GossipConfig) -> dict:
    d = {k: v for k, v in vars(config).items() if k != "reference_ids"}
    d["has_reference_ids"] = config.reference_ids is not None
    return d


def run_experiment(spec: ExperimentSpec, graph: Optional[SocialGraph] = None,
                   provenance: str = "preloaded",
                   progress: Optional[ProgressFn] = None) -> dict:
    """Run one config over all replicate seeds; returns the summary dict.

    Writes ``<tag>_seed<seed>.csv`` (+ ``.ring`` checkpoint) per replicate
    and ``<tag>_summary.json``; on any failure all files written by this
    call are removed before the error propagates.
    """
    if graph is None:
        graph, provenance = resolve_dataset(spec.dataset, data_dir=spec.data_dir,
                                            allow_fetch=spec.allow_fetch,
                                            allow_synthetic=spec.allow_synthetic)
    tag = spec.tag or spec.default_tag()
    spec.outdir.mkdir(parents=True, exist_ok=True)
    tracker = _OutputTracker(spec.outdir)
    options = MetricsOptions(latency_sample_cap=spec.latency_sample_cap)
    seeds = spec.seed_list()
    per_seed = []
    try:
        for idx, seed in enumerate(seeds):
            cfg = replace(spec.config, seed=seed)
            state = initialize(graph, cfg, k=spec.k)

            def on_report(rep, _idx=idx, _total=cfg.iterations):
                if progress is not None:
                    frac = (_idx + rep.iteration / max(1, _total)) / len(seeds)
                    progress(frac, f"seed {seeds[_idx]}: iteration {rep.iteration}/{_total}")

            reports = run(state, metrics_every=spec.metrics_every,
                          options=options, on_report=on_report)
            write_csv(tracker.path(f"{tag}_seed{seed}.csv"), reports)
            if spec.save_checkpoints:
                save_checkpoint(tracker.path(f"{tag}_seed{seed}.ring"),
                                state.ring, state.placement)
            per_seed.append(_seed_summary(seed, reports))
            log.info("%s seed %d: baseline %.3f final %.3f gain %.1f%%",
                     tag, seed, per_seed[-1]["baseline_latency"] or float("nan"),
                     per_seed[-1]["final_latency"] or float("nan"),
                     per_seed[-1]["latency_gain_pct"] or float("nan"))
        summary = {
            "tag": tag,
            "dataset": spec.dataset,
            "provenance": provenance,
            "nodes": graph.n,
            "edges": graph.edge_count,
            "k": spec.k if spec.k is not None else default_k(graph.n),
            "config": _config_dict(spec.config),
            "seeds": seeds,
            "per_seed": per_seed,
            "aggregate": _aggregate(per_seed),
            "files": [p.name for p in tracker.paths],
        }
        path = tracker.path(f"{tag}_summary.json")
        path.write_text(json.dumps(summary, indent=2) + "\n")
        summary["files"].append(path.name)
        return summary
    except BaseException:
        tracker.cleanup()
        raise


def run_ordering_comparison(spec: ExperimentSpec,
                            progress: Optional[ProgressFn] = None) -> dict:
    """The same runs under random / descending / ascending initiator order.

    All three share each replicate's seed, hence identical ring and
    iteration-0 placement; only the sweep order differs.
    """
    graph, provenance = resolve_dataset(spec.dataset, data_dir=spec.data_dir,
                                        allow_fetch=spec.allow_fetch,
                                        allow_synthetic=spec.allow_synthetic)
    orders = ("random", "descending_degree", "ascending_degree")
    results = {}
    base_tag = spec.tag or spec.default_tag()
    for idx, ordering in enumerate(orders):
        sub = replace(spec, config=replace(spec.config, ordering=ordering),
                      tag=f"{base_tag}_{ordering}")

        def sub_progress(frac, msg, _idx=idx):
            if progress is not None:
                progress((_idx + frac) / len(orders), f"{ordering}: {msg}")

        results[ordering] = run_experiment(sub, graph=graph, provenance=provenance,
                                           progress=sub_progress)
    comparison = {
        "tag": base_tag,
        "dataset": spec.dataset,
        "orderings": {o: {
            "latency_gain_pct": results[o]["aggregate"]["latency_gain_pct"],
            "cum_migration_fraction": results[o]["aggregate"]["cum_migration_fraction"],
            "decay_iteration": [s["decay_iteration"] for s in results[o]["per_seed"]],
        } for o in orders},
        "summaries": results,
    }
    path = spec.outdir / f"{base_tag}_orderings.json"
    path.write_text(json.dumps(comparison, indent=2) + "\n")
    return comparison


def compare_schemes(spec: ExperimentSpec,
                    schemes: Sequence[str] = ("random", "direct", "greedy", "smart"),
                    progress: Optional[ProgressFn] = None) -> dict:
    """Run every selection scheme on the same dataset and seeds."""
    graph, provenance = resolve_dataset(spec.dataset, data_dir=spec.data_dir,
                                        allow_fetch=spec.allow_fetch,
                                        allow_synthetic=spec.allow_synthetic)
    base_tag = spec.tag or spec.default_tag()
    results = {}
    for idx, scheme in enumerate(schemes):
        sub = replace(spec, config=replace(spec.config, scheme=scheme),
                      tag=f"{base_tag}_{scheme}")

        def sub_progress(frac, msg, _idx=idx):
            if progress is not None:
                progress((_idx + frac) / len(schemes), f"{scheme}: {msg}")

        results[scheme] = run_experiment(sub, graph=graph, provenance=provenance,
                                         progress=sub_progress)
    comparison = {
        "tag": base_tag,
        "dataset": spec.dataset,
        "schemes": {s: {
            "latency_gain_pct": results[s]["aggregate"]["latency_gain_pct"],
            "decay_iteration": [x["decay_iteration"] for x in results[s]["per_seed"]],
        } for s in schemes},
        "summaries": results,
    }
    path = spec.outdir / f"{base_tag}_schemes.json"
    path.write_text(json.dumps(comparison, indent=2) + "\n")
    return comparison


def metrics_from_checkpoint(checkpoint: Path, dataset: str,
                            data_dir: Optional[Path] = None,
                            allow_fetch: bool = True,
                            allow_synthetic: bool = True,
                            latency_sample_cap: Optional[int] = 200_000,
                            sample_seed: int = 0) -> dict:
    """Recompute the full metrics row for a saved (ring, placement).

    The checkpoint must match the dataset's node count.  Returns the
    measured values plus a rendered one-row CSV.
    """
    graph, provenance = resolve_dataset(dataset, data_dir=data_dir,
                                        allow_fetch=allow_fetch,
                                        allow_synthetic=allow_synthetic)
    ring, placement = load_checkpoint(checkpoint)
    if ring.n != graph.n:
        raise ValueError(f"checkpoint has {ring.n} slots but dataset "
                         f"{dataset!r} has {graph.n} users")
    options = MetricsOptions(latency_sample_cap=latency_sample_cap)
    measured = measure_snapshot(graph, ring, placement, options=options,
                                sample_seed=np.random.default_rng([sample_seed, 0]))
    report = IterationReport(iteration=0, **measured)
    return {
        "checkpoint": str(checkpoint),
        "dataset": dataset,
        "provenance": provenance,
        "nodes": graph.n,
        "edges": graph.edge_count,
        "metrics": measured,
        "csv": render_csv([report]),
    }


def finger_graph(n: int, k: Optional[int] = None, seed: int = 0):
    """Build a ring and return (ring, its symmetrized finger graph).

    Node i of the graph is slot i of the ring; an edge joins each slot to
    its predecessor, successor and long-link targets.
    """
    ring = build_ring(n, default_k(n) if k is None else k,
                      seed=np.random.SeedSequence([seed, 0x51]))
    edges = []
    for s in range(n):
        for t in ring.fingers(s):
            edges.append((s, t))
    g = SocialGraph.from_edges(edges, original_ids=np.arange(n),
                               meta={"name": f"fingers-n{n}", "generator": "finger_graph",
                                     "seed": seed})
    return ring, g


def run_q4_relabel(n: int = 10000, k: Optional[int] = None,
                   seeds: Optional[Sequence[int]] = None,
                   iterations: int = 500, outdir: Path = Path("runs"),
                   scheme: str = "direct", metrics_every: int = 25,
                   latency_sample_cap: Optional[int] = 200_000,
                   strength_modes: Sequence[str] = ("id_distance", "common_neighbors"),
                   progress: Optional[ProgressFn] = None) -> dict:
    """Overlay self-embedding: relabel a fresh ring to mimic an old one.

    Step 1 builds a ring and extracts its finger graph; in that overlay
    every outgoing finger is one hop, the ideal reference.  Step 2 places
    the same nodes randomly on a fresh ring and refines, with tie
    strength either from common neighbors of the finger graph or from
    closeness of the step-1 identifiers.
    """
    if n < 100:
        raise ValueError("relabel scenario needs n >= 100")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seeds = list(seeds) if seeds is not None else [0, 1, 2, 3, 4]
    tracker = _OutputTracker(outdir)
    per_mode: dict = {m: [] for m in strength_modes}
    total_units = len(seeds) * len(strength_modes)
    try:
        for sidx, seed in enumerate(seeds):
            ring1, g = finger_graph(n, k=k, seed=seed)
            write_edge_list(g, tracker.path(f"q4_fingers_n{n}_seed{seed}.txt"))
            save_checkpoint(tracker.path(f"q4_step1_n{n}_seed{seed}.ring"), ring1)
            for midx, mode in enumerate(strength_modes):
                cfg = GossipConfig(scheme=scheme, metric="ring_distance",
                                   iterations=iterations, seed=seed,
                                   strength_mode=mode,
                                   reference_ids=ring1.ids if mode == "id_distance" else None)
                state = initialize(g, cfg, k=k)

                def on_report(rep, _done=sidx * len(strength_modes) + midx,
                              _total=iterations):
                    if progress is not None:
                        frac = (_done + rep.iteration / max(1, _total)) / total_units
                        progress(frac, f"seed {seed} {mode}: iteration "
                                       f"{rep.iteration}/{_total}")

                reports = run(state, metrics_every=metrics_every,
                              options=MetricsOptions(latency_sample_cap=latency_sample_cap),
                              on_report=on_report)
                write_csv(tracker.path(f"q4_{mode}_n{n}_seed{seed}.csv"), reports)
                per_mode[mode].append(_seed_summary(seed, reports))
        summary = {
            "tag": f"q4_relabel_n{n}",
            "nodes": n,
            "k": k if k is not None else default_k(n),
            "iterations": iterations,
            "scheme": scheme,
            "ideal_hops": 1.0,
            "seeds": seeds,
            "modes": {m: {"per_seed": per_mode[m], "aggregate": _aggregate(per_mode[m])}
                      for m in strength_modes},
            "files": [p.name for p in tracker.paths],
        }
        path = tracker.path(f"q4_relabel_n{n}_summary.json")
        path.write_text(json.dumps(summary, indent=2) + "\n")
        summary["files"].append(path.name)
        return summary
    except BaseException:
        tracker.cleanup()
        raise
