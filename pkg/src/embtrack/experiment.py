"""Batch orchestration: dataset generation, sweep execution, evaluation.

All randomness derives from one master seed via derive_seed(master, scene
index, stage name), so every sweep cell sees the same scenes and paired
comparisons are meaningful. Completed scene/cell outputs are marked on disk
and skipped on resume.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import fileio
from .embedding import Embedding, EnrollmentPool, build_distractors, build_enrollment
from .fragments import DurationPolicy, segment
from .metrics import aggregate_report, evaluate_scene
from .reassignment import BEAMFORMERS, TRACKER_VARIANTS, extract_fragment_embedding, reassign
from .scene import SEPARATION_REGIMES, SceneSpec, simulate
from .seeding import derive_seed
from .tracking import (
    NoiseModel,
    est_tracker_config,
    gt_tracker_config,
    observe_est,
    observe_gt,
    track,
)

WORKERS_ENV = "EMBTRACK_WORKERS"
COMPLETE_MARKER = "COMPLETE"


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DataError(RuntimeError):
    """Missing or unreadable dataset/results (CLI exit code 3)."""


@dataclass(frozen=True)
class DatasetConfig:
    count: int = 50
    regime: str = "distant"
    duration: float = 30.0
    num_speakers: int = 2
    snr: float | None = 15.0
    level_diff_low: float = 2.0
    level_diff_high: float = 4.0
    segment_low: float = 2.0
    segment_high: float = 6.0
    pause_low: float = 1.0
    pause_high: float = 4.0
    jump_on_silence: bool = True
    sample_rate: int = 16000

    def validate(self) -> None:
        if self.count < 0:
            raise ConfigError("dataset.count must be >= 0")
        if self.regime not in SEPARATION_REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.duration <= 0:
            raise ConfigError("dataset.duration must be positive")

    def scene_spec(self, index: int, master_seed: int) -> SceneSpec:
        return SceneSpec(
            seed=derive_seed(master_seed, index, "scene"),
            num_speakers=self.num_speakers,
            duration=self.duration,
            sample_rate=self.sample_rate,
            snr=self.snr,
            level_diff_range=(self.level_diff_low, self.level_diff_high),
            separation_regime=self.regime,
            segment_range=(self.segment_low, self.segment_high),
            pause_range=(self.pause_low, self.pause_high),
            jump_on_silence=self.jump_on_silence,
        )


@dataclass(frozen=True)
class RunConfig:
    tracker: str = "gt"
    beamformers: tuple[str, ...] = ("ideal",)
    durations: tuple[str, ...] = ("whole",)
    enrollment_sizes: tuple[int, ...] = (2,)
    noise_cov: str = "oracle"
    hop: float = 0.1
    est_kappa_error: float = 124.0
    est_miss_prob: float = 0.05
    est_false_alarm_rate: float = 0.05

    def validate(self, num_speakers: int) -> None:
        if self.tracker not in TRACKER_VARIANTS:
            raise ConfigError(f"unknown tracker {self.tracker!r}")
        for bf in self.beamformers:
            if bf not in BEAMFORMERS:
                raise ConfigError(f"unknown beamformer {bf!r}")
        if self.noise_cov not in ("oracle", "gated"):
            raise ConfigError(f"unknown noise covariance source {self.noise_cov!r}")
        for d in self.durations:
            try:
                DurationPolicy.parse(d)
            except ValueError as e:
                raise ConfigError(f"bad duration {d!r}: {e}") from None
        for m in self.enrollment_sizes:
            if m < num_speakers:
                raise ConfigError(f"enrollment size {m} < number of speakers {num_speakers}")

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.est_kappa_error, self.est_miss_prob, self.est_false_alarm_rate)


@dataclass(frozen=True)
class EvalConfig:
    alpha_deg: float = 20.0
    bootstrap_fraction: float = 0.8
    bootstrap_iters: int = 100

    def validate(self) -> None:
        if not (0.0 < self.bootstrap_fraction <= 1.0):
            raise ConfigError("bootstrap fraction must be in (0, 1]")
        if self.bootstrap_iters < 1:
            raise ConfigError("bootstrap iters must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    workers: int = 0  # 0: use EMBTRACK_WORKERS or 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    run: RunConfig = field(default_factory=RunConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.dataset.validate()
        self.run.validate(self.dataset.num_speakers)
        self.eval.validate()

    def effective_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        env = os.environ.get(WORKERS_ENV, "")
        return int(env) if env.isdigit() and int(env) > 0 else 1

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        def build(klass, d):
            names = {f.name for f in dataclasses.fields(klass)}
            unknown = set(d) - names
            if unknown:
                raise ConfigError(f"unknown {klass.__name__} keys: {sorted(unknown)}")
            for key in ("beamformers", "durations", "enrollment_sizes"):
                if key in d and isinstance(d[key], list):
                    d[key] = tuple(d[key])
            if "durations" in d:
                d["durations"] = tuple(str(x) for x in d["durations"])
            return klass(**d)

        doc = dict(doc)
        cfg = cls(
            master_seed=doc.pop("master_seed", 0),
            workers=doc.pop("workers", 0),
            dataset=build(DatasetConfig, doc.pop("dataset", {})),
            run=build(RunConfig, doc.pop("run", {})),
            eval=build(EvalConfig, doc.pop("eval", {})),
        )
        if doc:
            raise ConfigError(f"unknown config keys: {sorted(doc)}")
        return cfg

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "workers": self.workers,
            "dataset": dataclasses.asdict(self.dataset),
            "run": dataclasses.asdict(self.run),
            "eval": dataclasses.asdict(self.eval),
        }


def _scene_id(index: int) -> str:
    return f"scene_{index:04d}"


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _gen_one(args: tuple) -> dict:
    cfg, index, out_dir = args
    spec = cfg.dataset.scene_spec(index, cfg.master_seed)
    scene_dir = Path(out_dir) / "scenes" / _scene_id(index)
    fileio.write_scene(scene_dir, simulate(spec), spec)
    return {
        "scene_id": _scene_id(index),
        "index": index,
        "seed": spec.seed,
        "sha256": _sha256_file(scene_dir / "mixture.wav"),
    }


def cmd_gen(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """Generate the dataset on disk; returns the manifest path."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, index, out_dir) for index in range(cfg.dataset.count)]
    workers = cfg.effective_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_gen_one, tasks))
    else:
        rows = [_gen_one(t) for t in tasks]
    manifest = {
        "master_seed": cfg.master_seed,
        "dataset": dataclasses.asdict(cfg.dataset),
        "scenes": rows,
    }
    path = out_dir / "manifest.json"
    fileio.dump_json(manifest, path)
    return path


def load_manifest(dataset_dir: str | Path) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest at {path}")
    return json.loads(path.read_text())


def cell_name(tracker: str, m: int, beamformer: str, duration: str) -> str:
    return f"{tracker}_m{m}_{beamformer}_{duration}"


def run_cells(cfg: ExperimentConfig) -> list[tuple[int, str, str]]:
    """The Cartesian sweep {M} x {beamformer} x {duration}."""
    return [
        (m, bf, dur)
        for m in cfg.run.enrollment_sizes
        for bf in cfg.run.beamformers
        for dur in cfg.run.durations
    ]


def _shared_distractors(cfg: ExperimentConfig) -> list[tuple[str, Embedding]]:
    need = max(cfg.run.enrollment_sizes) - cfg.dataset.num_speakers
    if need <= 0:
        return []
    return build_distractors(
        need, derive_seed(cfg.master_seed, "distractors"), cfg.dataset.sample_rate
    )


def _run_one(args: tuple) -> str:
    cfg, index, dataset_dir, out_dir, distractors = args
    scene_id = _scene_id(index)
    scene_dir = Path(dataset_dir) / "scenes" / scene_id
    result_dir = Path(out_dir) / scene_id
    result_dir.mkdir(parents=True, exist_ok=True)

    cells = [
        (m, bf, dur)
        for (m, bf, dur) in run_cells(cfg)
        if not (result_dir / cell_name(cfg.run.tracker, m, bf, dur) / COMPLETE_MARKER).exists()
    ]
    tracks_missing = [
        m
        for m in cfg.run.enrollment_sizes
        if not (result_dir / f"tracks_{cfg.run.tracker}_m{m}.jsonl").exists()
    ]
    if not cells and not tracks_missing:
        return scene_id

    scene, _spec = fileio.read_scene(scene_dir)
    hop = cfg.run.hop
    if cfg.run.tracker == "gt":
        observations = observe_gt(scene.ground_truth, hop, scene.duration)
    else:
        observations = observe_est(
            scene.ground_truth,
            hop,
            cfg.run.noise_model(),
            derive_seed(cfg.master_seed, index, "observe"),
            scene.duration,
        )

    # Tracking and enrollment per M; pools for smaller M are prefixes of the
    # largest pool because scene speakers come first and distractors are shared.
    tracks_by_m = {}
    for m in cfg.run.enrollment_sizes:
        maker = gt_tracker_config if cfg.run.tracker == "gt" else est_tracker_config
        tracker_cfg = maker(m, derive_seed(cfg.master_seed, index, "tracker", m))
        tracks_by_m[m] = track(observations, tracker_cfg)
        fileio.write_trajectories(
            result_dir / f"tracks_{cfg.run.tracker}_m{m}.jsonl", tracks_by_m[m]
        )
    top_pool = build_enrollment(
        scene.voices,
        max(cfg.run.enrollment_sizes),
        derive_seed(cfg.master_seed, index, "enrollment"),
        scene.sample_rate,
        distractors,
    )

    num_frames = int(round(scene.duration / hop))
    for m, bf, dur in cells:
        cell_dir = result_dir / cell_name(cfg.run.tracker, m, bf, dur)
        cell_dir.mkdir(parents=True, exist_ok=True)
        policy = DurationPolicy.parse(dur)
        trajectories = tracks_by_m[m]
        fragments = segment(trajectories)
        pool = EnrollmentPool(top_pool.entries[:m])
        inactive_by_track = {}
        if bf == "mvdr" and cfg.run.noise_cov == "gated":
            for traj in trajectories:
                active = {i for i, _, a in traj.frames if a}
                inactive_by_track[traj.track_id] = [
                    t for t in range(num_frames) if t not in active
                ]
        embeddings = {
            frag.fragment_id: extract_fragment_embedding(
                scene,
                frag,
                policy,
                bf,
                hop,
                cfg.run.noise_cov,
                inactive_by_track.get(frag.source_track_id),
            )
            for frag in fragments
        }
        assignment = reassign(fragments, embeddings, pool, hop)
        fileio.write_fragments(cell_dir / "fragments.jsonl", fragments)
        fileio.write_assignment(cell_dir / "assignment.json", assignment)
        fileio.write_trajectories(cell_dir / "tracks_after.jsonl", assignment.new_trajectories)
        (cell_dir / COMPLETE_MARKER).write_text("")
    return scene_id


def cmd_run(cfg: ExperimentConfig, dataset_dir: str | Path, out_dir: str | Path) -> Path:
    """Execute the sweep over a generated dataset; resumable per scene/cell."""
    cfg.validate()
    manifest = load_manifest(dataset_dir)
    if len(manifest["scenes"]) == 0:
        raise DataError("dataset manifest lists no scenes")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    distractors = _shared_distractors(cfg)
    tasks = [
        (cfg, row["index"], str(dataset_dir), str(out_dir), distractors)
        for row in manifest["scenes"]
    ]
    workers = cfg.effective_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_one, tasks))
    else:
        for t in tasks:
            _run_one(t)
    run_manifest = {
        "config": cfg.to_dict(),
        "cells": [cell_name(cfg.run.tracker, m, bf, dur) for m, bf, dur in run_cells(cfg)],
        "scenes": [row["scene_id"] for row in manifest["scenes"]],
    }
    path = out_dir / "run_manifest.json"
    fileio.dump_json(run_manifest, path)
    return path


def _evaluate_cell(
    cfg: ExperimentConfig,
    dataset_dir: Path,
    results_dir: Path,
    scenes: list[dict],
    m: int,
    bf: str,
    dur: str,
) -> dict:
    before_metrics = []
    after_metrics = []
    for row in scenes:
        scene_id = row["scene_id"]
        gt, spec = fileio.read_ground_truth(
            dataset_dir / "scenes" / scene_id / "ground_truth.json"
        )
        result_dir = results_dir / scene_id
        cell_dir = result_dir / cell_name(cfg.run.tracker, m, bf, dur)
        tracks_path = result_dir / f"tracks_{cfg.run.tracker}_m{m}.jsonl"
        if not cell_dir.exists() or not tracks_path.exists():
            raise DataError(f"missing results for {scene_id}/{cell_dir.name}")
        before = fileio.read_trajectories(tracks_path)
        after = fileio.read_trajectories(cell_dir / "tracks_after.jsonl")
        before_metrics.append(
            evaluate_scene(gt, before, spec.duration, cfg.run.hop, cfg.eval.alpha_deg)
        )
        after_metrics.append(
            evaluate_scene(gt, after, spec.duration, cfg.run.hop, cfg.eval.alpha_deg)
        )
    seed = derive_seed(cfg.master_seed, "bootstrap")
    kwargs = dict(
        fraction=cfg.eval.bootstrap_fraction,
        iters=cfg.eval.bootstrap_iters,
        seed=seed,
        alpha_deg=cfg.eval.alpha_deg,
    )
    return {
        "before": aggregate_report(before_metrics, **kwargs).as_dict(),
        "after": aggregate_report(after_metrics, **kwargs).as_dict(),
    }


def cmd_eval(
    cfg: ExperimentConfig,
    results_dir: str | Path,
    dataset_dir: str | Path,
    out_path: str | Path,
    per_scene_csv: str | Path | None = None,
    trend_csv: str | Path | None = None,
) -> dict:
    """Paired before/after metrics per sweep cell, with bootstrap statistics."""
    cfg.validate()
    manifest = load_manifest(dataset_dir)
    scenes = manifest["scenes"]
    if not scenes:
        raise DataError("dataset manifest lists no scenes")
    results_dir = Path(results_dir)
    dataset_dir = Path(dataset_dir)
    if not results_dir.exists():
        raise DataError(f"no results directory {results_dir}")

    cells = {}
    for m, bf, dur in run_cells(cfg):
        name = cell_name(cfg.run.tracker, m, bf, dur)
        cells[name] = _evaluate_cell(cfg, dataset_dir, results_dir, scenes, m, bf, dur)

    trend_rows = [
        {
            "cell": name,
            "m": m,
            "beamformer": bf,
            "duration": dur,
            "assa_before_mean": cells[name]["before"]["bootstrap_mean"]["assa"],
            "assa_before_std": cells[name]["before"]["bootstrap_std"]["assa"],
            "assa_after_mean": cells[name]["after"]["bootstrap_mean"]["assa"],
            "assa_after_std": cells[name]["after"]["bootstrap_std"]["assa"],
        }
        for (m, bf, dur) in run_cells(cfg)
        for name in [cell_name(cfg.run.tracker, m, bf, dur)]
    ]
    report = {
        "config": cfg.to_dict(),
        "num_scenes": len(scenes),
        "cells": cells,
        "trend": trend_rows,
    }
    fileio.dump_json(report, out_path)

    if per_scene_csv is not None:
        _write_per_scene_csv(per_scene_csv, cfg, scenes, cells)
    if trend_csv is not None:
        _write_trend_csv(trend_csv, trend_rows)
    return report


def _write_per_scene_csv(path: str | Path, cfg, scenes, cells) -> None:
    lines = ["scene,cell,phase,assa,le,tsr,tfr"]
    for name, pair in sorted(cells.items()):
        for phase in ("before", "after"):
            for row, per_scene in zip(scenes, pair[phase]["per_scene"]):
                lines.append(
                    f"{row['scene_id']},{name},{phase},"
                    f"{per_scene['assa']:.6f},{per_scene['le']:.6f},"
                    f"{per_scene['tsr']:.6f},{per_scene['tfr']:.6f}"
                )
    Path(path).write_text("\n".join(lines) + "\n")


def _write_trend_csv(path: str | Path, trend_rows: list[dict]) -> None:
    lines = ["m,beamformer,duration,assa_before_mean,assa_before_std,assa_after_mean,assa_after_std"]
    for r in trend_rows:
        lines.append(
            f"{r['m']},{r['beamformer']},{r['duration']},"
            f"{r['assa_before_mean']:.6f},{r['assa_before_std']:.6f},"
            f"{r['assa_after_mean']:.6f},{r['assa_after_std']:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
