"""On-disk formats: float32 WAV audio, ground-truth JSON, trajectory and
fragment JSON lines, and assignment reports."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .fragments import Fragment
from .geometry import DoA
from .reassignment import AssignmentResult
from .scene import FoaSignal, Scene, SceneSpec, SpeakerGroundTruth, VoiceParams
from .tracking import Trajectory


def write_wav(path: str | Path, signal: FoaSignal) -> None:
    wavfile.write(path, signal.sample_rate, signal.channels.astype(np.float32).T)


def read_wav(path: str | Path) -> FoaSignal:
    sample_rate, data = wavfile.read(path)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError(f"{path}: expected a 4-channel WAV")
    return FoaSignal(data.T.astype(np.float64), sample_rate)


def _voice_to_dict(voice: VoiceParams) -> dict:
    return {
        "f0": voice.f0,
        "spectral_tilt": voice.spectral_tilt,
        "resonances": [list(r) for r in voice.resonances],
        "modulation_rate": voice.modulation_rate,
    }


def _voice_from_dict(d: dict) -> VoiceParams:
    return VoiceParams(
        f0=d["f0"],
        spectral_tilt=d["spectral_tilt"],
        resonances=tuple(tuple(r) for r in d["resonances"]),
        modulation_rate=d["modulation_rate"],
    )


def spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "seed": spec.seed,
        "num_speakers": spec.num_speakers,
        "duration": spec.duration,
        "sample_rate": spec.sample_rate,
        "snr": spec.snr,
        "level_diff_range": list(spec.level_diff_range),
        "separation_regime": spec.separation_regime,
        "segment_range": list(spec.segment_range),
        "pause_range": list(spec.pause_range),
        "jump_on_silence": spec.jump_on_silence,
    }


def spec_from_dict(d: dict) -> SceneSpec:
    return SceneSpec(
        seed=d["seed"],
        num_speakers=d["num_speakers"],
        duration=d["duration"],
        sample_rate=d["sample_rate"],
        snr=d["snr"],
        level_diff_range=tuple(d["level_diff_range"]),
        separation_regime=d["separation_regime"],
        segment_range=tuple(d["segment_range"]),
        pause_range=tuple(d["pause_range"]),
        jump_on_silence=d["jump_on_silence"],
    )


def dump_json(obj, path: str | Path) -> None:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_ground_truth(path: str | Path, ground_truth: list[SpeakerGroundTruth], spec: SceneSpec) -> None:
    doc = {
        "spec": spec_to_dict(spec),
        "speakers": [
            {
                "speaker_id": gt.speaker_id,
                "voice": _voice_to_dict(gt.voice),
                "segments": [
                    {"onset": on, "offset": off, "azimuth": doa.azimuth, "elevation": doa.elevation}
                    for on, off, doa in gt.segments
                ],
            }
            for gt in ground_truth
        ],
    }
    dump_json(doc, path)


def read_ground_truth(path: str | Path) -> tuple[list[SpeakerGroundTruth], SceneSpec]:
    doc = json.loads(Path(path).read_text())
    speakers = []
    for s in doc["speakers"]:
        gt = SpeakerGroundTruth(speaker_id=s["speaker_id"], voice=_voice_from_dict(s["voice"]))
        gt.segments = [
            (seg["onset"], seg["offset"], DoA(seg["azimuth"], seg["elevation"]))
            for seg in s["segments"]
        ]
        speakers.append(gt)
    return speakers, spec_from_dict(doc["spec"])


def write_scene(scene_dir: str | Path, scene: Scene, spec: SceneSpec) -> None:
    """Mixture and wet WAVs plus the ground-truth JSON document."""
    scene_dir = Path(scene_dir)
    scene_dir.mkdir(parents=True, exist_ok=True)
    write_wav(scene_dir / "mixture.wav", scene.mixture)
    for j, wet in enumerate(scene.wet):
        write_wav(scene_dir / f"speaker{j:02d}.wav", wet)
    write_ground_truth(scene_dir / "ground_truth.json", scene.ground_truth, spec)


def read_scene(scene_dir: str | Path) -> tuple[Scene, SceneSpec]:
    scene_dir = Path(scene_dir)
    ground_truth, spec = read_ground_truth(scene_dir / "ground_truth.json")
    mixture = read_wav(scene_dir / "mixture.wav")
    wet = [read_wav(scene_dir / f"speaker{j:02d}.wav") for j in range(len(ground_truth))]
    return Scene(mixture, wet, ground_truth), spec


def trajectories_to_jsonl(trajectories: list[Trajectory]) -> str:
    """One record per trajectory: {track_id, frames: [[index, az, el, active]]}.

    Also the import format for trajectories produced by external trackers.
    """
    lines = []
    for traj in trajectories:
        record = {
            "track_id": traj.track_id,
            "frames": [
                [index, doa.azimuth, doa.elevation, bool(active)]
                for index, doa, active in traj.frames
            ],
        }
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def trajectories_from_jsonl(text: str) -> list[Trajectory]:
    trajectories = []
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        frames = [
            (int(index), DoA(az, el), bool(active))
            for index, az, el, active in record["frames"]
        ]
        trajectories.append(Trajectory(track_id=record["track_id"], frames=frames))
    return trajectories


def write_trajectories(path: str | Path, trajectories: list[Trajectory]) -> None:
    Path(path).write_text(trajectories_to_jsonl(trajectories))


def read_trajectories(path: str | Path) -> list[Trajectory]:
    return trajectories_from_jsonl(Path(path).read_text())


def write_fragments(path: str | Path, fragments: list[Fragment]) -> None:
    lines = []
    for f in fragments:
        record = {
            "fragment_id": f.fragment_id,
            "track_id": f.source_track_id,
            "onset_frame": f.onset_frame,
            "offset_frame": f.offset_frame,
            "representative_doa": [f.representative_doa.azimuth, f.representative_doa.elevation],
        }
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def assignment_to_dict(result: AssignmentResult) -> dict:
    return {
        "assignments": {str(k): v for k, v in result.assignments.items()},
        "diagnostics": [
            {
                "fragment_id": d.fragment_id,
                "identity": d.identity,
                "score": None if d.score != d.score else d.score,  # NaN -> null
                "excluded": d.excluded,
                "window": list(d.window),
                "used_fallback": d.used_fallback,
            }
            for d in result.diagnostics
        ],
        "trajectories": [
            json.loads(line)
            for line in trajectories_to_jsonl(result.new_trajectories).splitlines()
        ],
    }


def write_assignment(path: str | Path, result: AssignmentResult) -> None:
    dump_json(assignment_to_dict(result), path)
