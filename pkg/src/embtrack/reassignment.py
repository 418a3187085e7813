"""Fragment-level identity reassignment against an enrollment pool.

Fragments are visited first-in-first-out (by onset). Each one takes the
enrolled identity with the highest cosine similarity among the identities not
already assigned to a temporally overlapping fragment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import (
    MvdrDiagnostics,
    beamform_ds,
    beamform_ideal,
    beamform_mvdr,
    gated_noise_reference,
    nearest_speaker_index,
    oracle_noise_reference,
)
from .embedding import Embedding, EnrollmentPool, ShortInputError, build_enrollment, embed
from .fragments import DurationPolicy, Fragment, extraction_window, segment, window_doa
from .geometry import angular_distance
from .scene import Scene
from .seeding import derive_seed
from .tracking import (
    DEFAULT_HOP_S,
    NoiseModel,
    TrackerConfig,
    Trajectory,
    est_tracker_config,
    gt_tracker_config,
    observe_est,
    observe_gt,
    track,
)

BEAMFORMERS = ("ideal", "ds", "mvdr")
TRACKER_VARIANTS = ("gt", "est")


class OverlapExclusionError(RuntimeError):
    """No identity left for a fragment: overlap degree exceeded the pool size."""


@dataclass
class FragmentDiagnostic:
    fragment_id: int
    identity: str
    score: float
    excluded: list[str]
    window: tuple[float, float]
    used_fallback: bool


@dataclass
class AssignmentResult:
    assignments: dict[int, str]
    new_trajectories: list[Trajectory]
    diagnostics: list[FragmentDiagnostic] = field(default_factory=list)


def reassign(
    fragments: list[Fragment],
    fragment_embeddings: dict[int, Embedding | None],
    pool: EnrollmentPool,
    hop: float = DEFAULT_HOP_S,
) -> AssignmentResult:
    """FIFO assignment with overlap exclusion.

    fragment_embeddings maps fragment id to its embedding, or None for
    fragments too short to embed; those fall back to the identity of the
    nearest-DoA previously assigned fragment that is still admissible.
    """
    order = sorted(fragments, key=lambda f: (f.onset_frame, f.source_track_id))
    assignments: dict[int, str] = {}
    diagnostics: list[FragmentDiagnostic] = []
    assigned: list[Fragment] = []
    pool_matrix = pool.matrix() if pool.size else np.zeros((0, 0))

    for frag in order:
        excluded = sorted(
            {assignments[f.fragment_id] for f in assigned if f.overlaps(frag)}
        )
        candidates = [
            (idx, identity)
            for idx, identity in enumerate(pool.identities)
            if identity not in excluded
        ]
        if not candidates:
            raise OverlapExclusionError(
                f"fragment {frag.fragment_id} (frames {frag.onset_frame}-{frag.offset_frame}): "
                f"all {pool.size} identities are assigned to overlapping fragments"
            )
        emb = fragment_embeddings.get(frag.fragment_id)
        used_fallback = emb is None
        if emb is not None:
            scores = pool_matrix[[idx for idx, _ in candidates]] @ emb.vector
            best = int(np.argmax(scores))
            identity = candidates[best][1]
            score = float(scores[best])
        else:
            identity, score = _spatial_fallback(frag, assigned, assignments, candidates)
        assignments[frag.fragment_id] = identity
        assigned.append(frag)
        a, b = extraction_window(frag, DurationPolicy(), hop)
        diagnostics.append(
            FragmentDiagnostic(
                fragment_id=frag.fragment_id,
                identity=identity,
                score=score,
                excluded=excluded,
                window=(a, b),
                used_fallback=used_fallback,
            )
        )

    new_trajectories = _build_trajectories(order, assignments)
    return AssignmentResult(assignments, new_trajectories, diagnostics)


def _spatial_fallback(
    frag: Fragment,
    assigned: list[Fragment],
    assignments: dict[int, str],
    candidates: list[tuple[int, str]],
) -> tuple[str, float]:
    """Identity of the nearest-DoA previously assigned fragment that is still
    admissible; lowest pool index when there is none."""
    admissible = {identity for _, identity in candidates}
    best_identity = None
    best_dist = float("inf")
    for prev in assigned:
        identity = assignments[prev.fragment_id]
        if identity not in admissible:
            continue
        dist = angular_distance(frag.representative_doa, prev.representative_doa)
        if dist < best_dist:
            best_identity, best_dist = identity, dist
    if best_identity is None:
        best_identity = candidates[0][1]
    return best_identity, float("nan")


def _build_trajectories(
    fragments: list[Fragment], assignments: dict[int, str]
) -> list[Trajectory]:
    by_identity: dict[str, list[tuple[int, object, bool]]] = {}
    for frag in fragments:
        frames = by_identity.setdefault(assignments[frag.fragment_id], [])
        for offset, doa in enumerate(frag.doas):
            frames.append((frag.onset_frame + offset, doa, True))
    trajectories = []
    for identity in sorted(by_identity):
        frames = sorted(by_identity[identity], key=lambda f: f[0])
        trajectories.append(Trajectory(track_id=identity, frames=frames))
    return trajectories


@dataclass
class PipelineResult:
    before: list[Trajectory]
    fragments: list[Fragment]
    pool: EnrollmentPool
    assignment: AssignmentResult
    mvdr_diagnostics: MvdrDiagnostics

    @property
    def after(self) -> list[Trajectory]:
        return self.assignment.new_trajectories


def extract_fragment_embedding(
    scene: Scene,
    frag: Fragment,
    policy: DurationPolicy,
    beamformer: str,
    hop: float = DEFAULT_HOP_S,
    noise_cov_source: str = "oracle",
    inactive_frames: list[int] | None = None,
    diagnostics: MvdrDiagnostics | None = None,
) -> Embedding | None:
    """Beamform the fragment window and embed it; None when it is too short."""
    window = extraction_window(frag, policy, hop)
    steer = window_doa(frag, policy, hop)
    if beamformer == "ideal":
        mono = beamform_ideal(scene.wet, scene.ground_truth, steer, window)
    elif beamformer == "ds":
        mono = beamform_ds(scene.mixture, steer, window)
    elif beamformer == "mvdr":
        if noise_cov_source == "oracle":
            midpoint = 0.5 * (window[0] + window[1])
            target = nearest_speaker_index(scene.ground_truth, steer, midpoint)
            noise = oracle_noise_reference(scene.mixture, scene.wet, target, window)
        elif noise_cov_source == "gated":
            noise = gated_noise_reference(scene.mixture, inactive_frames or [], hop)
        else:
            raise ValueError(f"unknown noise covariance source {noise_cov_source!r}")
        mono = beamform_mvdr(scene.mixture, steer, noise, window, diagnostics=diagnostics)
    else:
        raise ValueError(f"unknown beamformer {beamformer!r}")
    try:
        return embed(mono, scene.sample_rate)
    except ShortInputError:
        return None


def run_pipeline(
    scene: Scene,
    tracker_variant: str = "gt",
    beamformer: str = "ideal",
    policy: DurationPolicy = DurationPolicy(),
    m: int = 2,
    seed: int = 0,
    hop: float = DEFAULT_HOP_S,
    noise_model: NoiseModel = NoiseModel(),
    noise_cov_source: str = "oracle",
    tracker_config: TrackerConfig | None = None,
    distractors: list[tuple[str, Embedding]] | None = None,
) -> PipelineResult:
    """track -> segment -> window -> beamform -> embed -> reassign.

    Emits both the tracker trajectories and the reassigned ones so the two can
    be evaluated as a pair. Deterministic for a given seed.
    """
    if tracker_variant == "gt":
        observations = observe_gt(scene.ground_truth, hop, scene.duration)
    elif tracker_variant == "est":
        observations = observe_est(
            scene.ground_truth, hop, noise_model, derive_seed(seed, "observe"), scene.duration
        )
    else:
        raise ValueError(f"unknown tracker variant {tracker_variant!r}")
    if tracker_config is None:
        maker = gt_tracker_config if tracker_variant == "gt" else est_tracker_config
        tracker_config = maker(m, derive_seed(seed, "tracker"))

    before = track(observations, tracker_config)
    fragments = segment(before)
    pool = build_enrollment(
        scene.voices, m, derive_seed(seed, "enrollment"), scene.sample_rate, distractors
    )

    inactive_by_track: dict[int, list[int]] = {}
    if beamformer == "mvdr" and noise_cov_source == "gated":
        num_frames = int(round(scene.duration / hop))
        for traj in before:
            active = {i for i, _, a in traj.frames if a}
            inactive_by_track[traj.track_id] = [t for t in range(num_frames) if t not in active]

    diagnostics = MvdrDiagnostics()
    embeddings: dict[int, Embedding | None] = {}
    for frag in fragments:
        embeddings[frag.fragment_id] = extract_fragment_embedding(
            scene,
            frag,
            policy,
            beamformer,
            hop,
            noise_cov_source,
            inactive_by_track.get(frag.source_track_id),
            diagnostics,
        )

    assignment = reassign(fragments, embeddings, pool, hop)
    return PipelineResult(before, fragments, pool, assignment, diagnostics)
