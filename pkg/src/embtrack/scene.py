"""Synthetic FOA acoustic scenes: intermittent speakers that move only while silent.

Channel convention is ACN order (W, Y, Z, X) with SN3D normalization, so a
plane wave s from (az, el) encodes as
    W = s,  Y = s sin(az) cos(el),  Z = s sin(el),  X = s cos(az) cos(el).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DoA, angular_distance, doa_from_unit_vector, uniform_sphere

SEPARATION_REGIMES = {
    "distant": (60.0, 180.0),
    "close": (25.0, 60.0),
}


class SceneConstraintError(RuntimeError):
    """Raised when the separation regime cannot be satisfied after bounded retries."""


@dataclass(frozen=True)
class VoiceParams:
    """Parametric stand-in for a speaker's vocal identity."""

    f0: float
    spectral_tilt: float
    resonances: tuple[tuple[float, float, float], ...]
    modulation_rate: float

    def __post_init__(self):
        if not (80.0 <= self.f0 <= 300.0):
            raise ValueError(f"f0 {self.f0} outside [80, 300] Hz")
        centers = [r[0] for r in self.resonances]
        if any(c2 <= c1 for c1, c2 in zip(centers, centers[1:])):
            raise ValueError("resonance centers must be strictly increasing")


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    num_speakers: int = 2
    duration: float = 20.0
    sample_rate: int = 16000
    snr: float | None = 15.0
    level_diff_range: tuple[float, float] = (2.0, 4.0)
    separation_regime: str = "distant"
    segment_range: tuple[float, float] = (2.0, 6.0)
    pause_range: tuple[float, float] = (1.0, 4.0)
    jump_on_silence: bool = True

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.num_speakers < 1:
            raise ValueError("need at least one speaker")
        if self.level_diff_range[0] > self.level_diff_range[1]:
            raise ValueError("level_diff_range low > high")
        if self.separation_regime not in SEPARATION_REGIMES:
            raise ValueError(f"unknown separation regime {self.separation_regime!r}")
        lo, hi = SEPARATION_REGIMES[self.separation_regime]
        # A crude satisfiability check: J mutually separated directions need room.
        if self.num_speakers > max(2, int(360.0 / max(lo, 1.0))):
            raise ValueError("separation regime unsatisfiable for this many speakers")


@dataclass
class SpeakerGroundTruth:
    speaker_id: int
    voice: VoiceParams
    segments: list[tuple[float, float, DoA]] = field(default_factory=list)

    def doa_at(self, t: float) -> DoA | None:
        """DoA if the speaker is active at time t, else None."""
        for onset, offset, doa in self.segments:
            if onset <= t < offset:
                return doa
        return None

    def nearest_segment_doa(self, t: float) -> DoA:
        """DoA of the segment whose span is closest in time to t."""
        best, best_dist = None, math.inf
        for onset, offset, doa in self.segments:
            d = 0.0 if onset <= t < offset else min(abs(t - onset), abs(t - offset))
            if d < best_dist:
                best, best_dist = doa, d
        assert best is not None
        return best


@dataclass
class FoaSignal:
    """4 x T sample matrix in ACN order (W, Y, Z, X), SN3D normalization."""

    channels: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        if self.channels.shape[0] != 4:
            raise ValueError("FOA signal must have exactly 4 channels")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError("FOA samples must be finite")

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def w(self) -> np.ndarray:
        return self.channels[0]


def foa_gains(doa: DoA) -> np.ndarray:
    """SN3D plane-wave encoding gains (W, Y, Z, X) for a direction."""
    az = math.radians(doa.azimuth)
    el = math.radians(doa.elevation)
    return np.array(
        [1.0, math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el)]
    )


def encode_foa(mono: np.ndarray, doa: DoA, sample_rate: int) -> FoaSignal:
    """Direct-path FOA encoding of a mono source at a fixed direction."""
    mono = np.asarray(mono, dtype=np.float64)
    if not np.all(np.isfinite(mono)):
        raise ValueError("source samples must be finite")
    return FoaSignal(foa_gains(doa)[:, None] * mono[None, :], sample_rate)


def sample_voice_params(rng: np.random.Generator) -> VoiceParams:
    """Draw a voice from the identity prior used for speakers and distractors.

    Ranges kept wide on purpose: the panel separation of the reference embedder
    depends on the spread of this prior.
    """
    f0 = float(np.exp(rng.uniform(np.log(80.0), np.log(300.0))))
    tilt = float(rng.uniform(-16.0, -1.0))
    resonances = (
        (float(rng.uniform(250.0, 900.0)), float(rng.uniform(60.0, 300.0)), float(rng.uniform(0.0, 18.0))),
        (float(rng.uniform(950.0, 2400.0)), float(rng.uniform(80.0, 400.0)), float(rng.uniform(0.0, 18.0))),
        (float(rng.uniform(2500.0, 5000.0)), float(rng.uniform(120.0, 600.0)), float(rng.uniform(0.0, 18.0))),
    )
    rate = float(rng.uniform(1.5, 8.0))
    return VoiceParams(f0, tilt, resonances, rate)


def _slow_noise(rng: np.random.Generator, n: int, sample_rate: float, rate_hz: float) -> np.ndarray:
    """Band-limited unit-variance-ish noise via linear interpolation of control points."""
    n_ctrl = max(2, int(math.ceil(n / sample_rate * rate_hz)) + 2)
    ctrl = rng.standard_normal(n_ctrl)
    t = np.linspace(0.0, n_ctrl - 1.0, n)
    return np.interp(t, np.arange(n_ctrl), ctrl)


def synthesize_voice(
    voice: VoiceParams, duration: float, sample_rate: int, seed: int
) -> np.ndarray:
    """Unit-RMS harmonic complex shaped by tilt and resonances, with slow AM.

    Deterministic for a given seed; two different seeds give independent
    utterances of the same voice.
    """
    n = int(round(duration * sample_rate))
    if n == 0:
        return np.zeros(0)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate

    # Small vibrato plus stochastic drift on the fundamental.
    vib = 0.004 * np.sin(2.0 * np.pi * 4.7 * t + rng.uniform(0.0, 2.0 * np.pi))
    drift = 0.006 * _slow_noise(rng, n, sample_rate, 3.0)
    inst_f0 = voice.f0 * (1.0 + vib + drift)
    phase = 2.0 * np.pi * np.cumsum(inst_f0) / sample_rate

    max_freq = min(7400.0, 0.45 * sample_rate)
    n_harm = max(1, int(max_freq / voice.f0))
    freqs = voice.f0 * np.arange(1, n_harm + 1)
    level_db = voice.spectral_tilt * np.log2(freqs / voice.f0)
    for center, bandwidth, gain_db in voice.resonances:
        if center >= 0.5 * sample_rate:
            raise ValueError("resonance center above Nyquist")
        level_db = level_db + gain_db * np.exp(-0.5 * ((freqs - center) / bandwidth) ** 2)
    amps = 10.0 ** (level_db / 20.0)

    sig = np.zeros(n)
    phases0 = rng.uniform(0.0, 2.0 * np.pi, size=n_harm)
    for k in range(n_harm):
        sig += amps[k] * np.sin((k + 1) * phase + phases0[k])

    env = 1.0 + 0.35 * np.sin(2.0 * np.pi * voice.modulation_rate * t + rng.uniform(0.0, 2.0 * np.pi))
    env *= 1.0 + 0.15 * _slow_noise(rng, n, sample_rate, 2.0)
    sig *= np.maximum(env, 0.05)

    rms = math.sqrt(float(np.mean(sig**2)))
    return sig / rms if rms > 0 else sig


def generate_diffuse_noise(duration: float, sample_rate: int, seed: int) -> FoaSignal:
    """Isotropic diffuse noise with inter-channel covariance diag(1, 1/3, 1/3, 1/3).

    Sampled directly as independent Gaussian channels with the SN3D isotropic
    variances, which is the exact infinite-direction limit of superposing
    uncorrelated plane waves from a uniform direction field.
    """
    n = int(round(duration * sample_rate))
    if n == 0:
        return FoaSignal(np.zeros((4, n)), sample_rate)
    rng = np.random.default_rng(seed)
    scales = np.array([1.0, 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0)])
    channels = scales[:, None] * rng.standard_normal((4, n))
    return FoaSignal(channels, sample_rate)


def _sample_activity(
    rng: np.random.Generator, spec: SceneSpec
) -> list[tuple[float, float]]:
    """Alternating pause/speech timeline clipped to the scene duration."""
    segments: list[tuple[float, float]] = []
    t = float(rng.uniform(0.0, spec.pause_range[1]))
    while t < spec.duration:
        seg = float(rng.uniform(*spec.segment_range))
        onset, offset = t, min(t + seg, spec.duration)
        if offset - onset >= 0.25:
            segments.append((onset, offset))
        t = t + seg + float(rng.uniform(*spec.pause_range))
    if not segments:
        segments.append((0.0, spec.duration))
    return segments


def _overlapping_doas(
    placed: list[SpeakerGroundTruth], onset: float, offset: float
) -> list[DoA]:
    doas = []
    for gt in placed:
        for s_on, s_off, doa in gt.segments:
            if s_on < offset and onset < s_off:
                doas.append(doa)
    return doas


def _respects_regime(doa: DoA, others: list[DoA], lo: float, hi: float) -> bool:
    return all(lo <= angular_distance(doa, o) <= hi for o in others)


def _draw_doa(
    rng: np.random.Generator,
    others: list[DoA],
    lo: float,
    hi: float,
    avoid: DoA | None = None,
    max_tries: int = 2000,
) -> DoA:
    for _ in range(max_tries):
        doa = doa_from_unit_vector(uniform_sphere(rng, 1)[0])
        if avoid is not None and angular_distance(doa, avoid) < 1.0:
            continue
        if _respects_regime(doa, others, lo, hi):
            return doa
    raise SceneConstraintError(
        f"could not place a source satisfying separation in [{lo}, {hi}] degrees"
    )


def generate_scene(
    spec: SceneSpec,
) -> tuple[FoaSignal, list[FoaSignal], list[SpeakerGroundTruth]]:
    """Build mixture = sum of per-speaker wet FOA signals + diffuse noise at spec.snr.

    Returns (mixture, wet signals, ground truth), all deterministic in spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = SEPARATION_REGIMES[spec.separation_regime]
    n = int(round(spec.duration * spec.sample_rate))

    speakers: list[SpeakerGroundTruth] = []
    activities: list[list[tuple[float, float]]] = []
    for j in range(spec.num_speakers):
        voice = sample_voice_params(rng)
        speakers.append(SpeakerGroundTruth(speaker_id=j, voice=voice))
        activities.append(_sample_activity(rng, spec))

    if spec.jump_on_silence:
        # Place segment DoAs in global onset order: each draw is constrained by
        # the concurrent positions already placed, so the regime holds between
        # every pair of temporally overlapping segments.
        events = sorted(
            (onset, j, offset)
            for j, activity in enumerate(activities)
            for onset, offset in activity
        )
        for onset, j, offset in events:
            others = _overlapping_doas(
                [s for k, s in enumerate(speakers) if k != j], onset, offset
            )
            prev_doa = speakers[j].segments[-1][2] if speakers[j].segments else None
            doa = _draw_doa(rng, others, lo, hi, avoid=prev_doa)
            speakers[j].segments.append((onset, offset, doa))
        for gt in speakers:
            gt.segments.sort(key=lambda s: s[0])
    else:
        for j, activity in enumerate(activities):
            placed = speakers[:j]
            for _ in range(2000):
                doa = doa_from_unit_vector(uniform_sphere(rng, 1)[0])
                ok = all(
                    _respects_regime(doa, _overlapping_doas(placed, on, off), lo, hi)
                    for on, off in activity
                )
                if ok:
                    break
            else:
                raise SceneConstraintError("static placement failed separation regime")
            for onset, offset in activity:
                speakers[j].segments.append((onset, offset, doa))

    # Per-speaker levels: offsets built from successive draws in level_diff_range,
    # randomly permuted so the louder speaker is not always the first one.
    offsets = [0.0]
    for _ in range(1, spec.num_speakers):
        offsets.append(offsets[-1] - float(rng.uniform(*spec.level_diff_range)))
    gains_db = list(rng.permutation(offsets))

    wet: list[FoaSignal] = []
    for gt, gain_db in zip(speakers, gains_db):
        channels = np.zeros((4, n))
        gain = 10.0 ** (gain_db / 20.0)
        for onset, offset, doa in gt.segments:
            seg_seed = int(rng.integers(0, 2**63 - 1))
            a = int(round(onset * spec.sample_rate))
            b = int(round(offset * spec.sample_rate))
            mono = synthesize_voice(gt.voice, (b - a) / spec.sample_rate, spec.sample_rate, seg_seed)
            mono = _apply_fades(mono, spec.sample_rate)
            channels[:, a : a + len(mono)] += foa_gains(doa)[:, None] * mono[None, :] * gain
        wet.append(FoaSignal(channels, spec.sample_rate))

    mixture = np.zeros((4, n))
    for w in wet:
        mixture += w.channels

    if spec.snr is not None and math.isfinite(spec.snr):
        noise_seed = int(rng.integers(0, 2**63 - 1))
        noise = generate_diffuse_noise(spec.duration, spec.sample_rate, noise_seed)
        speech_power = float(np.mean(mixture[0] ** 2))
        noise_power = float(np.mean(noise.channels[0] ** 2))
        if noise_power > 0 and speech_power > 0:
            target = speech_power / (10.0 ** (spec.snr / 10.0))
            noise.channels *= math.sqrt(target / noise_power)
            mixture = mixture + noise.channels

    return FoaSignal(mixture, spec.sample_rate), wet, speakers


@dataclass
class Scene:
    """A generated scene bundled with its ground truth."""

    mixture: FoaSignal
    wet: list[FoaSignal]
    ground_truth: list[SpeakerGroundTruth]

    @property
    def duration(self) -> float:
        return self.mixture.duration

    @property
    def sample_rate(self) -> int:
        return self.mixture.sample_rate

    @property
    def voices(self) -> list[VoiceParams]:
        return [gt.voice for gt in self.ground_truth]


def simulate(spec: SceneSpec) -> Scene:
    """generate_scene wrapped into a Scene container."""
    mixture, wet, ground_truth = generate_scene(spec)
    return Scene(mixture, wet, ground_truth)


def _apply_fades(mono: np.ndarray, sample_rate: int, fade_s: float = 0.02) -> np.ndarray:
    """Short raised-cosine fades avoid onset/offset clicks in the mixture."""
    n_fade = min(int(fade_s * sample_rate), len(mono) // 2)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        mono = mono.copy()
        mono[:n_fade] *= ramp
        mono[-n_fade:] *= ramp[::-1]
    return mono
