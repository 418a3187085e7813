"""Speaker embeddings: deterministic spectral-statistics extractor, enrollment
pools, cosine scoring, and a text interchange format for external embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import StftConfig, num_full_frames, stft
from .scene import VoiceParams, sample_voice_params, synthesize_voice

_N_MEL_BANDS = 24
_MEL_LO_HZ = 100.0
_MEL_HI_HZ = 7600.0
_LOG_FLOOR = 1e-30
MIN_EMBED_FRAMES = 3

ENROLLMENT_UTTERANCE_S = 20.0


class ShortInputError(ValueError):
    """Signal shorter than the minimum number of analysis frames."""


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding components must be finite")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding must be unit norm, got {norm}")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity of two unit-norm embeddings, in [-1, 1]."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.clip(np.dot(a.vector, b.vector), -1.0, 1.0))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_bands: int = _N_MEL_BANDS) -> np.ndarray:
    """Triangular mel filters over [100, 7600] Hz, shape (n_bands, n_fft//2 + 1)."""
    if _MEL_HI_HZ > sample_rate / 2:
        raise ValueError(f"sample rate {sample_rate} too low for {_MEL_HI_HZ} Hz bands")
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(_MEL_LO_HZ), _hz_to_mel(_MEL_HI_HZ), n_bands + 2))
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    fb = np.zeros((n_bands, len(freqs)))
    for b in range(n_bands):
        lo, mid, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[b] = np.maximum(0.0, np.minimum(up, down))
    return fb


def embed(signal: np.ndarray, sample_rate: int) -> Embedding:
    """Log-mel band statistics embedding of a mono signal.

    Per band: temporal mean and standard deviation of log-energy. The mean
    block is centered on its own average, which cancels any constant gain on
    the input; the concatenated feature vector is L2-normalized.
    """
    signal = np.asarray(signal, dtype=np.float64)
    cfg = StftConfig()
    n_window = cfg.window_samples(sample_rate)
    n_hop = cfg.hop_samples(sample_rate)
    if num_full_frames(len(signal), n_window, n_hop) < MIN_EMBED_FRAMES:
        raise ShortInputError(
            f"need at least {MIN_EMBED_FRAMES} analysis frames "
            f"({n_window + (MIN_EMBED_FRAMES - 1) * n_hop} samples), got {len(signal)}"
        )
    spec = stft(signal, n_window, n_hop, pad=False)
    power = np.abs(spec) ** 2
    fb = mel_filterbank(sample_rate, n_window)
    energies = fb @ power
    # Floor 60 dB below the loudest band so stray silent frames (window edges,
    # pauses) cannot dominate the statistics. The floor scales with the signal,
    # which keeps the embedding exactly gain-invariant.
    floor = max(float(energies.max()) * 1e-6, _LOG_FLOOR)
    log_energy = np.log(np.maximum(energies, floor))
    means = log_energy.mean(axis=1)
    stds = log_energy.std(axis=1)
    means = means - means.mean()
    feat = np.concatenate([means, stds])
    norm = float(np.linalg.norm(feat))
    if norm < 1e-12:
        feat = np.full(feat.shape, 1.0 / np.sqrt(feat.shape[0]))
        norm = 1.0
    return Embedding(feat / norm)


@dataclass
class EnrollmentPool:
    """Ordered labeled reference embeddings; size is the identity budget M."""

    entries: list[tuple[str, Embedding]]

    def __post_init__(self):
        ids = [identity for identity, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("enrollment identities must be unique")

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def identities(self) -> list[str]:
        return [identity for identity, _ in self.entries]

    def matrix(self) -> np.ndarray:
        return np.stack([emb.vector for _, emb in self.entries])


def build_distractors(
    count: int, seed: int, sample_rate: int = 16000
) -> list[tuple[str, Embedding]]:
    """Distractor entries drawn from the voice prior, reusable across scenes."""
    rng = np.random.default_rng(seed)
    entries = []
    for k in range(count):
        voice = sample_voice_params(rng)
        utt = synthesize_voice(voice, ENROLLMENT_UTTERANCE_S, sample_rate, int(rng.integers(2**63 - 1)))
        entries.append((f"distractor{k:02d}", embed(utt, sample_rate)))
    return entries


def build_enrollment(
    voices: list[VoiceParams],
    m: int,
    seed: int,
    sample_rate: int = 16000,
    distractors: list[tuple[str, Embedding]] | None = None,
) -> EnrollmentPool:
    """Enroll the scene voices plus m - len(voices) distractor identities.

    Each entry is the embedding of a fresh 20 s utterance never used in any
    mixture. Scene speakers come first (speakerNN), then distractors, which
    may be passed in precomputed (the predefined-pool setting) or are sampled
    here from the voice prior.
    """
    if m < len(voices):
        raise ValueError(f"pool size {m} smaller than number of scene voices {len(voices)}")
    rng = np.random.default_rng(seed)
    entries: list[tuple[str, Embedding]] = []
    for j, voice in enumerate(voices):
        utt = synthesize_voice(voice, ENROLLMENT_UTTERANCE_S, sample_rate, int(rng.integers(2**63 - 1)))
        entries.append((f"speaker{j:02d}", embed(utt, sample_rate)))
    needed = m - len(voices)
    if distractors is not None:
        if len(distractors) < needed:
            raise ValueError(f"need {needed} distractors, got {len(distractors)}")
        entries.extend(distractors[:needed])
    else:
        entries.extend(build_distractors(needed, int(rng.integers(2**63 - 1)), sample_rate))
    return EnrollmentPool(entries)


class SpkembParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def save_embeddings(pool: EnrollmentPool, path: str | Path) -> None:
    """Write a pool in the SPKEMB v1 text format."""
    dim = pool.entries[0][1].dim if pool.entries else 0
    lines = [f"SPKEMB v1 dim={dim} count={pool.size}"]
    for identity, emb in pool.entries:
        lines.append(identity + "," + ",".join(repr(float(c)) for c in emb.vector))
    Path(path).write_text("\n".join(lines) + "\n")


def load_embeddings(path: str | Path) -> EnrollmentPool:
    """Read a SPKEMB v1 file; raises SpkembParseError with the offending line.

    An empty file is a valid empty pool.
    """
    text = Path(path).read_text()
    if not text.strip():
        return EnrollmentPool([])
    lines = text.splitlines()
    if not lines:
        raise SpkembParseError("missing SPKEMB header", 1)
    header = lines[0].split()
    if len(header) != 4 or header[0] != "SPKEMB" or header[1] != "v1":
        raise SpkembParseError(f"bad header {lines[0]!r}", 1)
    try:
        dim = int(header[2].removeprefix("dim="))
        count = int(header[3].removeprefix("count="))
    except ValueError:
        raise SpkembParseError(f"bad header fields {lines[0]!r}", 1) from None
    entries: list[tuple[str, Embedding]] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim + 1:
            raise SpkembParseError(
                f"expected {dim} components, got {len(parts) - 1}", i
            )
        try:
            vec = np.array([float(p) for p in parts[1:]])
        except ValueError:
            raise SpkembParseError("non-numeric component", i) from None
        norm = float(np.linalg.norm(vec))
        if norm == 0:
            raise SpkembParseError("zero-norm embedding", i)
        entries.append((parts[0], Embedding(vec / norm)))
    if len(entries) != count:
        raise SpkembParseError(f"header announced {count} rows, found {len(entries)}", len(lines))
    return EnrollmentPool(entries)
