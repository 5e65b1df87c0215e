"""Similarity metrics between audio pairs.

Four measures over a shared 25 ms / 10 ms analysis grid at 16 kHz:

* ``mfcc_dtw`` — dynamic-time-warping distance between MFCC sequences,
  total path cost divided by path length. 0 means identical; lower is
  more similar.
* ``zcr`` — 1 minus the mean absolute difference of per-frame
  zero-crossing rates, in [0, 1].
* ``chroma`` — mean per-frame cosine similarity of 12-bin pitch-class
  profiles, in [-1, 1].
* ``spectral_contrast`` — mean per-frame cosine similarity of per-band
  peak-to-valley contrasts, in [-1, 1].

Every knob lives in :class:`MetricConfig`; the defaults are frozen so
reports stay comparable across runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window
from scipy.spatial.distance import cdist

from .errors import ValidationError
from .render import MonoClip, MultichannelAudio, downmix, resample

#: Feature dimensionality per kind under the default configuration.
KIND_DIMS = {"mfcc": 13, "zcr": 1, "chroma": 12, "spectral_contrast": 7}


@dataclass(frozen=True)
class MetricConfig:
    sample_rate: int = 16000
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 40
    n_mfcc: int = 13
    n_chroma: int = 12
    reference_freq: float = 440.0
    contrast_min_freq: float = 200.0
    n_contrast_bands: int = 7
    quantile: float = 0.2
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.sample_rate <= 0 or self.frame_ms <= 0 or self.hop_ms <= 0:
            raise ValidationError("sample rate, frame and hop must be positive")
        if self.frame_length > self.n_fft:
            raise ValidationError(
                f"frame of {self.frame_length} samples exceeds n_fft={self.n_fft}"
            )
        if not 0 < self.quantile <= 0.5:
            raise ValidationError(f"quantile must lie in (0, 0.5], got {self.quantile!r}")
        if self.n_mfcc > self.n_mels:
            raise ValidationError("n_mfcc cannot exceed n_mels")
        if self.n_contrast_bands < 2:
            raise ValidationError("need at least 2 contrast bands")

    @property
    def frame_length(self) -> int:
        return int(round(self.sample_rate * self.frame_ms / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length


DEFAULT_CONFIG = MetricConfig()


@dataclass(frozen=True)
class FeatureSequence:
    """A ``(T, D)`` array of frame vectors tagged with its feature kind."""

    frames: np.ndarray
    frame_rate: float
    kind: str

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValidationError(f"feature frames must be (T>=1, D>=1), got {arr.shape}")
        if not self.kind:
            raise ValidationError("feature kind must be non-empty")
        object.__setattr__(self, "frames", arr)


@dataclass(frozen=True)
class SimilarityReport:
    mfcc_dtw: float
    zcr: float
    chroma: float
    spectral_contrast: float

    def to_dict(self) -> dict:
        return {
            "mfcc_dtw": self.mfcc_dtw,
            "zcr": self.zcr,
            "chroma": self.chroma,
            "spectral_contrast": self.spectral_contrast,
        }


def _require_rate(clip: MonoClip, cfg: MetricConfig):
    if clip.sample_rate != cfg.sample_rate:
        raise ValidationError(
            f"clip at {clip.sample_rate} Hz; metrics run at {cfg.sample_rate} Hz "
            "(use compare() for automatic resampling)"
        )


def _frame(x: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """Slice into overlapping frames; partial tail samples are dropped."""
    if x.size < frame_length:
        raise ValidationError(
            f"clip of {x.size} samples is shorter than one {frame_length}-sample frame"
        )
    count = 1 + (x.size - frame_length) // hop_length
    index = hop_length * np.arange(count)[:, None] + np.arange(frame_length)[None, :]
    return x[index]


@lru_cache(maxsize=8)
def _hann(frame_length: int) -> np.ndarray:
    return get_window("hann", frame_length, fftbins=True)  # periodic


def _stft_magnitude(clip: MonoClip, cfg: MetricConfig) -> np.ndarray:
    frames = _frame(clip.samples, cfg.frame_length, cfg.hop_length)
    return np.abs(np.fft.rfft(frames * _hann(cfg.frame_length), n=cfg.n_fft, axis=1))


def _bin_freqs(sample_rate: int, n_fft: int) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)


@lru_cache(maxsize=8)
def _mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular filters spaced evenly on the 2595*log10(1 + f/700) scale."""

    def to_mel(f):
        return 2595.0 * math.log10(1.0 + f / 700.0)

    nyquist = sample_rate / 2.0
    anchors = 700.0 * (10.0 ** (np.linspace(0.0, to_mel(nyquist), n_mels + 2) / 2595.0) - 1.0)
    freqs = _bin_freqs(sample_rate, n_fft)
    bank = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, centre, hi = anchors[m], anchors[m + 1], anchors[m + 2]
        rising = (freqs - lo) / (centre - lo)
        falling = (hi - freqs) / (hi - centre)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def mfcc(clip: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> FeatureSequence:
    """Mel-frequency cepstra: log mel energies -> orthonormal DCT-II."""
    _require_rate(clip, cfg)
    power = _stft_magnitude(clip, cfg) ** 2
    energies = power @ _mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels).T
    cepstra = dct(np.log(np.maximum(energies, cfg.log_floor)), type=2, axis=1, norm="ortho")
    return FeatureSequence(cepstra[:, : cfg.n_mfcc], cfg.frame_rate, "mfcc")


def dtw_distance(a: FeatureSequence, b: FeatureSequence) -> float:
    """Path-normalized DTW with Euclidean local costs.

    Steps are (1,0), (0,1), (1,1) from endpoint to endpoint. Returns the
    minimum total cost divided by the shortest length among cost-optimal
    paths; the dynamic program tracks (cost, length) lexicographically.
    """
    if a.kind != b.kind:
        raise ValidationError(f"cannot warp {a.kind!r} against {b.kind!r}")
    if a.frames.shape[1] != b.frames.shape[1]:
        raise ValidationError(
            f"feature dims differ: {a.frames.shape[1]} vs {b.frames.shape[1]}"
        )
    cost = cdist(a.frames, b.frames)
    rows, cols = cost.shape
    local = cost.tolist()

    first = local[0]
    prev_cost = [0.0] * cols
    prev_len = [0] * cols
    prev_cost[0], prev_len[0] = first[0], 1
    for j in range(1, cols):
        prev_cost[j] = prev_cost[j - 1] + first[j]
        prev_len[j] = j + 1
    for i in range(1, rows):
        row = local[i]
        cur_cost = [0.0] * cols
        cur_len = [0] * cols
        cur_cost[0] = prev_cost[0] + row[0]
        cur_len[0] = prev_len[0] + 1
        for j in range(1, cols):
            best_cost, best_len = prev_cost[j - 1], prev_len[j - 1]  # diagonal
            if prev_cost[j] < best_cost or (prev_cost[j] == best_cost and prev_len[j] < best_len):
                best_cost, best_len = prev_cost[j], prev_len[j]
            if cur_cost[j - 1] < best_cost or (cur_cost[j - 1] == best_cost and cur_len[j - 1] < best_len):
                best_cost, best_len = cur_cost[j - 1], cur_len[j - 1]
            cur_cost[j] = best_cost + row[j]
            cur_len[j] = best_len + 1
        prev_cost, prev_len = cur_cost, cur_len
    return prev_cost[-1] / prev_len[-1]


def zcr(clip: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> FeatureSequence:
    """Per-frame zero-crossing rate: changes of (x >= 0) over frame_length-1."""
    _require_rate(clip, cfg)
    frames = _frame(clip.samples, cfg.frame_length, cfg.hop_length)
    nonneg = frames >= 0.0
    rates = np.mean(nonneg[:, 1:] != nonneg[:, :-1], axis=1)
    return FeatureSequence(rates[:, None], cfg.frame_rate, "zcr")


def zcr_similarity(a: MonoClip, b: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """1 - mean |zcr_a - zcr_b| over the overlapping frames."""
    za = zcr(a, cfg).frames[:, 0]
    zb = zcr(b, cfg).frames[:, 0]
    count = min(za.size, zb.size)
    return 1.0 - float(np.mean(np.abs(za[:count] - zb[:count])))


@lru_cache(maxsize=8)
def _chroma_fold(sample_rate: int, n_fft: int, n_chroma: int, reference: float) -> np.ndarray:
    """0/1 matrix folding magnitude bins onto pitch classes; DC is dropped."""
    freqs = _bin_freqs(sample_rate, n_fft)
    fold = np.zeros((freqs.size, n_chroma))
    for k in range(1, freqs.size):
        midi = int(round(69.0 + 12.0 * math.log2(freqs[k] / reference)))
        fold[k, midi % n_chroma] = 1.0
    return fold


def chroma(clip: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> FeatureSequence:
    """Pitch-class energy profiles from folded STFT magnitudes."""
    _require_rate(clip, cfg)
    magnitude = _stft_magnitude(clip, cfg)
    fold = _chroma_fold(cfg.sample_rate, cfg.n_fft, cfg.n_chroma, cfg.reference_freq)
    return FeatureSequence(magnitude @ fold, cfg.frame_rate, "chroma")


def _mean_frame_cosine(a: FeatureSequence, b: FeatureSequence) -> float:
    """Frame-wise cosine, averaged; zero-norm frames contribute 0 but count."""
    count = min(a.frames.shape[0], b.frames.shape[0])
    fa, fb = a.frames[:count], b.frames[:count]
    dots = np.einsum("ij,ij->i", fa, fb)
    norms = np.linalg.norm(fa, axis=1) * np.linalg.norm(fb, axis=1)
    sims = np.zeros(count)
    valid = norms > 0.0
    sims[valid] = dots[valid] / norms[valid]
    return float(np.mean(sims))


def chroma_similarity(a: MonoClip, b: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    return _mean_frame_cosine(chroma(a, cfg), chroma(b, cfg))


@lru_cache(maxsize=8)
def _contrast_bands(sample_rate: int, n_fft: int, min_freq: float, n_bands: int) -> tuple:
    """Octave band bin ranges: [0, fmin), [fmin, 2 fmin), ..., [*, Nyquist]."""
    nyquist = sample_rate / 2.0
    edges = [0.0] + [min_freq * (2.0**b) for b in range(n_bands - 1)] + [nyquist]
    if any(hi <= lo for lo, hi in zip(edges, edges[1:])):
        raise ValidationError(
            f"contrast bands collapse: min_freq={min_freq}, bands={n_bands}, "
            f"nyquist={nyquist}"
        )
    freqs = _bin_freqs(sample_rate, n_fft)
    ranges = []
    for band in range(n_bands):
        lo, hi = edges[band], edges[band + 1]
        inside = (freqs >= lo) & ((freqs <= hi) if band == n_bands - 1 else (freqs < hi))
        (bins,) = np.nonzero(inside)
        if bins.size == 0:
            raise ValidationError(f"contrast band [{lo:g}, {hi:g}] Hz holds no FFT bins")
        ranges.append((int(bins[0]), int(bins[-1]) + 1))
    return tuple(ranges)


def spectral_contrast(clip: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG) -> FeatureSequence:
    """Per-band log ratio between the top and bottom magnitude quintiles."""
    _require_rate(clip, cfg)
    magnitude = _stft_magnitude(clip, cfg)
    bands = _contrast_bands(cfg.sample_rate, cfg.n_fft, cfg.contrast_min_freq, cfg.n_contrast_bands)
    out = np.zeros((magnitude.shape[0], len(bands)))
    for index, (lo, hi) in enumerate(bands):
        ordered = np.sort(magnitude[:, lo:hi], axis=1)
        take = max(1, int(round(cfg.quantile * (hi - lo))))
        valley = np.maximum(ordered[:, :take].mean(axis=1), cfg.log_floor)
        peak = np.maximum(ordered[:, -take:].mean(axis=1), cfg.log_floor)
        out[:, index] = np.log(peak) - np.log(valley)
    return FeatureSequence(out, cfg.frame_rate, "spectral_contrast")


def spectral_contrast_similarity(
    a: MonoClip, b: MonoClip, cfg: MetricConfig = DEFAULT_CONFIG
) -> float:
    return _mean_frame_cosine(spectral_contrast(a, cfg), spectral_contrast(b, cfg))


def _as_metric_clip(audio, cfg: MetricConfig) -> MonoClip:
    clip = downmix(audio) if isinstance(audio, MultichannelAudio) else audio
    if not isinstance(clip, MonoClip):
        raise ValidationError(f"compare expects MonoClip or MultichannelAudio, got {type(audio).__name__}")
    return resample(clip, cfg.sample_rate)


def compare(a, b, cfg: MetricConfig = DEFAULT_CONFIG) -> SimilarityReport:
    """All four metrics for a pair of clips or multichannel buffers.

    Multichannel input is downmixed by unweighted channel mean; clips at
    other rates are resampled to ``cfg.sample_rate`` first.
    """
    ca = _as_metric_clip(a, cfg)
    cb = _as_metric_clip(b, cfg)
    return SimilarityReport(
        mfcc_dtw=dtw_distance(mfcc(ca, cfg), mfcc(cb, cfg)),
        zcr=zcr_similarity(ca, cb, cfg),
        chroma=chroma_similarity(ca, cb, cfg),
        spectral_contrast=spectral_contrast_similarity(ca, cb, cfg),
    )


def config_dict(cfg: MetricConfig = DEFAULT_CONFIG) -> dict:
    """The parameter set echoed into serialized reports."""
    return asdict(cfg)
