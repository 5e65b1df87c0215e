"""Direct-path 5.1 surround rendering of placed mono sources.

Each source contributes one delayed, distance-attenuated copy of its clip
per channel: delay = distance / speed_of_sound, weight = gain / max(d, clamp),
with the clamp (default 1 m) preventing blow-up at tiny distances. There are
no reflections; room dimensions are carried in the config but do not affect
the output. Delays round to the nearest sample unless the linear-interpolation
fractional mode is switched on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ValidationError

#: Channel order of every multichannel buffer and written WAV, matching the
#: standard 5.1 speaker-mask ordering.
CHANNEL_ORDER = ("FL", "FR", "C", "LFE", "SL", "SR")

#: Microphone positions in room metres, (frontal, vertical, lateral).
DEFAULT_MIC_POSITIONS = {
    "FL": (0.0, 0.0, 100.0),
    "FR": (0.0, 0.0, -100.0),
    "C": (100.0, 0.0, 0.0),
    "LFE": (0.0, -100.0, 0.0),
    "SL": (-100.0, 0.0, 0.0),
    "SR": (0.0, 100.0, 0.0),
}

NORMALIZE_PEAK = 0.99
LFE_CUTOFF_HZ = 120.0


def _as_position(value, context: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ValidationError(f"{context} must be a 3-vector, got {value!r}") from None
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValidationError(f"{context} must be finite, got {value!r}")
    return (x, y, z)


@dataclass(frozen=True)
class MonoClip:
    """Single-channel audio as float64 samples, nominally within [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("clip samples must be a non-empty 1D array")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("clip samples contain non-finite values")
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValidationError(f"sample rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MultichannelAudio:
    """A ``(6, T)`` float64 buffer in :data:`CHANNEL_ORDER`."""

    channels: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(CHANNEL_ORDER) or arr.shape[1] == 0:
            raise ValidationError(
                f"expected a ({len(CHANNEL_ORDER)}, T>=1) channel buffer, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("channel buffer contains non-finite values")
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValidationError(f"sample rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "channels", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.channels.shape[1] / self.sample_rate


@dataclass(frozen=True)
class SourcePlacement:
    """A mono clip positioned in the room with a non-negative gain."""

    position: tuple[float, float, float]
    clip: MonoClip
    gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _as_position(self.position, "source position"))
        if not (isinstance(self.gain, (int, float)) and math.isfinite(self.gain) and self.gain >= 0.0):
            raise ValidationError(f"gain must be finite and >= 0, got {self.gain!r}")
        object.__setattr__(self, "gain", float(self.gain))


@dataclass(frozen=True)
class MicArray:
    """Six named microphone positions, one per output channel."""

    positions: dict[str, tuple[float, float, float]]

    def __post_init__(self):
        if set(self.positions) != set(CHANNEL_ORDER):
            raise ValidationError(
                f"mic array must define exactly {sorted(CHANNEL_ORDER)}, "
                f"got {sorted(self.positions)}"
            )
        cleaned = {
            name: _as_position(pos, f"mic {name} position")
            for name, pos in self.positions.items()
        }
        object.__setattr__(self, "positions", cleaned)

    @classmethod
    def default(cls) -> "MicArray":
        return cls(dict(DEFAULT_MIC_POSITIONS))


@dataclass(frozen=True)
class RoomConfig:
    """Rendering parameters plus room dimensions (metres, 1 px = 1 m).

    The dimensions document the simulated space; the direct-path model never
    reflects off walls, so they do not influence samples.
    """

    width: float = 1024.0
    height: float = 1024.0
    length: float = 512.0
    sample_rate: int = 16000
    speed_of_sound: float = 343.0
    attenuation_clamp: float = 1.0
    fractional_delay: bool = False
    lfe_lowpass: bool = False

    def __post_init__(self):
        for name in ("width", "height", "length", "speed_of_sound", "attenuation_clamp"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"room {name} must be positive, got {value!r}")
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValidationError(f"sample rate must be a positive integer, got {self.sample_rate!r}")

    @classmethod
    def from_image_dims(cls, width: int, height: int, **kwargs) -> "RoomConfig":
        """Room sized from the image: w x h footprint, half-width length."""
        return cls(width=float(width), height=float(height), length=0.5 * float(width), **kwargs)


def delay_and_attenuation(
    source: tuple[float, float, float],
    mic: tuple[float, float, float],
    cfg: RoomConfig | None = None,
) -> tuple[float, float]:
    """Propagation delay (seconds) and clamped inverse-distance weight."""
    if cfg is None:
        cfg = RoomConfig()
    sx, sy, sz = _as_position(source, "source position")
    mx, my, mz = _as_position(mic, "mic position")
    dx, dy, dz = sx - mx, sy - my, sz - mz
    distance = math.sqrt(dx * dx + dy * dy + dz * dz)
    return distance / cfg.speed_of_sound, 1.0 / max(distance, cfg.attenuation_clamp)


def normalize(audio: MultichannelAudio) -> MultichannelAudio:
    """Scale all channels jointly to a 0.99 peak when the peak exceeds 1."""
    peak = float(np.max(np.abs(audio.channels)))
    if peak <= 1.0:
        return audio
    return MultichannelAudio(audio.channels * (NORMALIZE_PEAK / peak), audio.sample_rate)


_normalize = normalize


def _lfe_filter(x: np.ndarray, sample_rate: int) -> np.ndarray:
    if sample_rate <= 2 * LFE_CUTOFF_HZ:
        raise ValidationError(
            f"LFE low-pass needs sample rate > {2 * LFE_CUTOFF_HZ:g} Hz, got {sample_rate}"
        )
    sos = signal.butter(4, LFE_CUTOFF_HZ, btype="low", fs=sample_rate, output="sos")
    return signal.sosfilt(sos, x)


def render(
    placements,
    mics: MicArray | None = None,
    cfg: RoomConfig | None = None,
    *,
    normalize: bool = True,
) -> MultichannelAudio:
    """Mix every placement into a six-channel buffer.

    Parameters
    ----------
    placements:
        Iterable of :class:`SourcePlacement`; clips must already be at
        ``cfg.sample_rate``.
    mics, cfg:
        Microphone array and render parameters; defaults used when omitted.
    normalize:
        Apply joint peak normalization to the finished mix (default).

    The buffer length is the smallest T containing every delayed clip.
    Accumulation order is deterministic (placement order, then channel
    order), so identical inputs give bit-identical output.
    """
    if mics is None:
        mics = MicArray.default()
    if cfg is None:
        cfg = RoomConfig()
    placements = list(placements)
    if not placements:
        raise ValidationError("render needs at least one source placement")
    for placement in placements:
        if placement.clip.sample_rate != cfg.sample_rate:
            raise ValidationError(
                f"clip at {placement.clip.sample_rate} Hz does not match render "
                f"rate {cfg.sample_rate} Hz; resample first"
            )

    fs = cfg.sample_rate
    plan = []
    total = 1
    for placement in placements:
        x = placement.clip.samples
        for index, name in enumerate(CHANNEL_ORDER):
            delay, weight = delay_and_attenuation(placement.position, mics.positions[name], cfg)
            scaled = delay * fs
            if cfg.fractional_delay:
                start = int(math.floor(scaled))
                frac = scaled - start
            else:
                start = int(round(scaled))
                frac = 0.0
            plan.append((index, start, frac, placement.gain * weight, x))
            total = max(total, start + x.size + (1 if frac > 0.0 else 0))

    out = np.zeros((len(CHANNEL_ORDER), total))
    for index, start, frac, weight, x in plan:
        if frac == 0.0:
            out[index, start : start + x.size] += weight * x
        else:
            out[index, start : start + x.size] += weight * (1.0 - frac) * x
            out[index, start + 1 : start + 1 + x.size] += weight * frac * x
    if cfg.lfe_lowpass:
        lfe = CHANNEL_ORDER.index("LFE")
        out[lfe] = _lfe_filter(out[lfe], fs)

    audio = MultichannelAudio(out, fs)
    return _normalize(audio) if normalize else audio


def downmix(audio: MultichannelAudio) -> MonoClip:
    """Unweighted channel mean as a mono clip."""
    return MonoClip(np.mean(audio.channels, axis=0), audio.sample_rate)


def resample(clip: MonoClip, target_rate: int) -> MonoClip:
    """Polyphase windowed-sinc resampling to ``target_rate``.

    Output length is ``round(n * target / source)``; a clip already at the
    target rate is returned unchanged.
    """
    if not (isinstance(target_rate, (int, np.integer)) and target_rate > 0):
        raise ValidationError(f"target rate must be a positive integer, got {target_rate!r}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    divisor = math.gcd(clip.sample_rate, target_rate)
    up, down = target_rate // divisor, clip.sample_rate // divisor
    out = signal.resample_poly(clip.samples, up, down)
    n_out = int(round(clip.samples.size * target_rate / clip.sample_rate))
    n_out = max(n_out, 1)
    if out.size > n_out:
        out = out[:n_out]
    elif out.size < n_out:
        out = np.pad(out, (0, n_out - out.size))
    return MonoClip(out, target_rate)
