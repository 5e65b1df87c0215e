"""Shared fixture builders for the test suite."""

import json
import struct

import numpy as np
from PIL import Image
from scipy.io import wavfile


def write_mask_png(path, labels):
    Image.fromarray(np.asarray(labels, dtype=np.uint8)).save(path)


def write_depth_png(path, values, bits=16):
    values = np.asarray(values, dtype=np.float64)
    if bits == 16:
        Image.fromarray(np.round(values * 65535.0).astype(np.uint16)).save(path)
    elif bits == 8:
        Image.fromarray(np.round(values * 255.0).astype(np.uint8)).save(path)
    else:
        raise ValueError(bits)


def write_wav(path, samples, rate=16000, fmt="f32"):
    samples = np.asarray(samples, dtype=np.float64)
    if fmt == "f32":
        wavfile.write(path, rate, samples.astype(np.float32))
    elif fmt == "f64":
        wavfile.write(path, rate, samples)
    elif fmt == "pcm16":
        ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, rate, ints)
    else:
        raise ValueError(fmt)


def write_pcm24_wav(path, samples, rate=16000):
    """Hand-packed 24-bit PCM RIFF file (scipy cannot write 24-bit)."""
    samples = np.asarray(samples, dtype=np.float64)
    ints = np.clip(np.round(samples * 2**23), -(2**23), 2**23 - 1).astype(np.int64)
    payload = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in ints)
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt_chunk = struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, 1, rate, rate * 3, 3, 24)
    data_chunk = b"data" + struct.pack("<I", len(payload))
    path.write_bytes(header + fmt_chunk + data_chunk + payload)


def write_json(path, document):
    path.write_text(json.dumps(document, indent=2) + "\n")


def sine(freq, duration, rate, amplitude=0.5, phase=0.1):
    # small phase offset keeps samples away from exact zero
    t = np.arange(int(round(duration * rate))) / rate
    return amplitude * np.sin(2.0 * np.pi * freq * t + phase)


def noise_clip(rng, duration, rate, amplitude=0.5):
    n = int(round(duration * rate))
    return amplitude * (2.0 * rng.random(n) - 1.0)
