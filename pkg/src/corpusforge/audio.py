"""Minimal WAV operations: load, save, peak-normalize, resample.

Only RIFF WAV is supported (PCM16 or float32 in, PCM16 mono out); anything
else must be pre-converted by the importer.
"""

from __future__ import annotations

import warnings
import wave
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioFormatError

# PCM16 quantization unit; matches the 1-LSB round-trip tolerance.
PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def load_wav(path) -> AudioBuffer:
    """Load a PCM16 or float32 WAV, averaging channels to mono.

    Amplitudes are scaled to [-1, 1]; PCM16 values map to ``n / 32768``.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioFormatError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise AudioFormatError(f"unsupported WAV sample format {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioBuffer(samples=samples, sample_rate_hz=int(rate))


def save_wav(buf: AudioBuffer, path) -> None:
    """Write mono PCM16; load(save(x)) reproduces x within 1 LSB."""
    scaled = np.round(buf.samples * PCM16_SCALE)
    pcm = np.clip(scaled, -32768, 32767).astype(np.int16)
    wavfile.write(str(path), buf.sample_rate_hz, pcm)


def wav_duration_s(path) -> float:
    """Clip duration from the WAV header without decoding samples."""
    try:
        with wave.open(str(path), "rb") as fh:
            return fh.getnframes() / fh.getframerate()
    except (wave.Error, EOFError):
        # Non-PCM container (e.g. float32); fall back on a full read.
        return load_wav(path).duration_s


def peak_normalize(buf: AudioBuffer, target_peak: float = 0.95) -> AudioBuffer:
    """Scale so the maximum absolute sample equals target_peak.

    All-zero input is returned unchanged; scaling an already-normalized
    buffer again is a no-op up to float rounding.
    """
    if not 0.0 < target_peak <= 1.0:
        raise ValueError(f"target_peak must be in (0, 1], got {target_peak}")
    if len(buf.samples) == 0:
        raise ValueError("cannot normalize an empty buffer")
    peak = float(np.max(np.abs(buf.samples)))
    if peak == 0.0:
        return buf
    samples = np.clip(buf.samples * (target_peak / peak), -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate_hz=buf.sample_rate_hz)


def resample(buf: AudioBuffer, target_hz: int, quality: str = "linear") -> AudioBuffer:
    """Resample to target_hz; output length is round(n * target / source).

    ``quality`` is "linear" (default) or "sinc" (polyphase windowed-sinc).
    Same rate in returns the buffer unchanged.
    """
    if target_hz < 1000:
        raise ValueError(f"target_hz must be >= 1000, got {target_hz}")
    source_hz = buf.sample_rate_hz
    if target_hz == source_hz:
        return buf
    n_in = len(buf.samples)
    n_out = round(n_in * target_hz / source_hz)
    if n_in == 0 or n_out == 0:
        return AudioBuffer(samples=np.zeros(0), sample_rate_hz=target_hz)
    if quality == "linear":
        t_out = np.arange(n_out) / target_hz
        t_in = np.arange(n_in) / source_hz
        samples = np.interp(t_out, t_in, buf.samples)
    elif quality == "sinc":
        g = np.gcd(target_hz, source_hz)
        samples = resample_poly(buf.samples, target_hz // g, source_hz // g)
        if len(samples) > n_out:
            samples = samples[:n_out]
        elif len(samples) < n_out:
            samples = np.pad(samples, (0, n_out - len(samples)))
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise ValueError(f"unknown resample quality {quality!r}")
    return AudioBuffer(samples=samples, sample_rate_hz=target_hz)
