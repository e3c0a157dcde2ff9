"""WAV file I/O.

Reads PCM 16-bit, PCM 24-bit, PCM 32-bit and IEEE float 32/64 multichannel
files into float arrays scaled to [-1, 1] full scale, preserving the sample
rate.  Writes 32-bit float (the default for enhanced output), 16-bit PCM and
24-bit PCM.  scipy handles everything except 24-bit writing, which is packed
by hand; scipy reads 24-bit PCM left-justified into int32, so the int32
scaling covers both depths.
"""

from __future__ import annotations

import struct
import wave

import numpy as np
from scipy.io import wavfile

from .dsp import SignalBuffer

_INT_SCALE = {np.dtype(np.int16): 2.0**15, np.dtype(np.int32): 2.0**31}


def read_wav(path) -> SignalBuffer:
    """Read a WAV file into a SignalBuffer with channels on the first axis."""
    fs, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    data = data.T  # (channels, samples)
    if data.dtype in _INT_SCALE:
        out = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        out = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    return SignalBuffer(out, float(fs))


def write_wav(path, buf: SignalBuffer, encoding: str = "float32") -> None:
    """Write a SignalBuffer to a WAV file.

    ``encoding`` is one of ``float32`` (default), ``pcm16`` or ``pcm24``.
    Integer encodings clip to full scale.
    """
    if np.iscomplexobj(buf.samples):
        raise ValueError("cannot write complex samples; take the real part first")
    fs = int(round(buf.sample_rate_hz))
    data = buf.samples.T  # (samples, channels)
    if data.shape[1] == 1:
        data = data[:, 0]
    if encoding == "float32":
        wavfile.write(path, fs, data.astype(np.float32))
    elif encoding == "pcm16":
        scaled = np.clip(np.round(data * 2.0**15), -(2.0**15), 2.0**15 - 1)
        wavfile.write(path, fs, scaled.astype(np.int16))
    elif encoding == "pcm24":
        _write_pcm24(path, fs, np.atleast_2d(data.T).T)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def _write_pcm24(path, fs: int, data: np.ndarray) -> None:
    """Pack (samples, channels) floats as little-endian 3-byte PCM frames."""
    scaled = np.clip(np.round(data * 2.0**23), -(2.0**23), 2.0**23 - 1).astype(np.int32)
    raw = bytearray()
    for frame in scaled:
        for v in frame:
            raw += struct.pack("<i", int(v))[:3]
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(data.shape[1])
        fh.setsampwidth(3)
        fh.setframerate(fs)
        fh.writeframes(bytes(raw))
