"""WAV and JSON ingestion for frames and array geometry."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .correlation import Frame
from .errors import CorrelationError

_PCM_SCALES = {np.dtype(np.int16): 32768.0,
               np.dtype(np.int32): 2147483648.0}


def _to_float(data):
    scale = _PCM_SCALES.get(data.dtype)
    if scale is not None:
        return data.astype(np.float64) / scale
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise CorrelationError(f"unsupported WAV sample format: {data.dtype}")


def read_frame(paths):
    """Load a multichannel frame from one WAV file or several mono files.

    A single path must hold all M channels; a list of paths must hold one
    mono channel each, with identical sample rates and lengths (sample
    rate mismatches are an error, never a resample).
    """
    if isinstance(paths, (str, bytes)) or not hasattr(paths, "__iter__"):
        paths = [paths]
    paths = list(paths)
    rates, chans = [], []
    for path in paths:
        rate, data = wavfile.read(path)
        data = _to_float(np.asarray(data))
        if data.ndim == 1:
            chans.append(data[None, :])
        else:
            chans.append(data.T)
        rates.append(float(rate))
    if len(set(rates)) != 1:
        raise CorrelationError(f"sample-rate mismatch across files: {rates}")
    lengths = {c.shape[1] for c in chans}
    if len(lengths) != 1:
        raise CorrelationError("channel lengths differ across files")
    channels = np.concatenate(chans, axis=0)
    if len(paths) > 1 and any(c.shape[0] != 1 for c in chans):
        raise CorrelationError("multiple files must each be mono")
    return Frame(channels, rates[0])


def write_frame(path, frame):
    """Write a frame as float32 multichannel WAV."""
    wavfile.write(path, int(round(frame.sample_rate)),
                  frame.channels.T.astype(np.float32))
