"""Corpus generation, WAV ingestion and all on-disk artifact formats.

Binary containers (little-endian throughout):

* spectrograms: magic ``WKDS``, version u16, F u32, N u32, hop u32, then
  F*N float64 values row-major;
* models: magic ``WKDM``, version u16, kind u8 (1 conv / 2 gabor /
  3 multires), a kind-specific shape header, then float64 weights.
"""

import csv
import hashlib
import io
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import Signal
from .teachers import Spectrogram

SPECTROGRAM_MAGIC = b"WKDS"
MODEL_MAGIC = b"WKDM"
FORMAT_VERSION = 1

_MODEL_KIND_CODES = {"conv": 1, "gabor": 2, "multires": 3}
_MODEL_KIND_NAMES = {v: k for k, v in _MODEL_KIND_CODES.items()}


@dataclass(frozen=True)
class CorpusItem:
    """One corpus entry: a unique id plus its waveform and provenance."""

    id: str
    signal: Signal
    source: str = ""


def _check_unique_ids(items):
    seen = set()
    for item in items:
        if item.id in seen:
            raise ValueError(f"duplicate corpus id {item.id!r}")
        seen.add(item.id)
    return items


# ----------------------------------------------------------------- synthesis


def synth_sine_dataset(filterbank, count, duration_s=1.0, seed=0):
    """Pure sinusoids geometrically spaced over the teacher's center range,
    unit amplitude, random phase per item."""
    if count < 10:
        raise ValueError("need at least 10 items for a splittable corpus")
    sr = filterbank.sample_rate
    lo = float(filterbank.center_freqs[0])
    hi = float(filterbank.center_freqs[-1])
    freqs = lo * np.power(hi / lo, np.arange(count) / (count - 1))
    if np.any(freqs >= sr / 2):
        raise ValueError("synthetic sine frequency reaches Nyquist")
    n = int(round(duration_s * sr))
    if n < 4096:
        raise ValueError("duration too short: items must cover at least 2^12 samples")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sr
    items = []
    for k, f in enumerate(freqs):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x = np.sin(2.0 * np.pi * f * t + phase)
        items.append(CorpusItem(f"sine_{k:04d}", Signal(x, sr), f"synth:{float(f)!r}Hz"))
    return _check_unique_ids(items)


def synth_vowel_dataset(count, sample_rate, duration_s=0.5, seed=0):
    """Vowel-like harmonic complexes: a random fundamental with a few
    resonance peaks shaping the harmonic amplitudes."""
    if count < 10:
        raise ValueError("need at least 10 items for a splittable corpus")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    if n < 4096:
        raise ValueError("duration too short: items must cover at least 2^12 samples")
    t = np.arange(n) / sample_rate
    items = []
    for k in range(count):
        f0 = rng.uniform(90.0, 250.0)
        formants = rng.uniform(300.0, 3200.0, size=3)
        bandwidths = rng.uniform(60.0, 180.0, size=3)
        x = np.zeros(n)
        h = 1
        while h * f0 < 0.45 * sample_rate:
            f = h * f0
            gain = sum(
                1.0 / (1.0 + ((f - fm) / bw) ** 2) for fm, bw in zip(formants, bandwidths)
            )
            x += gain / h**0.5 * np.sin(2.0 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
            h += 1
        x /= np.max(np.abs(x))
        items.append(CorpusItem(f"vowel_{k:04d}", Signal(x, sample_rate), f"synth:vowel{k}"))
    return _check_unique_ids(items)


# ----------------------------------------------------------------- WAV files


def write_wav(path, signal, bits="float32"):
    """Write a mono RIFF WAV (16-bit PCM or 32-bit IEEE float)."""
    x = signal.samples
    sr = int(round(signal.sample_rate))
    if bits == "float32":
        fmt_code, width, payload = 3, 4, x.astype("<f4").tobytes()
    elif bits == "int16":
        fmt_code, width = 1, 2
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    else:
        raise ValueError(f"unsupported bits {bits!r}")
    with open(path, "wb") as fh:
        data_size = len(payload)
        fh.write(b"RIFF" + struct.pack("<I", 36 + data_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, fmt_code, 1, sr, sr * width, width, width * 8))
        fh.write(b"data" + struct.pack("<I", data_size) + payload)


def _decode_wav(raw, path):
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise ValueError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    code, channels, rate, _, block_align, bits = fmt
    if code == 0xFFFE and len(raw) >= 0:  # WAVE_FORMAT_EXTENSIBLE: subformat GUID
        raise ValueError(f"{path}: extensible WAV subformats are not supported")
    if channels < 1:
        raise ValueError(f"{path}: invalid channel count {channels}")
    if code == 1 and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif code == 1 and bits == 24:
        b = np.frombuffer(data, dtype=np.uint8)
        b = b[: len(b) - len(b) % 3].reshape(-1, 3)
        ints = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / float(1 << 23)
    elif code == 1 and bits == 32:
        samples = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    elif code == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported format code {code} at {bits} bits")
    if channels > 1:
        samples = samples[: len(samples) - len(samples) % channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, float(rate)


def load_wav_dir(path, expected_sr):
    """Load every decodable mono-downmixed WAV under a directory.

    Files are taken in lexicographic order; malformed files and sample-rate
    mismatches are skipped with a warning.  An empty result is an error.
    """
    root = Path(path)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".wav")
    items = []
    for p in files:
        try:
            samples, rate = _decode_wav(p.read_bytes(), p.name)
        except ValueError as exc:
            warnings.warn(f"skipping {p.name}: {exc}", stacklevel=2)
            continue
        if rate != expected_sr:
            warnings.warn(
                f"skipping {p.name}: sample rate {rate:g} != expected {expected_sr:g} "
                "(no resampling is performed)",
                stacklevel=2,
            )
            continue
        if samples.size == 0:
            warnings.warn(f"skipping {p.name}: empty data chunk", stacklevel=2)
            continue
        items.append(CorpusItem(p.stem, Signal(samples, expected_sr), str(p)))
    if not items:
        raise ValueError(f"no usable WAV files at the expected rate in {root}")
    return _check_unique_ids(items)


# ----------------------------------------------------------- binary containers


def save_spectrogram(path, spectrogram):
    v = np.ascontiguousarray(spectrogram.values, dtype="<f8")
    f, n = v.shape
    with open(path, "wb") as fh:
        fh.write(SPECTROGRAM_MAGIC)
        fh.write(struct.pack("<HIII", FORMAT_VERSION, f, n, spectrogram.hop))
        fh.write(v.tobytes())


def load_spectrogram(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SPECTROGRAM_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {SPECTROGRAM_MAGIC!r}")
        version, f, n, hop = struct.unpack("<HIII", fh.read(14))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        values = np.frombuffer(fh.read(8 * f * n), dtype="<f8").reshape(f, n)
    return Spectrogram(values.copy(), hop)


def spectrogram_to_csv(path, spectrogram):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filter"] + [f"t{t}" for t in range(spectrogram.n_frames)])
        for f, row in enumerate(spectrogram.values):
            writer.writerow([f] + [repr(float(v)) for v in row])


def save_model(path, model):
    from .students import ConvStudent, GaborStudent, MultiresStudent  # local: avoid cycle

    kind = model.kind
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<HB", FORMAT_VERSION, _MODEL_KIND_CODES[kind]))
    if isinstance(model, ConvStudent):
        buf.write(struct.pack("<IIB", model.n_filters, model.half_length, model.hop_exponent))
    elif isinstance(model, GaborStudent):
        buf.write(
            struct.pack(
                "<IIBd", model.n_filters, model.half_length, model.hop_exponent, model.sample_rate
            )
        )
    elif isinstance(model, MultiresStudent):
        buf.write(struct.pack("<IBdB", model.n_filters, model.hop_exponent, model.sample_rate,
                              model.taps_per_band_filter))
        buf.write(np.ascontiguousarray(model.center_freqs, dtype="<f8").tobytes())
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    buf.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_model(path):
    from .students import ConvStudent, GaborStudent, MultiresStudent

    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {MODEL_MAGIC!r}")
    version, code = struct.unpack_from("<HB", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    kind = _MODEL_KIND_NAMES.get(code)
    pos = 7
    if kind == "conv":
        f, half, j = struct.unpack_from("<IIB", raw, pos)
        pos += 9
        model = ConvStudent(n_filters=f, half_length=half, hop_exponent=j)
    elif kind == "gabor":
        f, half, j, sr = struct.unpack_from("<IIBd", raw, pos)
        pos += 17
        model = GaborStudent(n_filters=f, half_length=half, hop_exponent=j, sample_rate=sr)
    elif kind == "multires":
        f, j, sr, taps = struct.unpack_from("<IBdB", raw, pos)
        pos += 14
        centers = np.frombuffer(raw, dtype="<f8", count=f, offset=pos).copy()
        pos += 8 * f
        model = MultiresStudent(
            center_freqs=centers, sample_rate=sr, hop_exponent=j, taps_per_band_filter=taps
        )
    else:
        raise ValueError(f"{path}: unknown model kind code {code}")
    weights = np.frombuffer(raw, dtype="<f8", offset=pos)
    if weights.size != model.n_parameters:
        raise ValueError(
            f"{path}: weight payload has {weights.size} values, expected {model.n_parameters}"
        )
    model.weights = weights.copy()
    return model


# --------------------------------------------------------------- CSV reports


def save_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_train_loss", "mean_val_loss", "wall_time_s"])
        for row in history:
            writer.writerow(
                [row["epoch"], repr(row["mean_train_loss"]), repr(row["mean_val_loss"]),
                 repr(row["wall_time_s"])]
            )


def load_history_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "epoch": int(row["epoch"]),
                    "mean_train_loss": float(row["mean_train_loss"]),
                    "mean_val_loss": float(row["mean_val_loss"]),
                    "wall_time_s": float(row["wall_time_s"]),
                }
            )
    return out


def impulse_responses_to_csv(path, rows):
    """One CSV row per filter: index, length, then re and im samples."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for f, ir in enumerate(rows):
            ir = np.asarray(ir)
            writer.writerow(
                [f, len(ir)]
                + [repr(float(v)) for v in ir.real]
                + [repr(float(v)) for v in np.imag(ir)]
            )


def corpus_hash(item, excerpt_length):
    h = hashlib.sha256()
    h.update(item.id.encode())
    h.update(np.int64(excerpt_length).tobytes())
    h.update(item.signal.samples.tobytes())
    return h.hexdigest()[:16]
