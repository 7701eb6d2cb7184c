"""Audio ingestion, synthetic two-machine scenes, segmentation and SPL.

Levels are expressed on a nominal SPL scale in dB.  A full-scale RMS of 1.0
corresponds to ``FULL_SCALE_SPL_DB``; :func:`spl_db` itself reports levels
relative to full scale (p_ref = 1.0), so only differences carry meaning.
"""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_SAMPLE_RATE = 16_000
DEFAULT_WINDOW = 3000
FULL_SCALE_SPL_DB = 66.0
SILENCE_DB = -200.0

# machine attenuation per distance (m -> dB); noise floor is not attenuated
DEFAULT_ATTENUATION_DB = {0.0: 0.0, 1.0: -2.0, 2.0: -3.5, 3.0: -4.0}


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class NotPCMError(WavError):
    pass


class EmptyAudioError(WavError):
    pass


class WindowTooLongError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("TimeSeries needs a non-empty 1-d sample array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("TimeSeries samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class MachineSpec:
    """Tonal signature of one machine plus the sound of its nail-strike fault.

    ``click_freq_hz`` is the ringing frequency of a strike and
    ``click_level_db`` its peak amplitude relative to the machine's RMS.
    A ``click_freq_hz`` of 0 gives a purely broadband (white) click.
    """

    machine_id: str
    base_freq_hz: float
    harmonic_gains: tuple[float, ...]
    base_spl_db: float
    click_freq_hz: float = 0.0
    click_level_db: float = 12.0
    click_decay_s: float = 0.005
    freq_jitter: float = 0.03

    def __post_init__(self):
        if self.machine_id not in ("CON", "CHA"):
            raise ValueError(f"unknown machine id {self.machine_id!r}")
        if self.base_freq_hz <= 0:
            raise ValueError("base_freq_hz must be positive")
        if len(self.harmonic_gains) == 0:
            raise ValueError("harmonic_gains must be non-empty")
        if not 20.0 <= self.base_spl_db <= 100.0:
            raise ValueError("base_spl_db must lie in [20, 100]")
        if self.click_decay_s <= 0:
            raise ValueError("click_decay_s must be positive")
        object.__setattr__(self, "harmonic_gains", tuple(float(g) for g in self.harmonic_gains))

    @property
    def silent(self) -> bool:
        return not any(self.harmonic_gains)


# Conveyor: rubber belt over a metal plate; lifted by the nails it slaps the plate.
CONVEYOR = MachineSpec(
    machine_id="CON",
    base_freq_hz=310.0,
    harmonic_gains=(1.0, 0.6, 0.35, 0.2),
    base_spl_db=43.7,
    click_freq_hz=3000.0,
    click_level_db=14.0,
)
# Chain belt: metallic links, bright ring from the pendulum nail.
CHAIN_BELT = MachineSpec(
    machine_id="CHA",
    base_freq_hz=520.0,
    harmonic_gains=(1.0, 0.5, 0.3),
    base_spl_db=41.2,
    click_freq_hz=5200.0,
    click_level_db=14.0,
)


@dataclass(frozen=True)
class SceneConfig:
    con_state: int = 0
    cha_state: int = 0
    distance_m: float = 0.0
    noise_floor_db: float = 34.0
    anomaly_impulse_rate_hz: float = 40.0
    seed: int = 0
    con_gain_db: float = 0.0
    cha_gain_db: float = 0.0
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    attenuation_db: dict = field(default_factory=lambda: dict(DEFAULT_ATTENUATION_DB))

    def __post_init__(self):
        if self.con_state not in (0, 1) or self.cha_state not in (0, 1):
            raise ValueError("machine states are binary: 0 normal, 1 anomalous")
        if self.distance_m < 0:
            raise ValueError("distance_m must be non-negative")
        if self.anomaly_impulse_rate_hz < 0:
            raise ValueError("anomaly_impulse_rate_hz must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @property
    def condition(self) -> str:
        return f"{self.con_state}/{self.cha_state}"


# Channel gain mixes (CON dB, CHA dB).  At 0 m each outer channel hears
# mainly one machine; from 1 m on every channel picks up both.
_CHANNEL_MIX_NEAR = {"CH1": (-14.0, 0.0), "CH2": (-1.0, -1.0), "CH3": (0.0, -14.0)}
_CHANNEL_MIX_FAR = {"CH1": (-2.0, 0.0), "CH2": (-1.0, -1.0), "CH3": (0.0, -2.0)}
CHANNELS = tuple(_CHANNEL_MIX_NEAR)


def channel_mix(channel: str, distance_m: float) -> tuple[float, float]:
    """Return the (CON, CHA) gain in dB a channel applies at a distance."""
    if channel not in _CHANNEL_MIX_NEAR:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    table = _CHANNEL_MIX_NEAR if distance_m < 0.5 else _CHANNEL_MIX_FAR
    return table[channel]


def attenuation_at(distance_m: float, table: dict | None = None) -> float:
    table = DEFAULT_ATTENUATION_DB if table is None else table
    xs = np.array(sorted(float(k) for k in table))
    ys = np.array([table[k] for k in sorted(table, key=float)], dtype=float)
    return float(np.interp(distance_m, xs, ys))


def _level_to_rms(level_db: float) -> float:
    if not math.isfinite(level_db):
        return 0.0
    return 10.0 ** ((level_db - FULL_SCALE_SPL_DB) / 20.0)


def _tonal(spec: MachineSpec, n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / fs
    f0 = spec.base_freq_hz * (1.0 + spec.freq_jitter * rng.uniform(-1.0, 1.0))
    gains = np.asarray(spec.harmonic_gains, dtype=float)
    phases = rng.uniform(0.0, 2 * np.pi, size=gains.size)
    k = np.arange(1, gains.size + 1)
    keep = (gains != 0) & (k * f0 < fs / 2)
    if not keep.any():
        return np.zeros(n)
    out = gains[keep] @ np.sin(2 * np.pi * f0 * np.outer(k[keep], t) + phases[keep, None])
    power = np.sum(np.square(gains)) / 2.0
    return out / math.sqrt(power)


def _clicks(spec: MachineSpec, n: int, fs: int, rate_hz: float,
            rng: np.random.Generator) -> np.ndarray:
    """Poisson-timed, exponentially decaying strikes, unit peak envelope."""
    if rate_hz <= 0:
        return np.zeros(n)
    duration = n / fs
    count = rng.poisson(rate_hz * duration)
    onsets = np.sort(rng.uniform(0.0, duration, size=count))
    tail = int(math.ceil(8 * spec.click_decay_s * fs))
    tt = np.arange(tail) / fs
    envelope = np.exp(-tt / spec.click_decay_s)
    if spec.click_freq_hz > 0:
        phases = rng.uniform(0.0, 2 * np.pi, size=(count, 1))
        carriers = np.sin(2 * np.pi * spec.click_freq_hz * tt + phases)
        carriers += 0.25 * rng.standard_normal((count, tail))
    else:
        carriers = rng.standard_normal((count, tail))
    # strikes near the end are truncated: pad, accumulate, then trim
    padded = np.zeros(n + tail)
    idx = (onsets * fs).astype(int)[:, None] + np.arange(tail)
    np.add.at(padded, idx, envelope * carriers)
    return padded[:n]


def _machine_component(spec: MachineSpec, anomalous: bool, level_db: float, n: int,
                       fs: int, rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    # draw in a fixed order so the tonal part does not depend on the anomaly flag
    tonal = _tonal(spec, n, fs, rng)
    click_rng = np.random.default_rng(rng.integers(2**63))
    if spec.silent:
        return np.zeros(n)
    rms = _level_to_rms(level_db)
    out = rms * tonal
    if anomalous:
        out += rms * 10.0 ** (spec.click_level_db / 20.0) * _clicks(spec, n, fs, rate_hz, click_rng)
    return out


def synthesize_scene(con: MachineSpec, cha: MachineSpec, cfg: SceneConfig,
                     duration_s: float) -> TimeSeries:
    """Render one microphone channel listening to both machines.

    Each machine contributes its tonal signature, attenuated by distance and
    the channel gain; an anomalous machine additionally carries nail-strike
    clicks.  A white noise floor at ``cfg.noise_floor_db`` is added last.
    The sources are independent so levels combine in power, not amplitude.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    fs = cfg.sample_rate_hz
    n = max(1, int(round(duration_s * fs)))
    root = np.random.SeedSequence(cfg.seed)
    con_rng, cha_rng, noise_rng = (np.random.default_rng(s) for s in root.spawn(3))

    att = attenuation_at(cfg.distance_m, cfg.attenuation_db)
    out = _machine_component(con, bool(cfg.con_state), con.base_spl_db + att + cfg.con_gain_db,
                             n, fs, cfg.anomaly_impulse_rate_hz, con_rng)
    out = out + _machine_component(cha, bool(cfg.cha_state),
                                   cha.base_spl_db + att + cfg.cha_gain_db,
                                   n, fs, cfg.anomaly_impulse_rate_hz, cha_rng)
    noise_rms = _level_to_rms(cfg.noise_floor_db)
    if noise_rms > 0:
        out = out + noise_rms * noise_rng.standard_normal(n)
    return TimeSeries(out, fs)


def segment(ts: TimeSeries, window_len: int = DEFAULT_WINDOW, hop: int | None = None) -> list[TimeSeries]:
    hop = window_len if hop is None else hop
    if window_len < 1 or hop < 1:
        raise ValueError("window_len and hop must be positive")
    n = len(ts)
    if window_len > n:
        raise WindowTooLongError(f"window of {window_len} samples exceeds series of {n}")
    count = (n - window_len) // hop + 1
    return [TimeSeries(ts.samples[i * hop:i * hop + window_len], ts.sample_rate_hz)
            for i in range(count)]


def spl_db(ts: TimeSeries) -> float:
    """Level of ``ts`` in dB re full scale; all-zero input gives ``SILENCE_DB``."""
    rms = math.sqrt(float(np.mean(np.square(ts.samples))))
    if rms == 0.0:
        return SILENCE_DB
    return max(SILENCE_DB, 20.0 * math.log10(rms))


def load_wav(path) -> TimeSeries:
    """Read a 16-bit PCM RIFF/WAVE file, keeping only the first channel.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    NotPCMError
        If the format tag is not integer PCM or samples are not 16 bit.
    EmptyAudioError
        If the data chunk holds no samples.
    WavError
        For any other malformed container.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavError(f"{path} is not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavError("truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise WavError(f"{path} lacks a fmt or data chunk")
    tag, channels, rate, _, block_align, bits = fmt
    # 0xFFFE is WAVE_FORMAT_EXTENSIBLE; accept it only as a PCM carrier
    if tag not in (1, 0xFFFE) or bits != 16:
        raise NotPCMError(f"unsupported encoding (format tag {tag}, {bits} bits); need 16-bit PCM")
    if channels < 1 or block_align != 2 * channels:
        raise WavError("inconsistent channel count / block alignment")
    frames = len(data) // block_align
    if frames == 0:
        raise EmptyAudioError("empty audio")
    pcm = np.frombuffer(data[:frames * block_align], dtype="<i2").reshape(frames, channels)
    return TimeSeries(pcm[:, 0].astype(float) / 32768.0, rate)


def write_wav(path, ts: TimeSeries) -> None:
    """Write ``ts`` as mono 16-bit PCM, clipping to the representable range."""
    pcm = np.clip(np.round(ts.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(ts.sample_rate_hz)
        fh.writeframes(pcm.tobytes())
