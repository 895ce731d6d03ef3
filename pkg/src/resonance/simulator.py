"""Stand-in for the live pianist plus transcription frontend.

Streams a reference score through a stochastic channel model (constant
latency, truncated-normal jitter, onset drops, velocity noise, optional
pitch substitutions) as timed OSC messages. Fully deterministic per seed:
the stream is materialized up front, then paced out over UDP.

The default latency of 350 ms matches the transcription algorithm the
live system runs; jitter/drop/noise defaults are our desk-scale model of
"accuracy depends on recording conditions".
"""

from __future__ import annotations

import random
import socket
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .events import Micros, NoteEvent, ms
from .osc import OscMessage, encode_message, event_to_message
from .smf import ReferenceScore


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class SimConfig:
    latency_mean_ms: float = 350.0
    latency_jitter_ms: float = 30.0   # std-dev, truncated at ±3σ
    drop_prob: float = 0.05           # whole on/off pair omitted
    velocity_noise: float = 4.0       # gaussian std-dev, integer-rounded
    pitch_error_prob: float = 0.0     # ±1 or ±12 semitone substitution
    seed: int = 0

    def validate(self) -> None:
        if self.latency_mean_ms < 0:
            raise SimulationError("latency_mean_ms must be >= 0")
        if self.latency_jitter_ms < 0:
            raise SimulationError("latency_jitter_ms must be >= 0")
        for name in ("drop_prob", "pitch_error_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise SimulationError(f"{name} must be in [0, 1]")
        if self.velocity_noise < 0:
            raise SimulationError("velocity_noise must be >= 0")


def _pair_notes(score: ReferenceScore) -> List[Tuple[NoteEvent, NoteEvent]]:
    """FIFO-match ons with offs per pitch; rejects unbalanced scores."""
    pairs: List[List[Optional[NoteEvent]]] = []
    open_by_pitch: dict[int, List[int]] = {}
    for n in score.notes:
        if n.kind == "on":
            open_by_pitch.setdefault(n.pitch, []).append(len(pairs))
            pairs.append([n, None])
        else:
            waiting = open_by_pitch.get(n.pitch)
            if not waiting:
                raise SimulationError(f"unbalanced score: stray note-off pitch {n.pitch}")
            pairs[waiting.pop(0)][1] = n
    out: List[Tuple[NoteEvent, NoteEvent]] = []
    for on, off in pairs:
        if off is None:
            raise SimulationError(f"unbalanced score: unclosed note pitch {on.pitch}")
        out.append((on, off))
    return out


def _truncated_jitter(rng: random.Random, sigma_ms: float) -> float:
    if sigma_ms == 0:
        return 0.0
    while True:
        x = rng.gauss(0.0, sigma_ms)
        if abs(x) <= 3 * sigma_ms:
            return x


def simulate(score: ReferenceScore, cfg: SimConfig) -> List[Tuple[Micros, OscMessage]]:
    """Timed OSC message stream for the score as heard through the channel.

    Both halves of a note pair share one latency draw, so pairs never
    invert; drops always remove the whole pair.
    """
    cfg.validate()
    rng = random.Random(cfg.seed)
    out: List[Tuple[Micros, int, OscMessage]] = []
    seq = 0
    for on, off in _pair_notes(score):
        # Fixed draw order per pair keeps streams seed-stable even when
        # some features are disabled.
        dropped = rng.random() < cfg.drop_prob
        jitter = _truncated_jitter(rng, cfg.latency_jitter_ms)
        vel_noise = rng.gauss(0.0, cfg.velocity_noise) if cfg.velocity_noise else 0.0
        pitch_roll = rng.random()
        pitch_delta = rng.choice((-12, -1, 1, 12))
        if dropped:
            continue
        latency_ms = max(cfg.latency_mean_ms + jitter, 0.0)
        latency_us = ms(latency_ms)
        pitch = on.pitch
        if pitch_roll < cfg.pitch_error_prob:
            pitch = min(127, max(0, pitch + pitch_delta))
        vel = max(1, min(127, on.velocity + round(vel_noise)))
        out.append((on.t + latency_us, seq, OscMessage("/amt/noteon", (pitch, vel))))
        seq += 1
        out.append((off.t + latency_us, seq, OscMessage("/amt/noteoff", (pitch,))))
        seq += 1
    out.sort(key=lambda item: (item[0], item[1]))
    return [(t, m) for t, _s, m in out]


def send_stream(stream: List[Tuple[Micros, OscMessage]], host: str, port: int,
                speed: float = 1.0) -> int:
    """Pace the materialized stream out over UDP in real time."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    start = time.monotonic()
    sent = 0
    try:
        for t_us, msg in stream:
            deadline = start + t_us / 1_000_000 / speed
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            sock.sendto(encode_message(msg), (host, port))
            sent += 1
    finally:
        sock.close()
    return sent
