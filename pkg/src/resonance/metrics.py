"""Onset-matching quality metrics for transcription streams.

Matching is greedy per pitch in time order with a 50 ms default
tolerance (the usual transcription-evaluation convention). Greedy and
optimal matching differ negligibly at this tolerance on piano data; the
test suite still checks against a brute-force optimal matcher.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .events import Micros, ms

Onset = Tuple[Micros, int]  # (time_us, pitch)

DEFAULT_TOLERANCE_MS = 50


@dataclass(frozen=True)
class OnsetScore:
    precision: float
    recall: float
    f1: float
    matches: int

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "matches": self.matches}


def _by_pitch(onsets: Sequence[Onset]) -> Dict[int, List[Micros]]:
    out: Dict[int, List[Micros]] = {}
    for t, pitch in onsets:
        out.setdefault(pitch, []).append(t)
    for times in out.values():
        times.sort()
    return out


def onset_f1(reference: Sequence[Onset], transcribed: Sequence[Onset],
             tol_ms: float = DEFAULT_TOLERANCE_MS) -> OnsetScore:
    """Greedy one-to-one onset matching: same pitch, |Δt| <= tol_ms.

    Undefined ratios (empty denominators) score 0.
    """
    tol = ms(tol_ms)
    ref = _by_pitch(reference)
    trans = _by_pitch(transcribed)
    matches = 0
    for pitch, r_times in ref.items():
        t_times = trans.get(pitch)
        if not t_times:
            continue
        i = j = 0
        while i < len(r_times) and j < len(t_times):
            dt = t_times[j] - r_times[i]
            if abs(dt) <= tol:
                matches += 1
                i += 1
                j += 1
            elif dt < 0:
                j += 1
            else:
                i += 1
    precision = matches / len(transcribed) if transcribed else 0.0
    recall = matches / len(reference) if reference else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    return OnsetScore(precision=precision, recall=recall, f1=f1, matches=matches)
