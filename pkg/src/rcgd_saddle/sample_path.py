"""Seeded sample paths omega = ((i_0, a_0), (i_1, a_1), ...) with O(1) shifts.

Draw ``n`` of a path keyed by ``seed`` is read off block ``n`` of the Philox4x64
counter-based generator: word 0 picks the coordinate, word 1 the stepsize. No
state is carried between draws, so ``draw(t)`` is a pure function of
``(seed, offset + t, dim, range)`` and shifting only moves the offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AssumptionViolation

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


class CoordinateStepDraw(NamedTuple):
    coord: int  # 0-based coordinate index
    alpha: float


@dataclass(frozen=True)
class StepsizeRange:
    alpha_min: float
    alpha_max: float

    def __post_init__(self):
        if not 0.0 < self.alpha_min < self.alpha_max:
            raise ValueError(
                f"need 0 < alpha_min < alpha_max, got [{self.alpha_min}, {self.alpha_max}]"
            )

    @property
    def width(self):
        return self.alpha_max - self.alpha_min

    def validate(self, M):
        """Require alpha_max < 1/M."""
        if not self.alpha_max * M < 1.0:
            raise AssumptionViolation(
                f"alpha_max={self.alpha_max} violates alpha_max < 1/M with M={M:.6g}"
            )
        return self


def splitmix64(x: int) -> int:
    """The SplitMix64 output function, used to decorrelate derived seeds."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Per-trial seed: ``splitmix64(seed XOR index)``."""
    return splitmix64((int(seed) ^ int(index)) & _MASK64)


@dataclass(frozen=True)
class SamplePath:
    seed: int
    dim: int
    range: StepsizeRange
    offset: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    def draws(self, t0: int, n: int):
        """Coordinates (int64) and stepsizes (float64) for times t0 .. t0+n-1."""
        if t0 < 0 or n < 0:
            raise ValueError("t0 and n must be non-negative")
        bitgen = np.random.Philox(key=self.seed)
        bitgen.advance(self.offset + t0)
        raw = bitgen.random_raw(4 * n).reshape(n, 4)
        u = (raw[:, 0] >> np.uint64(11)).astype(np.float64) * _TWO_M53
        v = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _TWO_M53
        coords = np.minimum((u * self.dim).astype(np.int64), self.dim - 1)
        alphas = self.range.alpha_min + self.range.width * v
        return coords, alphas

    def draw(self, t: int) -> CoordinateStepDraw:
        coords, alphas = self.draws(t, 1)
        return CoordinateStepDraw(int(coords[0]), float(alphas[0]))

    def shift(self, s: int) -> "SamplePath":
        if s < 0:
            raise ValueError("shift must be non-negative")
        return SamplePath(self.seed, self.dim, self.range, self.offset + s)


@dataclass(frozen=True)
class RecordedPath:
    """A literal finite sequence of draws with the same interface as SamplePath."""

    steps: tuple
    dim: int
    range: StepsizeRange
    offset: int = 0

    def __post_init__(self):
        steps = tuple(CoordinateStepDraw(int(i), float(a)) for i, a in self.steps)
        for i, _ in steps:
            if not 0 <= i < self.dim:
                raise ValueError(f"coordinate {i} out of range for dim {self.dim}")
        object.__setattr__(self, "steps", steps)

    def draws(self, t0, n):
        lo = self.offset + t0
        if lo + n > len(self.steps):
            raise IndexError(f"recorded path has {len(self.steps)} draws, asked for {lo + n}")
        chunk = self.steps[lo : lo + n]
        coords = np.array([s.coord for s in chunk], dtype=np.int64)
        alphas = np.array([s.alpha for s in chunk], dtype=np.float64)
        return coords, alphas

    def draw(self, t):
        return self.steps[self.offset + t]

    def shift(self, s):
        if s < 0:
            raise ValueError("shift must be non-negative")
        return RecordedPath(self.steps, self.dim, self.range, self.offset + s)

    def __len__(self):
        return len(self.steps) - self.offset


def record_prefix(path, n: int) -> list:
    if n < 0:
        raise ValueError("n must be non-negative")
    coords, alphas = path.draws(0, n)
    return [CoordinateStepDraw(int(i), float(a)) for i, a in zip(coords, alphas)]


def replay_path(steps, dim, range) -> RecordedPath:
    return RecordedPath(tuple(CoordinateStepDraw(int(s[0]), float(s[1])) for s in steps), dim, range)


def write_prefix_jsonl(steps, fh):
    for t, s in enumerate(steps):
        fh.write(json.dumps({"t": t, "i": s.coord, "alpha": s.alpha}) + "\n")


def read_prefix_jsonl(fh) -> list:
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec["t"] != len(out):
            raise ValueError(f"prefix out of order at t={rec['t']}")
        out.append(CoordinateStepDraw(int(rec["i"]), float(rec["alpha"])))
    return out
