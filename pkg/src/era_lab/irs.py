"""IRS configurations (binary element states) and the two-pattern toggle schedule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IrsConfiguration:
    """Binary surface state; element state 0/1 reflects with r_i = -1/+1.

    Hex export puts element 0 in the most significant bit, e.g. ``0x5CC8...``.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise ValueError("configuration needs at least one element")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("element states must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def signs(self) -> np.ndarray:
        return 2.0 * np.asarray(self.bits, dtype=float) - 1.0

    @classmethod
    def zeros(cls, n: int) -> "IrsConfiguration":
        return cls((0,) * n)

    @classmethod
    def ones(cls, n: int) -> "IrsConfiguration":
        return cls((1,) * n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "IrsConfiguration":
        return cls(tuple(rng.integers(0, 2, n).tolist()))

    def complement(self) -> "IrsConfiguration":
        return IrsConfiguration(tuple(1 - b for b in self.bits))

    def flip(self, i: int) -> "IrsConfiguration":
        bits = list(self.bits)
        bits[i] ^= 1
        return IrsConfiguration(tuple(bits))

    def to_hex(self) -> str:
        value = int("".join(map(str, self.bits)), 2)
        return "0x" + format(value, "X").zfill(-(-self.n // 4))

    @classmethod
    def from_hex(cls, text: str, n: int | None = None) -> "IrsConfiguration":
        digits = text.strip()
        if digits.lower().startswith("0x"):
            digits = digits[2:]
        if n is None:
            n = 4 * len(digits)
        value = int(digits, 16)
        if value >> n:
            raise ValueError(f"{text} does not fit in {n} elements")
        return cls(tuple(int(c) for c in format(value, f"0{n}b")))


@dataclass(frozen=True)
class IrsSchedule:
    """Square-wave toggle between two patterns, 50% duty.

    ``pattern0`` is active at time t iff frac((t + offset) / period) < 1/2, so
    switches happen at ``n * period / 2 - offset``.
    """

    pattern0: IrsConfiguration
    pattern1: IrsConfiguration
    frequency: float
    offset: float = 0.0

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("modulation frequency must be positive")
        if self.pattern0.n != self.pattern1.n:
            raise ValueError("patterns must have the same element count")

    @classmethod
    def static(cls, pattern: IrsConfiguration) -> "IrsSchedule":
        return cls(pattern, pattern, frequency=1.0)

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def pattern_duration(self) -> float:
        """Time each pattern is held between switches."""
        return 0.5 * self.period

    @property
    def is_static(self) -> bool:
        return self.pattern0 == self.pattern1

    def with_offset(self, offset: float) -> "IrsSchedule":
        return IrsSchedule(self.pattern0, self.pattern1, self.frequency, offset)

    def pattern1_active(self, t) -> np.ndarray:
        """Boolean mask: True where ``pattern1`` is the active configuration."""
        phase = np.mod((np.asarray(t, dtype=float) + self.offset) / self.period, 1.0)
        return phase >= 0.5

    def active(self, t: float) -> IrsConfiguration:
        return self.pattern1 if bool(self.pattern1_active(t)) else self.pattern0

    def switch_times(self, t0: float, t1: float) -> np.ndarray:
        """Switch instants in ``[t0, t1)``."""
        half = self.pattern_duration
        n0 = int(np.ceil((t0 + self.offset) / half))
        n1 = int(np.ceil((t1 + self.offset) / half))
        return np.arange(n0, n1) * half - self.offset


def all_zero_one_schedule(n: int, frequency: float, offset: float = 0.0) -> IrsSchedule:
    if n < 1:
        raise ValueError("need at least one element")
    return IrsSchedule(IrsConfiguration.zeros(n), IrsConfiguration.ones(n), frequency, offset)
