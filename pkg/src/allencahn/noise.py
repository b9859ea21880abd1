"""Q-Wiener increments with counter-based, coupling-exact sampling.

Each (seed, path, step ordinal) triple keys an independent Philox stream;
one draw per coarse step yields the r fine increments of that step's equal
subdivision, and the coarse increment is defined as their exact sum.  Draws
therefore never depend on evaluation order, other paths, or how many steps
a neighbouring trajectory took.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.random import Generator, Philox

TRACE_CLASS = "trace-class"
WHITE = "white"

_KINDS = (TRACE_CLASS, WHITE)


@dataclass(frozen=True)
class NoiseSpec:
    """Covariance model: Q e_i = q_i e_i with q_i = i^-2 (trace-class) or 1 (white).

    `scale` multiplies the increment standard deviation (0 switches the noise
    off); `regularity` is reporting metadata only and never enters a draw.
    """

    kind: str
    n_modes: int
    scale: float = 1.0
    regularity: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected {_KINDS}")
        if self.n_modes < 1:
            raise ValueError("need at least one noise mode")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")
        if self.regularity is None:
            object.__setattr__(
                self, "regularity", 1.0 if self.kind == TRACE_CLASS else 0.25
            )

    @cached_property
    def mode_variances(self) -> np.ndarray:
        i = np.arange(1, self.n_modes + 1, dtype=float)
        q = i**-2.0 if self.kind == TRACE_CLASS else np.ones_like(i)
        q.flags.writeable = False
        return q


def increment_stddev(spec: NoiseSpec, mode: int, dt: float) -> float:
    """Standard deviation of the mode-n increment over a step of length dt."""
    if not 1 <= mode <= spec.n_modes:
        raise ValueError(f"mode {mode} outside 1..{spec.n_modes}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return spec.scale * float(np.sqrt(spec.mode_variances[mode - 1] * dt))


@dataclass(frozen=True)
class NoiseStream:
    """Addressable increment source for one sample path."""

    spec: NoiseSpec
    seed: int
    path: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= self.path < 2**32:
            raise ValueError("path index must fit in 32 bits")

    def _generator(self, step: int) -> Generator:
        if not 0 <= step < 2**32:
            raise ValueError("step ordinal must fit in 32 bits")
        key = np.array([self.seed, (self.path << 32) | step], dtype=np.uint64)
        return Generator(Philox(key=key))

    def increments(
        self, step: int, dt: float, r: int = 1
    ) -> tuple[np.ndarray, np.ndarray]:
        """Fine increments (r rows) over a step of length dt, and their exact sum.

        Row j is the increment over the j-th of r equal substeps, so each row
        has per-mode variance q_i * dt / r.  The coarse increment is defined
        as the sum of the rows; nothing is ever resampled.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        if r < 1:
            raise ValueError("refinement factor must be at least 1")
        sig = self.spec.scale * np.sqrt(self.spec.mode_variances * (dt / r))
        fine = self._generator(step).standard_normal((r, self.spec.n_modes)) * sig
        coarse = fine.sum(axis=0)
        return fine, coarse


def sample_refined_increment(
    stream: NoiseStream, step: int, dt: float, r: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Functional alias for NoiseStream.increments."""
    return stream.increments(step, dt, r)
