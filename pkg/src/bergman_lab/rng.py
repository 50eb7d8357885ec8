"""Counter-based random streams keyed by (seed, p, sample index)."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SectionStream:
    """Independent Philox stream for one sample; successive draws continue it."""
    seed: int
    p: int
    index: int
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.p, self.index))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def complex_gaussian(self, size: int) -> np.ndarray:
        """Standard complex Gaussian vector (real and imaginary parts drawn in one block)."""
        draws = self.generator.standard_normal(2 * size)
        return draws[:size] + 1j * draws[size:]


def section_stream(seed: int, p: int, index: int) -> SectionStream:
    return SectionStream(seed=seed, p=p, index=index)
