"""bergman-lab - Bergman kernels and zeros of random holomorphic sections on model manifolds."""

__version__ = "0.1.0"
