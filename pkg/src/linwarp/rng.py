"""Deterministic counter-based Gaussian streams for per-pixel sampling noise.

Every draw is a pure function of (seed, pixel index, draw index), so results
do not depend on pixel iteration order or on any parallel schedule. The
construction is the splitmix64 output function used as a stateless hash,
with Box-Muller to map the hashed uniforms to normals.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer: a bijective avalanche on uint64."""
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *tags: int) -> int:
    """Fold integer tags into a seed, one hash round per tag.

    Used to derive independent child seeds, e.g. per trial id or iteration.
    Both operands are avalanched before combining so that adjacent seeds
    (or adjacent tags) share no derived values.
    """
    with np.errstate(over="ignore"):
        z = _mix64(np.asarray(np.uint64(seed & _MASK64)) + _GAMMA)
        for t in tags:
            z = _mix64((z + _GAMMA) ^ _mix64(np.uint64(int(t) & _MASK64) + _GAMMA))
    return int(z)


class GaussianStream:
    """Seeded Gaussian stream with hashed per-pixel substreams.

    ``pixel_normals(n, m)[i, j]`` depends only on (seed, i, j); two calls with
    the same seed agree bitwise regardless of array shapes requested earlier.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64

    def substream(self, tag: int) -> "GaussianStream":
        """Independent stream for a distinct purpose (domain separation)."""
        return GaussianStream(derive_seed(self.seed, tag))

    def pixel_normals(self, n_pixels: int, n_draws: int) -> np.ndarray:
        """Standard-normal draws, shape (n_pixels, n_draws)."""
        if n_draws <= 0:
            return np.zeros((n_pixels, 0))
        n_pairs = (n_draws + 1) // 2
        with np.errstate(over="ignore"):
            pix = np.arange(1, n_pixels + 1, dtype=np.uint64)
            base = _mix64(np.uint64(self.seed) + _GAMMA * pix)[:, None]
            ctr = np.arange(1, 2 * n_pairs + 1, dtype=np.uint64)[None, :]
            bits = _mix64(base + _GAMMA * ctr)
        u = (bits >> np.uint64(11)).astype(np.float64)
        u1 = (u[:, 0::2] + 1.0) * _INV_2_53  # in (0, 1], safe for log
        u2 = u[:, 1::2] * _INV_2_53          # in [0, 1)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = (2.0 * np.pi) * u2
        out = np.empty((n_pixels, 2 * n_pairs))
        out[:, 0::2] = radius * np.cos(angle)
        out[:, 1::2] = radius * np.sin(angle)
        return out[:, :n_draws]
