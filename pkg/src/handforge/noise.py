"""Classic 2D gradient noise for background wall textures.

Single-octave values vanish on the integer lattice; the multi-octave sum is
normalized by the total amplitude so results always stay inside [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 8 gradient directions; diagonal ones normalized so every gradient is unit
_SQ2 = 1.0 / np.sqrt(2.0)
_GRADS = np.array(
    [
        (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0),
        (_SQ2, _SQ2), (-_SQ2, _SQ2), (_SQ2, -_SQ2), (-_SQ2, -_SQ2),
    ]
)


@dataclass(frozen=True)
class PerlinParams:
    seed: int = 0
    octaves: int = 1
    base_frequency: float = 1.0
    amplitude: float = 0.5  # per-octave gain (persistence)

    def __post_init__(self):
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if not (0.0 < self.amplitude <= 1.0):
            raise ValueError("amplitude must be in (0, 1]")


def _permutation(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.permutation(256)
    return np.concatenate([p, p]).astype(np.int64)


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _single_octave(x, y, perm: np.ndarray):
    xi = np.floor(x).astype(np.int64)
    yi = np.floor(y).astype(np.int64)
    xf = x - xi
    yf = y - yi
    xi &= 255
    yi &= 255

    g00 = _GRADS[perm[perm[xi] + yi] & 7]
    g10 = _GRADS[perm[perm[xi + 1] + yi] & 7]
    g01 = _GRADS[perm[perm[xi] + yi + 1] & 7]
    g11 = _GRADS[perm[perm[xi + 1] + yi + 1] & 7]

    d00 = g00[..., 0] * xf + g00[..., 1] * yf
    d10 = g10[..., 0] * (xf - 1.0) + g10[..., 1] * yf
    d01 = g01[..., 0] * xf + g01[..., 1] * (yf - 1.0)
    d11 = g11[..., 0] * (xf - 1.0) + g11[..., 1] * (yf - 1.0)

    u = _fade(xf)
    v = _fade(yf)
    nx0 = d00 + u * (d10 - d00)
    nx1 = d01 + u * (d11 - d01)
    return nx0 + v * (nx1 - nx0)


def perlin(x, y, params: PerlinParams):
    """Evaluate multi-octave gradient noise at (x, y); accepts arrays.

    Deterministic for a given params.seed; output is within [-1, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    perm = _permutation(params.seed)
    total = np.zeros(np.broadcast(x, y).shape, dtype=np.float64)
    amp = 1.0
    amp_sum = 0.0
    freq = params.base_frequency
    for _ in range(params.octaves):
        total = total + amp * _single_octave(x * freq, y * freq, perm)
        amp_sum += amp
        amp *= params.amplitude
        freq *= 2.0
    out = total / amp_sum
    return float(out) if out.ndim == 0 else out
