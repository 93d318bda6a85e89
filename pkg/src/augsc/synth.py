"""Semi-random union-of-subspaces generator.

Three 3-dimensional subspaces of R^6 whose mutual angle is set by ``theta``.
Gaussian weights come from a documented counter-based stream so a seed means
the same thing in any implementation:

* ``u64(seed, i) = splitmix64_mix(seed + (i + 1) * 0x9E3779B97F4A7C15)``
  (all arithmetic mod 2**64), where ``splitmix64_mix`` is the SplitMix64
  finalizer ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31``.
* ``uniform(seed, i) = (u64(seed, i) >> 11) * 2**-53`` lies in [0, 1).
* Standard normals are produced in pairs by Box-Muller from uniforms
  ``u1 = uniform(2m)``, ``u2 = uniform(2m + 1)``:
  ``r = sqrt(-2 ln(1 - u1))``, ``z[2m] = r cos(2 pi u2)``,
  ``z[2m + 1] = r sin(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

from .core import DataMatrix
from .errors import DataError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def counter_u64(seed: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit outputs ``start .. start + count - 1`` of the stream."""
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return _mix(base + ctr * _GOLDEN)


def counter_uniform(seed: int, start: int, count: int) -> np.ndarray:
    return (counter_u64(seed, start, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def counter_normal(seed: int, count: int, start: int = 0) -> np.ndarray:
    """``count`` standard normals; ``start`` counts normals, not uniforms."""
    pair0 = start // 2
    npairs = (start + count + 1) // 2 - pair0
    u = counter_uniform(seed, 2 * pair0, 2 * npairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * npairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    off = start - 2 * pair0
    return z[off : off + count]


def make_bases(theta_deg: float):
    """The three 6x3 bases ``[cos I; sin I]``, ``[cos I; -sin I]``, ``[I; 0]``."""
    if not 0 < theta_deg <= 90:
        raise DataError("theta must lie in (0, 90] degrees")
    t = np.deg2rad(theta_deg)
    eye = np.eye(3)
    u1 = np.vstack([np.cos(t) * eye, np.sin(t) * eye])
    u2 = np.vstack([np.cos(t) * eye, -np.sin(t) * eye])
    u3 = np.vstack([eye, np.zeros((3, 3))])
    return [u1, u2, u3]


def sample_union(bases, n_per: int, seed: int):
    """Draw ``n_per`` unit-norm samples from each subspace.

    Columns are grouped by subspace: samples ``l*n_per .. (l+1)*n_per - 1``
    come from ``bases[l]``. Returns ``(DataMatrix, labels)``.
    """
    if n_per < 1:
        raise DataError("n_per must be positive")
    cols, labels = [], []
    offset = 0
    for ell, u in enumerate(bases):
        dim = u.shape[1]
        g = counter_normal(seed, dim * n_per, start=offset).reshape(n_per, dim).T
        offset += dim * n_per
        pts = u @ g
        pts /= np.linalg.norm(pts, axis=0)
        cols.append(pts)
        labels.extend([ell] * n_per)
    return DataMatrix(np.hstack(cols), normalized=True), np.asarray(labels, dtype=int)
