"""Finite input constellations, rotation and coordinate product distance.

Every constellation here is a (rotated) Cartesian product of two PAM
alphabets: ``point = exp(j*phi) * (a + j*b)`` with ``a`` drawn from
``re_levels`` and ``b`` from ``im_levels``.  The receivers exploit this
product structure, so the per-coordinate alphabets are kept alongside
the point list.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("bpsk", "qam4", "qam8", "qam16")

#: Rotation used throughout the simulations to obtain a non-zero CPD.
PHI_CPD = math.atan(2.0) / 2.0


def _pam(n: int) -> np.ndarray:
    return np.arange(-(n - 1), n, 2, dtype=float)


def _gray(n: int) -> np.ndarray:
    i = np.arange(n)
    return i ^ (i >> 1)


@dataclass(frozen=True)
class ConstellationSpec:
    """A unit-average-power constellation built from two PAM alphabets.

    Attributes
    ----------
    kind : str
        One of ``bpsk``, ``qam4``, ``qam8``, ``qam16``.
    re_levels, im_levels : ndarray
        Unrotated coordinate alphabets (already power-normalized).
    rotation : float
        Rotation angle in radians applied to every point.
    """

    kind: str
    re_levels: np.ndarray
    im_levels: np.ndarray
    rotation: float = 0.0
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = self.re_levels[:, None] + 1j * self.im_levels[None, :]
        pts = np.exp(1j * self.rotation) * grid.ravel()
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def label_bits(self) -> int:
        return int(round(math.log2(self.size)))

    @property
    def avg_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def labels(self) -> np.ndarray:
        """Gray bit labels, one integer per point (row-major over re/im)."""
        n_im = self.im_levels.size
        bits_im = max(int(round(math.log2(n_im))), 0)
        g_re = _gray(self.re_levels.size)
        g_im = _gray(n_im)
        return ((g_re[:, None] << bits_im) | g_im[None, :]).ravel()

    def coords(self, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split point indices into (re-level index, im-level index)."""
        return np.divmod(np.asarray(index), self.im_levels.size)

    def rotated(self, phi: float) -> "ConstellationSpec":
        return ConstellationSpec(self.kind, self.re_levels, self.im_levels, phi)


def make_constellation(kind: str, rotation: float = 0.0) -> ConstellationSpec:
    """Build a unit-power constellation and rotate it by ``rotation``.

    ``qam8`` is the product of a 4-PAM real part and a 2-PAM imaginary
    part, equally spaced.
    """
    if kind == "bpsk":
        re, im = _pam(2), np.zeros(1)
    elif kind == "qam4":
        re, im = _pam(2), _pam(2)
    elif kind == "qam8":
        re, im = _pam(4), _pam(2)
    elif kind == "qam16":
        re, im = _pam(4), _pam(4)
    else:
        raise ValueError(f"unsupported constellation kind {kind!r}; expected one of {KINDS}")
    power = np.mean(re**2) + np.mean(im**2)
    scale = 1.0 / math.sqrt(power)
    return ConstellationSpec(kind, re * scale, im * scale, float(rotation))


def cpd(c: ConstellationSpec | np.ndarray) -> float:
    """Coordinate product distance: min over distinct pairs of |dRe|*|dIm|."""
    pts = np.asarray(c.points if isinstance(c, ConstellationSpec) else c)
    if pts.size < 2:
        raise ValueError("CPD needs at least two points")
    iu = np.triu_indices(pts.size, k=1)
    d = pts[iu[0]] - pts[iu[1]]
    return float(np.min(np.abs(d.real) * np.abs(d.imag)))


def dedup(points, tol: float = 1e-9) -> np.ndarray:
    """Remove points closer than ``tol`` to an earlier point (order kept)."""
    out: list[complex] = []
    for p in np.asarray(points).ravel():
        if all(abs(p - q) > tol for q in out):
            out.append(complex(p))
    return np.array(out, dtype=complex)


def sumset(c1, c2, weights=(1.0, 1.0), tol: float = 1e-9) -> np.ndarray:
    """All sums ``w1*u + w2*v`` over the two point sets, deduplicated."""
    p1 = np.asarray(c1.points if isinstance(c1, ConstellationSpec) else c1)
    p2 = np.asarray(c2.points if isinstance(c2, ConstellationSpec) else c2)
    sums = weights[0] * p1[:, None] + weights[1] * p2[None, :]
    return dedup(sums, tol)


def level_sumset(l1: np.ndarray, l2: np.ndarray, weights=(1.0, 1.0), tol: float = 1e-9) -> np.ndarray:
    """Weighted sumset of two real coordinate alphabets, sorted."""
    vals = sorted(weights[0] * a + weights[1] * b for a, b in itertools.product(l1, l2))
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return np.array(out)
