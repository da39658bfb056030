"""Codeword construction: Alamouti blocks, the S-R 4x4 code and the
zero-column embeddings used by the X-network schemes.

All builders broadcast over leading axes, so a batch of symbol vectors
of shape ``(..., k)`` yields a batch of codewords.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constellation import ConstellationSpec, dedup

#: Candidate rotation angles tried, in order, by :func:`admissible_theta`.
THETA_CANDIDATES = (math.pi / 4, math.pi / 6, 1.0)


def alamouti(s1, s2) -> np.ndarray:
    """``[[s1, -conj(s2)], [s2, conj(s1)]]`` for scalars or arrays."""
    s1 = np.asarray(s1, dtype=complex)
    s2 = np.asarray(s2, dtype=complex)
    top = np.stack([s1, -np.conj(s2)], axis=-1)
    bot = np.stack([s2, np.conj(s1)], axis=-1)
    return np.stack([top, bot], axis=-2)


def is_alamouti(m: np.ndarray, tol: float = 1e-12) -> bool:
    """True if every 2x2 matrix in ``m`` has one of the two Alamouti sign
    patterns, ``[[a, b], [-conj b, conj a]]`` or ``[[a, b], [conj b, -conj a]]``.

    Both patterns are scaled-unitary and the set of their union is closed
    under products and conjugate transposes.  ``tol`` is relative to the
    largest entry of each matrix.
    """
    m = np.asarray(m)
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    scale = np.maximum(np.max(np.abs(m), axis=(-2, -1)), 1e-300)
    plus = np.maximum(np.abs(d - np.conj(a)), np.abs(c + np.conj(b))) / scale
    minus = np.maximum(np.abs(d + np.conj(a)), np.abs(c - np.conj(b))) / scale
    return bool(np.all(np.minimum(plus, minus) <= tol))


def ljj_blocks(b1, b2) -> tuple[np.ndarray, np.ndarray]:
    """Two-antenna blocks for the three-slot scheme.

    ``b1`` (symbols for Rx-1) fills slots 1-2, ``b2`` (for Rx-2) fills
    slots 2-3; the remaining column of each block is zero.
    """
    b1 = np.asarray(b1, dtype=complex)
    b2 = np.asarray(b2, dtype=complex)
    a1 = alamouti(b1[..., 0], b1[..., 1])
    a2 = alamouti(b2[..., 0], b2[..., 1])
    zero = np.zeros(a1.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([a1, zero], axis=-1), np.concatenate([zero, a2], axis=-1)


def sr_codeword(x, theta: float) -> np.ndarray:
    """The 4x4 S-R code carrying 8 complex symbols with coordinate
    interleaving; off-diagonal 2x2 blocks are scaled by ``exp(j*theta)``."""
    x = np.asarray(x, dtype=complex)
    R = [None] + [x[..., k].real for k in range(8)]
    I = [None] + [x[..., k].imag for k in range(8)]
    e = np.exp(1j * theta)
    rows = [
        [R[1] + 1j * I[3], -R[2] + 1j * I[4], e * (R[5] + 1j * I[7]), e * (-R[6] + 1j * I[8])],
        [R[2] + 1j * I[4], R[1] - 1j * I[3], e * (R[6] + 1j * I[8]), e * (R[5] - 1j * I[7])],
        [e * (R[7] + 1j * I[5]), e * (-R[8] + 1j * I[6]), R[3] + 1j * I[1], -R[4] + 1j * I[2]],
        [e * (R[8] + 1j * I[6]), e * (R[7] - 1j * I[5]), R[4] + 1j * I[2], R[3] - 1j * I[1]],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


@dataclass(frozen=True)
class CompactCodeword:
    matrix: np.ndarray
    theta: float
    symbols: np.ndarray


def compact_codeword(x, theta: float) -> CompactCodeword:
    """The 4x4 codeword left after the interference-cancelling column
    processing; it has the same layout as :func:`sr_codeword`."""
    x = np.asarray(x, dtype=complex)
    return CompactCodeword(sr_codeword(x, theta), float(theta), x)


def msr_blocks(b1, b2, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """4x6 blocks: data for Rx-1 in columns 1,2,4,5 and for Rx-2 in
    columns 2,3,5,6 (1-based); the other columns are exactly zero."""
    s1 = sr_codeword(b1, theta)
    s2 = sr_codeword(b2, theta)
    z = np.zeros(s1.shape[:-1] + (1,), dtype=complex)
    x1 = np.concatenate([s1[..., :2], z, s1[..., 2:], z], axis=-1)
    x2 = np.concatenate([z, s2[..., :2], z, s2[..., 2:]], axis=-1)
    return x1, x2


def xprime_map(x) -> np.ndarray:
    """Coordinate-interleaved remap of 8 symbols to the 8 ``x'`` symbols."""
    x = np.asarray(x, dtype=complex)
    R = [None] + [x[..., k].real for k in range(8)]
    I = [None] + [x[..., k].imag for k in range(8)]
    out = [
        R[1] + 1j * I[3],
        R[2] + 1j * I[4],
        R[3] + 1j * I[1],
        -R[4] + 1j * I[2],
        R[7] + 1j * I[5],
        -R[8] + 1j * I[6],
        R[5] + 1j * I[7],
        -R[6] + 1j * I[8],
    ]
    return np.stack(out, axis=-1)


def xprime_inverse(xp) -> np.ndarray:
    """Inverse of :func:`xprime_map`."""
    xp = np.asarray(xp, dtype=complex)
    re = [None] * 9
    im = [None] * 9
    re[1], im[3] = xp[..., 0].real, xp[..., 0].imag
    re[2], im[4] = xp[..., 1].real, xp[..., 1].imag
    re[3], im[1] = xp[..., 2].real, xp[..., 2].imag
    re[4], im[2] = -xp[..., 3].real, xp[..., 3].imag
    re[7], im[5] = xp[..., 4].real, xp[..., 4].imag
    re[8], im[6] = -xp[..., 5].real, xp[..., 5].imag
    re[5], im[7] = xp[..., 6].real, xp[..., 6].imag
    re[6], im[8] = -xp[..., 7].real, xp[..., 7].imag
    return np.stack([re[k] + 1j * im[k] for k in range(1, 9)], axis=-1)


def difference_alphabet(c: ConstellationSpec, tol: float = 1e-9) -> np.ndarray:
    """Distinct pairwise differences of the constellation, zero first."""
    d = dedup((c.points[:, None] - c.points[None, :]).ravel(), tol)
    return np.concatenate([[0.0], d[np.abs(d) > tol]])


@dataclass
class RankScanReport:
    theta: float
    mode: str
    scanned: int
    min_abs_det: float
    witness: tuple | None

    @property
    def full_rank(self) -> bool:
        return self.witness is None

    def to_text(self) -> str:
        w = "none" if self.witness is None else " ".join(f"{complex(v):.6g}" for v in self.witness)
        return (
            f"theta={self.theta!r}\nmode={self.mode}\nscanned={self.scanned}\n"
            f"min_abs_det={self.min_abs_det!r}\nfull_rank={self.full_rank}\nwitness={w}\n"
        )

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path


def _tuples_exhaustive(n_diff: int, chunk: int):
    idx = itertools.product(range(n_diff), repeat=8)
    next(idx)  # all-zero tuple
    while True:
        block = list(itertools.islice(idx, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def diff_rank_scan(
    c: ConstellationSpec,
    theta: float,
    mode: str = "exhaustive",
    n_samples: int = 100_000,
    seed: int = 0,
    singular_tol: float = 1e-9,
    chunk: int = 200_000,
    report_path=None,
) -> RankScanReport:
    """Scan |det| of codeword difference matrices over nonzero tuples of
    symbol differences.

    ``mode`` is ``"exhaustive"`` (all ``|D|**8 - 1`` tuples, where ``D`` is
    the difference alphabet) or ``"sampled"`` (``n_samples`` uniform draws
    of nonzero tuples).  A tuple with ``|det| <= singular_tol`` is reported
    as a witness of rank deficiency.
    """
    diffs = difference_alphabet(c)
    n = diffs.size
    if mode == "exhaustive":
        if n**8 > 10**8:
            raise ValueError(f"exhaustive scan of {n}**8 tuples exceeds the 1e8 limit; use sampled mode")
        blocks = _tuples_exhaustive(n, chunk)
    elif mode == "sampled":
        rng = np.random.default_rng(seed)

        def _sampled():
            left = n_samples
            while left > 0:
                k = min(chunk, left)
                t = rng.integers(0, n, size=(k, 8))
                t = t[np.any(t != 0, axis=1)]
                left -= t.shape[0]
                yield t

        blocks = _sampled()
    else:
        raise ValueError(f"unknown scan mode {mode!r}")

    best = math.inf
    witness = None
    scanned = 0
    for t in blocks:
        dets = np.abs(np.linalg.det(sr_codeword(diffs[t], theta)))
        scanned += t.shape[0]
        k = int(np.argmin(dets))
        if dets[k] < best:
            best = float(dets[k])
        if witness is None and dets[k] <= singular_tol:
            witness = tuple(complex(v) for v in diffs[t[k]])
    report = RankScanReport(float(theta), mode, scanned, best, witness)
    if report_path is not None:
        report.write(report_path)
    return report


def admissible_theta(c: ConstellationSpec, candidates=THETA_CANDIDATES, mode: str = "exhaustive", **kw):
    """First candidate angle whose difference scan finds no singular
    matrix, with its report; ``(None, None)`` if none passes."""
    for th in candidates:
        rep = diff_rank_scan(c, th, mode=mode, **kw)
        if rep.full_rank:
            return th, rep
    return None, None
