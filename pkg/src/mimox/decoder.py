"""Maximum-likelihood search over finite real alphabets.

Every receiver in this package reduces to the same observation model:
a complex vector ``y`` that is real-linear in a set of real unknowns,

    y = sum_r cols[:, r] * u_r + noise,   u_r in levels[r],

with independent circular noise of known per-entry variance.  A complex
symbol ``exp(j*phi) * (a + j*b)`` contributes two unknowns ``a`` and
``b`` (only ``a`` when the imaginary alphabet is ``{0}``).

Two search modes are provided.  ``exhaustive`` enumerates candidates in
lexicographic order of the per-unknown level indices and keeps the first
minimum, so ties go to the lowest candidate index.  ``sphere`` is a
depth-first Schnorr-Euchner search on the QR factor of the whitened
model; it returns the same argmin whenever the minimum is unique.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MAX_CANDIDATES = 10**7


class CandidateOverflowError(ValueError):
    """Exhaustive search would exceed :data:`MAX_CANDIDATES`."""


@dataclass
class LatticeModel:
    """Batched real-linear observation model.

    Attributes
    ----------
    y : (..., n) complex
    cols : (..., n, r) complex
        Column ``r`` is the response to unknown ``u_r``.
    noise_var : (n,) or (..., n) real
        Per-entry complex noise variance.
    levels : (..., r, L) real
        Sorted alphabet of every unknown, padded with ``nan``.
    nlev : (r,) or (..., r) int
        Number of valid levels per unknown.
    """

    y: np.ndarray
    cols: np.ndarray
    noise_var: np.ndarray
    levels: np.ndarray
    nlev: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.cols.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.y.shape[:-1]

    def whitened_real(self):
        """Real-valued ``(y, A)`` after dividing each entry by its noise std."""
        w = 1.0 / np.sqrt(np.asarray(self.noise_var, dtype=float))
        y = self.y * w
        A = self.cols * w[..., :, None]
        yr = np.concatenate([y.real, y.imag], axis=-1)
        Ar = np.concatenate([A.real, A.imag], axis=-2)
        return yr, Ar

    def values(self, idx: np.ndarray) -> np.ndarray:
        lv = np.broadcast_to(self.levels, idx.shape + self.levels.shape[-1:])
        return np.take_along_axis(lv, idx[..., None], axis=-1)[..., 0]

    def metric(self, idx: np.ndarray) -> np.ndarray:
        """Whitened squared distance of the candidate with level indices ``idx``."""
        u = self.values(idx)
        r = self.y - np.einsum("...nr,...r->...n", self.cols, u)
        return np.sum(np.abs(r) ** 2 / np.asarray(self.noise_var), axis=-1)


def build_levels(alphabets) -> tuple[np.ndarray, np.ndarray]:
    """Pad a list of 1-D sorted alphabets into ``(levels, nlev)``."""
    L = max(len(a) for a in alphabets)
    levels = np.full((len(alphabets), L), np.nan)
    nlev = np.empty(len(alphabets), dtype=np.int64)
    for k, a in enumerate(alphabets):
        a = np.sort(np.asarray(a, dtype=float))
        levels[k, : a.size] = a
        nlev[k] = a.size
    return levels, nlev


# ---------------------------------------------------------------------------
# exhaustive search


def _components(A: np.ndarray, tol: float = 1e-12) -> list[list[int]]:
    """Unknowns grouped by shared observation rows (union-find)."""
    support = np.abs(A) > tol * max(np.max(np.abs(A)), 1e-300)
    r = A.shape[1]
    parent = list(range(r))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for row in support:
        nz = np.flatnonzero(row)
        for j in nz[1:]:
            a, b = find(nz[0]), find(j)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for i in range(r):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _search_component(y, A, levels, nlev, comp, chunk=1 << 16):
    sizes = [int(nlev[c]) for c in comp]
    total = int(np.prod(sizes, dtype=np.int64))
    if total > MAX_CANDIDATES:
        raise CandidateOverflowError(f"{total} candidates exceed the {MAX_CANDIDATES} limit")
    Ac = A[:, comp]
    radix = np.array(sizes, dtype=np.int64)
    best, best_idx = np.inf, None
    for start in range(0, total, chunk):
        n = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = np.empty((n.size, len(comp)), dtype=np.int64)
        rem = n
        for k in range(len(comp) - 1, -1, -1):
            rem, digits[:, k] = np.divmod(rem, radix[k])
        vals = levels[comp, :][np.arange(len(comp)), digits]
        d = np.sum((y[None, :] - vals @ Ac.T) ** 2, axis=1)
        k = int(np.argmin(d))
        if d[k] < best:
            best, best_idx = float(d[k]), digits[k]
    return best_idx


def exhaustive_decode(model: LatticeModel) -> np.ndarray:
    """Reference ML search; returns level indices of shape ``(..., r)``."""
    yr, Ar = model.whitened_real()
    batch = model.batch_shape
    r = model.n_unknowns
    flat_y = yr.reshape(-1, yr.shape[-1])
    flat_A = Ar.reshape(-1, *Ar.shape[-2:])
    B = flat_y.shape[0]
    lv = np.broadcast_to(model.levels, batch + model.levels.shape[-2:]).reshape(B, r, -1)
    nl = np.broadcast_to(model.nlev, batch + (r,)).reshape(B, r)
    out = np.empty((B, r), dtype=np.int64)
    for b in range(B):
        for comp in _components(flat_A[b]):
            out[b, comp] = _search_component(flat_y[b], flat_A[b], lv[b], nl[b], comp)
    return out.reshape(batch + (r,))


# ---------------------------------------------------------------------------
# sphere search


@numba.njit(cache=True)
def _sphere_one(R, z, levels, nlev, out):
    r = R.shape[0]
    best = np.inf
    cur = np.zeros(r, dtype=np.int64)
    val = np.zeros(r)
    lo = np.zeros(r, dtype=np.int64)
    hi = np.zeros(r, dtype=np.int64)
    cen = np.zeros(r)
    pd = np.zeros(r + 1)

    k = r - 1
    # open level k
    s = z[k]
    cen[k] = s / R[k, k] if R[k, k] != 0.0 else 0.0
    j = 0
    while j < nlev[k] and levels[k, j] < cen[k]:
        j += 1
    hi[k] = j
    lo[k] = j - 1
    while True:
        # next candidate at level k in order of distance from the centre
        pick = -1
        if lo[k] >= 0 and hi[k] < nlev[k]:
            if cen[k] - levels[k, lo[k]] <= levels[k, hi[k]] - cen[k]:
                pick = lo[k]
            else:
                pick = hi[k]
        elif lo[k] >= 0:
            pick = lo[k]
        elif hi[k] < nlev[k]:
            pick = hi[k]
        d = np.inf
        if pick >= 0:
            e = R[k, k] * (levels[k, pick] - cen[k])
            d = pd[k + 1] + e * e
        if pick < 0 or d >= best:
            k += 1
            if k == r:
                break
            continue
        if pick == lo[k]:
            lo[k] -= 1
        else:
            hi[k] += 1
        cur[k] = pick
        val[k] = levels[k, pick]
        if k == 0:
            best = d
            for i in range(r):
                out[i] = cur[i]
            continue
        pd[k] = d
        k -= 1
        s = z[k]
        for i in range(k + 1, r):
            s -= R[k, i] * val[i]
        cen[k] = s / R[k, k] if R[k, k] != 0.0 else 0.0
        j = 0
        while j < nlev[k] and levels[k, j] < cen[k]:
            j += 1
        hi[k] = j
        lo[k] = j - 1
    return best


@numba.njit(cache=True)
def _sphere_batch(Rs, zs, levels, nlev, out):
    for b in range(Rs.shape[0]):
        _sphere_one(Rs[b], zs[b], levels[b], nlev[b], out[b])


def sphere_decode(model: LatticeModel) -> np.ndarray:
    """Depth-first ML search; returns level indices of shape ``(..., r)``.

    Unknowns are ordered so that the column of largest whitened norm is
    detected first, which shrinks the search radius early.
    """
    yr, Ar = model.whitened_real()
    batch = model.batch_shape
    r = model.n_unknowns
    B = int(np.prod(batch, dtype=np.int64)) if batch else 1
    yr = yr.reshape(B, -1)
    Ar = Ar.reshape(B, Ar.shape[-2], r)
    if Ar.shape[1] < r:
        raise ValueError("sphere search needs at least as many real observations as unknowns")
    lv = np.ascontiguousarray(np.broadcast_to(model.levels, batch + model.levels.shape[-2:]).reshape(B, r, -1))
    nl = np.ascontiguousarray(np.broadcast_to(model.nlev, batch + (r,)).reshape(B, r))

    order = np.argsort(np.sum(Ar**2, axis=1), axis=-1, kind="stable")
    Ap = np.take_along_axis(Ar, order[:, None, :], axis=2)
    Q, R = np.linalg.qr(Ap)
    z = np.einsum("bnr,bn->br", Q, yr)
    lvp = np.take_along_axis(lv, order[:, :, None], axis=1)
    nlp = np.take_along_axis(nl, order, axis=1)
    idx = np.zeros((B, r), dtype=np.int64)
    _sphere_batch(np.ascontiguousarray(R), np.ascontiguousarray(z), np.ascontiguousarray(lvp), np.ascontiguousarray(nlp), idx)
    out = np.empty_like(idx)
    np.put_along_axis(out, order, idx, axis=1)
    return out.reshape(batch + (r,))


def ml_decode(model: LatticeModel, mode: str = "sphere"):
    """ML level indices and their whitened metric.

    Returns ``(idx, metric)``; ``idx`` has shape ``(..., r)``.
    """
    if mode == "sphere":
        idx = sphere_decode(model)
    elif mode == "exhaustive":
        idx = exhaustive_decode(model)
    else:
        raise ValueError(f"unknown decoding mode {mode!r}")
    return idx, model.metric(idx)
