"""Channel draws, channel-dependent precoders and effective channels.

Channel tensors are stored with shape ``(..., 2, 2, m, m)`` where index
``[..., i, j, :, :]`` is the matrix from Tx-(i+1) to Rx-(j+1).  Leading
axes, when present, index independent draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COND_LIMIT = 1e12
MAX_REJECTIONS = 100


class DegenerateChannelError(ValueError):
    """A probability-zero channel event (singular matrix, vanishing pivot,
    defective eigenbasis).  Callers resample."""


@dataclass(frozen=True)
class Distribution:
    """Entry distribution for channel draws.

    ``kind`` is ``"gaussian"`` (circular CN(0,1): real and imaginary parts
    i.i.d. N(0, 1/2)) or ``"uniform"`` (real and imaginary parts i.i.d.
    uniform on ``[a, b]``).
    """

    kind: str = "gaussian"
    a: float = -1.0
    b: float = 1.0

    @classmethod
    def parse(cls, text: str | "Distribution") -> "Distribution":
        if isinstance(text, Distribution):
            return text
        parts = text.split(":")
        if parts[0] == "gaussian" and len(parts) == 1:
            return cls("gaussian")
        if parts[0] == "uniform" and len(parts) in (1, 3):
            a, b = (float(parts[1]), float(parts[2])) if len(parts) == 3 else (-1.0, 1.0)
            if not a < b:
                raise ValueError(f"uniform box needs a < b, got {a}, {b}")
            return cls("uniform", a, b)
        raise ValueError(f"unknown channel distribution {text!r}")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "gaussian":
            z = rng.standard_normal(shape + (2,)) * np.sqrt(0.5)
        else:
            z = rng.uniform(self.a, self.b, size=shape + (2,))
        return z[..., 0] + 1j * z[..., 1]


@dataclass(frozen=True)
class ChannelRealization:
    m: int
    h: np.ndarray
    rejections: int = 0

    def H(self, i: int, j: int) -> np.ndarray:
        """Channel from Tx-i to Rx-j (1-based)."""
        return self.h[..., i - 1, j - 1, :, :]

    def scaled(self, c: complex) -> "ChannelRealization":
        return ChannelRealization(self.m, self.h * c, self.rejections)


@dataclass(frozen=True)
class PrecoderSet:
    """Inverse-channel precoders ``v[..., i, j]`` with unit Frobenius norm.

    ``normalization[..., i, j]`` is the Frobenius norm of the inverse that
    was divided out, i.e. ``sqrt(tr(H^-1 H^-H))``.
    """

    v: np.ndarray
    normalization: np.ndarray

    def V(self, i: int, j: int) -> np.ndarray:
        return self.v[..., i - 1, j - 1, :, :]

    def norm(self, i: int, j: int) -> np.ndarray:
        return self.normalization[..., i - 1, j - 1]


@dataclass(frozen=True)
class JsPrecoderSet:
    """12x4 precoders over the three-slot extension (not power normalized)."""

    v11: np.ndarray
    v12: np.ndarray
    v21: np.ndarray
    v22: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray

    def V(self, i: int, j: int) -> np.ndarray:
        return {(1, 1): self.v11, (1, 2): self.v12, (2, 1): self.v21, (2, 2): self.v22}[(i, j)]


@dataclass(frozen=True)
class EffectiveChannels:
    """Desired-signal channels seen at one receiver.

    For Rx-1: ``hhat = H11 V11``, ``ghat = H21 V21``, ``htilde = H11 H12^-1``,
    ``gtilde = H21 H22^-1``.  For Rx-2 the roles of the two receive
    indices swap.
    """

    hhat: np.ndarray
    ghat: np.ndarray
    htilde: np.ndarray
    gtilde: np.ndarray
    rx: int = 1


def sample_channel_set(m: int, dist="gaussian", rng=None, size=None) -> ChannelRealization:
    """Draw the four m x m channel matrices.

    With ``size`` given, a batch of independent network draws is returned
    with leading shape ``size``.  Any draw with a matrix of condition
    number above ``COND_LIMIT`` is redrawn; after ``MAX_REJECTIONS``
    consecutive rejections a :class:`DegenerateChannelError` is raised.
    """
    if m not in (2, 4):
        raise ValueError(f"antenna count must be 2 or 4, got {m}")
    dist = Distribution.parse(dist)
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    batch = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    flat = int(np.prod(batch)) if batch else 1

    h = dist.draw(rng, (flat, 2, 2, m, m))
    rejections = 0
    streak = 0
    while True:
        bad = np.any(np.linalg.cond(h) > COND_LIMIT, axis=(-2, -1))
        nbad = int(np.count_nonzero(bad))
        if nbad == 0:
            break
        rejections += nbad
        streak += 1
        if streak >= MAX_REJECTIONS:
            raise DegenerateChannelError(f"{MAX_REJECTIONS} consecutive singular channel draws")
        h[bad] = dist.draw(rng, (nbad, 2, 2, m, m))
    h = h.reshape(batch + (2, 2, m, m))
    return ChannelRealization(m, h, rejections)


def _inverse(h: np.ndarray) -> np.ndarray:
    # Frobenius condition estimate: within a factor m of the 2-norm one.
    try:
        inv = np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:
        raise DegenerateChannelError("channel matrix is singular") from exc
    est = np.linalg.norm(h, axis=(-2, -1)) * np.linalg.norm(inv, axis=(-2, -1))
    if not np.all(np.isfinite(est)) or np.any(est > COND_LIMIT * h.shape[-1]):
        raise DegenerateChannelError("channel matrix is numerically singular")
    return inv


def tx_precoders(h_i1: np.ndarray, h_i2: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Precoders of one transmitter from its own two outgoing channels.

    Returns ``(V_i1, V_i2, norm_i1, norm_i2)`` with ``V_i1 ~ H_i2^-1``
    (zero-forced at the unintended receiver) and ``V_i2 ~ H_i1^-1``.
    """
    inv2 = _inverse(h_i2)
    inv1 = _inverse(h_i1)
    n1 = np.linalg.norm(inv2, axis=(-2, -1))
    n2 = np.linalg.norm(inv1, axis=(-2, -1))
    return inv2 / n1[..., None, None], inv1 / n2[..., None, None], n1, n2


def ljj_precoders(ch: ChannelRealization) -> PrecoderSet:
    """Channel-inverse precoders for both transmitters (local CSIT)."""
    v = np.empty_like(ch.h)
    norms = np.empty(ch.h.shape[:-2])
    for i in range(2):
        v[..., i, 0, :, :], v[..., i, 1, :, :], norms[..., i, 0], norms[..., i, 1] = tx_precoders(
            ch.h[..., i, 0, :, :], ch.h[..., i, 1, :, :]
        )
    return PrecoderSet(v, norms)


def extend(h: np.ndarray, slots: int = 3) -> np.ndarray:
    """Block-diagonal channel over ``slots`` uses of a constant channel."""
    m = h.shape[-1]
    out = np.zeros(h.shape[:-2] + (slots * m, slots * m), dtype=complex)
    for t in range(slots):
        out[..., t * m : (t + 1) * m, t * m : (t + 1) * m] = h
    return out


def _sorted_eig(f: np.ndarray):
    lam, vec = np.linalg.eig(f)
    o1 = np.argsort(np.angle(lam), axis=-1, kind="stable")
    mag = np.round(np.take_along_axis(np.abs(lam), o1, axis=-1), 12)
    o2 = np.argsort(-mag, axis=-1, kind="stable")
    order = np.take_along_axis(o1, o2, axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    vec = np.take_along_axis(vec, order[..., None, :], axis=-1)
    return lam, vec


def _js_core(ch: ChannelRealization):
    H = ch.H
    f = _inverse(H(1, 1)) @ H(2, 1) @ _inverse(H(2, 2)) @ H(1, 2)
    return _sorted_eig(f)


def js_defective(ch: ChannelRealization, defect_cond: float = 1e10) -> np.ndarray:
    """Mask of draws whose alignment eigenbasis is numerically defective."""
    _, vec = _js_core(ch)
    return np.linalg.cond(vec) > defect_cond


def js_precoders(ch: ChannelRealization, defect_cond: float = 1e10) -> JsPrecoderSet:
    """Eigenvector-based alignment precoders over a three-slot extension.

    The eigenproblem is solved on the 4x4 core ``F = H11^-1 H21 H22^-1 H12``;
    the extended matrix is ``I_3 (x) F`` whose eigenvectors are
    ``e_t (x) v_k``.  Column ``3*g + t`` of the lifted basis is
    ``e_t (x) v_{(g+t) mod 4}``, so the two eigenvectors combined into each
    precoder column belong to different eigenvalues.
    """
    if ch.m != 4:
        raise ValueError("the alignment baseline needs m = 4")
    H = ch.H
    lam, vec = _js_core(ch)
    if np.any(np.linalg.cond(vec) > defect_cond):
        raise DegenerateChannelError("defective eigenbasis")
    batch = vec.shape[:-2]
    E = np.zeros(batch + (12, 12), dtype=complex)
    eig12 = np.zeros(batch + (12,), dtype=complex)
    for g in range(4):
        for t in range(3):
            k = (g + t) % 4
            E[..., 4 * t : 4 * t + 4, 3 * g + t] = vec[..., :, k]
            eig12[..., 3 * g + t] = lam[..., k]
    sel1 = np.kron(np.eye(4), np.array([[1.0], [1.0], [0.0]]))
    sel2 = np.kron(np.eye(4), np.array([[1.0], [0.0], [1.0]]))
    v11 = E @ sel1
    v12 = E @ sel2
    Hp = {k: extend(H(*k)) for k in ((1, 1), (1, 2), (2, 1), (2, 2))}
    v21 = np.linalg.solve(Hp[2, 2], Hp[1, 2] @ v11)
    v22 = np.linalg.solve(Hp[2, 1], Hp[1, 1] @ v12)
    return JsPrecoderSet(v11, v12, v21, v22, E, eig12)


def effective_channels(ch: ChannelRealization, prec: PrecoderSet, rx: int = 1) -> EffectiveChannels:
    """Effective channels of the desired streams at receiver ``rx``."""
    if prec.v.shape[-1] != ch.m:
        raise ValueError("precoder and channel dimensions differ")
    H, V = ch.H, prec.V
    if rx == 1:
        return EffectiveChannels(
            H(1, 1) @ V(1, 1),
            H(2, 1) @ V(2, 1),
            H(1, 1) @ _inverse(H(1, 2)),
            H(2, 1) @ _inverse(H(2, 2)),
            rx=1,
        )
    return EffectiveChannels(
        H(1, 2) @ V(1, 2),
        H(2, 2) @ V(2, 2),
        H(1, 2) @ _inverse(H(1, 1)),
        H(2, 2) @ _inverse(H(2, 1)),
        rx=2,
    )
