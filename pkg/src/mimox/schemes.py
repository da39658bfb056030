"""Transmitter assembly and the channel model for every supported scheme.

The power constants of the network model are folded into the transmit
operations (``sqrt(3P/4)`` for the two Alamouti-based schemes and
``sqrt(3P/2)`` for the alignment baseline), so :func:`apply_channel`
adds unit-variance noise and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, JsPrecoderSet, PrecoderSet
from .constellation import KINDS, PHI_CPD
from .stbc import ljj_blocks, msr_blocks

SCHEMES = ("ljj", "msr", "js", "trivial_repetition", "tdma_srp")
SCHEME_ANTENNAS = {"ljj": 2, "msr": 4, "js": 4, "trivial_repetition": 4}
SCHEME_ALIASES = {"trivial": "trivial_repetition", "tdma": "tdma_srp"}


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SrpParams:
    """Parameters of the S-R single-user precoder blocks.

    One ``(tau, psi, theta)`` triple per 2x2 block: one block for m=2,
    two for m=4.  The defaults give ``P = I``.
    """

    tau: tuple = (1.0, 1.0)
    psi: tuple = (math.pi / 4, math.pi / 4)
    theta: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    m: int | None = None
    theta: float = math.pi / 4
    rotation: float = PHI_CPD
    kind: str = "bpsk"
    P: float = 1.0
    srp: SrpParams | None = field(default=None)

    def __post_init__(self):
        scheme = SCHEME_ALIASES.get(self.scheme, self.scheme)
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown constellation {self.kind!r}")
        m = self.m if self.m is not None else SCHEME_ANTENNAS.get(scheme, 4)
        need = SCHEME_ANTENNAS.get(scheme)
        if need is not None and m != need:
            raise ConfigurationError(f"scheme {scheme} needs m={need}, got m={m}")
        if m not in (2, 4):
            raise ConfigurationError(f"m must be 2 or 4, got {m}")
        object.__setattr__(self, "m", m)
        if scheme == "trivial_repetition":
            object.__setattr__(self, "theta", 0.0)
        if not self.P > 0:
            raise ConfigurationError("power must be positive")


def alamouti_scale(P) -> np.ndarray:
    return np.sqrt(3.0 * np.asarray(P) / 4.0)


def js_scale(P) -> np.ndarray:
    return np.sqrt(3.0 * np.asarray(P) / 2.0)


def _bcast(s, ndim_tail: int):
    s = np.asarray(s, dtype=float)
    return s.reshape(s.shape + (1,) * ndim_tail)


def ljj_transmit(prec: PrecoderSet, b11, b12, b21, b22, P):
    """Two superposed precoded Alamouti blocks per transmitter (2x3 each)."""
    if prec.v.shape[-1] != 2:
        raise ConfigurationError("ljj_transmit needs m = 2")
    x11, x12 = ljj_blocks(b11, b12)
    x21, x22 = ljj_blocks(b21, b22)
    s = _bcast(alamouti_scale(P), 2)
    X1 = s * (prec.V(1, 1) @ x11 + prec.V(1, 2) @ x12)
    X2 = s * (prec.V(2, 1) @ x21 + prec.V(2, 2) @ x22)
    return X1, X2


def msr_transmit(prec: PrecoderSet, b11, b12, b21, b22, P, theta: float):
    """Zero-column embedded S-R codewords, precoded (4x6 each)."""
    if prec.v.shape[-1] != 4:
        raise ConfigurationError("msr_transmit needs m = 4")
    x11, x12 = msr_blocks(b11, b12, theta)
    x21, x22 = msr_blocks(b21, b22, theta)
    s = _bcast(alamouti_scale(P), 2)
    X1 = s * (prec.V(1, 1) @ x11 + prec.V(1, 2) @ x12)
    X2 = s * (prec.V(2, 1) @ x21 + prec.V(2, 2) @ x22)
    return X1, X2


def js_stream_norms(jsprec: JsPrecoderSet) -> dict:
    """Frobenius norms used to normalize each 12x4 precoder."""
    return {k: np.linalg.norm(jsprec.V(*k), axis=(-2, -1)) for k in ((1, 1), (1, 2), (2, 1), (2, 2))}


def slots_to_matrix(v: np.ndarray, m: int = 4, slots: int = 3) -> np.ndarray:
    """12-vector over the extension -> m x 3 matrix (one column per slot)."""
    return np.swapaxes(v.reshape(v.shape[:-1] + (slots, m)), -1, -2)


def matrix_to_slots(X: np.ndarray) -> np.ndarray:
    return np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (-1,))


def js_transmit(jsprec: JsPrecoderSet, x11, x12, x21, x22, P):
    """Alignment-precoded transmission over three slots, as 4x3 matrices.

    Each precoder is divided by its Frobenius norm, so every stream
    carries power ``3P/2`` over the three slots.
    """
    norms = js_stream_norms(jsprec)
    s = _bcast(js_scale(P), 1)
    out = []
    for i, (xa, xb) in ((1, (x11, x12)), (2, (x21, x22))):
        va = jsprec.V(i, 1) / norms[i, 1][..., None, None]
        vb = jsprec.V(i, 2) / norms[i, 2][..., None, None]
        v = va @ np.asarray(xa, dtype=complex)[..., None] + vb @ np.asarray(xb, dtype=complex)[..., None]
        out.append(slots_to_matrix(s * v[..., 0]))
    return out[0], out[1]


def complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(tuple(shape) + (2,)) * math.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def apply_channel(ch: ChannelRealization, X1, X2, noise_on: bool = True, rng=None):
    """``Y_j = H_1j X1 + H_2j X2 + N_j`` with i.i.d. CN(0,1) noise."""
    Y1 = ch.H(1, 1) @ X1 + ch.H(2, 1) @ X2
    Y2 = ch.H(1, 2) @ X1 + ch.H(2, 2) @ X2
    if noise_on:
        if rng is None:
            raise ValueError("a generator is required when noise is on")
        Y1 = Y1 + complex_noise(rng, Y1.shape)
        Y2 = Y2 + complex_noise(rng, Y2.shape)
    return Y1, Y2


def srp_block(tau: float, psi: float, theta: float) -> np.ndarray:
    return math.sqrt(2 * tau**2) * np.array(
        [
            [math.cos(psi) * math.cos(theta), -math.cos(psi) * math.sin(theta)],
            [math.sin(psi) * math.sin(theta), math.sin(psi) * math.cos(theta)],
        ]
    )


def srp_matrix(m: int, params: SrpParams | None) -> np.ndarray:
    """The real matrix ``P`` of the S-R precoder ``Q = V P``.

    For m=4 the first block occupies rows/columns (1,4) and the second
    rows/columns (2,3).
    """
    if params is None:
        raise ConfigurationError("S-R precoder parameters are required")
    if m == 2:
        return srp_block(params.tau[0], params.psi[0], params.theta[0])
    p1 = srp_block(params.tau[0], params.psi[0], params.theta[0])
    p2 = srp_block(params.tau[1], params.psi[1], params.theta[1])
    P = np.zeros((4, 4))
    P[np.ix_([0, 3], [0, 3])] = p1
    P[np.ix_([1, 2], [1, 2])] = p2
    return P


def srp_precoder(h: np.ndarray, params: SrpParams | None):
    """SVD ``H = U D V^H`` and the precoder ``Q = V P``.

    Returns ``(Q, U, d)`` with singular values ``d`` in descending order.
    """
    m = h.shape[-1]
    U, d, Vh = np.linalg.svd(h)
    V = np.conj(np.swapaxes(Vh, -1, -2))
    return V @ srp_matrix(m, params), U, d


def tdma_srp_transmit(h: np.ndarray, x, params: SrpParams | None, snr):
    """Single-user precoded vector ``sqrt(snr/m) Q x``."""
    m = h.shape[-1]
    Q, _, _ = srp_precoder(h, params)
    s = _bcast(np.sqrt(np.asarray(snr) / m), 1)
    return s * (Q @ np.asarray(x, dtype=complex)[..., None])[..., 0]
