"""Numerical oracles for the structural and almost-sure claims about the
schemes: rank of the LJJ effective matrix, alignment of the eigenvector
precoders, non-vanishing pivots of the three-step elimination and the
pairwise-error decay of the S-R scheme.

Every oracle returns a small report object with ``to_text()`` producing
``key=value`` lines.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erfc

from .channel import (
    ChannelRealization,
    effective_channels,
    extend,
    js_precoders,
    ljj_precoders,
    sample_channel_set,
)
from .receiver import _half_blocks, _proj, ic_chain, ljj_process
from .schemes import apply_channel, ljj_transmit

#: The two fixed ``H22`` matrices used to show the pivot expression is
#: not constant in the entries of ``H22``.
REGRESSION_H22 = (
    np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1.5, -1, -0.5, -0.5], [-1, 1, 0, 0]], dtype=float),
    np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, -0.5, -0.5, -0.5], [-0.5, 0.5, 0, 0]], dtype=float),
)
#: Values claimed for the pivot expression at the two matrices, as
#: multiples of ``exp(-j theta)``.
CLAIMED_REGRESSION = (-1.0, -2.0)


def _text(d: dict) -> str:
    lines = []
    for k, v in d.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            v = " ".join(repr(complex(x)) if np.iscomplexobj(x) else repr(float(x)) for x in np.ravel(v))
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


@dataclass
class RankReport:
    draws: int
    min_sigma_ratio: float
    failures: int
    threshold: float
    rejections: int = 0

    def to_text(self) -> str:
        return _text(asdict(self))


def ljj_R_from_pipeline(ch: ChannelRealization) -> np.ndarray:
    """Build the 4x4 effective matrix by pushing the unit symbols of the
    desired streams through transmitter, channel and zero-forcing."""
    prec = ljj_precoders(ch)
    eff = effective_channels(ch, prec, 1)
    batch = ch.h.shape[:-4]
    P = 4.0 / 3.0  # unit transmit amplitude
    cols = []
    zero = np.zeros(batch + (2,), dtype=complex)
    for k in range(4):
        e = np.zeros(batch + (4,), dtype=complex)
        e[..., k] = 1.0
        X1, X2 = ljj_transmit(prec, e[..., :2], zero, e[..., 2:], zero, P)
        Y1, _ = apply_channel(ch, X1, X2, noise_on=False)
        cols.append(ljj_process(Y1, eff).y)
    return np.stack(cols, axis=-1)


def check_R_fullrank(n_draws: int, dist="gaussian", rng=None, threshold: float = 1e-12, batch: int = 20000) -> RankReport:
    """Smallest ``sigma_min / sigma_max`` of the LJJ matrix over random draws."""
    rng = _rng(rng)
    worst, fails, done, rej = math.inf, 0, 0, 0
    while done < n_draws:
        n = min(batch, n_draws - done)
        ch = sample_channel_set(2, dist, rng, size=n)
        rej += ch.rejections
        s = np.linalg.svd(ljj_R_from_pipeline(ch), compute_uv=False)
        ratio = s[..., -1] / s[..., 0]
        worst = min(worst, float(ratio.min()))
        fails += int(np.count_nonzero(ratio < threshold))
        done += n
    return RankReport(n_draws, worst, fails, threshold, rej)


@dataclass
class AlignmentReport:
    align1: np.ndarray
    align2: np.ndarray
    signal_rank: np.ndarray

    def to_text(self) -> str:
        return _text(
            {
                "draws": np.size(self.signal_rank),
                "max_align1": float(np.max(self.align1)),
                "max_align2": float(np.max(self.align2)),
                "min_signal_rank": int(np.min(self.signal_rank)),
            }
        )


def check_js_alignment(ch: ChannelRealization, rank_tol: float = 1e-10) -> AlignmentReport:
    """Alignment residuals (relative) and rank of the desired-plus-aligned
    signal space at Rx-1."""
    jp = js_precoders(ch)
    Hp = {k: extend(ch.H(*k)) for k in ((1, 1), (1, 2), (2, 1), (2, 2))}
    ref1 = Hp[1, 2] @ jp.v11
    ref2 = Hp[1, 1] @ jp.v12
    a1 = np.linalg.norm(Hp[2, 2] @ jp.v21 - ref1, axis=(-2, -1)) / np.linalg.norm(ref1, axis=(-2, -1))
    a2 = np.linalg.norm(Hp[2, 1] @ jp.v22 - ref2, axis=(-2, -1)) / np.linalg.norm(ref2, axis=(-2, -1))
    S = np.concatenate([Hp[1, 1] @ jp.v11, Hp[2, 1] @ jp.v21, ref2], axis=-1)
    sv = np.linalg.svd(S, compute_uv=False)
    rank = np.sum(sv > rank_tol * sv[..., :1], axis=-1)
    return AlignmentReport(a1, a2, rank)


@dataclass
class PivotReport:
    p_value: np.ndarray
    stage_norms: np.ndarray
    final_entry: np.ndarray

    def to_text(self) -> str:
        return _text(
            {
                "draws": np.size(self.p_value),
                "min_abs_p": float(np.min(np.abs(self.p_value))),
                "min_stage_norm": float(np.min(self.stage_norms)),
                "min_abs_final_entry": float(np.min(np.abs(self.final_entry))),
            }
        )


def _first_chain(hhat, ghat, theta):
    T, O = _half_blocks(hhat, theta, 0)
    Ga, Gb = _half_blocks(ghat, theta, 0)
    z = np.zeros(hhat.shape[:-2] + (4, 2), dtype=complex)
    return ic_chain(z, T, O, Ga, Gb), Ga


def _row2(B):
    return np.sum(np.abs(B[..., 0, :]) ** 2, axis=-1)


def check_appendixE_pivots(ch: ChannelRealization, theta: float) -> PivotReport:
    """Pivot quantities of the first-half elimination chain at Rx-1.

    ``p_value`` is ``(|e1|^2 + |e2|^2)(e^{j theta} conj(v12) v14 +
    e^{-j theta} v11 conj(v13))`` where ``[e1, e2]`` is the first row of
    ``G'_2^H G_3^H / (||G'_2(1,:)||^2 ||G_3(1,:)||^2)`` and ``v1k`` is the
    first row of ``V11``.
    """
    prec = ljj_precoders(ch)
    eff = effective_channels(ch, prec, 1)
    chain, Ga = _first_chain(eff.hhat, eff.ghat, theta)
    E1 = _proj(chain.stage1_g[..., 1, :, :]) @ _proj(Ga[..., 2, :, :])
    e1, e2 = E1[..., 0, 0], E1[..., 0, 1]
    v = prec.V(1, 1)[..., 0, :]
    c = np.conj
    p = (np.abs(e1) ** 2 + np.abs(e2) ** 2) * (
        np.exp(1j * theta) * c(v[..., 1]) * v[..., 3] + np.exp(-1j * theta) * v[..., 0] * c(v[..., 2])
    )
    norms = [_row2(Ga[..., i, :, :]) for i in range(4)]
    norms += [_row2(chain.stage1_g[..., i, :, :]) for i in range(3)]
    norms += [_row2(chain.stage2_h[..., i, :, :]) for i in (2, 3)]
    return PivotReport(p, np.stack(norms, axis=-1), chain.stage3[..., 0, 0])


def stage3_product_entry(ch: ChannelRealization, theta: float) -> np.ndarray:
    """``[H''_3^H H''_1]_{11}`` of the first-half chain (unnormalized)."""
    prec = ljj_precoders(ch)
    eff = effective_channels(ch, prec, 1)
    chain, _ = _first_chain(eff.hhat, eff.ghat, theta)
    H1, H3 = chain.stage2_h[..., 0, :, :], chain.stage2_h[..., 2, :, :]
    return (np.conj(np.swapaxes(H3, -1, -2)) @ H1)[..., 0, 0]


def p_by_second_difference(ch: ChannelRealization, theta: float, delta: float = 1.0) -> np.ndarray:
    """Coefficient of ``t^2`` in ``[H''_3^H H''_1]_{11}`` when the real part
    of ``H11[3, 1]`` (1-based) is shifted by ``t``; an independent route to
    ``p``.  The entry is exactly quadratic in ``t``."""
    vals = []
    for t in (-delta, 0.0, delta):
        h = ch.h.copy()
        h[..., 0, 0, 2, 0] += t
        vals.append(stage3_product_entry(ChannelRealization(ch.m, h), theta))
    return (vals[0] - 2 * vals[1] + vals[2]) / (2 * delta**2)


def pivot_regression_expression(h22: np.ndarray, theta: float) -> complex:
    """The pivot expression in the entries of ``H22^{-1}``:

    ``(|a21|^2+|a22|^2)(e^{jt} conj(a11) a13 + e^{-jt} a12 conj(a14))
    - (|a11|^2+|a12|^2)(e^{jt} conj(a21) a23 + e^{-jt} a22 conj(a24))``
    with ``a = H22^{-1}`` (1-based entries).
    """
    a = np.linalg.inv(np.asarray(h22, dtype=complex))
    e = np.exp(1j * theta)
    c = np.conj
    r1 = abs(a[0, 0]) ** 2 + abs(a[0, 1]) ** 2
    r2 = abs(a[1, 0]) ** 2 + abs(a[1, 1]) ** 2
    return complex(
        r2 * (e * c(a[0, 0]) * a[0, 2] + a[0, 1] * c(a[0, 3]) / e)
        - r1 * (e * c(a[1, 0]) * a[1, 2] + a[1, 1] * c(a[1, 3]) / e)
    )


def g2_prime_bracket(h21_row1: np.ndarray, h22: np.ndarray, theta: float) -> complex:
    """Bracketed pivot term written in ``gtilde = h21_row1 @ H22^{-1}``
    and ``H22^{-1}`` (the quantity whose ``|h21_12|^2`` coefficient is the
    regression expression)."""
    a = np.linalg.inv(np.asarray(h22, dtype=complex))
    g = np.asarray(h21_row1, dtype=complex) @ a
    e = np.exp(1j * theta)
    c = np.conj
    gn = abs(g[0]) ** 2 + abs(g[1]) ** 2
    an = abs(a[0, 0]) ** 2 + abs(a[0, 1]) ** 2
    return complex(
        gn * e * c(a[0, 0]) * a[0, 2]
        + gn * a[0, 1] * c(a[0, 3]) / e
        - an * (e * c(g[0]) * g[2] + g[1] * c(g[3]) / e)
    )


@dataclass
class PepReport:
    p_db: np.ndarray
    pep: np.ndarray
    stderr: np.ndarray

    def to_text(self) -> str:
        return _text({"p_db": self.p_db, "pep": self.pep, "stderr": self.stderr})


def gaussian_q(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2.0))


def pep_probe(dX11: np.ndarray, dX21: np.ndarray, p_db, n_draws: int, rng=None, batch: int = 20000) -> PepReport:
    """Monte Carlo average of ``Q(sqrt(P' ||H^ dX11 + G^ dX21||_F^2 / 2))``
    with ``P' = 3P/4`` over channel draws (S-R scheme, Rx-1).

    The same draws are used at every power, so the estimate is monotone
    in ``P``.
    """
    rng = _rng(rng)
    p_db = np.asarray(p_db, dtype=float)
    dX11 = np.asarray(dX11, dtype=complex)
    dX21 = np.asarray(dX21, dtype=complex)
    acc = np.zeros(p_db.size)
    acc2 = np.zeros(p_db.size)
    done = 0
    while done < n_draws:
        n = min(batch, n_draws - done)
        ch = sample_channel_set(4, "gaussian", rng, size=n)
        eff = effective_channels(ch, ljj_precoders(ch), 1)
        d2 = np.linalg.norm(eff.hhat @ dX11 + eff.ghat @ dX21, axis=(-2, -1)) ** 2
        P = 10 ** (p_db / 10)
        q = gaussian_q(np.sqrt(0.75 * P[:, None] * d2[None, :] / 2.0))
        acc += q.sum(axis=1)
        acc2 += (q**2).sum(axis=1)
        done += n
    mean = acc / n_draws
    var = np.maximum(acc2 / n_draws - mean**2, 0.0)
    return PepReport(p_db, mean, np.sqrt(var / n_draws))
