"""Receive-side processing: interference cancellation, the three-step
elimination chain for the S-R scheme, and ML model builders.

Conventions
-----------
``M(h1, h2, s)`` denotes the 2x2 block ``[[s h1, s h2], [conj(s h2), -conj(s h1)]]``.
Blocks of this form are conjugate-transpose closed, their products have
the ``[[a, b], [-conj b, conj a]]`` form and ``G^H G = ||G(1,:)||^2 I``.

The receiver index ``rx`` selects which pair of messages is desired:
Rx-1 wants the ``X_11``/``X_21`` messages and Rx-2 the ``X_12``/``X_22``
messages.  Processing at Rx-2 mirrors Rx-1 with the roles of the first
and second Alamouti column swapped, so it produces a model of exactly
the same form with a different noise-variance pattern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DegenerateChannelError, EffectiveChannels, JsPrecoderSet, ChannelRealization, extend
from .constellation import ConstellationSpec
from .decoder import LatticeModel, build_levels, ml_decode
from .schemes import js_scale, js_stream_norms, matrix_to_slots
from .stbc import sr_codeword

PIVOT_TOL = 1e-14


@dataclass
class ProcessedObservation:
    """Observation after interference cancellation.

    ``y = model_matrix @ symbols + noise`` (LJJ: 4-vector and ``R``;
    S-R scheme: 4x4 ``Y'`` and ``[H^ G^]`` acting on the stacked compact
    codewords).  ``noise_cov_diag`` has the shape of ``y``.
    """

    y: np.ndarray
    model_matrix: np.ndarray
    noise_cov_diag: np.ndarray
    symbol_slots: tuple
    rx: int = 1


# ---------------------------------------------------------------------------
# symbol <-> real unknown layout


@dataclass(frozen=True)
class SymbolLayout:
    """Maps complex symbols ``exp(j phi)(a + j b)`` to real unknowns."""

    coef: np.ndarray  # complex multiplier of each real unknown
    symbol: np.ndarray  # owning symbol index
    part: np.ndarray  # 0 for the real coordinate, 1 for the imaginary one
    n_symbols: int
    n_im: int

    @classmethod
    def build(cls, c: ConstellationSpec, n_symbols: int) -> "SymbolLayout":
        rot = np.exp(1j * c.rotation)
        two = c.im_levels.size > 1
        coef, sym, part = [], [], []
        for s in range(n_symbols):
            coef.append(rot)
            sym.append(s)
            part.append(0)
            if two:
                coef.append(1j * rot)
                sym.append(s)
                part.append(1)
        return cls(np.array(coef), np.array(sym), np.array(part), n_symbols, c.im_levels.size)

    @property
    def size(self) -> int:
        return self.coef.size

    def alphabets(self, c: ConstellationSpec) -> list:
        return [c.im_levels if p else c.re_levels for p in self.part]

    def to_symbols(self, idx: np.ndarray) -> np.ndarray:
        re = idx[..., self.part == 0]
        if self.n_im == 1:
            return re
        return re * self.n_im + idx[..., self.part == 1]

    def from_symbols(self, sym: np.ndarray) -> np.ndarray:
        ire, iim = np.divmod(np.asarray(sym), self.n_im)
        out = np.empty(sym.shape[:-1] + (self.size,), dtype=np.int64)
        out[..., self.part == 0] = ire
        if self.n_im > 1:
            out[..., self.part == 1] = iim
        return out


def complex_linear_cols(M: np.ndarray, layout: SymbolLayout) -> np.ndarray:
    """Unknown columns for ``y = M x`` with ``x`` complex symbols."""
    return M[..., :, layout.symbol] * layout.coef


# ---------------------------------------------------------------------------
# LJJ scheme (m = 2)


def alamouti_minus(h1, h2, s=1.0) -> np.ndarray:
    """``M(h1, h2, s)`` for broadcastable inputs."""
    a = s * np.asarray(h1)
    b = s * np.asarray(h2)
    top = np.stack([a, b], axis=-1)
    bot = np.stack([np.conj(b), -np.conj(a)], axis=-1)
    return np.stack([top, bot], axis=-2)


def ljj_R(hhat: np.ndarray, ghat: np.ndarray) -> np.ndarray:
    """Effective 4x4 matrix after zero-forcing, rows in the output order of
    the fixed zero-forcing matrix."""
    h, g = hhat, ghat
    c = np.conj
    rows = [
        [h[..., 0, 0], h[..., 0, 1], g[..., 0, 0], g[..., 0, 1]],
        [c(h[..., 0, 1]), -c(h[..., 0, 0]), c(g[..., 0, 1]), -c(g[..., 0, 0])],
        [c(h[..., 1, 1]), -c(h[..., 1, 0]), c(g[..., 1, 1]), -c(g[..., 1, 0])],
        [h[..., 1, 0], h[..., 1, 1], g[..., 1, 0], g[..., 1, 1]],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


#: Zero-forcing matrix applied to the stacked rows of the processed output.
LJJ_F = np.array(
    [
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, -1],
        [0, 0, 1, 0, 1, 0],
        [0, 0, 0, 1, 0, 0],
    ],
    dtype=float,
)


def ljj_stack(Y: np.ndarray) -> np.ndarray:
    """Rx-1 six-vector: rows of ``Y'`` (second column conjugated) stacked."""
    Yp = Y.copy()
    Yp[..., :, 1] = np.conj(Y[..., :, 1])
    return np.concatenate([Yp[..., 0, :], Yp[..., 1, :]], axis=-1)


def ljj_process(Y: np.ndarray, eff: EffectiveChannels, scale=1.0) -> ProcessedObservation:
    """Cancel the aligned interference of a 2x3 received block.

    ``scale`` is the transmit amplitude (``sqrt(3P/4)``); it is folded into
    the returned model matrix.
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.shape[-2:] != (2, 3):
        raise ValueError("ljj_process expects 2x3 blocks")
    c = np.conj
    if eff.rx == 1:
        y = np.einsum("ij,...j->...i", LJJ_F, ljj_stack(Y))
        var = np.array([1.0, 2.0, 2.0, 1.0])
        slots = ("x1_11", "x2_11", "x1_21", "x2_21")
    else:
        y = np.stack(
            [
                Y[..., 0, 1] + c(Y[..., 1, 0]),
                c(Y[..., 0, 2]),
                c(Y[..., 1, 2]),
                Y[..., 1, 1] - c(Y[..., 0, 0]),
            ],
            axis=-1,
        )
        var = np.array([2.0, 1.0, 1.0, 2.0])
        slots = ("x1_12", "x2_12", "x1_22", "x2_22")
    s = np.asarray(scale, dtype=float)[..., None, None]
    R = s * ljj_R(eff.hhat, eff.ghat)
    return ProcessedObservation(y, R, np.broadcast_to(var, y.shape), slots, eff.rx)


def _row_norm2(B: np.ndarray) -> np.ndarray:
    n = np.sum(np.abs(B[..., 0, :]) ** 2, axis=-1)
    if np.any(n < PIVOT_TOL):
        raise DegenerateChannelError("vanishing pivot row")
    return n


def _proj(B: np.ndarray) -> np.ndarray:
    """``B^H / ||B(1,:)||^2``."""
    return np.conj(np.swapaxes(B, -1, -2)) / _row_norm2(B)[..., None, None]


@dataclass
class MacIc:
    """Two-user cancellation output: ``y = H x1 + n`` and ``z = G x2 + n'``."""

    ytilde: np.ndarray
    htilde: np.ndarray
    ztilde: np.ndarray
    gtilde: np.ndarray

    @staticmethod
    def _solve(y, H):
        return np.einsum("...ij,...j->...i", _proj(H), y)

    def estimates(self):
        """Per-user least-squares symbol estimates (scaled-unitary inverse)."""
        return self._solve(self.ytilde, self.htilde), self._solve(self.ztilde, self.gtilde)


def ljj_ic(obs: ProcessedObservation) -> MacIc:
    """MAC-style cancellation on the 4x4 model.

    The observation is split into two Alamouti-form sub-systems; user 2
    is removed to give ``ytilde`` and user 1 is removed to give ``ztilde``.
    """
    y, R = obs.y, obs.model_matrix
    y1 = y[..., [0, 1]]
    y2 = y[..., [3, 2]]
    H1, G1 = R[..., [0, 1], :2], R[..., [0, 1], 2:]
    H2, G2 = R[..., [3, 2], :2], R[..., [3, 2], 2:]
    pg1, pg2 = _proj(G1), _proj(G2)
    ph1, ph2 = _proj(H1), _proj(H2)
    mv = lambda A, v: np.einsum("...ij,...j->...i", A, v)
    return MacIc(
        mv(pg1, y1) - mv(pg2, y2),
        pg1 @ H1 - pg2 @ H2,
        mv(ph1, y1) - mv(ph2, y2),
        ph1 @ G1 - ph2 @ G2,
    )


def ljj_lattice(obs: ProcessedObservation, c: ConstellationSpec) -> tuple[LatticeModel, SymbolLayout]:
    lay = SymbolLayout.build(c, 4)
    levels, nlev = build_levels(lay.alphabets(c))
    return LatticeModel(obs.y, complex_linear_cols(obs.model_matrix, lay), obs.noise_cov_diag, levels, nlev), lay


# ---------------------------------------------------------------------------
# S-R scheme (m = 4)


def msr_process(Y: np.ndarray, theta: float, eff: EffectiveChannels, scale=1.0) -> ProcessedObservation:
    """Column-pair cancellation of a 4x6 received block.

    At Rx-1 the interference-only columns are 3 and 6 and they cancel the
    interference in columns 2 and 5; at Rx-2 columns 1 and 4 cancel it in
    columns 2 and 5.  Rows 3-4 of the first half and rows 1-2 of the
    second half carry the ``exp(j theta)`` scaled blocks, which is why their
    cancellation uses ``exp(2j theta)``.
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.shape[-2:] != (4, 6):
        raise ValueError("msr_process expects 4x6 blocks")
    c = np.conj
    e2 = np.exp(2j * theta)
    Yp = np.empty(Y.shape[:-1] + (4,), dtype=complex)

    def cancel(dst, src, out, phases):
        # upper rows use phases[0], lower rows phases[1]
        for (r0, r1), ph in (((0, 1), phases[0]), ((2, 3), phases[1])):
            if eff.rx == 1:
                Yp[..., r0, out] = Y[..., r0, dst] - ph * c(Y[..., r1, src])
                Yp[..., r1, out] = Y[..., r1, dst] + ph * c(Y[..., r0, src])
            else:
                Yp[..., r0, out] = Y[..., r0, dst] + ph * c(Y[..., r1, src])
                Yp[..., r1, out] = Y[..., r1, dst] - ph * c(Y[..., r0, src])

    if eff.rx == 1:
        Yp[..., :, 0] = Y[..., :, 0]
        cancel(1, 2, 1, (1.0, e2))
        Yp[..., :, 2] = Y[..., :, 3]
        cancel(4, 5, 3, (e2, 1.0))
        var = np.array([1.0, 2.0, 1.0, 2.0])
        slots = ("X'11", "X'21")
    else:
        cancel(1, 0, 0, (1.0, e2))
        Yp[..., :, 1] = Y[..., :, 2]
        cancel(4, 3, 2, (e2, 1.0))
        Yp[..., :, 3] = Y[..., :, 5]
        var = np.array([2.0, 1.0, 2.0, 1.0])
        slots = ("X'12", "X'22")
    s = np.asarray(scale, dtype=float)[..., None, None]
    M = s * np.concatenate([eff.hhat, eff.ghat], axis=-1)
    return ProcessedObservation(Yp, M, np.broadcast_to(var, Yp.shape), slots, eff.rx)


def codeword_basis(c: ConstellationSpec, theta: float, n_symbols: int = 8) -> tuple[np.ndarray, SymbolLayout]:
    """S-R codeword response ``(r, 4, 4)`` to each real unknown."""
    lay = SymbolLayout.build(c, n_symbols)
    x = np.zeros((lay.size, n_symbols), dtype=complex)
    x[np.arange(lay.size), lay.symbol] = lay.coef
    return sr_codeword(x, theta), lay


def msr_lattice(obs: ProcessedObservation, c: ConstellationSpec, theta: float) -> tuple[LatticeModel, SymbolLayout]:
    """Real-linear model of ``vec(Y')`` in the 16 symbols of both users
    (first 8 from the first transmitter)."""
    basis, lay1 = codeword_basis(c, theta)
    M = obs.model_matrix
    H, G = M[..., :, :4], M[..., :, 4:]
    cols = np.concatenate(
        [np.einsum("...ij,rjk->...rik", H, basis), np.einsum("...ij,rjk->...rik", G, basis)], axis=-3
    )
    cols = np.swapaxes(cols.reshape(cols.shape[:-2] + (16,)), -1, -2)
    lay = SymbolLayout.build(c, 16)
    levels, nlev = build_levels(lay.alphabets(c))
    y = obs.y.reshape(obs.y.shape[:-2] + (16,))
    var = obs.noise_cov_diag.reshape(obs.noise_cov_diag.shape[:-2] + (16,))
    return LatticeModel(y, cols, var, levels, nlev), lay


# ---------------------------------------------------------------------------
# three-step elimination chain on the S-R model


@dataclass
class IcChain:
    """Blocks and signals of the three-step elimination.

    ``h_blocks``/``g_blocks`` hold, for each half, the 2x2 blocks of the
    two symbol pairs of each user: index ``[..., p, i]`` with ``p`` the pair
    (0: eliminated last / detected first, 1: the other) and ``i`` the row.
    """

    h_blocks: np.ndarray
    g_blocks: np.ndarray
    z: np.ndarray
    stage1_h: np.ndarray  # H'_1..H'_6
    stage1_g: np.ndarray  # G'_1..G'_3
    z1: np.ndarray
    stage2_h: np.ndarray  # H''_1..H''_4
    z2: np.ndarray
    stage3: np.ndarray
    z3: np.ndarray

    def stored_blocks(self) -> list[np.ndarray]:
        """Every 2x2 block of the chain, each with shape ``(..., 2, 2)``."""
        out = []
        for arr in (self.h_blocks, self.g_blocks):
            for p in range(2):
                out += [arr[..., p, i, :, :] for i in range(4)]
        out += [self.stage1_h[..., i, :, :] for i in range(6)]
        out += [self.stage1_g[..., i, :, :] for i in range(3)]
        out += [self.stage2_h[..., i, :, :] for i in range(4)]
        out.append(self.stage3)
        return out


def _mv(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def ic_chain(z, T, O, Ga, Gb) -> IcChain:
    """Run the elimination on ``z_i = T_i p + O_i q + Ga_i u + Gb_i w``.

    Step 1 removes ``u`` (row 1 as reference), step 2 removes ``w`` and
    step 3 removes ``q``, leaving ``z''' = H''' p + noise``.
    """
    w = [_proj(Ga[..., i, :, :]) for i in range(4)]
    z1 = np.stack([_mv(w[k], z[..., k, :]) - _mv(w[0], z[..., 0, :]) for k in (1, 2, 3)], axis=-2)
    Hp = [w[k] @ T[..., k, :, :] - w[0] @ T[..., 0, :, :] for k in (1, 2, 3)]
    Hp += [w[k] @ O[..., k, :, :] - w[0] @ O[..., 0, :, :] for k in (1, 2, 3)]
    Gp = [w[k] @ Gb[..., k, :, :] - w[0] @ Gb[..., 0, :, :] for k in (1, 2, 3)]
    u = [_proj(g) for g in Gp]
    z2 = np.stack(
        [_mv(u[1], z1[..., 1, :]) - _mv(u[0], z1[..., 0, :]), _mv(u[2], z1[..., 2, :]) - _mv(u[0], z1[..., 0, :])],
        axis=-2,
    )
    Hpp = [
        u[1] @ Hp[1] - u[0] @ Hp[0],
        u[2] @ Hp[2] - u[0] @ Hp[0],
        u[1] @ Hp[4] - u[0] @ Hp[3],
        u[2] @ Hp[5] - u[0] @ Hp[3],
    ]
    p3, p4 = _proj(Hpp[2]), _proj(Hpp[3])
    z3 = _mv(p3, z2[..., 0, :]) - _mv(p4, z2[..., 1, :])
    H3 = p3 @ Hpp[0] - p4 @ Hpp[1]
    return IcChain(
        np.stack([T, O], axis=-4),
        np.stack([Ga, Gb], axis=-4),
        z,
        np.stack(Hp, axis=-3),
        np.stack(Gp, axis=-3),
        z1,
        np.stack(Hpp, axis=-3),
        z2,
        H3,
        z3,
    )


def back_substitute(ch: IcChain, p: np.ndarray):
    """Recover ``(q, u, w)`` given the first pair ``p``."""
    T, O = ch.h_blocks[..., 0, :, :, :], ch.h_blocks[..., 1, :, :, :]
    Ga, Gb = ch.g_blocks[..., 0, :, :, :], ch.g_blocks[..., 1, :, :, :]
    Hpp = ch.stage2_h
    q = _mv(_proj(Hpp[..., 2, :, :]), ch.z2[..., 0, :] - _mv(Hpp[..., 0, :, :], p))
    r1 = ch.z1[..., 0, :] - _mv(ch.stage1_h[..., 0, :, :], p) - _mv(ch.stage1_h[..., 3, :, :], q)
    w = _mv(_proj(ch.stage1_g[..., 0, :, :]), r1)
    r0 = (
        ch.z[..., 0, :]
        - _mv(T[..., 0, :, :], p)
        - _mv(O[..., 0, :, :], q)
        - _mv(Gb[..., 0, :, :], w)
    )
    u = _mv(_proj(Ga[..., 0, :, :]), r0)
    return q, u, w


def _half_blocks(M, theta, half):
    """Blocks for the two symbol pairs of one user in one column half.

    Returns ``(target, other)`` each of shape ``(..., 4, 2, 2)``; the
    target pair is the one riding on unscaled blocks.
    """
    e = np.exp(1j * theta)
    A = alamouti_minus(M[..., :, 0], M[..., :, 1], 1.0 if half == 0 else e)
    B = alamouti_minus(M[..., :, 2], M[..., :, 3], e if half == 0 else 1.0)
    return (A, B) if half == 0 else (B, A)


def xprime_pairs(xp: np.ndarray):
    """The four unknown pairs of a user in ``x'`` coordinates:
    half 0 -> ((x'1, x'2), (x'5, -conj x'6)); half 1 -> ((x'3, -conj x'4), (x'7, -conj x'8))."""
    c = np.conj
    h0 = (np.stack([xp[..., 0], xp[..., 1]], -1), np.stack([xp[..., 4], -c(xp[..., 5])], -1))
    h1 = (np.stack([xp[..., 2], -c(xp[..., 3])], -1), np.stack([xp[..., 6], -c(xp[..., 7])], -1))
    return h0, h1


def pairs_to_xprime(h0, h1) -> np.ndarray:
    c = np.conj
    (p0, q0), (p1, q1) = h0, h1
    cols = [p0[..., 0], p0[..., 1], p1[..., 0], -c(p1[..., 1]), q0[..., 0], -c(q0[..., 1]), q1[..., 0], -c(q1[..., 1])]
    return np.stack(cols, axis=-1)


def msr_ic(obs: ProcessedObservation, theta: float, target_user: int = 1):
    """Three-step elimination on both column halves.

    Returns ``(chains, xprime_user1, xprime_user2)``.  Each chain yields a
    model for one pair of the target user; the other pairs follow by
    back-substitution.  The recovered ``x'`` symbols are least-squares
    estimates (exact in the noiseless case).
    """
    y = obs.y
    M = obs.model_matrix
    H, G = M[..., :, :4], M[..., :, 4:]
    if target_user == 2:
        H, G = G, H
    chains, est = [], []
    for half in (0, 1):
        cols = (0, 1) if half == 0 else (2, 3)
        z = np.stack([y[..., :, cols[0]], np.conj(y[..., :, cols[1]])], axis=-1)
        T, O = _half_blocks(H, theta, half)
        Ga, Gb = _half_blocks(G, theta, half)
        chain = ic_chain(z, T, O, Ga, Gb)
        p = _mv(_proj(chain.stage3), chain.z3)
        q, u, w = back_substitute(chain, p)
        chains.append(chain)
        est.append(((p, q), (u, w)))
    xa = pairs_to_xprime(est[0][0], est[1][0])
    xb = pairs_to_xprime(est[0][1], est[1][1])
    return (chains, xa, xb) if target_user == 1 else (chains, xb, xa)


# ---------------------------------------------------------------------------
# alignment baseline


def js_lattice(Y: np.ndarray, jsprec: JsPrecoderSet, ch: ChannelRealization, c: ConstellationSpec, P, rx: int = 1):
    """Joint model over the two desired 4-symbol vectors and the aligned sum.

    The aligned interference is ``s = x_a / n_a + x_b / n_b`` with
    ``n`` the precoder norms; each coordinate of ``s`` ranges over the
    weighted sum of the two coordinate alphabets.
    """
    y = matrix_to_slots(np.asarray(Y, dtype=complex)) if np.ndim(Y) >= 2 and np.shape(Y)[-1] == 3 else np.asarray(Y)
    norms = js_stream_norms(jsprec)
    s = js_scale(P)[..., None, None] if np.ndim(P) else js_scale(P)
    Hp = {k: extend(ch.H(*k)) for k in ((1, 1), (1, 2), (2, 1), (2, 2))}
    if rx == 1:
        d1 = Hp[1, 1] @ jsprec.v11 / norms[1, 1][..., None, None]
        d2 = Hp[2, 1] @ jsprec.v21 / norms[2, 1][..., None, None]
        al = Hp[1, 1] @ jsprec.v12
        wa, wb = 1 / norms[1, 2], 1 / norms[2, 2]
    else:
        d1 = Hp[1, 2] @ jsprec.v12 / norms[1, 2][..., None, None]
        d2 = Hp[2, 2] @ jsprec.v22 / norms[2, 2][..., None, None]
        al = Hp[1, 2] @ jsprec.v11
        wa, wb = 1 / norms[1, 1], 1 / norms[2, 1]
    M = s * np.concatenate([d1, d2, al], axis=-1)
    lay = SymbolLayout.build(c, 12)
    cols = complex_linear_cols(M, lay)
    base = lay.alphabets(c)
    L = max(len(a) for a in base) ** 2
    batch = y.shape[:-1]
    levels = np.full(batch + (lay.size, L), np.nan)
    nlev = np.empty(batch + (lay.size,), dtype=np.int64)
    wa = np.broadcast_to(wa, batch)
    wb = np.broadcast_to(wb, batch)
    for k in range(lay.size):
        a = np.asarray(base[k])
        if lay.symbol[k] < 8:
            levels[..., k, : a.size] = a
            nlev[..., k] = a.size
        else:
            v = np.sort((wa[..., None, None] * a[:, None] + wb[..., None, None] * a[None, :]).reshape(batch + (-1,)), -1)
            levels[..., k, : v.shape[-1]] = v
            nlev[..., k] = v.shape[-1]
    noise = np.ones(y.shape[-1])
    return LatticeModel(y, cols, noise, levels, nlev), lay


def js_receive(Y, jsprec: JsPrecoderSet, ch: ChannelRealization, c: ConstellationSpec, P, rx: int = 1, mode="sphere"):
    """Joint ML over both desired vectors and the aligned sum; returns the
    symbol indices of the two desired 4-vectors only."""
    model, lay = js_lattice(Y, jsprec, ch, c, P, rx)
    idx, _ = ml_decode(model, mode)
    sym = lay.to_symbols(idx)
    return sym[..., :4], sym[..., 4:8]
