"""Monte Carlo word-error sweeps.

Trials at each power point are processed in fixed-size chunks.  Chunk
``k`` of point ``i`` draws everything (channels, symbols, noise) from
``default_rng([seed, i, k])`` and chunks are reduced strictly in index
order, stopping after the first chunk that brings the error count to
the target.  The set of chunks that contribute therefore depends only on
the configuration, never on how many worker processes computed them.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats
from statsmodels.stats.proportion import proportion_confint

from .channel import js_defective, js_precoders, ljj_precoders, effective_channels, sample_channel_set
from .constellation import make_constellation
from .decoder import LatticeModel, build_levels, ml_decode
from .receiver import (
    SymbolLayout,
    complex_linear_cols,
    js_lattice,
    ljj_lattice,
    ljj_process,
    msr_lattice,
    msr_process,
)
from .schemes import (
    SchemeConfig,
    SrpParams,
    alamouti_scale,
    apply_channel,
    complex_noise,
    js_transmit,
    ljj_transmit,
    msr_transmit,
    srp_precoder,
)

CSV_COLUMNS = ("p_db", "trials", "word_errors", "wep", "ci_low", "ci_high", "degenerate_resamples")


class InsufficientStatisticsError(ValueError):
    """Too few error events to fit a slope."""


@dataclass(frozen=True)
class SimConfig:
    scheme: str = "msr"
    kind: str = "bpsk"
    rotation: float = math.atan(2.0) / 2.0
    theta: float = math.pi / 4
    p_db: tuple = (6.0, 9.0, 12.0, 15.0, 18.0)
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    out: str | None = None
    stop_errors: int = 200
    chunk: int = 1000
    noise: bool = True
    wep_scope: str = "network"
    decoder: str = "sphere"
    dist: str = "gaussian"
    srp: SrpParams = field(default_factory=SrpParams)

    def __post_init__(self):
        object.__setattr__(self, "p_db", tuple(float(p) for p in self.p_db))
        if any(b <= a for a, b in zip(self.p_db, self.p_db[1:])):
            raise ValueError("the power grid must be strictly increasing")
        if self.trials < 1 or self.chunk < 1 or self.workers < 1:
            raise ValueError("trials, chunk and workers must be positive")
        if self.wep_scope not in ("network", "per-rx"):
            raise ValueError(f"unknown wep scope {self.wep_scope!r}")
        scheme_config(self, 1.0)  # validates scheme/constellation pairing

    def canonical_text(self) -> str:
        """Configuration as sorted ``key=value`` lines; excludes fields that
        cannot change the results (workers, output path)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        d["srp"] = f"{self.srp.tau}|{self.srp.psi}|{self.srp.theta}"
        return "".join(f"{k}={d[k]!r}\n" for k in sorted(d))

    def content_hash(self) -> str:
        data = self.canonical_text().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def scheme_config(cfg: SimConfig, P: float) -> SchemeConfig:
    m = 4 if cfg.scheme in ("tdma", "tdma_srp") else None
    return SchemeConfig(cfg.scheme, m=m, theta=cfg.theta, rotation=cfg.rotation, kind=cfg.kind, P=P, srp=cfg.srp)


@dataclass(frozen=True)
class SimRow:
    p_db: float
    trials: int
    word_errors: int
    wep: float
    ci_low: float
    ci_high: float
    degenerate_resamples: int


@dataclass
class SimResult:
    rows: list
    config: SimConfig | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def __eq__(self, other):
        return isinstance(other, SimResult) and self.rows == other.rows


def wilson_interval(errors: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    lo, hi = proportion_confint(errors, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# one chunk of trials


def _draw_symbols(rng, c, shape):
    idx = rng.integers(0, c.size, size=shape)
    return idx, c.points[idx]


def _decode_errors(model: LatticeModel, lay: SymbolLayout, truth: np.ndarray, mode: str) -> np.ndarray:
    idx, _ = ml_decode(model, mode)
    return np.any(lay.to_symbols(idx) != truth, axis=-1)


def _chunk_alamouti(cfg: SimConfig, sc: SchemeConfig, rng, n: int):
    c = make_constellation(sc.kind, sc.rotation)
    ch = sample_channel_set(sc.m, cfg.dist, rng, size=n)
    prec = ljj_precoders(ch)
    k = 2 if sc.scheme == "ljj" else 8
    idx, sym = _draw_symbols(rng, c, (n, 4, k))  # streams 11, 12, 21, 22
    if sc.scheme == "ljj":
        X1, X2 = ljj_transmit(prec, sym[:, 0], sym[:, 1], sym[:, 2], sym[:, 3], sc.P)
    else:
        X1, X2 = msr_transmit(prec, sym[:, 0], sym[:, 1], sym[:, 2], sym[:, 3], sc.P, sc.theta)
    Y1, Y2 = apply_channel(ch, X1, X2, cfg.noise, rng)
    s = alamouti_scale(sc.P)
    errs = []
    for rx, Y, (a, b) in ((1, Y1, (0, 2)), (2, Y2, (1, 3))):
        eff = effective_channels(ch, prec, rx)
        if sc.scheme == "ljj":
            model, lay = ljj_lattice(ljj_process(Y, eff, s), c)
        else:
            model, lay = msr_lattice(msr_process(Y, sc.theta, eff, s), c, sc.theta)
        truth = np.concatenate([idx[:, a], idx[:, b]], axis=-1)
        errs.append(_decode_errors(model, lay, truth, cfg.decoder))
    return errs, ch.rejections


def _chunk_js(cfg: SimConfig, sc: SchemeConfig, rng, n: int):
    c = make_constellation(sc.kind, sc.rotation)
    ch = sample_channel_set(4, cfg.dist, rng, size=n)
    resamples = ch.rejections
    bad = js_defective(ch)
    while np.any(bad):
        nb = int(np.count_nonzero(bad))
        resamples += nb
        h = ch.h.copy()
        h[bad] = sample_channel_set(4, cfg.dist, rng, size=nb).h
        ch = type(ch)(4, h, ch.rejections)
        bad = js_defective(ch)
    jp = js_precoders(ch)
    idx, sym = _draw_symbols(rng, c, (n, 4, 4))
    X1, X2 = js_transmit(jp, sym[:, 0], sym[:, 1], sym[:, 2], sym[:, 3], sc.P)
    Y1, Y2 = apply_channel(ch, X1, X2, cfg.noise, rng)
    errs = []
    for rx, Y, (a, b) in ((1, Y1, (0, 2)), (2, Y2, (1, 3))):
        model, lay = js_lattice(Y, jp, ch, c, sc.P, rx)
        truth = np.concatenate([idx[:, a], idx[:, b]], axis=-1)
        errs.append(_js_errors(model, lay, truth, cfg.decoder))
    return errs, resamples


def _js_errors(model, lay, truth, mode):
    # the last four symbols are the aligned sum, which is not a message
    idx, _ = ml_decode(model, mode)
    return np.any(lay.to_symbols(idx)[..., :8] != truth, axis=-1)


def _chunk_tdma(cfg: SimConfig, sc: SchemeConfig, rng, n: int):
    """Time sharing over the four links, each with the S-R single-user
    precoder at SNR ``2P``; a receiver errs if either of its links errs."""
    c = make_constellation(sc.kind, sc.rotation)
    m = sc.m
    ch = sample_channel_set(m, cfg.dist, rng, size=n)
    idx, sym = _draw_symbols(rng, c, (n, 2, 2, m))
    snr = 2.0 * sc.P
    lay = SymbolLayout.build(c, m)
    levels, nlev = build_levels(lay.alphabets(c))
    err = np.zeros((n, 2, 2), dtype=bool)
    for i in range(2):
        for j in range(2):
            h = ch.h[:, i, j]
            Q, U, _ = srp_precoder(h, sc.srp)
            y = math.sqrt(snr / m) * (h @ (Q @ sym[:, i, j, :, None]))[..., 0]
            if cfg.noise:
                y = y + complex_noise(rng, y.shape)
            yp = np.einsum("bji,bj->bi", np.conj(U), y)
            M = math.sqrt(snr / m) * (np.conj(np.swapaxes(U, -1, -2)) @ h @ Q)
            model = LatticeModel(yp, complex_linear_cols(M, lay), np.ones(m), levels, nlev)
            err[:, i, j] = _decode_errors(model, lay, idx[:, i, j], cfg.decoder)
    return [err[:, 0, 0] | err[:, 1, 0], err[:, 0, 1] | err[:, 1, 1]], ch.rejections


def run_chunk(cfg: SimConfig, point: int, chunk: int, n: int) -> tuple[int, int, int]:
    """``(words, word_errors, degenerate_resamples)`` for one chunk."""
    rng = np.random.default_rng([cfg.seed, point, chunk])
    P = 10 ** (cfg.p_db[point] / 10)
    sc = scheme_config(cfg, P)
    if sc.scheme in ("ljj", "msr", "trivial_repetition"):
        errs, res = _chunk_alamouti(cfg, sc, rng, n)
    elif sc.scheme == "js":
        errs, res = _chunk_js(cfg, sc, rng, n)
    else:
        errs, res = _chunk_tdma(cfg, sc, rng, n)
    if cfg.wep_scope == "network":
        return n, int(np.count_nonzero(errs[0] | errs[1])), res
    return 2 * n, int(np.count_nonzero(errs[0]) + np.count_nonzero(errs[1])), res


def _run_chunk_args(args):
    return run_chunk(*args)


def _chunk_sizes(cfg: SimConfig):
    k, left = 0, cfg.trials
    while left > 0:
        n = min(cfg.chunk, left)
        yield k, n
        k += 1
        left -= n


def _sweep_point(cfg: SimConfig, point: int, pool) -> SimRow:
    words = errors = resamples = 0
    pending = list(_chunk_sizes(cfg))
    step = cfg.workers if pool is not None else 1
    pos = 0
    while pos < len(pending):
        batch = pending[pos : pos + step]
        pos += step
        jobs = [(cfg, point, k, n) for k, n in batch]
        outs = pool.map(_run_chunk_args, jobs) if pool is not None else map(_run_chunk_args, jobs)
        done = False
        for w, e, r in outs:
            if done:
                continue
            words += w
            errors += e
            resamples += r
            done = errors >= cfg.stop_errors
        if done:
            break
    lo, hi = wilson_interval(errors, words)
    return SimRow(cfg.p_db[point], words, errors, errors / words, lo, hi, resamples)


def run_wep_sweep(cfg: SimConfig) -> SimResult:
    """Word-error probability at every point of the power grid.

    A trial (network scope) errs when any desired symbol at either receiver
    is wrong; with ``wep_scope="per-rx"`` each receiver contributes one
    word per trial.
    """
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = [_sweep_point(cfg, i, pool) for i in range(len(cfg.p_db))]
    else:
        rows = [_sweep_point(cfg, i, None) for i in range(len(cfg.p_db))]
    return SimResult(rows, cfg)


# ---------------------------------------------------------------------------
# analysis and output


def estimate_diversity_slope(res: SimResult, window: slice | None = None, min_errors: int = 50) -> tuple[float, float]:
    """Least-squares slope of ``-log10(wep)`` against ``log10(P)``.

    Only rows inside ``window`` with at least ``min_errors`` errors are
    used.  Returns ``(slope, stderr)``.
    """
    rows = res.rows if window is None else res.rows[window]
    rows = [r for r in rows if r.word_errors >= min_errors and r.wep > 0]
    if len(rows) < 2:
        raise InsufficientStatisticsError(f"need two points with at least {min_errors} errors, have {len(rows)}")
    x = np.array([r.p_db / 10 for r in rows])
    y = np.log10([r.wep for r in rows])
    if len(rows) == 2:
        return float(-(y[1] - y[0]) / (x[1] - x[0])), float("nan")
    fit = stats.linregress(x, y)
    return float(-fit.slope), float(fit.stderr)


def write_csv(res: SimResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in res.rows:
            w.writerow([repr(float(r.p_db)), r.trials, r.word_errors, repr(float(r.wep)), repr(float(r.ci_low)), repr(float(r.ci_high)), r.degenerate_resamples])
    return path


def read_csv(path) -> SimResult:
    rows = []
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in rd:
            rows.append(SimRow(float(rec[0]), int(rec[1]), int(rec[2]), float(rec[3]), float(rec[4]), float(rec[5]), int(rec[6])))
    return SimResult(rows)


def plot_wep(res: SimResult, path, label: str | None = None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    rows = [r for r in res.rows if r.wep > 0]
    if rows:
        x = [r.p_db for r in rows]
        y = np.array([r.wep for r in rows])
        err = np.array([[r.wep - r.ci_low for r in rows], [r.ci_high - r.wep for r in rows]])
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=label)
        ax.set_yscale("log")
    ax.set_xlabel("P (dB)")
    ax.set_ylabel("word error probability")
    ax.grid(True, which="both", alpha=0.3)
    if label and rows:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def emit_outputs(res: SimResult, path, stem: str = "wep") -> dict:
    """Write ``<stem>.csv``, ``<stem>.png`` and ``<stem>.manifest.txt`` into
    directory ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {"csv": write_csv(res, out / f"{stem}.csv"), "plot": plot_wep(res, out / f"{stem}.png", stem)}
        manifest = out / f"{stem}.manifest.txt"
        text = ""
        if res.config is not None:
            text = res.config.canonical_text() + f"workers={res.config.workers!r}\nconfig_hash={res.config.content_hash()}\n"
        manifest.write_text(text)
        files["manifest"] = manifest
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out}: {exc}") from exc
    return files


def config_with(cfg: SimConfig, **kw) -> SimConfig:
    return replace(cfg, **kw)

