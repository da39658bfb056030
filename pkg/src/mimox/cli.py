"""Command-line front end: ``mimox sweep``, ``mimox verify``, ``mimox rankscan``."""

from __future__ import annotations

import math
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from .constellation import KINDS, PHI_CPD, make_constellation
from .sim import InsufficientStatisticsError, SimConfig, emit_outputs, estimate_diversity_slope, run_wep_sweep
from .stbc import diff_rank_scan

SCHEME_CHOICES = ("ljj", "msr", "js", "trivial", "tdma")


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive) or a comma list of dB values."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, step, stop = (float(t) for t in text.split(":"))
        except ValueError as exc:
            raise click.BadParameter(f"expected start:step:stop, got {text!r}") from exc
        if step <= 0 or stop < start:
            raise click.BadParameter(f"empty or decreasing grid {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 10) for k in range(n))
    return tuple(float(t) for t in text.split(","))


def read_config_file(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment.  Keys use the long
    flag names with dashes or underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _merge_config(ctx: click.Context, values: dict, file_values: dict) -> dict:
    """Fill parameters that were not given on the command line from the
    config file; explicit flags win."""
    params = {}
    for p in ctx.command.params:
        params[p.name] = p
        for opt in p.opts:
            params[opt.lstrip("-").replace("-", "_")] = p
    for key, raw in file_values.items():
        if key == "noise":
            key, raw = "no_noise", str(raw.lower() in ("0", "false", "no", "off"))
        param = params.get(key)
        if param is None or param.name == "config_path":
            raise click.BadParameter(f"unknown config key {key!r}")
        if ctx.get_parameter_source(param.name) == ParameterSource.COMMANDLINE:
            continue
        values[param.name] = param.type_cast_value(ctx, raw)
    return values


@click.group()
@click.version_option(package_name="mimox")
def main():
    """Simulation and verification tools for 2x2-user MIMO X networks."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value file; flags override it.")
@click.option("--scheme", type=click.Choice(SCHEME_CHOICES), default="msr", show_default=True)
@click.option("--const", "kind", type=click.Choice(KINDS), default="bpsk", show_default=True)
@click.option("--phi", type=float, default=PHI_CPD, show_default=True, help="Constellation rotation in radians.")
@click.option("--theta", type=float, default=math.pi / 4, show_default=True, help="Code rotation in radians.")
@click.option("--pdb", default="6:3:18", show_default=True, help="Power grid start:step:stop in dB.")
@click.option("--trials", type=click.IntRange(min=1), default=100_000, show_default=True, help="Trial budget per point.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory for CSV, plot and manifest.")
@click.option("--no-noise", is_flag=True, default=False, help="Diagnostic: disable receiver noise.")
@click.option("--wep-scope", type=click.Choice(("network", "per-rx")), default="network", show_default=True)
@click.option("--decoder", type=click.Choice(("sphere", "exhaustive")), default="sphere", show_default=True)
@click.option("--stop-errors", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--chunk", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--dist", default="gaussian", show_default=True, help="gaussian or uniform[:a:b].")
@click.pass_context
def sweep(ctx, config_path, **values):
    """Monte Carlo word-error sweep over a power grid."""
    if config_path:
        values = _merge_config(ctx, values, read_config_file(config_path))
    try:
        cfg = SimConfig(
            scheme=values["scheme"],
            kind=values["kind"],
            rotation=values["phi"],
            theta=values["theta"],
            p_db=parse_grid(values["pdb"]),
            trials=values["trials"],
            seed=values["seed"],
            workers=values["workers"],
            out=values["out"],
            stop_errors=values["stop_errors"],
            chunk=values["chunk"],
            noise=not values["no_noise"],
            wep_scope=values["wep_scope"],
            decoder=values["decoder"],
            dist=values["dist"],
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    res = run_wep_sweep(cfg)
    click.echo("p_db,trials,word_errors,wep,ci_low,ci_high,degenerate_resamples")
    for r in res.rows:
        click.echo(f"{r.p_db:g},{r.trials},{r.word_errors},{r.wep:.6g},{r.ci_low:.6g},{r.ci_high:.6g},{r.degenerate_resamples}")
    try:
        slope, err = estimate_diversity_slope(res)
        click.echo(f"diversity_slope={slope:.4f} stderr={err:.4f}")
    except InsufficientStatisticsError as exc:
        click.echo(f"diversity_slope=nan ({exc})")
    if cfg.out:
        files = emit_outputs(res, cfg.out, stem=f"{cfg.scheme}_{cfg.kind}")
        for k, p in files.items():
            click.echo(f"{k}={p}")


@main.command()
@click.option(
    "--check",
    type=click.Choice(("rank", "alignment", "pivots", "regression", "pep", "all")),
    default="all",
    show_default=True,
)
@click.option("--draws", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dist", default="gaussian", show_default=True)
@click.option("--theta", type=float, default=math.pi / 4, show_default=True)
def verify(check, draws, seed, dist, theta):
    """Run the numerical oracles and print key=value reports."""
    from . import verify as V
    from .channel import sample_channel_set

    rng = np.random.default_rng(seed)
    todo = ("rank", "alignment", "pivots", "regression", "pep") if check == "all" else (check,)
    for name in todo:
        click.echo(f"[{name}]")
        if name == "rank":
            click.echo(V.check_R_fullrank(draws, dist, rng).to_text(), nl=False)
        elif name == "alignment":
            click.echo(V.check_js_alignment(sample_channel_set(4, dist, rng, size=draws)).to_text(), nl=False)
        elif name == "pivots":
            click.echo(V.check_appendixE_pivots(sample_channel_set(4, dist, rng, size=draws), theta).to_text(), nl=False)
        elif name == "regression":
            for k, h22 in enumerate(V.REGRESSION_H22):
                val = V.pivot_regression_expression(h22, theta) * np.exp(1j * theta)
                click.echo(f"matrix{k + 1}_times_exp_jtheta={complex(val)!r}")
                click.echo(f"matrix{k + 1}_claimed={V.CLAIMED_REGRESSION[k]!r}")
        else:
            dX = np.diag([2.0, 2.0, 2.0, 2.0]).astype(complex)
            click.echo(V.pep_probe(dX, np.zeros((4, 4)), [0, 5, 10], draws, rng).to_text(), nl=False)


@main.command()
@click.option("--const", "kind", type=click.Choice(KINDS), default="bpsk", show_default=True)
@click.option("--phi", type=float, default=PHI_CPD, show_default=True)
@click.option("--theta", type=float, default=math.pi / 4, show_default=True)
@click.option("--mode", type=click.Choice(("exhaustive", "sampled")), default="exhaustive", show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file.")
def rankscan(kind, phi, theta, mode, samples, seed, out):
    """Scan codeword difference matrices for rank deficiency."""
    c = make_constellation(kind, phi)
    try:
        rep = diff_rank_scan(c, theta, mode=mode, n_samples=samples, seed=seed, report_path=out)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(rep.to_text(), nl=False)
    if out:
        click.echo(f"report={out}")


if __name__ == "__main__":
    main()
