"""Command-line front end: analyze / simulate / sweep / reproduce.

Subcommand parameters are free-form ``key=value`` tokens (fractions like
``rho=1/9`` and comma lists like ``q=0,0.1,0.2`` are understood); common
flags select seeding, replication count, the output CSV path and optional
figure rendering.  Results are CSV tables with the effective configuration
echoed in ``#``-prefixed header lines; ``--svg`` renders a matplotlib chart
of the same table next to the CSV.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import experiment, figures, markov, writeamp
from .experiment import RunConfig, simulate_chain
from .ftl import DeviceGeometry, OutOfSpaceError
from .workload import MultiTempWorkload, UniformWorkload

__all__ = ["main"]

DEFAULT_SEED = 17


class CliError(ValueError):
    """Bad parameters or configuration (exit code 2)."""


# -- parameter handling -------------------------------------------------------


def parse_value(text: str):
    """int | float | fraction a/b | bool | comma list | str."""
    text = text.strip()
    if "," in text:
        return [parse_value(tok) for tok in text.split(",") if tok.strip()]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            pass
    return text


def parse_params(tokens) -> dict:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise CliError(f"expected key=value parameter, got {tok!r}")
        out[key.strip()] = parse_value(value)
    return out


def load_config_section(path: str | None, section: str) -> dict:
    if not path:
        return {}
    file = Path(path)
    if not file.is_file():
        raise CliError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(file)
    if section not in parser:
        return {}
    return {key: parse_value(value) for key, value in parser[section].items()}


class Params:
    """Effective parameters: defaults < config file < command line."""

    def __init__(self, cli: dict, filed: dict):
        self.values = dict(filed)
        self.values.update(cli)
        self.used = {}

    def get(self, key, default=None):
        value = self.values.get(key, default)
        self.used[key] = value
        return value

    def require(self, key):
        if key not in self.values:
            raise CliError(f"missing required parameter {key}=")
        return self.get(key)

    def list(self, key, default=None):
        value = self.get(key, default)
        if value is None:
            return None
        if not isinstance(value, list):
            value = [value]
        self.used[key] = value
        return value

    def echo(self) -> dict:
        return dict(sorted(self.used.items(), key=lambda kv: kv[0]))


# -- output -------------------------------------------------------------------


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, list):
        return ";".join(format_cell(v) for v in value)
    return str(value)


def write_csv(out_path, comment_lines, columns, rows):
    lines = [f"# {line}" for line in comment_lines]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_cell(row.get(col, "")) for col in columns))
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def echo_lines(command, kind, params: Params, extra: dict | None = None) -> list[str]:
    lines = [f"trim-oracle {command} {kind}"]
    merged = params.echo()
    merged.update(extra or {})
    for key, value in sorted(merged.items()):
        lines.append(f"{key} = {format_cell(value)}")
    return lines


# -- geometry helpers -----------------------------------------------------------


def build_geometry(params: Params, default_sf=0.1) -> DeviceGeometry:
    t = params.get("t", 65536)
    n_p = params.get("n_p", 64)
    if "u" in params.values:
        u = params.get("u")
    else:
        s_f = params.get("s_f", default_sf)
        u = round(t * (1.0 - s_f))
    r = params.get("r")
    if r is None:
        r = experiment.default_reserve_threshold(t // n_p, u, n_p)
        params.used["r"] = r
    return DeviceGeometry(t, u, n_p, r)


def run_protocol(params: Params, seed, runs) -> dict:
    return dict(
        seed=seed,
        runs=runs,
        warmup_requests=params.get("warmup"),
        measure_requests=params.get("measure", 200_000),
    )


# -- analyze -------------------------------------------------------------------


def cmd_analyze(kind, params: Params, seed, runs):
    if kind == "pdf":
        u = params.get("u", 1000)
        q = params.require("q")
        p = markov.TrimParams(u, q)
        exact = markov.exact_pdf(p)
        stirling = markov.stirling_pdf(p, params.get("stirling_shift", markov.STIRLING_SHIFT))
        gauss = markov.gaussian_pdf(p, params.get("gaussian_shift", markov.GAUSSIAN_SHIFT))
        rows = [
            {"x": x, "exact": exact.probs[x], "stirling": stirling.probs[x],
             "gaussian": gauss.probs[x]}
            for x in range(u + 1)
        ]
        return ["x", "exact", "stirling", "gaussian"], rows, figures.render_pdf_figure

    if kind == "spare":
        s_f = params.require("s_f")
        q = params.require("q")
        t = params.get("t", 65536)
        eff = markov.effective_overprovisioning(s_f, q, t)
        rows = [{
            "s_f": s_f, "q": q, "t": t,
            "mean_s_eff": eff.mean_spare_factor,
            "var_s_eff": eff.var_spare_factor,
            "rho_eff": eff.rho_eff,
            "u_eff": eff.u_eff,
        }]
        return list(rows[0].keys()), rows, None

    if kind == "writeamp":
        rho = params.require("rho")
        q = params.get("q", 0.0)
        rows = [
            _wa_row(writeamp.wa_agarwal(rho), q=""),
            _wa_row(writeamp.wa_xiang(rho), q=""),
            _wa_row(writeamp.wa_agarwal_trim(rho, q), q=q),
            _wa_row(writeamp.wa_xiang_trim(rho, q), q=q),
        ]
        if "t" in params.values:
            t = params.get("t")
            n_p = params.get("n_p", 64)
            r = params.get("r", 8)
            window = params.get("window")
            u = params.get("u", round(t / (1.0 + rho)))
            rows.append(_wa_row(writeamp.wa_hu(t, u, n_p, r, window), q=""))
            rows.append(_wa_row(writeamp.wa_hu_trim(t, u, q, n_p, r, window), q=q))
        return ["model", "rho", "q", "value", "below_one"], rows, None

    raise CliError(f"unknown analyze kind {kind!r} (expected pdf|spare|writeamp)")


def _wa_row(pred: writeamp.WaPrediction, q):
    return {
        "model": pred.model,
        "rho": pred.inputs.get("rho", ""),
        "q": q,
        "value": pred.value,
        "below_one": pred.below_one,
    }


# -- simulate -------------------------------------------------------------------


def _uniform_config(params: Params, seed, runs, base_q=None) -> RunConfig:
    geo = build_geometry(params)
    q = params.get("q", 0.0) if base_q is None else base_q
    return RunConfig(
        geometry=geo,
        workload=UniformWorkload(q),
        histogram=bool(params.get("histogram", False)),
        sequential=bool(params.get("sequential", False)),
        **run_protocol(params, seed, runs),
    )


def _hotcold_configs(params: Params, seed, runs):
    geo = build_geometry(params, default_sf=0.2)
    f_c = params.get("f_c", 0.9)
    p_h = params.get("p_h", 0.9)
    q_h = params.get("q_h", 0.2)
    q_c = params.get("q_c", 0.1)
    split = params.get("split", 0.5)
    mixed, separated = experiment.hot_cold_frame(geo, f_c, p_h, q_h, q_c, split)
    placement = params.get("placement", "separated")
    if placement not in ("mixed", "separated"):
        raise CliError(f"placement must be mixed|separated, got {placement!r}")
    workload = mixed if placement == "mixed" else separated
    return RunConfig(geometry=geo, workload=workload,
                     **run_protocol(params, seed, runs)), placement


def cmd_simulate(kind, params: Params, seed, runs):
    if kind == "uniform":
        config = _uniform_config(params, seed, runs)
        report = experiment.run(config)
        geo = config.geometry
        row = {
            "q": config.workload.trim_prob,
            "s_f": geo.spare_factor,
            "rho": geo.rho,
            "t": geo.total_pages,
            "u": geo.user_lbas,
            "n_p": geo.pages_per_block,
            "r": geo.reserve_threshold,
            "runs": runs,
            "measured_wa": report.measured_wa,
            "measured_wa_std": report.measured_wa_std,
            "in_use_mean": report.in_use_mean,
            **report.theory,
        }
        return list(row.keys()), [row], None

    if kind == "hotcold":
        config, placement = _hotcold_configs(params, seed, runs)
        report = experiment.run(config)
        spec = config.workload
        row = {
            "placement": placement,
            "f_c": 1.0 - spec.hot_fraction,
            "p_h": spec.hot_request_prob,
            "q_h": spec.hot_trim_prob,
            "q_c": spec.cold_trim_prob,
            "t": config.geometry.total_pages,
            "u": config.geometry.user_lbas,
            "runs": runs,
            "measured_wa": report.measured_wa,
            "measured_wa_std": report.measured_wa_std,
            **report.theory,
        }
        return list(row.keys()), [row], None

    if kind == "multitemp":
        geo = build_geometry(params)
        fractions = tuple(params.list("f"))
        probs = tuple(params.list("p"))
        trims = tuple(params.list("q"))
        alloc = params.get("alloc", "proportional")
        if alloc == "proportional":
            pages = _proportional_pages(geo, fractions)
        elif isinstance(alloc, list):
            pages = tuple(int(a) for a in alloc)
        elif alloc == "mixed":
            pages = None
        else:
            raise CliError(f"alloc must be proportional|mixed|<comma pages>, got {alloc!r}")
        workload = MultiTempWorkload(fractions, probs, trims, pages)
        config = RunConfig(geometry=geo, workload=workload,
                           **run_protocol(params, seed, runs))
        report = experiment.run(config)
        row = {
            "n_temps": len(fractions),
            "alloc": "mixed" if pages is None else list(pages),
            "t": geo.total_pages,
            "u": geo.user_lbas,
            "runs": runs,
            "measured_wa": report.measured_wa,
            "measured_wa_std": report.measured_wa_std,
            **report.theory,
        }
        return list(row.keys()), [row], None

    raise CliError(f"unknown simulate kind {kind!r} (expected uniform|hotcold|multitemp)")


def _proportional_pages(geo: DeviceGeometry, fractions) -> tuple[int, ...]:
    u = geo.user_lbas
    n_p = geo.pages_per_block
    sizes = [int(u * f) for f in fractions]
    sizes[-1] = u - sum(sizes[:-1])
    blocks = [max(-(-s // n_p) + 1, round(geo.blocks * s / u)) for s in sizes]
    blocks[-1] += geo.blocks - sum(blocks)
    if min(blocks) < 1 or blocks[-1] * n_p <= sizes[-1]:
        raise CliError("proportional allocation infeasible for this geometry")
    return tuple(b * n_p for b in blocks)


# -- sweep ------------------------------------------------------------------------


def cmd_sweep(kind, params: Params, seed, runs):
    if kind == "trim":
        base = _uniform_config(params, seed, runs, base_q=0.0)
        q_values = params.list("q", [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3])
        rows = experiment.sweep_trim(base, q_values)
        cols = ["q", "measured_wa", "measured_wa_std",
                "wa_hu_trim", "wa_agarwal_trim", "wa_xiang_trim"]
        return cols, rows, lambda rows_, path: figures.render_wa_sweep_figure(
            rows_, path, "q", "Write amplification vs Trim rate")

    if kind == "coldfrac":
        geo = build_geometry(params, default_sf=0.2)
        base = RunConfig(geometry=geo, workload=UniformWorkload(),
                         **run_protocol(params, seed, runs))
        placement = params.get("placement", "both")
        placements = ("mixed", "separated") if placement == "both" else (placement,)
        rows = experiment.sweep_cold_fraction(
            base,
            params.list("f_c", [x / 10 for x in range(1, 10)]),
            hot_request_prob=params.get("p_h", 0.9),
            hot_trim_prob=params.get("q_h", 0.2),
            cold_trim_prob=params.get("q_c", 0.1),
            split=params.get("split", 0.5),
            placements=placements,
        )
        cols = ["f_c"]
        for key in ("wa_mixed_measured", "wa_mixed_measured_std", "wa_mixed_naive",
                    "wa_separated_measured", "wa_separated_measured_std",
                    "wa_hot_cold_separated"):
            if rows and key in rows[0]:
                cols.append(key)
        return cols, rows, lambda rows_, path: figures.render_wa_sweep_figure(
            rows_, path, "f_c", "Write amplification vs cold fraction")

    if kind == "sparesplit":
        geo = build_geometry(params, default_sf=0.2)
        base = RunConfig(geometry=geo, workload=UniformWorkload(),
                         **run_protocol(params, seed, runs))
        rows = experiment.sweep_spare_split(
            base,
            params.list("splits", [x / 10 for x in range(0, 11)]),
            cold_fraction=params.get("f_c", 0.9),
            hot_request_prob=params.get("p_h", 0.9),
            hot_trim_prob=params.get("q_h", 0.2),
            cold_trim_prob=params.get("q_c", 0.1),
        )
        cols = ["split", "measured_wa", "measured_wa_std", "predicted_wa"]
        return cols, rows, figures.render_split_figure

    raise CliError(f"unknown sweep kind {kind!r} (expected trim|coldfrac|sparesplit)")


# -- reproduce ----------------------------------------------------------------------


def _chain_pdf_rows(u, q, steps, runs, seed, stirling_shift=None, gaussian_shift=None):
    stats = simulate_chain(u, q, steps=steps, runs=runs, seed=seed)
    p = markov.TrimParams(u, q)
    exact = markov.exact_pdf(p)
    stirling = markov.stirling_pdf(
        p, markov.STIRLING_SHIFT if stirling_shift is None else stirling_shift)
    gauss = markov.gaussian_pdf(
        p, markov.GAUSSIAN_SHIFT if gaussian_shift is None else gaussian_shift)
    density = stats.density()
    rows = [
        {"x": x, "simulated": density[x], "exact": exact.probs[x],
         "stirling": stirling.probs[x], "gaussian": gauss.probs[x]}
        for x in range(u + 1)
    ]
    return rows


def cmd_reproduce(target, params: Params, seed, runs):
    if target == "fig1":
        rows = _chain_pdf_rows(
            u=1000, q=0.4,
            steps=params.get("steps", 1_000_000),
            runs=params.get("chains", 128),
            seed=seed,
        )
        return (["x", "simulated", "exact", "stirling", "gaussian"], rows,
                figures.render_pdf_figure)

    if target == "fig2":
        study = experiment.moment_study(
            user_lbas=25, trim_prob=0.3,
            runs=params.get("chains", 64),
            steps=params.get("steps", 1_000_000),
            seed=seed,
        )
        rows = [
            {"label": f"run_{i:02d}", "skew": s, "excess_kurtosis": k}
            for i, (s, k) in enumerate(zip(study.stats.run_skews,
                                           study.stats.run_excess_kurtoses))
        ]
        rows.append({"label": "mean", "skew": study.mean_skew,
                     "excess_kurtosis": study.mean_excess_kurtosis})
        rows.append({"label": "std", "skew": study.std_skew,
                     "excess_kurtosis": study.std_excess_kurtosis})
        rows.append({"label": "theory", "skew": study.theory_skew,
                     "excess_kurtosis": study.theory_excess_kurtosis})
        return ["label", "skew", "excess_kurtosis"], rows, figures.render_moments_figure

    if target == "fig6":
        t = params.get("t", 1280)
        q = params.get("q", 0.1)
        steps = params.get("steps", 200_000)
        chains = params.get("chains", 16)
        rows = []
        for s_f in params.list("s_f", [x / 20 for x in range(0, 11)]):
            eff = markov.effective_overprovisioning(s_f, q, t)
            sd = float(np.sqrt(eff.var_spare_factor))
            u = round(t * (1.0 - s_f))
            stats = simulate_chain(u, q, steps=steps, runs=chains, seed=seed)
            x = np.arange(u + 1)
            s_eff = (t - x) / t
            density = stats.density()
            within = float(density[np.abs(s_eff - eff.mean_spare_factor) <= 3 * sd].sum())
            sim_mean = float((t - density @ x) / t)
            rows.append({
                "s_f": s_f, "q": q, "t": t,
                "mean_s_eff": eff.mean_spare_factor,
                "sd_s_eff": sd,
                "band_lo": eff.mean_spare_factor - 3 * sd,
                "band_hi": eff.mean_spare_factor + 3 * sd,
                "sim_mean_s_eff": sim_mean,
                "sim_within_band": within,
            })
        cols = list(rows[0].keys())
        return cols, rows, figures.render_spare_figure

    if target == "fig7":
        params.values.setdefault("s_f", 0.1)
        params.values.setdefault("measure", 600_000)
        base = _uniform_config(params, seed, runs, base_q=0.0)
        rows = experiment.sweep_trim(
            base, params.list("q", [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]))
        cols = ["q", "measured_wa", "measured_wa_std",
                "wa_hu_trim", "wa_agarwal_trim", "wa_xiang_trim"]
        return cols, rows, lambda rows_, path: figures.render_wa_sweep_figure(
            rows_, path, "q", "Write amplification vs Trim rate")

    if target in ("fig8", "fig10"):
        params.values.setdefault("s_f", 0.2)
        params.values.setdefault("measure", 400_000)
        geo = build_geometry(params, default_sf=0.2)
        base = RunConfig(geometry=geo, workload=UniformWorkload(),
                         **run_protocol(params, seed, runs))
        placements = ("mixed",) if target == "fig8" else ("mixed", "separated")
        rows = experiment.sweep_cold_fraction(
            base, params.list("f_c", [x / 10 for x in range(1, 10)]),
            placements=placements)
        cols = ["f_c", "wa_mixed_measured", "wa_mixed_measured_std", "wa_mixed_naive"]
        if target == "fig10":
            cols += ["wa_separated_measured", "wa_separated_measured_std",
                     "wa_hot_cold_separated"]
        return cols, rows, lambda rows_, path: figures.render_wa_sweep_figure(
            rows_, path, "f_c", "Write amplification vs cold fraction")

    if target == "fig9":
        params.values.setdefault("s_f", 0.2)
        params.values.setdefault("measure", 400_000)
        geo = build_geometry(params, default_sf=0.2)
        base = RunConfig(geometry=geo, workload=UniformWorkload(),
                         **run_protocol(params, seed, runs))
        rows = experiment.sweep_spare_split(
            base, params.list("splits", [x / 10 for x in range(0, 11)]))
        measured = [row["measured_wa"] for row in rows]
        predicted = [row["predicted_wa"] for row in rows]
        extra = {
            "argmin_measured_split": rows[int(np.argmin(measured))]["split"],
            "argmin_predicted_split": rows[int(np.argmin(predicted))]["split"],
        }
        cols = ["split", "measured_wa", "measured_wa_std", "predicted_wa"]
        return cols, rows, figures.render_split_figure, extra

    raise CliError(
        f"unknown reproduce target {target!r} (expected fig1|fig2|fig6|fig7|fig8|fig9|fig10)"
    )


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trim-oracle",
        description="SSD write-amplification lab: simulator, analytics and comparisons",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "analyze": ("pdf|spare|writeamp", "closed-form tables"),
        "simulate": ("uniform|hotcold|multitemp", "one simulated configuration"),
        "sweep": ("trim|coldfrac|sparesplit", "simulate across a parameter grid"),
        "reproduce": ("fig1|fig2|fig6|fig7|fig8|fig9|fig10", "pinned figure frames"),
    }
    for name, (kinds, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("kind", metavar="kind", help=kinds)
        p.add_argument("params", nargs="*", metavar="key=value")
        p.add_argument("--config", default=None, help="INI file with per-subcommand sections")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--out", default=None, help="CSV output path (default stdout)")
        p.add_argument("--svg", action="store_true",
                       help="render a chart next to --out (suffix .svg)")
    return parser


def dispatch(args):
    filed = load_config_section(args.config, args.command)
    cli = parse_params(args.params)
    params = Params(cli, filed)
    seed = args.seed if args.seed is not None else params.get("seed", DEFAULT_SEED)
    runs = args.runs if args.runs is not None else params.get("runs", 1)
    handler = {
        "analyze": cmd_analyze,
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
        "reproduce": cmd_reproduce,
    }[args.command]
    result = handler(args.kind, params, seed, runs)
    columns, rows, chart = result[:3]
    extra = result[3] if len(result) > 3 else {}
    extra.setdefault("seed", seed)
    extra.setdefault("runs", runs)
    comments = echo_lines(args.command, args.kind, params, extra)
    return columns, rows, chart, comments


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        columns, rows, chart, comments = dispatch(args)
        if args.svg and chart is None:
            raise CliError(f"no chart is defined for {args.command} {args.kind}")
        if args.svg and not args.out:
            raise CliError("--svg needs --out to name the figure file")
        write_csv(args.out, comments, columns, rows)
        if args.svg:
            chart(rows, Path(args.out).with_suffix(".svg"))
        return 0
    except CliError as exc:
        print(f"trim-oracle: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"trim-oracle: {exc}", file=sys.stderr)
        return 2
    except (OutOfSpaceError, ArithmeticError, RuntimeError) as exc:
        print(f"trim-oracle: runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
