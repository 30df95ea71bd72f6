"""Command-line surface: simulate, kappa, regress, uncertainty.

Every subcommand takes ``--out-dir``, ``--seed``, and optionally ``--config``
with a flat ``key=value`` file (keys are the long option names with
underscores; ``#`` starts a comment).  Explicit command-line flags override
config values, which override defaults.  Each run writes ``manifest.txt``
echoing the fully resolved configuration, CSV tables with headers, a
human-readable text mirror where useful, and PNG figures next to the tables
(disable with ``--no-figures``).  Reruns with an identical configuration and
seed produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data_io, figures, kappa as kappa_mod, regress as regress_mod
from . import tree, uncertainty as unc
from .errors import BubbleTreeError, DataError, InvalidParameterError

_LIST = "list"  # comma-separated string option

# per-subcommand option schema: name -> (type, default, help)
_SCHEMAS = {
    "simulate": {
        "sigma": (float, 0.2, "log-volatility per sqrt(unit time)"),
        "mu": (float, None, "walk drift per unit time"),
        "nu": (float, None, "target growth rate of the expected price "
                            "(mutually exclusive with --mu)"),
        "tau": (float, 1.0 / 252, "time step"),
        "n_steps": (int, 252, "number of steps"),
        "s0": (float, 100.0, "initial price"),
        "dividend": (float, 0.0, "per-step dividend fraction"),
        "paths": (int, 10000, "Monte Carlo ensemble size"),
        "emit_paths": (int, 8, "number of sampled paths written to paths.csv"),
    },
    "kappa": {
        "prices": (str, None, "price CSV (long or wide form)"),
        "universe": (str, None, "universe CSV (needed for logcap/cap modes)"),
        "modes": (_LIST, "vanilla,demeaned,logcap,cap", "benchmark modes"),
        "mad_kind": (str, "mean", "absolute-deviation statistic: mean|median"),
        "return_kind": (str, "simple", "return definition: simple|log"),
        "start": (str, None, "first date (inclusive)"),
        "end": (str, None, "last date (inclusive)"),
    },
    "regress": {
        "kappa_file": (str, None, "per-ticker kappa CSV (ticker,kappa)"),
        "universe": (str, None, "universe CSV"),
        "specs": (_LIST, None, "regression specifications"),
        "prices": (str, None, "price CSV for the snapshot price (P/B family)"),
        "price_date": (str, None, "snapshot date for P/B (default: first date)"),
        "log_kappa": (bool, False, "regress ln(kappa), dropping kappa <= 0"),
    },
    "uncertainty": {
        "density": (_LIST, "gaussian:eps=0.5;laplace:eps=0.5",
                    "density specs, ';'-separated (family:key=val,...)"),
        "density_file": (_LIST, None, "two-column (x,p) CSV file(s)"),
        "walks": (int, 100, "walks for the commutator check"),
        "steps": (int, 1000, "steps per walk"),
        "tau": (float, 0.01, "walk time step"),
        "walk_mu": (float, 0.0, "walk drift for the commutator check"),
    },
}

_COMMON = {
    "seed": (int, 0, "base RNG seed"),
    "workers": (int, 1, "worker threads for ensemble generation"),
    "figures": (bool, True, "render PNG figures next to the CSV output"),
}

_REGRESSION_SPECS = {
    "cap": (["ln_cap"], True),
    "cap_sectors": (["ln_cap", "sectors"], False),
    "cap_pb": (["ln_cap", "pb"], True),
    "cap_bp": (["ln_cap", "bp"], True),
    "cap_lnpb": (["ln_cap", "ln_pb"], True),
    "cap_sectors_lnpb": (["ln_cap", "sectors", "ln_pb"], False),
}
_PB_SPECS = {"cap_pb", "cap_bp", "cap_lnpb", "cap_sectors_lnpb"}


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _read_config(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _coerce(name: str, kind, raw: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is _LIST:
            return raw
        return kind(raw)
    except ValueError:
        raise InvalidParameterError(
            f"cannot parse config value {name}={raw!r}") from None


def _resolve(args: argparse.Namespace, schema: dict) -> dict:
    """defaults < config file < explicit command-line flags."""
    cfg_file = _read_config(args.config) if args.config else {}
    merged = dict(_COMMON)
    merged.update(schema)
    unknown = set(cfg_file) - set(merged)
    if unknown:
        raise InvalidParameterError(
            f"unknown config key(s): {sorted(unknown)}")
    resolved: dict = {}
    for name, (kind, default, _help) in merged.items():
        value = getattr(args, name, None)
        if value is None and name in cfg_file:
            value = _coerce(name, kind, cfg_file[name])
        if value is None:
            value = default
        if kind is _LIST and isinstance(value, str):
            sep = ";" if ";" in value or name in ("density", "density_file") else ","
            value = [v.strip() for v in value.split(sep) if v.strip()]
        resolved[name] = value
    resolved["out_dir"] = args.out_dir
    resolved["config"] = args.config or ""
    return resolved


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return "" if value is None else str(value)


def _write_manifest(out_dir: Path, command: str, cfg: dict) -> None:
    # out_dir and the config-file path are run-harness locations, not part
    # of the semantic configuration; echoing them would make byte-identical
    # reruns into different directories impossible
    lines = [f"command={command}"]
    lines += [f"{k}={_fmt(v)}" for k, v in sorted(cfg.items())
              if k not in ("out_dir", "config")]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _tree_params(cfg: dict) -> tree.TreeParams:
    if cfg["mu"] is not None and cfg["nu"] is not None:
        raise InvalidParameterError("--mu and --nu are mutually exclusive")
    if cfg["nu"] is not None:
        mu = tree.mu_for_drift(cfg["sigma"], cfg["tau"], cfg["nu"])
    else:
        mu = cfg["mu"] if cfg["mu"] is not None else 0.0
    return tree.TreeParams(sigma=cfg["sigma"], mu=mu, tau=cfg["tau"],
                           n_steps=cfg["n_steps"], s0=cfg["s0"],
                           d=cfg["dividend"])


def cmd_simulate(cfg: dict) -> None:
    out = _out_dir(cfg)
    params = _tree_params(cfg)
    seed, workers = cfg["seed"], cfg["workers"]

    stats = tree.mc_ensemble(params, cfg["paths"], seed, workers)
    _write_csv(out / "ensemble_stats.csv",
               ["n_paths", "terminal_mean", "stderr_mean", "terminal_median",
                "q01", "q25", "q75", "q99", "loss_probability",
                "dividends_mean", "dividends_stderr"],
               [[stats.n_paths, stats.terminal_mean, stats.stderr_mean,
                 stats.terminal_median, stats.q01, stats.q25, stats.q75,
                 stats.q99, stats.loss_probability, stats.dividends_mean,
                 stats.dividends_stderr]])

    n_total = params.n_steps
    checkpoints = sorted({max(1, n_total // 4), max(1, n_total // 2),
                          max(1, 3 * n_total // 4), n_total})
    rows = []
    for n in checkpoints:
        sub = replace(params, n_steps=n)
        mc = tree.mc_ensemble(sub, cfg["paths"], seed, workers)
        rows.append([
            n, n * params.tau,
            tree.expected_price(params, n), mc.terminal_mean, mc.stderr_mean,
            tree.most_probable_price(params, n),
            tree.exact_median_price(params, n), mc.terminal_median,
            tree.exact_loss_probability(params, n), mc.loss_probability,
            tree.dividends_most_probable(params, n),
            tree.dividends_expected(params, n),
            mc.dividends_mean, mc.dividends_stderr,
        ])
    _write_csv(out / "closed_forms.csv",
               ["n", "t", "expected_price", "mc_mean", "mc_stderr",
                "most_probable_price", "exact_median", "mc_median",
                "exact_loss_probability", "mc_loss_probability",
                "dividends_most_probable", "dividends_expected",
                "mc_dividends_mean", "mc_dividends_stderr"],
               rows)

    emit = min(cfg["emit_paths"], cfg["paths"])
    sampled = tree.ensemble_paths(params, emit, seed) if emit > 0 else []
    path_rows = []
    for i, (walk, prices) in enumerate(sampled):
        for n in range(params.n_steps + 1):
            path_rows.append([i, n, walk.values[n], prices.prices[n],
                              prices.dividends_cum[n]])
    _write_csv(out / "paths.csv",
               ["path", "step", "walk", "price", "dividends_cum"], path_rows)

    if cfg["figures"]:
        times = np.arange(params.n_steps + 1) * params.tau
        expected = [tree.expected_price(params, n)
                    for n in range(params.n_steps + 1)]
        typical = [tree.most_probable_price(params, n)
                   for n in range(params.n_steps + 1)]
        figures.save_paths_figure(out / "fig_paths.png", times,
                                  [pp.prices for _, pp in sampled],
                                  expected, typical)
        terminals = tree.sample_terminal_prices(params, cfg["paths"], seed,
                                                workers)
        figures.save_terminal_figure(out / "fig_terminal.png", terminals,
                                     expected[-1], typical[-1])


# ---------------------------------------------------------------------------
# kappa
# ---------------------------------------------------------------------------

def _load_inputs(cfg: dict):
    if not cfg["prices"]:
        raise InvalidParameterError("--prices is required")
    date_range = None
    if cfg["start"] or cfg["end"]:
        date_range = (cfg["start"], cfg["end"])
    panel, price_drops = data_io.load_prices(cfg["prices"], date_range)
    drops = [("prices", t, r) for t, r in price_drops]
    universe = None
    if cfg["universe"]:
        universe, uni_drops = data_io.load_universe(cfg["universe"])
        drops += [("universe", t, r) for t, r in uni_drops]
        panel, universe = data_io.align(panel, universe)
    return panel, universe, drops


def cmd_kappa(cfg: dict) -> None:
    out = _out_dir(cfg)
    modes = cfg["modes"]
    unknown = set(modes) - set(kappa_mod.MODES)
    if unknown:
        raise InvalidParameterError(f"unknown mode(s): {sorted(unknown)}")
    panel, universe, drops = _load_inputs(cfg)
    if {"logcap", "cap"} & set(modes) and universe is None:
        raise InvalidParameterError(
            "--universe is required for the logcap and cap modes")

    vanilla = kappa_mod.compute_returns(panel, kind=cfg["return_kind"])
    summary_rows = []
    for mode in modes:
        if mode == "vanilla":
            adjusted = vanilla
        elif mode == "demeaned":
            adjusted = kappa_mod.demean_cross_section(vanilla)
        else:
            weights = kappa_mod.benchmark_weights(universe, vanilla.tickers, mode)
            adjusted = kappa_mod.benchmark_adjust(vanilla, weights, mode)
        report = kappa_mod.kappa_report(adjusted, mad_kind=cfg["mad_kind"])
        _write_csv(out / f"kappa_{mode}.csv", ["ticker", "kappa"],
                   [[t, report.per_ticker[t]] for t in adjusted.tickers])
        s = report.summary
        summary_rows.append([mode, s.count, s.min, s.q1, s.median, s.mean,
                             s.q3, s.max, s.stdev, s.mad])
        values = np.array([report.per_ticker[t] for t in adjusted.tickers])
        grid, dens = kappa_mod.density(values)
        _write_csv(out / f"density_{mode}.csv", ["grid", "density"],
                   list(zip(grid, dens)))
        if cfg["figures"]:
            figures.save_density_figure(out / f"density_{mode}.png",
                                        grid, dens, mode)
    _write_csv(out / "summary.csv",
               ["mode", "count", "min", "q1", "median", "mean", "q3", "max",
                "stdev", "mad"], summary_rows)
    if drops:
        _write_csv(out / "drops.csv", ["source", "ticker", "reason"], drops)


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------

def _load_kappa_file(path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["ticker", "kappa"]:
            raise DataError(f"{path}:1: expected header ticker,kappa")
        out: dict[str, float] = {}
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{reader.line_num}: expected 2 columns")
            ticker = row[0].strip()
            if ticker in out:
                raise DataError(f"{path}:{reader.line_num}: duplicate ticker {ticker}")
            try:
                out[ticker] = float(row[1])
            except ValueError:
                raise DataError(
                    f"{path}:{reader.line_num}: cannot parse kappa "
                    f"value {row[1]!r}") from None
    if not out:
        raise DataError(f"{path}: no kappa rows")
    return out


def _snapshot_prices(cfg: dict) -> dict[str, float] | None:
    if not cfg["prices"]:
        return None
    panel, _ = data_io.load_prices(cfg["prices"])
    date = cfg["price_date"] or panel.dates[0]
    if date not in panel.dates:
        raise DataError(f"snapshot date {date} not present in {cfg['prices']}")
    j = panel.dates.index(date)
    return {t: float(panel.prices[i, j]) for i, t in enumerate(panel.tickers)}


def _format_report_text(spec_name: str, result) -> list[str]:
    lines = [f"[{spec_name}]  observations: {result.n_obs}, "
             f"parameters: {result.n_params}"]
    lines.append(f"{'term':<24}{'estimate':>14}{'std error':>14}{'t-stat':>12}")
    for name, b, se, t in zip(result.names, result.estimates,
                              result.stderr, result.tstats):
        lines.append(f"{name:<24}{b:>14.6g}{se:>14.6g}{t:>12.4g}")
    lines.append(f"R-squared: {result.r_squared:.6g}   "
                 f"adjusted: {result.adj_r_squared:.6g}")
    lines.append(f"F-statistic: {result.f_statistic:.6g} "
                 f"on {result.f_dfn} and {result.f_dfd} df")
    lines.append("")
    return lines


def cmd_regress(cfg: dict) -> None:
    out = _out_dir(cfg)
    if not cfg["kappa_file"] or not cfg["universe"]:
        raise InvalidParameterError("--kappa-file and --universe are required")
    kappa_values = _load_kappa_file(cfg["kappa_file"])
    universe, _ = data_io.load_universe(cfg["universe"])
    snapshot = _snapshot_prices(cfg)

    specs = cfg["specs"]
    if specs is None:
        specs = (list(_REGRESSION_SPECS) if snapshot is not None
                 else ["cap", "cap_sectors"])
    unknown = set(specs) - set(_REGRESSION_SPECS)
    if unknown:
        raise InvalidParameterError(
            f"unknown spec(s) {sorted(unknown)}; choose from "
            f"{sorted(_REGRESSION_SPECS)}")
    if _PB_SPECS & set(specs) and snapshot is None:
        raise InvalidParameterError(
            "--prices is required for the P/B specifications")

    common = sorted(set(kappa_values) & set(universe.tickers))
    if not common:
        raise DataError("kappa file and universe share no tickers")
    universe = universe.restrict(common)

    filtered, counts = regress_mod.filter_universe(universe)
    if _PB_SPECS & set(specs):
        _write_csv(out / "sector_counts.csv",
                   ["sector", "count_all", "count_positive_book"], counts)

    csv_rows = []
    text_lines = []
    for spec_name in specs:
        variables, intercept = _REGRESSION_SPECS[spec_name]
        uni = filtered if spec_name in _PB_SPECS else universe
        table = regress_mod.universe_variables(uni, snapshot)
        tickers = list(uni.tickers)
        y = np.array([kappa_values[t] for t in tickers])
        if cfg["log_kappa"]:
            keep = y > 0
            tickers = [t for t, k in zip(tickers, keep) if k]
            y = np.log(y[keep])
            if len(tickers) == 0:
                raise DataError("no tickers with positive kappa for ln(kappa)")
        design = regress_mod.build_design(tickers, variables, table,
                                          sectors=uni.sector,
                                          intercept=intercept)
        result = regress_mod.ols(y, design)
        for name, b, se, t in zip(result.names, result.estimates,
                                  result.stderr, result.tstats):
            csv_rows.append([spec_name, "coefficient", name, b, se, t])
        csv_rows.append([spec_name, "overall", "r_squared",
                         result.r_squared, "", ""])
        csv_rows.append([spec_name, "overall", "adj_r_squared",
                         result.adj_r_squared, "", ""])
        csv_rows.append([spec_name, "overall", "f_statistic",
                         result.f_statistic, result.f_dfn, result.f_dfd])
        text_lines += _format_report_text(spec_name, result)
        if cfg["figures"]:
            figures.save_regression_figure(out / f"fig_regress_{spec_name}.png",
                                           result, spec_name)
    _write_csv(out / "regression_report.csv",
               ["spec", "kind", "name", "estimate", "stderr", "t_statistic"],
               csv_rows)
    (out / "regression_report.txt").write_text("\n".join(text_lines),
                                               encoding="utf-8")


# ---------------------------------------------------------------------------
# uncertainty
# ---------------------------------------------------------------------------

def _load_density_file(path) -> unc.DensityGrid:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header][:2] != ["x", "p"]:
            raise DataError(f"{path}:1: expected header x,p")
        xs, ps = [], []
        for row in reader:
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                ps.append(float(row[1]))
            except (ValueError, IndexError):
                raise DataError(
                    f"{path}:{reader.line_num}: malformed density row") from None
    return unc.density_from_points(xs, ps)


def cmd_uncertainty(cfg: dict) -> None:
    out = _out_dir(cfg)
    grids: list[tuple[str, unc.DensityGrid]] = []
    for spec in cfg["density"] or []:
        family, params = unc.parse_density_spec(spec)
        grids.append((spec, unc.density_from_spec(family, **params)))
    for path in cfg["density_file"] or []:
        grids.append((path, _load_density_file(path)))
    if not grids:
        raise InvalidParameterError("no densities requested")

    rows = []
    for label, grid in grids:
        sat = unc.saturation_check(grid)
        rows.append([label, unc.sigma_x(grid), unc.sigma_v(grid), sat.product,
                     unc.velocity_mean(grid), sat.alpha, sat.residual])
        if cfg["figures"]:
            safe = "".join(c if c.isalnum() else "_" for c in label)[:48]
            figures.save_uncertainty_figure(out / f"fig_density_{safe}.png",
                                            grid, unc.velocity_field(grid),
                                            label)
    _write_csv(out / "uncertainty_report.csv",
               ["label", "sigma_x", "sigma_v", "product", "v_star",
                "saturation_alpha", "saturation_residual"], rows)

    params = tree.TreeParams(sigma=1.0, mu=cfg["walk_mu"], tau=cfg["tau"],
                             n_steps=cfg["steps"])
    worst = 0.0
    lo, hi, total = math.inf, -math.inf, 0.0
    for i in range(cfg["walks"]):
        walk = tree.simulate_walk(params, cfg["seed"] + i)
        series = unc.commutator_series(walk, cfg["tau"])
        lo = min(lo, float(series.min()))
        hi = max(hi, float(series.max()))
        total += float(series.sum())
        worst = max(worst, float(np.abs(series - 1.0).max()))
    mean = total / (cfg["walks"] * cfg["steps"])
    _write_csv(out / "commutator_check.csv",
               ["n_walks", "n_steps", "tau", "min", "max", "mean",
                "max_abs_error"],
               [[cfg["walks"], cfg["steps"], cfg["tau"], lo, hi, mean, worst]])


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubbletree",
        description="Binary-tree price simulation, bubble-ratio estimation, "
                    "cross-sectional regressions, and dispersion-bound checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--out-dir", required=True,
                       help="directory for output files")
        p.add_argument("--config", help="flat key=value config file")
        merged = dict(_COMMON)
        merged.update(schema)
        for name, (kind, default, help_text) in merged.items():
            flag = "--" + name.replace("_", "-")
            if kind is bool:
                p.add_argument(flag, default=None, help=help_text,
                               action=argparse.BooleanOptionalAction)
            elif kind is _LIST:
                p.add_argument(flag, default=None,
                               help=f"{help_text} (default: {default})")
            else:
                p.add_argument(flag, type=kind, default=None,
                               help=f"{help_text} (default: {default})")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "kappa": cmd_kappa,
    "regress": cmd_regress,
    "uncertainty": cmd_uncertainty,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args, _SCHEMAS[args.command])
        _write_manifest(_out_dir(cfg), args.command, cfg)
        _COMMANDS[args.command](cfg)
    except BubbleTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
