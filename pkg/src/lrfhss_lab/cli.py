"""Experiment orchestration: config ingestion, sweeps, CSV/report output.

Subcommands: ``analytic``, ``simulate``, ``compare``, ``figure <id>``,
``selftest``.  Output is CSV (RFC-4180) plus a run manifest; ``compare``
joins previously written analytic and simulation curves and prints a
deviation/capacity report.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:
    import tomli

from . import analytic, channel, geometry, mcsim, netcode, specfun
from .analytic import DR5, DR6, AnalyticScenario, CaptureSeriesConfig, LinkBudget
from .channel import Environment
from .specfun import PAPER_CONTROL, SeriesControl

__version__ = "0.1.0"

_DR_BY_NAME = {"DR5": DR5, "DR6": DR6}
_ENV_BY_NAME = {
    "light": Environment.INFREQUENT_LIGHT,
    "heavy": Environment.FREQUENT_HEAVY,
    "average": Environment.AVERAGE,
}


class ConfigError(ValueError):
    """Configuration validation failure; message names field and constraint."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (defaults = measured-link
    baseline: DR5, average shadowing, 30 dBm)."""
    mode: str = "analytic"
    dr: str = "DR5"
    environment: str = "average"
    seed: int = 1
    trials: int = 2
    realizations: int = 200
    area_scale: float = 1.0
    slot_s: float = 291.1
    n_users: int = 100_000
    tx_power_dbm: float = 30.0
    d2d_enabled: bool = False
    d_max_km: float = 1.5
    p_lora_success: float = 0.9
    paper_mode: bool = False
    sweep_variable: str | None = None
    sweep_values: tuple[float, ...] = ()
    output_path: str = "out"

    def __post_init__(self):
        if self.mode not in ("analytic", "simulate", "compare"):
            raise ConfigError(f"mode: must be analytic/simulate/compare, got {self.mode!r}")
        if self.dr not in _DR_BY_NAME:
            raise ConfigError(f"dr: must be one of {sorted(_DR_BY_NAME)}, got {self.dr!r}")
        if self.environment not in _ENV_BY_NAME:
            raise ConfigError(f"environment: must be one of {sorted(_ENV_BY_NAME)}")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations: must be >= 1")
        if not 0.0 < self.area_scale <= 1.0:
            raise ConfigError("area_scale: must be in (0, 1]")
        if any(b >= a for a, b in zip(self.sweep_values[1:], self.sweep_values)):
            raise ConfigError("sweep.values: must be strictly increasing")

    # -- derived objects ---------------------------------------------------

    @property
    def data_rate(self) -> analytic.DataRateProfile:
        return _DR_BY_NAME[self.dr]

    def link_budget(self) -> LinkBudget:
        return LinkBudget(tx_power_dbm=self.tx_power_dbm)

    def fading(self) -> channel.ShadowedRiceParams:
        return channel.preset(_ENV_BY_NAME[self.environment])

    def analytic_scenario(self) -> AnalyticScenario:
        ctl = PAPER_CONTROL if self.paper_mode else SeriesControl()
        return AnalyticScenario(fading=self.fading(), link=self.link_budget(),
                                slot_s=self.slot_s, disc_ctl=ctl)

    def sim_scenario(self, n_users: int | None = None) -> mcsim.Scenario:
        return mcsim.Scenario(
            fading=self.fading(), link=self.link_budget(),
            dr=self.data_rate, slot_s=self.slot_s,
            n_users=self.n_users if n_users is None else n_users,
            area_scale=self.area_scale, d2d_enabled=self.d2d_enabled,
            d_max_km=self.d_max_km, p_lora_success=self.p_lora_success,
            seed=self.seed)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_NUMERIC = {"seed": int, "trials": int, "realizations": int, "n_users": int,
            "area_scale": float, "slot_s": float, "tx_power_dbm": float,
            "d_max_km": float, "p_lora_success": float}
_BOOLEAN = {"d2d_enabled", "paper_mode"}
_STRING = {"mode", "dr", "environment", "output_path"}


def parse_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from an optional TOML file plus overrides;
    omitted fields keep the measured-link defaults."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {path}")
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config: not well-formed TOML: {exc}")
        for section, content in doc.items():
            if section == "sweep":
                if not isinstance(content, dict):
                    raise ConfigError("sweep: must be a section")
                raw["sweep_variable"] = content.get("variable")
                raw["sweep_values"] = content.get("values", ())
            elif isinstance(content, dict):
                raw.update(content)
            else:
                raw[section] = content
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return _coerce(raw)


def _coerce(raw: dict) -> ExperimentConfig:
    kwargs: dict = {}
    for key, value in raw.items():
        if key == "sweep_values":
            try:
                kwargs[key] = tuple(float(v) for v in value)
            except (TypeError, ValueError):
                raise ConfigError("sweep.values: expected a list of numbers")
        elif key == "sweep_variable":
            if value is not None and not isinstance(value, str):
                raise ConfigError("sweep.variable: expected a name")
            kwargs[key] = value
        elif key in _NUMERIC:
            caster = _NUMERIC[key]
            try:
                kwargs[key] = caster(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected a number, got {value!r}")
        elif key in _BOOLEAN:
            if not isinstance(value, bool):
                raise ConfigError(f"{key}: expected a boolean, got {value!r}")
            kwargs[key] = value
        elif key in _STRING:
            if not isinstance(value, str):
                raise ConfigError(f"{key}: expected a string, got {value!r}")
            kwargs[key] = value
        else:
            raise ConfigError(f"{key}: unknown configuration field")
    return ExperimentConfig(**kwargs)


def emit_config(cfg: ExperimentConfig) -> str:
    """Serialize a config back to TOML (parse(emit(c)) == c)."""
    lines = []
    for f in fields(cfg):
        if f.name in ("sweep_variable", "sweep_values"):
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, str):
            text = f'"{value}"'
        else:
            text = repr(value)
        lines.append(f"{f.name} = {text}")
    if cfg.sweep_variable is not None:
        lines.append("")
        lines.append("[sweep]")
        lines.append(f'variable = "{cfg.sweep_variable}"')
        values = ", ".join(repr(v) for v in cfg.sweep_values)
        lines.append(f"values = [{values}]")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Worker pool
# ---------------------------------------------------------------------------

def _max_workers() -> int:
    env = os.environ.get("LRFHSS_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("LRFHSS_LAB_THREADS: expected an integer")
    return max(1, min(os.cpu_count() or 1, 8))


def _pool_map(fn, jobs):
    """Map jobs preserving order; falls back to serial for 1 worker."""
    workers = _max_workers()
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# Sweep execution
# ---------------------------------------------------------------------------

def _analytic_point(job) -> tuple[float, float]:
    cfg, value = job
    sc = cfg.analytic_scenario()
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, int(value))))
    if cfg.sweep_variable in (None, "n_users"):
        # area scaling preserves density: both engines see the scaled
        # population, and sweep values stay full-scale-equivalent labels
        n_full = int(value) if cfg.sweep_variable else cfg.n_users
        n = max(int(round(n_full * cfg.area_scale)), 1)
        if cfg.d2d_enabled:
            o_l = analytic.outage_lrfhss(sc, cfg.data_rate, n,
                                         cfg.realizations, rng).outage_estimate
            density = n_full / _full_area(cfg)
            pd2d = analytic.p_d2d(cfg.p_lora_success,
                                  analytic.p_neighbor(density, cfg.d_max_km))
            return value, analytic.outage_d2d(o_l, pd2d)
        res = analytic.outage_lrfhss(sc, cfg.data_rate, n, cfg.realizations, rng)
        return value, res.outage_estimate
    if cfg.sweep_variable == "tx_power_dbm":
        sc = replace(sc, link=LinkBudget(tx_power_dbm=float(value)))
        g0 = _zenith_gain(sc)
        return value, analytic.p_disc(sc.fading, sc.link, g0, sc.disc_ctl,
                                      cfg.data_rate.obw_hz)
    if cfg.sweep_variable == "distance_km":
        res = analytic.outage_at_distance(sc, cfg.data_rate, cfg.n_users,
                                          float(value), cfg.realizations, rng)
        o_l = res.outage_estimate
        if cfg.d2d_enabled:
            density = cfg.n_users / _full_area(cfg)
            pd2d = analytic.p_d2d(cfg.p_lora_success,
                                  analytic.p_neighbor(density, cfg.d_max_km))
            return value, analytic.outage_d2d(o_l, pd2d)
        return value, o_l
    raise ConfigError(f"sweep.variable: unsupported for analytic mode: "
                      f"{cfg.sweep_variable!r}")


def _sim_point(job) -> tuple[float, float, float]:
    cfg, value = job
    n_sim = int(round((int(value) if cfg.sweep_variable == "n_users"
                       else cfg.n_users) * cfg.area_scale))
    sc = cfg.sim_scenario(n_users=max(n_sim, 1))
    sc = replace(sc, seed=int(cfg.seed + int(value)))
    rep = mcsim.run_campaign(sc, cfg.trials)
    return value, rep.outage_estimate, rep.std_error


def _full_area(cfg: ExperimentConfig) -> float:
    return geometry.footprint_area_km2(geometry.SatelliteGeometry(), cfg.slot_s)


def _zenith_gain(sc: AnalyticScenario) -> float:
    return geometry.path_gain_linear(90.0, sc.link.frequency_mhz, sc.geometry)


def _sweep_values(cfg: ExperimentConfig) -> tuple[float, ...]:
    if cfg.sweep_values:
        return cfg.sweep_values
    return (float(cfg.n_users),)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _write_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _write_manifest(path: str, cfg: ExperimentConfig, wall_s: float) -> None:
    with open(path, "w") as fh:
        fh.write(f"# run manifest\nversion = \"{__version__}\"\n")
        fh.write(f"wall_time_s = {wall_s:.3f}\n\n# config echo\n")
        fh.write(emit_config(cfg))


def run(cfg: ExperimentConfig) -> list[str]:
    """Execute the configured experiment; returns paths written."""
    start = time.time()
    out = cfg.output_path
    sweep_name = cfg.sweep_variable or "n_users"
    if cfg.mode == "analytic":
        jobs = [(cfg, v) for v in _sweep_values(cfg)]
        points = _pool_map(_analytic_point, jobs)
        path = os.path.join(out, "analytic.csv")
        _write_csv(path, [sweep_name, "outage_analytic"],
                   [[_fmt(v), _fmt(o)] for v, o in points])
    elif cfg.mode == "simulate":
        jobs = [(cfg, v) for v in _sweep_values(cfg)]
        points = _pool_map(_sim_point, jobs)
        path = os.path.join(out, "sim.csv")
        _write_csv(path, [sweep_name, "outage_sim", "sim_stderr"],
                   [[_fmt(v), _fmt(o), _fmt(se)] for v, o, se in points])
    else:
        return compare(cfg)
    manifest = path[:-4] + ".manifest"
    _write_manifest(manifest, cfg, time.time() - start)
    return [path, manifest]


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_csv(path: str) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in row] for row in reader]
    return header, rows


def compare(cfg: ExperimentConfig) -> list[str]:
    """Join analytic.csv and sim.csv on the sweep value, write
    compare.csv, and print the deviation/capacity report."""
    a_path = os.path.join(cfg.output_path, "analytic.csv")
    s_path = os.path.join(cfg.output_path, "sim.csv")
    if not (os.path.exists(a_path) and os.path.exists(s_path)):
        raise ConfigError("nothing to compare: run analytic and simulate first")
    _, a_rows = _read_csv(a_path)
    _, s_rows = _read_csv(s_path)
    sim_by_value = {row[0]: row[1:] for row in s_rows}
    joined = [[v, o] + sim_by_value[v] for v, o in a_rows if v in sim_by_value]
    if not joined:
        raise ConfigError("nothing to compare: no common sweep values")
    path = os.path.join(cfg.output_path, "compare.csv")
    sweep_name = cfg.sweep_variable or "n_users"
    _write_csv(path, [sweep_name, "outage_analytic", "outage_sim", "sim_stderr"],
               [[_fmt(c) for c in row] for row in joined])
    print(report(joined))
    return [path]


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def crossing_at_threshold(values, outages, threshold: float = 1e-2) -> float | None:
    """Sweep value where the outage curve crosses the threshold, by
    log-linear interpolation between the bracketing points."""
    for (v0, o0), (v1, o1) in zip(zip(values, outages),
                                  zip(values[1:], outages[1:])):
        if o0 <= 0.0 or o1 <= 0.0:
            continue
        if (o0 - threshold) * (o1 - threshold) <= 0.0 and o0 != o1:
            frac = (math.log(threshold) - math.log(o0)) / (math.log(o1) - math.log(o0))
            return v0 + frac * (v1 - v0)
    return None


def report(joined, tolerance: float = 0.10, floor: float = 1e-2) -> str:
    """Human-readable comparison of analytic vs simulated curves."""
    deviations = []
    for row in joined:
        _, o_a, o_s = row[0], row[1], row[2]
        if o_a >= floor:
            deviations.append(abs(o_s - o_a) / o_a)
    lines = []
    values = [row[0] for row in joined]
    cross_a = crossing_at_threshold(values, [row[1] for row in joined], floor)
    cross_s = crossing_at_threshold(values, [row[2] for row in joined], floor)
    if deviations:
        mx, mean = max(deviations), sum(deviations) / len(deviations)
        verdict = "PASS" if mx <= tolerance else "FAIL"
        lines.append(f"relative deviation (outage >= {floor:g}): "
                     f"max {mx:.2%}, mean {mean:.2%} -> {verdict}")
    else:
        lines.append(f"no points with outage >= {floor:g}; nothing to judge")
    for label, cross in (("analytic", cross_a), ("simulated", cross_s)):
        if cross is not None:
            lines.append(f"capacity at outage {floor:g} ({label}): {cross:,.0f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Figure recipes
# ---------------------------------------------------------------------------

def _figure_fig4(cfg: ExperimentConfig) -> list[str]:
    """Disconnection probability vs transmit power, three environments,
    series evaluation against a numerical-integration check."""
    from scipy.integrate import quad
    rows = []
    sc0 = cfg.analytic_scenario()
    g0 = _zenith_gain(sc0)
    for env_name, env in _ENV_BY_NAME.items():
        fading = channel.preset(env)
        for p_t in range(0, 31, 2):
            lb = LinkBudget(tx_power_dbm=float(p_t))
            series = analytic.p_disc(fading, lb, g0, sc0.disc_ctl,
                                     cfg.data_rate.obw_hz)
            sigma2 = 10.0 ** (analytic.noise_power_dbm(
                lb.noise_figure_db, cfg.data_rate.obw_hz) / 10.0)
            y = lb.snr_threshold_linear * sigma2 / (lb.eirp_mw * g0)
            numint, _ = quad(lambda r: channel.power_pdf(r, fading), 0.0, y)
            rows.append([_fmt(p_t), env_name, _fmt(series), _fmt(numint)])
    path = os.path.join(cfg.output_path, "fig4.csv")
    _write_csv(path, ["tx_power_dbm", "environment", "p_disc_analytic",
                      "p_disc_numint"], rows)
    return [path]


def _figure_fig5(cfg: ExperimentConfig) -> list[str]:
    """Capture failure probability vs interferer count at equal gains."""
    sc = cfg.analytic_scenario()
    g0 = _zenith_gain(sc)
    rows = []
    for k in range(1, 9):
        p = analytic.p_cap(k, g0, [g0] * k, sc.fading, sc.link, sc.capture)
        rows.append([str(k), _fmt(p)])
    path = os.path.join(cfg.output_path, "fig5.csv")
    _write_csv(path, ["n_interferers", "p_cap"], rows)
    return [path]


def _figure_fig6(cfg: ExperimentConfig) -> list[str]:
    """Average interferer counts vs population for both data rates."""
    rows = []
    for dr in (DR5, DR6):
        for n in (1, 200_000, 400_000, 600_000, 800_000, 1_000_000):
            counts = analytic.interference_counts(n, 1, cfg.slot_s, dr)
            rows.append([dr.name, str(n), str(counts.i_total),
                         _fmt(counts.i_hdr(1)), _fmt(counts.i_pl(1))])
    path = os.path.join(cfg.output_path, "fig6.csv")
    _write_csv(path, ["dr", "n_users", "i_total", "i_hdr_slope", "i_pl_slope"],
               rows)
    return [path]


def _figure_fig7(cfg: ExperimentConfig) -> list[str]:
    """Outage vs population: full-scale analytic plus desk-scale
    simulation with density-preserving area scaling."""
    values = cfg.sweep_values or (1e5, 2e5, 4e5, 7e5, 1e6)
    rows = []
    for v in values:
        n_full = int(v)
        _, o_a = _analytic_point((replace(cfg, d2d_enabled=False), float(n_full)))
        sim_cfg = replace(cfg, sweep_variable="n_users", d2d_enabled=False)
        _, o_s, se = _sim_point((sim_cfg, float(n_full)))
        rows.append([str(n_full), _fmt(o_a), _fmt(o_s), _fmt(se)])
    path = os.path.join(cfg.output_path, "fig7.csv")
    _write_csv(path, ["n_users_equiv_fullscale", "outage_analytic",
                      "outage_sim", "sim_stderr"], rows)
    return [path]


def _figure_d2d_sweep(cfg: ExperimentConfig, name: str) -> list[str]:
    values = cfg.sweep_values or (2e5, 5e5, 1e6, 1.5e6, 2e6, 2.5e6)
    rows = []
    d2d_cfg = replace(cfg, d2d_enabled=True, sweep_variable="n_users")
    for v in values:
        _, o_d = _analytic_point((d2d_cfg, float(v)))
        rows.append([str(int(v)), _fmt(o_d)])
    path = os.path.join(cfg.output_path, f"{name}.csv")
    _write_csv(path, ["n_users", "outage_d2d_analytic"], rows)
    return [path]


def _figure_fig10(cfg: ExperimentConfig) -> list[str]:
    """D2D-aided outage vs fixed device-satellite distance."""
    geo = geometry.SatelliteGeometry()
    d_lo = geo.orbital_height_km
    d_hi = geometry.slant_distance_km(
        geometry.elevation_from_ground_distance(geo.footprint_radius_km, geo), geo)
    values = cfg.sweep_values or tuple(
        d_lo + (d_hi - d_lo) * i / 7.0 for i in range(8))
    rows = []
    d_cfg = replace(cfg, d2d_enabled=True, sweep_variable="distance_km")
    for v in values:
        _, o_d = _analytic_point((d_cfg, float(v)))
        rows.append([_fmt(v), _fmt(o_d)])
    path = os.path.join(cfg.output_path, "fig10.csv")
    _write_csv(path, ["distance_km", "outage_d2d_analytic"], rows)
    return [path]


_FIGURES = {
    "fig4": _figure_fig4,
    "fig5": _figure_fig5,
    "fig6": _figure_fig6,
    "fig7": _figure_fig7,
    "fig8": lambda cfg: _figure_d2d_sweep(cfg, "fig8"),
    "fig9": lambda cfg: _figure_d2d_sweep(replace(cfg, dr="DR6"), "fig9"),
    "fig10": _figure_fig10,
}


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------

def selftest() -> int:
    """Fast internal consistency checks; returns a process exit status."""
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    from scipy.integrate import quad
    for env in Environment:
        p = channel.preset(env)
        mass, _ = quad(lambda r: channel.power_pdf(r, p), 0.0, np.inf)
        check(f"power pdf normalization ({env.value})", abs(mass - 1.0) < 1e-7)
    check("cluster code is MDS", netcode.mds_check())
    geo = geometry.SatelliteGeometry()
    check("nadir slant distance equals orbit height",
          abs(geometry.slant_distance_km(90.0, geo) - geo.orbital_height_km) < 1e-9)
    rng = np.random.default_rng(0)
    sc = mcsim.Scenario(n_users=500, dr=DR6, seed=0)
    rep = mcsim.run_lrfhss_trial(rng, sc)
    check("small simulation produces tracked packets", rep.trials > 400)
    check("outage estimate in range", 0.0 <= rep.outage_estimate <= 1.0)
    print(f"selftest: {failures} failure(s)")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--realizations", type=int)
    parser.add_argument("--area-scale", type=float, dest="area_scale")
    parser.add_argument("--out", dest="output_path")
    parser.add_argument("--dr", choices=sorted(_DR_BY_NAME))
    parser.add_argument("--env", choices=sorted(_ENV_BY_NAME), dest="environment")
    parser.add_argument("--paper-mode", action="store_const", const=True,
                        dest="paper_mode")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrfhss-lab",
        description="Analytic and Monte-Carlo outage laboratory for "
                    "direct-to-satellite LR-FHSS networks")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in ("analytic", "simulate", "compare"):
        p = sub.add_parser(mode)
        _add_common(p)
    p = sub.add_parser("figure")
    p.add_argument("figure_id", choices=sorted(_FIGURES))
    _add_common(p)
    sub.add_parser("selftest")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return selftest()
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "figure_id")}
    try:
        cfg = parse_config(args.config, overrides)
        if args.command == "figure":
            written = _FIGURES[args.figure_id](cfg)
        else:
            cfg = replace(cfg, mode=args.command) if cfg.mode != args.command \
                else cfg
            written = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
