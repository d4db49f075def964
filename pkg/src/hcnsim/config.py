"""Run configuration: TOML loading, validation and provenance echo.

Every knob has a default matching the reference scenario, so an empty file
(or no file at all) runs the standard sweep.  The effective configuration
is echoed back out as TOML so a run can be reproduced from its output
directory alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .association import AlgoParams, SchemeKind
from .energy import PowerModel
from .topology import LayoutConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 3.5
    deterministic_fading: bool = False
    subcarriers_per_user: int = 1
    sir_cap: float = 1e9


@dataclass(frozen=True)
class SweepParams:
    schemes: tuple[SchemeKind, ...] = (
        SchemeKind.NEAREST_BS, SchemeKind.JOINT, SchemeKind.PROPOSED_JOINT)
    densities: tuple[float, ...] = (0.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
    lambda_e: tuple[float, ...] = (44.0, 45.0)
    n_samples: int = 5000
    master_seed: int = 1
    threads: int = 0  # 0 = one worker per CPU


@dataclass(frozen=True)
class OutputParams:
    directory: str = "results"
    formats: tuple[str, ...] = ("csv", "plots", "figures")


@dataclass(frozen=True)
class RunConfig:
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    mbs: PowerModel = field(default_factory=lambda: _default_mbs())
    sbs: PowerModel = field(default_factory=lambda: _default_sbs())
    algo: AlgoParams = field(default_factory=AlgoParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    sweep: SweepParams = field(default_factory=SweepParams)
    output: OutputParams = field(default_factory=OutputParams)


def _default_mbs() -> PowerModel:
    return PowerModel(p_const_w=354.44, beta=21.45, p_tx_w=40.0,
                      p_min_w=40.0, p_max_w=40.0,
                      total_bandwidth_hz=10e6, n_subcarriers=1000)


def _default_sbs(p_min_w: float = 1.0, p_max_w: float = 30.0,
                 sleep_power_w: float = 0.0) -> PowerModel:
    return PowerModel(p_const_w=38.0, beta=5.5, p_tx_w=30.0,
                      p_min_w=p_min_w, p_max_w=p_max_w,
                      total_bandwidth_hz=5e6, n_subcarriers=500,
                      sleep_power_w=sleep_power_w)


def default_config() -> RunConfig:
    return RunConfig()


_KNOWN_FORMATS = ("csv", "plots", "figures")


def _take(section: dict, section_name: str, key: str, kinds, default):
    """Pop a typed value out of a raw TOML table."""
    if key not in section:
        return default
    value = section.pop(key)
    if kinds is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kinds is int and isinstance(value, bool):
        raise ConfigError(f"{section_name}.{key}: expected an integer, got a boolean")
    if not isinstance(value, kinds):
        want = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{section_name}.{key}: expected {want}, got {type(value).__name__}")
    return value


def _reject_unknown(section: dict, section_name: str) -> None:
    if section:
        key = sorted(section)[0]
        raise ConfigError(f"{section_name}.{key}: unknown field")


def _build(section_name: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section_name}: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    """Build a validated RunConfig from parsed TOML data."""
    raw = dict(raw)
    defaults = RunConfig()

    lay = dict(raw.pop("layout", {}))
    layout = _build("layout", LayoutConfig,
                    macro_radius_m=_take(lay, "layout", "macro_radius_m", float, 1730.0),
                    sbs_radius_m=_take(lay, "layout", "sbs_radius_m", float, 350.0),
                    n_csbs=_take(lay, "layout", "n_csbs", int, 24),
                    n_rsbs=_take(lay, "layout", "n_rsbs", int, 16),
                    n_hsbs=_take(lay, "layout", "n_hsbs", int, 9),
                    min_separation_m=_take(lay, "layout", "min_separation_m", float, 100.0))
    _reject_unknown(lay, "layout")
    for name in ("n_csbs", "n_rsbs", "n_hsbs"):
        if getattr(layout, name) < 0:
            raise ConfigError(f"layout.{name}: must be >= 0, got {getattr(layout, name)}")
    if layout.macro_radius_m <= 0:
        raise ConfigError(f"layout.macro_radius_m: must be > 0, got {layout.macro_radius_m}")

    power = dict(raw.pop("power", {}))
    algo_raw = dict(raw.pop("algorithm", {}))
    p_min_w = _take(algo_raw, "algorithm", "p_min_w", float, 1.0)
    p_max_w = _take(algo_raw, "algorithm", "p_max_w", float, 30.0)

    mbs_raw = dict(power.pop("mbs", {}))
    d = defaults.mbs
    mbs_p_tx = _take(mbs_raw, "power.mbs", "p_tx_w", float, d.p_tx_w)
    mbs = _build("power.mbs", PowerModel,
                 p_const_w=_take(mbs_raw, "power.mbs", "p_const_w", float, d.p_const_w),
                 beta=_take(mbs_raw, "power.mbs", "beta", float, d.beta),
                 p_tx_w=mbs_p_tx, p_min_w=mbs_p_tx, p_max_w=mbs_p_tx,
                 total_bandwidth_hz=_take(mbs_raw, "power.mbs", "bandwidth_hz", float,
                                          d.total_bandwidth_hz),
                 n_subcarriers=_take(mbs_raw, "power.mbs", "n_subcarriers", int, d.n_subcarriers),
                 sleep_power_w=_take(mbs_raw, "power.mbs", "sleep_power_w", float, d.sleep_power_w))
    _reject_unknown(mbs_raw, "power.mbs")

    sbs_raw = dict(power.pop("sbs", {}))
    d = defaults.sbs
    sbs = _build("power.sbs", PowerModel,
                 p_const_w=_take(sbs_raw, "power.sbs", "p_const_w", float, d.p_const_w),
                 beta=_take(sbs_raw, "power.sbs", "beta", float, d.beta),
                 p_tx_w=_take(sbs_raw, "power.sbs", "p_tx_w", float, d.p_tx_w),
                 p_min_w=p_min_w, p_max_w=p_max_w,
                 total_bandwidth_hz=_take(sbs_raw, "power.sbs", "bandwidth_hz", float,
                                          d.total_bandwidth_hz),
                 n_subcarriers=_take(sbs_raw, "power.sbs", "n_subcarriers", int, d.n_subcarriers),
                 sleep_power_w=_take(sbs_raw, "power.sbs", "sleep_power_w", float, d.sleep_power_w))
    _reject_unknown(sbs_raw, "power.sbs")
    _reject_unknown(power, "power")

    algo = _build("algorithm", AlgoParams,
                  u_min=_take(algo_raw, "algorithm", "u_min", int, 2),
                  n_th=_take(algo_raw, "algorithm", "n_th", int, 200),
                  step=_take(algo_raw, "algorithm", "step", float, 0.1),
                  max_iter=_take(algo_raw, "algorithm", "max_iter", int, 200),
                  max_sweeps=_take(algo_raw, "algorithm", "max_sweeps", int, 20),
                  margin_j=_take(algo_raw, "algorithm", "margin_j", float, 1.0),
                  rf_only_ledger=_take(algo_raw, "algorithm", "rf_only_ledger", bool, False))
    _reject_unknown(algo_raw, "algorithm")

    chan_raw = dict(raw.pop("channel", {}))
    channel = _build("channel", ChannelParams,
                     path_loss_exponent=_take(chan_raw, "channel", "path_loss_exponent", float, 3.5),
                     deterministic_fading=_take(chan_raw, "channel", "deterministic_fading",
                                                bool, False),
                     subcarriers_per_user=_take(chan_raw, "channel", "subcarriers_per_user", int, 1),
                     sir_cap=_take(chan_raw, "channel", "sir_cap", float, 1e9))
    _reject_unknown(chan_raw, "channel")
    if channel.path_loss_exponent <= 2.0:
        raise ConfigError("channel.path_loss_exponent: must be > 2, "
                          f"got {channel.path_loss_exponent}")
    if channel.subcarriers_per_user < 1:
        raise ConfigError("channel.subcarriers_per_user: must be >= 1, "
                          f"got {channel.subcarriers_per_user}")

    sweep_raw = dict(raw.pop("sweep", {}))
    scheme_names = _take(sweep_raw, "sweep", "schemes", list,
                         [s.label for s in SweepParams().schemes])
    try:
        schemes = tuple(SchemeKind.from_label(str(s)) for s in scheme_names)
    except ValueError as exc:
        raise ConfigError(f"sweep.schemes: {exc}") from exc
    densities = tuple(float(x) for x in _take(sweep_raw, "sweep", "densities", list,
                                              list(SweepParams().densities)))
    lambdas = tuple(float(x) for x in _take(sweep_raw, "sweep", "lambda_e", list,
                                            list(SweepParams().lambda_e)))
    sweep = SweepParams(
        schemes=schemes, densities=densities, lambda_e=lambdas,
        n_samples=_take(sweep_raw, "sweep", "n_samples", int, 5000),
        master_seed=_take(sweep_raw, "sweep", "master_seed", int, 1),
        threads=_take(sweep_raw, "sweep", "threads", int, 0))
    _reject_unknown(sweep_raw, "sweep")
    if not sweep.schemes:
        raise ConfigError("sweep.schemes: must not be empty")
    if not sweep.densities:
        raise ConfigError("sweep.densities: must not be empty")
    if any(x < 0 for x in sweep.densities):
        raise ConfigError("sweep.densities: must all be >= 0")
    if not sweep.lambda_e:
        raise ConfigError("sweep.lambda_e: must not be empty")
    if any(x < 0 for x in sweep.lambda_e):
        raise ConfigError("sweep.lambda_e: must all be >= 0")
    if sweep.n_samples < 1:
        raise ConfigError(f"sweep.n_samples: must be >= 1, got {sweep.n_samples}")
    if sweep.threads < 0:
        raise ConfigError(f"sweep.threads: must be >= 0, got {sweep.threads}")

    out_raw = dict(raw.pop("output", {}))
    formats = tuple(str(f) for f in _take(out_raw, "output", "formats", list,
                                          list(OutputParams().formats)))
    for f in formats:
        if f not in _KNOWN_FORMATS:
            raise ConfigError(f"output.formats: unknown format {f!r}; "
                              f"expected a subset of {list(_KNOWN_FORMATS)}")
    output = OutputParams(
        directory=_take(out_raw, "output", "directory", str, "results"),
        formats=formats)
    _reject_unknown(out_raw, "output")

    _reject_unknown(raw, "config")
    return RunConfig(layout=layout, mbs=mbs, sbs=sbs, algo=algo,
                     channel=channel, sweep=sweep, output=output)


def load_config(path: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(raw)


def with_overrides(cfg: RunConfig, *, samples: int | None = None,
                   seed: int | None = None, threads: int | None = None,
                   schemes: tuple[SchemeKind, ...] | None = None,
                   deterministic_fading: bool | None = None,
                   out_dir: str | None = None) -> RunConfig:
    """Apply command-line overrides on top of a loaded configuration."""
    sweep = cfg.sweep
    if samples is not None:
        if samples < 1:
            raise ConfigError(f"sweep.n_samples: must be >= 1, got {samples}")
        sweep = dataclasses.replace(sweep, n_samples=samples)
    if seed is not None:
        sweep = dataclasses.replace(sweep, master_seed=seed)
    if threads is not None:
        if threads < 0:
            raise ConfigError(f"sweep.threads: must be >= 0, got {threads}")
        sweep = dataclasses.replace(sweep, threads=threads)
    if schemes is not None:
        sweep = dataclasses.replace(sweep, schemes=schemes)
    channel = cfg.channel
    if deterministic_fading is not None:
        channel = dataclasses.replace(channel, deterministic_fading=deterministic_fading)
    output = cfg.output
    if out_dir is not None:
        output = dataclasses.replace(output, directory=out_dir)
    return dataclasses.replace(cfg, sweep=sweep, channel=channel, output=output)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__} to TOML")


def echo_toml(cfg: RunConfig) -> str:
    """Serialise the effective configuration; reloading it reproduces the run."""
    sections: list[tuple[str, list[tuple[str, object]]]] = [
        ("layout", [
            ("macro_radius_m", cfg.layout.macro_radius_m),
            ("sbs_radius_m", cfg.layout.sbs_radius_m),
            ("n_csbs", cfg.layout.n_csbs),
            ("n_rsbs", cfg.layout.n_rsbs),
            ("n_hsbs", cfg.layout.n_hsbs),
            ("min_separation_m", cfg.layout.min_separation_m),
        ]),
        ("power.mbs", [
            ("p_const_w", cfg.mbs.p_const_w),
            ("beta", cfg.mbs.beta),
            ("p_tx_w", cfg.mbs.p_tx_w),
            ("bandwidth_hz", cfg.mbs.total_bandwidth_hz),
            ("n_subcarriers", cfg.mbs.n_subcarriers),
            ("sleep_power_w", cfg.mbs.sleep_power_w),
        ]),
        ("power.sbs", [
            ("p_const_w", cfg.sbs.p_const_w),
            ("beta", cfg.sbs.beta),
            ("p_tx_w", cfg.sbs.p_tx_w),
            ("bandwidth_hz", cfg.sbs.total_bandwidth_hz),
            ("n_subcarriers", cfg.sbs.n_subcarriers),
            ("sleep_power_w", cfg.sbs.sleep_power_w),
        ]),
        ("algorithm", [
            ("u_min", cfg.algo.u_min),
            ("n_th", cfg.algo.n_th),
            ("step", cfg.algo.step),
            ("max_iter", cfg.algo.max_iter),
            ("max_sweeps", cfg.algo.max_sweeps),
            ("margin_j", cfg.algo.margin_j),
            ("rf_only_ledger", cfg.algo.rf_only_ledger),
            ("p_min_w", cfg.sbs.p_min_w),
            ("p_max_w", cfg.sbs.p_max_w),
        ]),
        ("channel", [
            ("path_loss_exponent", cfg.channel.path_loss_exponent),
            ("deterministic_fading", cfg.channel.deterministic_fading),
            ("subcarriers_per_user", cfg.channel.subcarriers_per_user),
            ("sir_cap", cfg.channel.sir_cap),
        ]),
        ("sweep", [
            ("schemes", [s.label for s in cfg.sweep.schemes]),
            ("densities", list(cfg.sweep.densities)),
            ("lambda_e", list(cfg.sweep.lambda_e)),
            ("n_samples", cfg.sweep.n_samples),
            ("master_seed", cfg.sweep.master_seed),
            ("threads", cfg.sweep.threads),
        ]),
        ("output", [
            ("directory", cfg.output.directory),
            ("formats", list(cfg.output.formats)),
        ]),
    ]
    lines: list[str] = []
    for name, items in sections:
        lines.append(f"[{name}]")
        for key, value in items:
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
