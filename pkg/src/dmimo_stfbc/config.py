"""Simulation configuration: factory-grid defaults, validation, file loading.

Defaults target the indoor-factory setup used throughout this project:
28 GHz carrier, 200 MHz bandwidth, a 120 x 60 m hall with RUs on a 16 x 8
grid (7.5 m pitch, 8 m height) and UEs on a 1 m grid at 1.5 m height,
0.2 W per-antenna transmit power, 9 dB UE noise figure, 1% outage target.

Config files are JSON; an empty file yields the full default configuration
and any provided key overrides just that field.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

__all__ = ["ConfigError", "PathlossParams", "SimConfig", "load_config", "BASE_METHODS"]

BASE_METHODS = ("alamouti", "smallcell", "sfn", "mrt95", "mrt1ru")
_RX_CSI_MODES = ("perfect", "statistical")


class ConfigError(ValueError):
    """Raised for unparseable or invariant-violating configuration input."""


@dataclass(frozen=True)
class PathlossParams:
    """Indoor-factory two-branch pathloss with log-normal shadowing.

    Each branch is a power law ``PL_dB = offset + dist_coef * log10(d_3d)
    + freq_coef * log10(f_GHz)``; the non-LOS branch is floored at the LOS
    value.  Links are LOS with probability ``exp(-d / k)`` where ``k =
    -clutter_size / ln(1 - clutter_density)`` (sparse clutter, low antennas),
    unless ``los_probability`` forces one branch.
    """

    los_offset_db: float = 31.84
    los_dist_coef_db: float = 21.5
    los_freq_coef_db: float = 19.0
    los_shadow_sigma_db: float = 4.3
    nlos_offset_db: float = 33.0
    nlos_dist_coef_db: float = 25.5
    nlos_freq_coef_db: float = 20.0
    nlos_shadow_sigma_db: float = 5.7
    clutter_size_m: float = 10.0
    clutter_density: float = 0.3
    los_probability: float | None = None   # None: distance-dependent mixture

    def __post_init__(self):
        if not 0.0 < self.clutter_density < 1.0:
            raise ConfigError("clutter_density must lie in (0, 1)")
        if self.clutter_size_m <= 0:
            raise ConfigError("clutter_size_m must be positive")
        if self.los_probability is not None and not 0.0 <= self.los_probability <= 1.0:
            raise ConfigError("los_probability must lie in [0, 1]")

    @property
    def los_decay_m(self) -> float:
        """Distance constant of the LOS probability curve."""
        return -self.clutter_size_m / math.log(1.0 - self.clutter_density)

    @classmethod
    def inf_sl(cls) -> "PathlossParams":
        """Sparse-clutter indoor factory with distance-mixed LOS/NLOS (default)."""
        return cls()

    @classmethod
    def inf_los(cls) -> "PathlossParams":
        """Force the line-of-sight branch on every link."""
        return cls(los_probability=1.0)

    @classmethod
    def inf_sl_nlos(cls) -> "PathlossParams":
        """Force the non-LOS branch on every link."""
        return cls(los_probability=0.0)


_PATHLOSS_MODELS = {
    "inf_sl": PathlossParams.inf_sl,
    "inf_los": PathlossParams.inf_los,
    "inf_sl_nlos": PathlossParams.inf_sl_nlos,
}


@dataclass(frozen=True)
class SimConfig:
    """Full experiment description; every field has a factory-hall default."""

    carrier_ghz: float = 28.0
    bandwidth_hz: float = 200e6
    area_m: tuple[float, float] = (120.0, 60.0)
    p_t_watts: float = 0.2
    noise_figure_db: float = 9.0

    # (points along x, points along y, spacing in meters)
    ru_grid: tuple[int, int, float] = (16, 8, 7.5)
    ue_grid: tuple[int, int, float] = (120, 60, 1.0)
    ru_height_m: float = 8.0
    ue_height_m: float = 1.5

    m_rus: int = 16
    k_ues: int = 4
    l_per_ru: int = 1
    n_per_ue: int = 1

    rho_tx: float = 0.5
    rho_rx: float = 0.5
    pathloss: PathlossParams = field(default_factory=PathlossParams)
    shadowing: bool = True

    p_out: float = 0.01
    n_trial: int = 100_000
    n_drops: int = 100
    seed: int = 1
    methods: tuple[str, ...] = BASE_METHODS

    def __post_init__(self):
        if not 0.0 < self.p_out < 1.0:
            raise ConfigError(f"p_out must lie in (0, 1), got {self.p_out}")
        for name in ("carrier_ghz", "bandwidth_hz", "p_t_watts"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("m_rus", "k_ues", "l_per_ru", "n_per_ue", "n_trial", "n_drops"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("rho_tx", "rho_rx"):
            rho = getattr(self, name)
            if not 0.0 <= rho < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {rho}")
        if self.m_rus > self.ru_grid[0] * self.ru_grid[1]:
            raise ConfigError(
                f"m_rus={self.m_rus} exceeds RU grid capacity "
                f"{self.ru_grid[0] * self.ru_grid[1]}")
        if self.k_ues > self.ue_grid[0] * self.ue_grid[1]:
            raise ConfigError(
                f"k_ues={self.k_ues} exceeds UE grid capacity "
                f"{self.ue_grid[0] * self.ue_grid[1]}")
        for method in self.methods:
            parse_method(method)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pathloss"] = dataclasses.asdict(self.pathloss)
        d["area_m"] = list(self.area_m)
        d["ru_grid"] = list(self.ru_grid)
        d["ue_grid"] = list(self.ue_grid)
        d["methods"] = list(self.methods)
        return d


def parse_method(spec: str) -> tuple[str, str]:
    """Split a method string ``name[:rx_csi]`` and validate the combination."""
    name, _, csi = spec.partition(":")
    csi = csi or "perfect"
    if name not in BASE_METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {BASE_METHODS}")
    if csi not in _RX_CSI_MODES:
        raise ConfigError(f"unknown rx-csi mode {csi!r}; expected one of {_RX_CSI_MODES}")
    if csi == "statistical" and not name.startswith("mrt"):
        raise ConfigError(f"statistical rx-csi is only defined for MRT methods, got {spec!r}")
    return name, csi


def _config_from_dict(data: dict) -> SimConfig:
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(data)
    if "pathloss" in kwargs:
        pl = kwargs["pathloss"]
        if isinstance(pl, str):
            try:
                kwargs["pathloss"] = _PATHLOSS_MODELS[pl]()
            except KeyError:
                raise ConfigError(
                    f"unknown pathloss model {pl!r}; expected one of {sorted(_PATHLOSS_MODELS)}"
                ) from None
        elif isinstance(pl, dict):
            pl_known = {f.name for f in dataclasses.fields(PathlossParams)}
            pl_unknown = set(pl) - pl_known
            if pl_unknown:
                raise ConfigError(f"unknown pathloss keys: {sorted(pl_unknown)}")
            kwargs["pathloss"] = PathlossParams(**pl)
        else:
            raise ConfigError("pathloss must be a model name or a coefficient mapping")
    for key in ("area_m", "ru_grid", "ue_grid", "methods"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> SimConfig:
    """Load a JSON config file; blank files mean "all defaults"."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return SimConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: top level must be a JSON object")
    return _config_from_dict(data)
