"""Scenario and optimizer configuration, loaded from YAML.

A config file has up to two top-level sections, ``scenario`` and ``pso``.
Missing keys take the defaults below; unknown keys are rejected. Hop
angles are given in degrees in the file and stored in radians.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import yaml

from .channel import HopGeometry, PathLossParams, RicianParams, path_loss
from .geometry import Aperture, SpacingConstraint
from .link import BackscatterParams, LinkBudget
from .pso import PsoConfig


class ConfigError(Exception):
    category = "config"


class ConfigFileNotFound(ConfigError, FileNotFoundError):
    category = "config-missing"


class ConfigParseError(ConfigError):
    category = "config-parse"


class ConfigValidationError(ConfigError, ValueError):
    category = "config-invalid"


def _hop(distance, az_deg=0.0, el_deg=0.0):
    return HopGeometry(distance, math.radians(az_deg), math.radians(el_deg))


@dataclass(frozen=True)
class ScenarioConfig:
    wavelength: float = 0.0857
    carrier_hz: float = 3.5e9
    aperture_wl: Tuple[float, float] = (3.0, 3.0)
    grid_dims: Tuple[int, int] = (20, 20)
    m_o: int = 100
    mask_dims: Optional[Tuple[int, int]] = None
    rician_k: float = 5.0
    alpha_exp: float = 2.5
    rho: float = 1.0
    hop_source_tag: HopGeometry = field(default_factory=lambda: _hop(10.0))
    hop_tag_fris: HopGeometry = field(default_factory=lambda: _hop(3.0, 30.0, 20.0))
    hop_fris_reader: HopGeometry = field(default_factory=lambda: _hop(5.0, -40.0, 10.0))
    bd_amplitude: float = 1.0
    bd_symbol: int = 1
    gamma_bar_db: float = 10.0
    max_snr_db: float = 30.0
    n_draws: int = 1
    sigma_sq: float = 1e-9
    d_min: Optional[float] = None
    gain_scale: float = 1.0
    # experiment settings
    calibrate: bool = True
    calibration_target: float = 10.6
    calibration_m_o: int = 100
    n_seeds: int = 20
    base_seed: int = 1
    snr_sweep_db: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    m_o_list: Tuple[int, ...] = (25, 100, 225)
    lattice_list: Tuple[Tuple[int, int], ...] = ((10, 10), (12, 12), (14, 14),
                                                 (16, 16), (18, 18), (20, 20))
    lattice_m_o_list: Tuple[int, ...] = (25, 64)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(msg):
            raise ConfigValidationError(msg)

        positive = ("wavelength", "carrier_hz", "sigma_sq", "gain_scale", "bd_amplitude")
        for name in positive:
            if not getattr(self, name) > 0:
                bad(f"{name} must be positive, got {getattr(self, name)}")
        if min(self.aperture_wl) <= 0:
            bad(f"aperture_wl must be positive, got {self.aperture_wl}")
        if min(self.grid_dims) < 1:
            bad(f"grid_dims must be >= 1, got {self.grid_dims}")
        m = self.grid_dims[0] * self.grid_dims[1]
        if not 1 <= self.m_o <= m:
            bad(f"m_o={self.m_o} must lie in [1, {m}] for grid {self.grid_dims}")
        if self.mask_dims is not None:
            mx, mz = self.mask_dims
            if mx * mz != self.m_o:
                bad(f"mask_dims {self.mask_dims} do not multiply to m_o={self.m_o}")
            if mx > self.grid_dims[0] or mz > self.grid_dims[1]:
                bad(f"mask_dims {self.mask_dims} exceed grid {self.grid_dims}")
        if self.rician_k < 0:
            bad(f"rician_k must be non-negative, got {self.rician_k}")
        if self.alpha_exp < 0 or self.rho <= 0:
            bad("path-loss parameters out of range")
        if self.bd_amplitude > 1:
            bad(f"bd_amplitude must lie in (0, 1], got {self.bd_amplitude}")
        if abs(self.bd_symbol) != 1:
            bad(f"bd_symbol must be +1 or -1, got {self.bd_symbol}")
        if self.n_draws < 1 or self.n_seeds < 1:
            bad("n_draws and n_seeds must be >= 1")
        if self.d_min is not None and self.d_min < 0:
            bad(f"d_min must be non-negative, got {self.d_min}")
        for g in [self.gamma_bar_db, *self.snr_sweep_db]:
            if g > self.max_snr_db:
                bad(f"average SNR {g} dB exceeds max_snr_db={self.max_snr_db}")

    # derived objects

    @property
    def aperture(self) -> Aperture:
        return Aperture.in_wavelengths(*self.aperture_wl, self.wavelength)

    @property
    def n_elements(self) -> int:
        return self.grid_dims[0] * self.grid_dims[1]

    @property
    def mask_shape(self) -> Tuple[int, int]:
        """Contiguous-mask size; square root of ``m_o`` unless set explicitly."""
        if self.mask_dims is not None:
            return tuple(self.mask_dims)
        side = math.isqrt(self.m_o)
        if side * side != self.m_o:
            raise ConfigValidationError(
                f"m_o={self.m_o} is not a square; set mask_dims for the mask encoding")
        return side, side

    def spacing(self, mode: str = "grid") -> SpacingConstraint:
        if self.d_min is not None:
            return SpacingConstraint(self.d_min)
        return SpacingConstraint(0.0 if mode == "grid" else self.wavelength / 4)

    def rician(self) -> RicianParams:
        return RicianParams(self.rician_k, self.wavelength)

    def path_loss_params(self) -> PathLossParams:
        return PathLossParams(self.rho, self.alpha_exp)

    def link_budget(self, gamma_bar_db: Optional[float] = None) -> LinkBudget:
        db = self.gamma_bar_db if gamma_bar_db is None else gamma_bar_db
        pl = self.path_loss_params()
        return LinkBudget(
            gamma_bar=10 ** (db / 10),
            L_s=path_loss(self.hop_source_tag.distance, pl),
            L_b=path_loss(self.hop_tag_fris.distance, pl),
            L_r=path_loss(self.hop_fris_reader.distance, pl),
            scale=self.gain_scale,
        )

    def backscatter(self) -> BackscatterParams:
        return BackscatterParams(self.bd_amplitude, self.bd_symbol)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, HopGeometry):
                v = {"distance": v.distance, "az_deg": math.degrees(v.az),
                     "el_deg": math.degrees(v.el)}
            elif isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            out[f.name] = v
        return out


_HOP_KEYS = {"distance", "az_deg", "el_deg"}


def _check_keys(section: str, data: dict, allowed):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigValidationError(f"unknown key(s) in [{section}]: {', '.join(map(repr, unknown))}")


def scenario_from_dict(data: Optional[dict]) -> ScenarioConfig:
    data = dict(data or {})
    fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    _check_keys("scenario", data, fields)
    kwargs = {}
    for key, value in data.items():
        if key.startswith("hop_"):
            if not isinstance(value, dict):
                raise ConfigValidationError(f"{key} must be a mapping with {sorted(_HOP_KEYS)}")
            _check_keys(f"scenario.{key}", value, _HOP_KEYS)
            default = getattr(ScenarioConfig(), key)
            try:
                value = HopGeometry(
                    float(value.get("distance", default.distance)),
                    math.radians(float(value.get("az_deg", math.degrees(default.az)))),
                    math.radians(float(value.get("el_deg", math.degrees(default.el)))),
                )
            except ValueError as exc:
                raise ConfigValidationError(f"{key}: {exc}") from exc
        elif key == "lattice_list":
            value = tuple(tuple(int(v) for v in pair) for pair in value)
        elif key in ("aperture_wl", "grid_dims", "mask_dims", "snr_sweep_db",
                     "m_o_list", "lattice_m_o_list") and value is not None:
            value = tuple(value)
        kwargs[key] = value
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigValidationError):
            raise
        raise ConfigValidationError(str(exc)) from exc


def pso_from_dict(data: Optional[dict]) -> PsoConfig:
    data = dict(data or {})
    _check_keys("pso", data, {f.name for f in dataclasses.fields(PsoConfig)})
    try:
        return PsoConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(str(exc)) from exc


def load_config(path) -> Tuple[ScenarioConfig, PsoConfig]:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFound(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{path}: top level must be a mapping")
    _check_keys("top level", raw, {"scenario", "pso"})
    return scenario_from_dict(raw.get("scenario")), pso_from_dict(raw.get("pso"))
