"""Path loss, steering vectors, Jakes correlation and correlated Rician draws.

Random numbers come from numpy's counter-based Philox4x64-10 bit generator,
keyed by ``SeedSequence([seed, stream])``. Normal variates use numpy's
``Generator.standard_normal`` (ziggurat). A standard complex normal is
``(a + 1j*b)/sqrt(2)`` with ``a, b`` taken as consecutive pairs from a
``(..., 2)`` shaped draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import j0

from .geometry import Layout, grid_layout

RNG_ALGORITHM = "numpy.Philox4x64-10;SeedSequence([seed,stream]);normal=ziggurat"
CHANNEL_STREAM = 0
PSO_STREAM = 1

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

TAG_TO_FRIS = "tag_fris"
FRIS_TO_READER = "fris_reader"


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class PathLossParams:
    rho: float = 1.0
    alpha_exp: float = 2.5

    def __post_init__(self):
        if self.rho <= 0 or self.alpha_exp < 0:
            raise ValueError(f"invalid path-loss parameters rho={self.rho}, alpha={self.alpha_exp}")


@dataclass(frozen=True)
class HopGeometry:
    distance: float
    az: float = 0.0
    el: float = 0.0

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError(f"hop distance must be positive, got {self.distance}")


@dataclass(frozen=True)
class RicianParams:
    k_factor: float
    wavelength: float

    def __post_init__(self):
        if self.k_factor < 0 or self.wavelength <= 0:
            raise ValueError(f"invalid Rician parameters K={self.k_factor}, lambda={self.wavelength}")

    @property
    def los_weight(self) -> float:
        if math.isinf(self.k_factor):
            return 1.0
        return math.sqrt(self.k_factor / (self.k_factor + 1))

    @property
    def nlos_weight(self) -> float:
        if math.isinf(self.k_factor):
            return 0.0
        return math.sqrt(1 / (self.k_factor + 1))


def path_loss(d: float, p: PathLossParams) -> float:
    """Large-scale power gain ``rho * d**-alpha``."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return p.rho * d ** (-p.alpha_exp)


def steering_vector(layout: Layout, geom: HopGeometry, wavelength: float) -> np.ndarray:
    x, z = layout.positions[:, 0], layout.positions[:, 1]
    phase = (2 * np.pi / wavelength) * (x * np.sin(geom.az) * np.cos(geom.el) + z * np.sin(geom.el))
    return np.exp(1j * phase)


class FactorizationError(np.linalg.LinAlgError):
    def __init__(self, msg, layout=None):
        super().__init__(msg)
        self.layout = layout


@dataclass(frozen=True, eq=False)
class CorrelationFactor:
    j_matrix: np.ndarray
    sqrt_factor: np.ndarray
    jitter_used: float

    @property
    def size(self) -> int:
        return self.j_matrix.shape[0]

    def reconstruction_error(self) -> float:
        j = self.j_matrix
        approx = self.sqrt_factor @ self.sqrt_factor.conj().T
        resid = approx - (j + self.jitter_used * np.eye(len(j)))
        return float(np.linalg.norm(resid) / np.linalg.norm(j))


def jakes_matrix(layout: Layout, wavelength: float) -> CorrelationFactor:
    """Bessel-J0 correlation over element distances and its Cholesky factor.

    Diagonal jitter escalates through ``JITTER_LADDER`` when the dense
    kernel is numerically indefinite.
    """
    d = layout.pairwise_distances()
    j = j0(2 * np.pi * d / wavelength)
    np.fill_diagonal(j, 1.0)
    j = 0.5 * (j + j.T)
    eye = np.eye(len(j))
    for eps in JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(j + eps * eye)
        except np.linalg.LinAlgError:
            continue
        return CorrelationFactor(j, chol, eps)
    raise FactorizationError(
        f"Cholesky of Jakes matrix failed up to jitter {JITTER_LADDER[-1]:g} "
        f"for a layout of {len(layout)} elements", layout)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Frozen white and LoS parts for ``n_draws`` realizations.

    ``w_b``/``w_r`` have shape ``(n_draws, M)``; ``los_b``/``los_r`` are the
    steering vectors of ``layout``. Coloring happens on demand, so one set
    can serve any layout with ``M`` elements.
    """

    w_s: np.ndarray
    w_b: np.ndarray
    w_r: np.ndarray
    los_b: np.ndarray
    los_r: np.ndarray
    h_s_los: complex
    layout: Layout
    seed: int
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def n_draws(self) -> int:
        return len(self.w_s)

    @property
    def size(self) -> int:
        return self.w_b.shape[1]

    def white(self, hop: str) -> np.ndarray:
        return {TAG_TO_FRIS: self.w_b, FRIS_TO_READER: self.w_r}[hop]

    def los(self, hop: str) -> np.ndarray:
        return {TAG_TO_FRIS: self.los_b, FRIS_TO_READER: self.los_r}[hop]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    shape = tuple(np.atleast_1d(shape))
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


def draw_channel_set(scenario, seed: int, n: int, layout: Optional[Layout] = None) -> ChannelSet:
    """Draw ``n`` realizations for ``layout`` (default: the scenario grid).

    The source-to-tag white sample is drawn first, so two sets built from
    the same seed share ``h_s`` even when their element counts differ.
    """
    if n < 1:
        raise ValueError(f"need at least one draw, got {n}")
    if layout is None:
        layout = grid_layout(scenario.aperture, *scenario.grid_dims)
    m = len(layout)
    rng = make_rng(seed, CHANNEL_STREAM)
    w_s = complex_normal(rng, n)
    w_b = complex_normal(rng, (n, m))
    w_r = complex_normal(rng, (n, m))
    lam = scenario.wavelength
    for arr in (w_s, w_b, w_r):
        arr.setflags(write=False)
    return ChannelSet(
        w_s=w_s, w_b=w_b, w_r=w_r,
        los_b=steering_vector(layout, scenario.hop_tag_fris, lam),
        los_r=steering_vector(layout, scenario.hop_fris_reader, lam),
        h_s_los=complex(np.exp(-2j * np.pi * scenario.hop_source_tag.distance / lam)),
        layout=layout, seed=int(seed),
    )


def color_channels(cs: ChannelSet, draw, factor: CorrelationFactor, rp: RicianParams,
                   gain: float, hop: str, los: Optional[np.ndarray] = None) -> np.ndarray:
    """Correlated Rician vector for one hop.

    ``draw`` is an index or ``None`` for all draws at once (shape
    ``(n_draws, M)``). ``los`` overrides the stored steering vector, which
    is needed when element positions differ from ``cs.layout``.
    """
    if factor.size != cs.size:
        raise ValueError(f"correlation factor is {factor.size}x{factor.size} "
                         f"but the channel set has {cs.size} elements")
    q_los = cs.los(hop) if los is None else np.asarray(los)
    if q_los.shape[-1] != cs.size:
        raise ValueError("LoS vector length does not match the channel set")
    w = cs.white(hop) if draw is None else cs.white(hop)[draw]
    amp = math.sqrt(gain)
    if rp.nlos_weight == 0.0:
        out = np.broadcast_to(q_los, w.shape).astype(complex)
        return amp * out
    scattered = w @ factor.sqrt_factor.T
    return amp * (rp.los_weight * q_los + rp.nlos_weight * scattered)


def scalar_rician(cs: ChannelSet, draw, rp: RicianParams, gain: float):
    """Source-to-tag coefficient; ``draw=None`` returns all draws."""
    w = cs.w_s if draw is None else cs.w_s[draw]
    return math.sqrt(gain) * (rp.los_weight * cs.h_s_los + rp.nlos_weight * w)
