"""Cascaded channel, optimal phasing, SNR, rate and the penalized objective.

Colored vectors used here carry unit large-scale gain; the hop path
losses enter once, through :func:`instantaneous_snr`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (FRIS_TO_READER, TAG_TO_FRIS, ChannelSet, CorrelationFactor,
                      color_channels, jakes_matrix, scalar_rician, steering_vector)
from .geometry import Aperture, Layout, SelectionMask, SpacingConstraint


@dataclass(frozen=True)
class BackscatterParams:
    bd_amplitude: float = 1.0
    bd_symbol: int = 1

    def __post_init__(self):
        if not 0 < self.bd_amplitude <= 1:
            raise ValueError(f"bd_amplitude must lie in (0, 1], got {self.bd_amplitude}")
        if abs(self.bd_symbol) != 1:
            raise ValueError(f"bd_symbol must be +1 or -1, got {self.bd_symbol}")


@dataclass(frozen=True)
class LinkBudget:
    """Average transmit SNR and large-scale gains.

    ``scale`` multiplies ``L_s * L_b * L_r``; experiments use it to pin the
    absolute rate level when hop distances are unknown.
    """

    gamma_bar: float
    L_s: float
    L_b: float
    L_r: float
    scale: float = 1.0

    def __post_init__(self):
        for name in ("gamma_bar", "L_s", "L_b", "L_r", "scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def cascade_gain(self) -> float:
        return self.scale * self.L_s * self.L_b * self.L_r


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    phases: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.phases, dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("phases must be finite")
        object.__setattr__(self, "phases", p)


@dataclass(frozen=True)
class PenaltyParams:
    tau: float = 1e3

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def optimal_phases(h_b, h_r, mask: SelectionMask) -> PhaseProfile:
    """Phases making every ON term ``conj(h_r) e^{j phi} h_b`` real and non-negative."""
    idx = mask.on_indices
    h_b = np.asarray(h_b)
    h_r = np.asarray(h_r)
    return PhaseProfile(np.angle(h_r[idx]) - np.angle(h_b[idx]))


def equivalent_channel(h_b, h_r, mask: SelectionMask, pp: PhaseProfile) -> complex:
    idx = mask.on_indices
    if len(idx) == 0:
        return 0j
    terms = np.conj(np.asarray(h_r)[idx]) * np.exp(1j * pp.phases) * np.asarray(h_b)[idx]
    return complex(np.sum(terms))


def instantaneous_snr(lb: LinkBudget, bp: BackscatterParams, h_s, h_eq):
    # bd_symbol has unit modulus and drops out
    return lb.gamma_bar * bp.bd_amplitude ** 2 * lb.cascade_gain * np.abs(h_s) ** 2 * np.abs(h_eq) ** 2


def rate(gamma_r):
    g = np.asarray(gamma_r, dtype=float)
    if np.any(g < 0):
        raise ValueError("SNR must be non-negative")
    out = np.log2(1 + g)
    return float(out) if out.ndim == 0 else out


def snr_scale(scenario) -> float:
    """Factor multiplying ``|h_s|^2 |H_eq|^2`` in the instantaneous SNR."""
    return float(instantaneous_snr(scenario.link_budget(), scenario.backscatter(), 1.0, 1.0))


def colored_pair(cs: ChannelSet, layout: Layout, scenario,
                 factor: Optional[CorrelationFactor] = None):
    """Unit-gain ``(h_b, h_r)`` for every draw, each of shape ``(N, M)``."""
    if factor is None:
        factor = jakes_matrix(layout, scenario.wavelength)
    rp = scenario.rician()
    if layout is cs.layout:
        los_b = los_r = None
    else:
        los_b = steering_vector(layout, scenario.hop_tag_fris, scenario.wavelength)
        los_r = steering_vector(layout, scenario.hop_fris_reader, scenario.wavelength)
    h_b = color_channels(cs, None, factor, rp, 1.0, TAG_TO_FRIS, los=los_b)
    h_r = color_channels(cs, None, factor, rp, 1.0, FRIS_TO_READER, los=los_r)
    return h_b, h_r


class RateEvaluator:
    """SAA rate for many ON sets over one fixed layout.

    The per-draw element gains ``|h_r,m| |h_b,m|`` are computed once, so each
    mask costs a gather and a sum.
    """

    def __init__(self, cs: ChannelSet, layout: Layout, scenario,
                 factor: Optional[CorrelationFactor] = None):
        if factor is None:
            factor = jakes_matrix(layout, scenario.wavelength)
        self.factor = factor
        h_b, h_r = colored_pair(cs, layout, scenario, factor)
        self.gains = np.abs(h_b) * np.abs(h_r)
        h_s = scalar_rician(cs, None, scenario.rician(), 1.0)
        self.hs2 = np.abs(h_s) ** 2
        self.scale = snr_scale(scenario)

    def rate_of_sum(self, coherent_sum) -> float:
        snr = self.scale * self.hs2 * np.asarray(coherent_sum) ** 2
        return float(np.mean(np.log2(1 + snr)))

    def rate(self, mask: SelectionMask) -> float:
        return self.rate_of_sum(self.gains[:, mask.on_indices].sum(axis=1))

    def rates(self, index_sets) -> np.ndarray:
        """Vectorized SAA rate for an ``(K, m_o)`` array of ON index sets."""
        idx = np.asarray(index_sets)
        sums = self.gains[:, idx].sum(axis=-1)  # (N, K)
        snr = self.scale * self.hs2[:, None] * sums ** 2
        return np.mean(np.log2(1 + snr), axis=0)


def saa_rate(cs: ChannelSet, layout: Layout, mask: SelectionMask, scenario,
             factor: Optional[CorrelationFactor] = None) -> float:
    """Mean over the draws of the optimally phased rate on the ON set."""
    return RateEvaluator(cs, layout, scenario, factor).rate(mask)


def penalty(positions, aperture: Aperture, c: SpacingConstraint, pp: PenaltyParams) -> float:
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    outside = p - np.clip(p, 0.0, aperture.bounds)
    b_apert = float(np.sum(outside ** 2))
    b_space = 0.0
    if c.d_min > 0 and len(p) > 1:
        iu, ju = np.triu_indices(len(p), k=1)
        d = np.sqrt(np.sum((p[iu] - p[ju]) ** 2, axis=1))
        b_space = float(np.sum(np.maximum(0.0, c.d_min - d) ** 2))
    return pp.tau * (b_space + b_apert)
