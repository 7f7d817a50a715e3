"""Experiment runners: layout dump, convergence, rate vs. SNR, rate vs. lattice.

Every runner takes an explicit seed list. Seed ``s`` keys both the FRIS
channel set and the RIS baseline's channel set, so the two systems share
the source-to-tag coefficient of each realization. Rate experiments use
a single large-scale gain multiplier, found by :func:`calibrate`.
"""
from __future__ import annotations

import datetime as _dt
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .channel import RNG_ALGORITHM, draw_channel_set
from .geometry import grid_layout, layout_csv, ris_baseline_layout, selection_from_anchor
from .link import RateEvaluator, saa_rate, snr_scale
from .pso import PsoConfig, optimize


def seed_list(scenario, n_seeds: Optional[int] = None, base_seed: Optional[int] = None) -> List[int]:
    n = scenario.n_seeds if n_seeds is None else n_seeds
    base = scenario.base_seed if base_seed is None else base_seed
    return [base + i for i in range(n)]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def summarize(values) -> Dict[str, float]:
    v = np.asarray(values, dtype=float)
    std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return {"mean": float(np.mean(v)), "std": std, "min": float(v.min()), "max": float(v.max())}


@dataclass
class ExperimentRecord:
    experiment: str
    scenario: dict
    seeds: List[int]
    points: List[dict]
    csv: str
    gain_scale: float = 1.0
    extra: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    code_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "scenario": self.scenario,
            "seeds": list(self.seeds),
            "points": self.points,
            "gain_scale": self.gain_scale,
            "rng_algorithm": RNG_ALGORITHM,
            "extra": self.extra,
            "started": self.started,
            "finished": self.finished,
            "code_version": self.code_version,
        }

    def write(self, out_dir, stem: Optional[str] = None) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment
        csv_path = out / f"{stem}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.csv)
        with open(out / f"{stem}.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path


# RIS baseline

def ris_baseline_rate(scenario, m_side: int, cs=None, seed: Optional[int] = None) -> float:
    """SAA rate of the fixed half-wavelength ``m_side`` x ``m_side`` panel.

    All elements ON with optimal phases; no optimizer involved.
    """
    if m_side * m_side != scenario.m_o:
        raise ValueError(f"RIS baseline needs a square ON budget; m_o={scenario.m_o}, m_side={m_side}")
    layout, mask = ris_baseline_layout(m_side, scenario.wavelength)
    if cs is None:
        if seed is None:
            raise ValueError("pass either a channel set or a seed")
        cs = draw_channel_set(scenario, seed, scenario.n_draws, layout=layout)
    return saa_rate(cs, cs.layout, mask, scenario)


def _ris_side(m_o: int) -> int:
    side = math.isqrt(m_o)
    if side * side != m_o:
        raise ValueError(f"RIS baseline needs a square ON budget, got m_o={m_o}")
    return side


# calibration

def calibrate(scenario, cfg: PsoConfig, seeds: Sequence[int], target: Optional[float] = None,
              m_o: Optional[int] = None, snr_db: float = 10.0, max_rounds: int = 6) -> float:
    """Gain multiplier putting the mean FRIS endpoint at ``target`` bps/Hz.

    Alternates between running the swarm at the current multiplier and
    solving for the multiplier with the resulting ON sets held fixed, until
    the ON sets stop changing.
    """
    target = scenario.calibration_target if target is None else target
    m_o = scenario.calibration_m_o if m_o is None else m_o
    base = scenario.replace(m_o=m_o, mask_dims=None, gamma_bar_db=snr_db, gain_scale=1.0)
    grid = grid_layout(base.aperture, *base.grid_dims)
    sets = []
    for s in seeds:
        cs = draw_channel_set(base, s, base.n_draws)
        sets.append((s, cs, RateEvaluator(cs, grid, base)))
    s0 = snr_scale(base)

    def mean_rate(log_k, sums):
        k = math.exp(log_k)
        return float(np.mean([np.mean(np.log2(1 + k * s0 * ev.hs2 * h ** 2))
                              for (_, _, ev), h in zip(sets, sums)]))

    log_k = 0.0
    previous = None
    for _ in range(max_rounds):
        scn = base.replace(gain_scale=math.exp(log_k))
        masks = [optimize(scn, cfg, s, cs=cs).mask for s, cs, _ in sets]
        keys = [m.on_indices.tobytes() for m in masks]
        if keys == previous:
            break
        previous = keys
        sums = [ev.gains[:, m.on_indices].sum(axis=1) for (_, _, ev), m in zip(sets, masks)]
        lo, hi = log_k - 5.0, log_k + 5.0
        while mean_rate(lo, sums) > target:
            lo -= 5.0
        while mean_rate(hi, sums) < target:
            hi += 5.0
        log_k = brentq(lambda x: mean_rate(x, sums) - target, lo, hi, xtol=1e-12, rtol=1e-14)
    return math.exp(log_k)


def resolve_gain_scale(scenario, cfg: PsoConfig, seeds: Sequence[int]):
    """Scenario with its gain multiplier calibrated when ``scenario.calibrate`` is set."""
    if not scenario.calibrate:
        return scenario
    return scenario.replace(gain_scale=calibrate(scenario, cfg, seeds))


# experiments

def run_layout(scenario, cfg: PsoConfig, seed: int) -> ExperimentRecord:
    """Optimize once on the grid and dump the best layout with ON flags."""
    if cfg.mode != "grid":
        raise ValueError("the layout experiment runs in grid mode")
    started = _now()
    res = optimize(scenario, cfg, seed)
    return ExperimentRecord(
        experiment="layout", scenario=scenario.to_dict(), seeds=[seed],
        points=[{"best_fitness": res.best_fitness, "m_o": scenario.m_o,
                 "encoding": cfg.encoding}],
        csv=layout_csv(res.layout, res.mask), gain_scale=scenario.gain_scale,
        extra={"trace": res.trace.tolist()}, started=started, finished=_now(),
    )


def run_convergence(scenario, cfg: PsoConfig, seeds: Sequence[int],
                    m_o_list: Optional[Sequence[int]] = None, snr_db: float = 10.0) -> ExperimentRecord:
    """Mean global-best trace over seeds, one column per ON budget."""
    started = _now()
    m_o_list = list(scenario.m_o_list if m_o_list is None else m_o_list)
    scenario = scenario.replace(gamma_bar_db=snr_db)
    scenario = resolve_gain_scale(scenario, cfg, seeds)
    traces = {}
    for m_o in m_o_list:
        scn = scenario.replace(m_o=m_o, mask_dims=None)
        traces[m_o] = np.array([optimize(scn, cfg, s).trace for s in seeds])
    mean = {m: t.mean(axis=0) for m, t in traces.items()}
    header = ["iter"] + [f"rate_Mo{m}" for m in m_o_list]
    rows = [[t] + [mean[m][t] for m in m_o_list] for t in range(cfg.n_iters)]
    points = [{"m_o": m, "final": summarize(traces[m][:, -1]),
               "per_seed_traces": traces[m].tolist()} for m in m_o_list]
    return ExperimentRecord(
        experiment="convergence", scenario=scenario.to_dict(), seeds=list(seeds),
        points=points, csv=to_csv(header, rows), gain_scale=scenario.gain_scale,
        started=started, finished=_now(),
    )


def run_rate_vs_snr(scenario, cfg: PsoConfig, seeds: Sequence[int],
                    snr_list: Optional[Sequence[float]] = None,
                    m_o_list: Optional[Sequence[int]] = None) -> ExperimentRecord:
    """FRIS (optimized) and RIS (fixed lattice) rate at each SNR and ON budget."""
    started = _now()
    snr_list = list(scenario.snr_sweep_db if snr_list is None else snr_list)
    m_o_list = list(scenario.m_o_list if m_o_list is None else m_o_list)
    scenario = resolve_gain_scale(scenario, cfg, seeds)
    rows, points = [], []
    for snr in snr_list:
        for m_o in m_o_list:
            scn = scenario.replace(m_o=m_o, mask_dims=None, gamma_bar_db=snr)
            side = _ris_side(m_o)
            fris = [optimize(scn, cfg, s).best_fitness for s in seeds]
            ris = [ris_baseline_rate(scn, side, seed=s) for s in seeds]
            for system, vals in (("FRIS", fris), ("RIS", ris)):
                st = summarize(vals)
                rows.append([snr, system, m_o, st["mean"], st["std"]])
                points.append({"snr_db": snr, "system": system, "m_o": m_o,
                               "per_seed": [float(v) for v in vals], **st})
    header = ["snr_db", "system", "m_o", "mean_rate", "std_rate"]
    return ExperimentRecord(
        experiment="rate_vs_snr", scenario=scenario.to_dict(), seeds=list(seeds),
        points=points, csv=to_csv(header, rows), gain_scale=scenario.gain_scale,
        started=started, finished=_now(),
    )


def run_rate_vs_lattice(scenario, cfg: PsoConfig, seeds: Sequence[int],
                        lattices: Optional[Sequence] = None,
                        m_o_list: Optional[Sequence[int]] = None,
                        snr_db: float = 10.0) -> ExperimentRecord:
    """FRIS rate as the candidate lattice on the fixed aperture grows."""
    started = _now()
    lattices = [tuple(l) for l in (scenario.lattice_list if lattices is None else lattices)]
    m_o_list = list(scenario.lattice_m_o_list if m_o_list is None else m_o_list)
    scenario = resolve_gain_scale(scenario, cfg, seeds).replace(gamma_bar_db=snr_db)
    rows, points = [], []
    ris_cache = {}
    for mx, mz in lattices:
        for m_o in m_o_list:
            scn = scenario.replace(grid_dims=(mx, mz), m_o=m_o, mask_dims=None)
            side = _ris_side(m_o)
            fris = [optimize(scn, cfg, s).best_fitness for s in seeds]
            if m_o not in ris_cache:
                ris_cache[m_o] = [ris_baseline_rate(scn, side, seed=s) for s in seeds]
            for system, vals in (("FRIS", fris), ("RIS", ris_cache[m_o])):
                st = summarize(vals)
                rows.append([mx, mz, system, m_o, st["mean"], st["std"]])
                points.append({"mx": mx, "mz": mz, "system": system, "m_o": m_o,
                               "per_seed": [float(v) for v in vals], **st})
    header = ["mx", "mz", "system", "m_o", "mean_rate", "std_rate"]
    return ExperimentRecord(
        experiment="rate_vs_lattice", scenario=scenario.to_dict(), seeds=list(seeds),
        points=points, csv=to_csv(header, rows), gain_scale=scenario.gain_scale,
        started=started, finished=_now(),
    )


def baseline_warm_start(scenario, cfg: PsoConfig, anchor=(0, 0)) -> np.ndarray:
    """Mask-encoding state pinned at ``anchor`` on the scenario grid."""
    grid = grid_layout(scenario.aperture, *scenario.grid_dims)
    selection_from_anchor(anchor, scenario.mask_shape, scenario.grid_dims)
    return np.concatenate([grid.positions.ravel(), np.asarray(anchor, dtype=float)])
