"""Particle-swarm search over element positions and activation.

A particle state is the flattened position block ``[x_0, z_0, x_1, z_1, ...]``
followed by the activation block: ``M`` scores (``encoding="general"``,
the ``m_o`` largest are ON) or a two-entry anchor ``(i0, j0)`` of a
contiguous rectangle (``encoding="mask"``). In ``mode="grid"`` the position
block is pinned to the candidate grid and only activation moves.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.stats import qmc

from .channel import PSO_STREAM, RNG_ALGORITHM, ChannelSet, draw_channel_set, jakes_matrix, make_rng
from .geometry import (Layout, SelectionMask, anchor_bounds, grid_layout, layout_csv,
                       project_positions, selection_from_anchor, selection_from_scores)
from .link import PenaltyParams, RateEvaluator, penalty, saa_rate

ENCODINGS = ("general", "mask")
MODES = ("grid", "continuous")


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 50
    n_iters: int = 50
    inertia: float = 0.6
    c_cog: float = 1.2
    c_soc: float = 1.2
    encoding: str = "mask"
    mode: str = "grid"
    # per-dimension velocity clamp as a fraction of that dimension's range; None disables
    v_max_frac: Optional[float] = 0.2
    tau: float = 1e3
    max_projection_passes: int = 50

    def __post_init__(self):
        if self.n_particles < 1 or self.n_iters < 1:
            raise ValueError("n_particles and n_iters must be >= 1")
        if not 0 <= self.inertia <= 1:
            raise ValueError(f"inertia must lie in [0, 1], got {self.inertia}")
        if self.c_cog < 0 or self.c_soc < 0:
            raise ValueError("c_cog and c_soc must be non-negative")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.v_max_frac is not None and self.v_max_frac <= 0:
            raise ValueError("v_max_frac must be positive or None")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def replace(self, **changes) -> "PsoConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Particle:
    state: np.ndarray
    velocity: np.ndarray
    pbest_state: np.ndarray
    pbest_fitness: float


class SearchSpace:
    """Bounds, projection and decoding for one (scenario, config) pair."""

    def __init__(self, scenario, cfg: PsoConfig):
        self.scenario = scenario
        self.cfg = cfg
        self.aperture = scenario.aperture
        self.grid = grid_layout(self.aperture, *scenario.grid_dims)
        self.m = len(self.grid)
        self.m_o = scenario.m_o
        if self.m_o > self.m:
            raise ValueError(f"m_o={self.m_o} exceeds the {self.m} candidate positions")
        self.spacing = scenario.spacing(cfg.mode)
        self.n_pos = 2 * self.m
        if cfg.encoding == "mask":
            self.mask_dims = tuple(scenario.mask_shape)
            if self.mask_dims[0] * self.mask_dims[1] != self.m_o:
                raise ValueError(f"mask {self.mask_dims} does not hold m_o={self.m_o} elements")
            self.anchor_hi = anchor_bounds(self.mask_dims, scenario.grid_dims)
            if np.any(self.anchor_hi < 0):
                raise ValueError(f"mask {self.mask_dims} does not fit grid {scenario.grid_dims}")
            # half-cell margins give every integer anchor an equal-width rounding bin
            act_lo, act_hi = np.full(2, -0.5), self.anchor_hi + 0.5
        else:
            self.mask_dims = None
            act_lo, act_hi = np.zeros(self.m), np.ones(self.m)
        pos_hi = np.tile(self.aperture.bounds, self.m)
        self.lo = np.concatenate([np.zeros(self.n_pos), act_lo])
        self.hi = np.concatenate([pos_hi, act_hi])
        self.dim = len(self.lo)
        self.movable = np.ones(self.dim, dtype=bool)
        if cfg.mode == "grid":
            self.movable[:self.n_pos] = False
        if cfg.v_max_frac is None:
            self.v_max = np.full(self.dim, np.inf)
        else:
            self.v_max = cfg.v_max_frac * (self.hi - self.lo)

    # state pieces

    def positions(self, state) -> np.ndarray:
        return np.asarray(state[:self.n_pos]).reshape(self.m, 2)

    def activation(self, state) -> np.ndarray:
        return np.asarray(state[self.n_pos:])

    def anchor(self, state) -> Tuple[int, int]:
        k = np.floor(self.activation(state) + 0.5)
        k = np.clip(k, 0, self.anchor_hi).astype(int)
        return int(k[0]), int(k[1])

    def selection(self, state) -> SelectionMask:
        if self.mask_dims is not None:
            return selection_from_anchor(self.anchor(state), self.mask_dims, self.scenario.grid_dims)
        return selection_from_scores(self.activation(state), self.m_o)

    def decode(self, state) -> Tuple[Layout, SelectionMask]:
        mask = self.selection(state)
        if self.cfg.mode == "grid":
            return self.grid, mask
        return Layout(self.positions(state).copy()), mask

    # construction and projection

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.cfg.mode == "grid":
            pos = self.grid.positions.ravel()
        else:
            pos = (rng.random((self.m, 2)) * self.aperture.bounds).ravel()
        if self.mask_dims is not None:
            lo, hi = self.lo[self.n_pos:], self.hi[self.n_pos:]
            act = lo + rng.random(2) * (hi - lo)
        else:
            act = rng.random(self.m)
        state = np.concatenate([pos, act])
        return self.project(state)[0]

    def sample_swarm(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` feasible states with a Latin-hypercube activation block.

        Stratifying each activation axis keeps a small swarm from leaving
        whole rows or columns of anchors unvisited at t=0.
        """
        lo, hi = self.lo[self.n_pos:], self.hi[self.n_pos:]
        u = qmc.LatinHypercube(d=len(lo), seed=rng).random(n)
        states = np.empty((n, self.dim))
        for i in range(n):
            if self.cfg.mode == "grid":
                pos = self.grid.positions.ravel()
            else:
                pos = (rng.random((self.m, 2)) * self.aperture.bounds).ravel()
            states[i] = self.project(np.concatenate([pos, lo + u[i] * (hi - lo)]))[0]
        return states

    def project(self, state) -> Tuple[np.ndarray, bool]:
        s = np.array(state, dtype=float)
        act = s[self.n_pos:]
        if self.mask_dims is not None:
            act[:] = np.clip(act, self.lo[self.n_pos:], self.hi[self.n_pos:])
        else:
            # reflect scores at the [0, 1] walls, then clip any residual overshoot
            act[:] = np.where(act < 0, -act, act)
            act[:] = np.where(act > 1, 2 - act, act)
            act[:] = np.clip(act, 0, 1)
        if self.cfg.mode == "grid":
            s[:self.n_pos] = self.grid.positions.ravel()
            return s, True
        pos = self.positions(s).copy()
        on = self.selection(s).on_indices
        pos = np.clip(pos, 0, self.aperture.bounds)
        repaired, ok = project_positions(pos[on], self.aperture, self.spacing,
                                         self.cfg.max_projection_passes)
        pos[on] = repaired
        s[:self.n_pos] = pos.ravel()
        return s, ok


class SwarmObjective:
    """Penalized SAA fitness against one frozen channel set."""

    def __init__(self, space: SearchSpace, cs: ChannelSet):
        if cs.size != space.m:
            raise ValueError(f"channel set has {cs.size} elements, grid has {space.m}")
        self.space = space
        self.cs = cs
        self.pp = PenaltyParams(space.cfg.tau)
        self.jitter_events = []
        self._anchor_cache = {}
        self._grid_eval = None
        if space.cfg.mode == "grid":
            self._grid_eval = RateEvaluator(cs, space.grid, space.scenario)
            self._note_jitter(self._grid_eval.factor.jitter_used)

    def _note_jitter(self, eps):
        if eps > 0:
            self.jitter_events.append(eps)

    def __call__(self, state) -> float:
        space = self.space
        if self._grid_eval is not None:
            if space.mask_dims is not None:
                a = space.anchor(state)
                if a not in self._anchor_cache:
                    self._anchor_cache[a] = self._grid_eval.rate(space.selection(state))
                return self._anchor_cache[a]
            return self._grid_eval.rate(space.selection(state))
        layout, mask = space.decode(state)
        factor = jakes_matrix(layout, space.scenario.wavelength)
        self._note_jitter(factor.jitter_used)
        f = saa_rate(self.cs, layout, mask, space.scenario, factor)
        return f - penalty(layout.positions[mask.on_indices], space.aperture, space.spacing, self.pp)

    def evaluate(self, states) -> np.ndarray:
        space = self.space
        if self._grid_eval is not None and space.mask_dims is None:
            idx = np.array([space.selection(s).on_indices for s in states])
            return self._grid_eval.rates(idx)
        return np.array([self(s) for s in states])


@dataclass
class Swarm:
    states: np.ndarray
    velocities: np.ndarray
    fitness: np.ndarray
    pbest_states: np.ndarray
    pbest_fitness: np.ndarray
    gbest_state: np.ndarray
    gbest_fitness: float
    objective: SwarmObjective = field(repr=False)
    iteration: int = 0
    projection_failures: int = 0

    @property
    def space(self) -> SearchSpace:
        return self.objective.space

    def __len__(self):
        return len(self.states)

    def particle(self, i: int) -> Particle:
        return Particle(self.states[i].copy(), self.velocities[i].copy(),
                        self.pbest_states[i].copy(), float(self.pbest_fitness[i]))


def init_swarm(scenario, cfg: PsoConfig, seed: int, cs: Optional[ChannelSet] = None,
               warm_start=None, rng: Optional[np.random.Generator] = None) -> Swarm:
    """Feasible random swarm with zero velocities, evaluated once.

    ``warm_start`` replaces the first particle's state. The global best is
    the best initial particle, lowest index on ties.
    """
    space = SearchSpace(scenario, cfg)
    if cs is None:
        cs = draw_channel_set(scenario, seed, scenario.n_draws)
    if rng is None:
        rng = make_rng(seed, PSO_STREAM)
    states = space.sample_swarm(rng, cfg.n_particles)
    if warm_start is not None:
        states[0] = space.project(np.asarray(warm_start, dtype=float))[0]
    objective = SwarmObjective(space, cs)
    fit = objective.evaluate(states)
    best = int(np.argmax(fit))
    return Swarm(
        states=states, velocities=np.zeros_like(states), fitness=fit,
        pbest_states=states.copy(), pbest_fitness=fit.copy(),
        gbest_state=states[best].copy(), gbest_fitness=float(fit[best]),
        objective=objective,
    )


def decode(p: Particle, scenario, cfg: PsoConfig) -> Tuple[Layout, SelectionMask]:
    return SearchSpace(scenario, cfg).decode(p.state)


def fitness(p: Particle, cs: ChannelSet, scenario, cfg: PsoConfig) -> float:
    return SwarmObjective(SearchSpace(scenario, cfg), cs)(p.state)


def step(swarm: Swarm, cs: ChannelSet, scenario, cfg: PsoConfig, rng: np.random.Generator) -> Swarm:
    """One synchronous velocity/position update followed by best tracking."""
    objective = swarm.objective
    if objective.cs is not cs or objective.space.cfg != cfg:
        objective = SwarmObjective(SearchSpace(scenario, cfg), cs)
    space = objective.space
    n, d = swarm.states.shape
    r1 = rng.random((n, d))
    r2 = rng.random((n, d))
    x = swarm.states
    v = (cfg.inertia * swarm.velocities
         + cfg.c_cog * r1 * (swarm.pbest_states - x)
         + cfg.c_soc * r2 * (swarm.gbest_state[None, :] - x))
    v = np.where(space.movable[None, :], v, 0.0)
    v = np.clip(v, -space.v_max, space.v_max)
    new_states = np.empty_like(x)
    failures = 0
    for i in range(n):
        new_states[i], ok = space.project(x[i] + v[i])
        failures += not ok
    fit = objective.evaluate(new_states)
    improved = fit > swarm.pbest_fitness
    pbest_states = np.where(improved[:, None], new_states, swarm.pbest_states)
    pbest_fitness = np.where(improved, fit, swarm.pbest_fitness)
    gbest_state, gbest_fitness = swarm.gbest_state, swarm.gbest_fitness
    best = int(np.argmax(pbest_fitness))
    if pbest_fitness[best] > gbest_fitness:
        gbest_state, gbest_fitness = pbest_states[best].copy(), float(pbest_fitness[best])
    return Swarm(
        states=new_states, velocities=v, fitness=fit,
        pbest_states=pbest_states, pbest_fitness=pbest_fitness,
        gbest_state=gbest_state, gbest_fitness=gbest_fitness,
        objective=objective, iteration=swarm.iteration + 1,
        projection_failures=swarm.projection_failures + failures,
    )


@dataclass
class OptResult:
    layout: Layout
    mask: SelectionMask
    best_fitness: float
    trace: np.ndarray
    metadata: dict

    @property
    def best_state(self) -> Tuple[Layout, SelectionMask]:
        return self.layout, self.mask

    def to_dict(self) -> dict:
        return {
            "best_fitness": self.best_fitness,
            "trace": [float(t) for t in self.trace],
            "layout_csv": layout_csv(self.layout, self.mask),
            **self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def optimize(scenario, cfg: PsoConfig, seed: int, cs: Optional[ChannelSet] = None,
             warm_start=None) -> OptResult:
    """Run the swarm for ``cfg.n_iters`` evaluations; the trace has one entry each."""
    if cs is None:
        cs = draw_channel_set(scenario, seed, scenario.n_draws)
    rng = make_rng(seed, PSO_STREAM)
    swarm = init_swarm(scenario, cfg, seed, cs=cs, warm_start=warm_start, rng=rng)
    trace = [swarm.gbest_fitness]
    for _ in range(cfg.n_iters - 1):
        swarm = step(swarm, cs, scenario, cfg, rng)
        trace.append(swarm.gbest_fitness)
    layout, mask = swarm.space.decode(swarm.gbest_state)
    meta = {
        "seed": int(seed),
        "channel_seed": int(cs.seed),
        "rng_algorithm": RNG_ALGORITHM,
        "encoding": cfg.encoding,
        "mode": cfg.mode,
        "pso_config": cfg.to_dict(),
        "scenario": scenario.to_dict() if hasattr(scenario, "to_dict") else None,
        "jitter_events": [float(e) for e in swarm.objective.jitter_events],
        "projection_failures": int(swarm.projection_failures),
    }
    if cfg.encoding == "mask":
        meta["anchor"] = list(swarm.space.anchor(swarm.gbest_state))
    return OptResult(layout, mask, float(swarm.gbest_fitness), np.array(trace), meta)


# brute-force oracles

def mask_anchors(grid_dims, mask_dims):
    """All valid anchors, row-major (``j0`` outer, ``i0`` inner)."""
    g_x, g_z = grid_dims
    m_x, m_z = mask_dims
    return [(i0, j0) for j0 in range(g_z - m_z + 1) for i0 in range(g_x - m_x + 1)]


def brute_force_mask(scenario, cs: ChannelSet, mask_dims=None):
    """Exhaustive anchor search on the scenario grid; returns ``(anchor, fitness)``."""
    if mask_dims is None:
        mask_dims = scenario.mask_shape
    grid = grid_layout(scenario.aperture, *scenario.grid_dims)
    ev = RateEvaluator(cs, grid, scenario)
    anchors = mask_anchors(scenario.grid_dims, mask_dims)
    idx = np.array([selection_from_anchor(a, mask_dims, scenario.grid_dims).on_indices
                    for a in anchors])
    values = ev.rates(idx)
    best = int(np.argmax(values))
    return anchors[best], float(values[best])


def brute_force_subset(scenario, cs: ChannelSet, m_o: int, cap: float = 1e6,
                       chunk: int = 4096):
    """Exact best ON set by enumeration; refuses when C(M, m_o) exceeds ``cap``."""
    grid = grid_layout(scenario.aperture, *scenario.grid_dims)
    m = len(grid)
    total = math.comb(m, m_o)
    if total > cap:
        raise ValueError(f"C({m}, {m_o}) = {total} subsets exceeds the cap of {cap:g}")
    ev = RateEvaluator(cs, grid, scenario)
    best_val, best_set = -np.inf, None
    combos = itertools.combinations(range(m), m_o)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        vals = ev.rates(np.array(block, dtype=np.int64).reshape(len(block), m_o))
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_set = float(vals[i]), block[i]
    return SelectionMask(np.array(best_set, dtype=np.int64), m), best_val
