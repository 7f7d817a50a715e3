"""Apertures, candidate grids, element layouts and ON-set selection.

Coordinates are in meters. A layout indexes its elements row-major with
x fastest, so element ``i`` of an ``(m_x, m_z)`` grid sits at column
``i % m_x`` and row ``i // m_x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Aperture:
    width_x: float
    width_z: float

    def __post_init__(self):
        if not (self.width_x > 0 and self.width_z > 0):
            raise ValueError(f"aperture widths must be positive, got {self.width_x}, {self.width_z}")

    @classmethod
    def in_wavelengths(cls, w_x: float, w_z: float, wavelength: float) -> "Aperture":
        return cls(w_x * wavelength, w_z * wavelength)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.width_x, self.width_z])

    def contains(self, positions, tol: float = 1e-12) -> bool:
        p = np.asarray(positions, dtype=float).reshape(-1, 2)
        return bool(np.all(p >= -tol) and np.all(p <= self.bounds + tol))


@dataclass(frozen=True, eq=False)
class Layout:
    """Ordered element coordinates, shape ``(M, 2)`` as ``(x, z)`` pairs."""

    positions: np.ndarray
    grid_dims: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        p = np.array(self.positions, dtype=float).reshape(-1, 2)
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        if self.grid_dims is not None:
            m_x, m_z = self.grid_dims
            if m_x * m_z != len(p):
                raise ValueError(f"grid_dims {self.grid_dims} do not match {len(p)} positions")

    def __len__(self):
        return len(self.positions)

    @property
    def size(self) -> int:
        return len(self.positions)

    def pairwise_distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.sum(diff ** 2, axis=-1))


@dataclass(frozen=True, eq=False)
class SelectionMask:
    """Sorted indices of the ON elements."""

    on_indices: np.ndarray
    size: int

    def __post_init__(self):
        idx = np.asarray(self.on_indices, dtype=np.int64).ravel()
        if len(np.unique(idx)) != len(idx):
            raise ValueError("selection indices must be distinct")
        if len(idx) and (idx.min() < 0 or idx.max() >= self.size):
            raise ValueError(f"selection indices out of range [0, {self.size})")
        idx = np.sort(idx)
        idx.setflags(write=False)
        object.__setattr__(self, "on_indices", idx)

    @property
    def m_o(self) -> int:
        return len(self.on_indices)

    @classmethod
    def full(cls, size: int) -> "SelectionMask":
        return cls(np.arange(size), size)

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.size, dtype=bool)
        out[self.on_indices] = True
        return out

    def __eq__(self, other):
        if not isinstance(other, SelectionMask):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.on_indices, other.on_indices)

    def __hash__(self):
        return hash((self.size, self.on_indices.tobytes()))


@dataclass(frozen=True)
class SpacingConstraint:
    d_min: float = 0.0

    def __post_init__(self):
        if self.d_min < 0:
            raise ValueError(f"d_min must be non-negative, got {self.d_min}")


def grid_layout(aperture: Aperture, m_x: int, m_z: int) -> Layout:
    """Cell-centered ``m_x`` by ``m_z`` grid covering the aperture."""
    if m_x < 1 or m_z < 1:
        raise ValueError(f"grid counts must be >= 1, got ({m_x}, {m_z})")
    d_x = aperture.width_x / m_x
    d_z = aperture.width_z / m_z
    i = np.arange(m_x * m_z)
    x = (i % m_x + 0.5) * d_x
    z = (i // m_x + 0.5) * d_z
    return Layout(np.column_stack([x, z]), grid_dims=(m_x, m_z))


def grid_pitch(aperture: Aperture, m_x: int, m_z: int) -> Tuple[float, float]:
    return aperture.width_x / m_x, aperture.width_z / m_z


def _min_pairwise(points: np.ndarray) -> float:
    if len(points) < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt(np.sum(diff ** 2, axis=-1))
    iu = np.triu_indices(len(points), k=1)
    return float(d[iu].min())


def min_spacing_ok(layout: Layout, mask: SelectionMask, c: SpacingConstraint) -> bool:
    """True iff every pair of ON elements is at least ``c.d_min`` apart."""
    pts = layout.positions[mask.on_indices]
    return _min_pairwise(pts) >= c.d_min


def selection_from_scores(scores, m_o: int) -> SelectionMask:
    """Pick the ``m_o`` largest scores; equal scores resolve to the lower index."""
    s = np.asarray(scores, dtype=float).ravel()
    if m_o > len(s) or m_o < 0:
        raise ValueError(f"cannot select {m_o} of {len(s)} elements")
    # stable sort on -s keeps lower indices first among ties
    order = np.argsort(-s, kind="stable")
    return SelectionMask(order[:m_o], len(s))


def selection_from_anchor(anchor: Tuple[int, int], mask_dims: Tuple[int, int],
                          grid_dims: Tuple[int, int]) -> SelectionMask:
    i0, j0 = (int(a) for a in anchor)
    m_x, m_z = mask_dims
    g_x, g_z = grid_dims
    if i0 < 0 or j0 < 0 or i0 + m_x > g_x or j0 + m_z > g_z:
        raise ValueError(f"mask {mask_dims} at anchor {(i0, j0)} does not fit grid {grid_dims}")
    cols = np.arange(i0, i0 + m_x)
    rows = np.arange(j0, j0 + m_z)
    idx = (rows[:, None] * g_x + cols[None, :]).ravel()
    return SelectionMask(idx, g_x * g_z)


def clamp_to_aperture(positions, aperture: Aperture) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    return np.clip(p, 0.0, aperture.bounds)


def project_positions(positions, aperture: Aperture, c: SpacingConstraint,
                      max_passes: int = 50) -> Tuple[np.ndarray, bool]:
    """Clamp into the aperture and push violating pairs apart.

    Returns ``(positions, converged)``. ``converged`` is False when the
    spacing repair still leaves violations after ``max_passes`` sweeps;
    the clamped, partially repaired coordinates are returned regardless.
    """
    p = clamp_to_aperture(positions, aperture)
    n = len(p)
    if c.d_min <= 0 or n < 2:
        return p, True
    iu, ju = np.triu_indices(n, k=1)
    # a small overshoot keeps repaired pairs from landing exactly on the boundary
    target = c.d_min * (1 + 1e-9)
    for _ in range(max_passes):
        diff = p[ju] - p[iu]
        dist = np.sqrt(np.sum(diff ** 2, axis=1))
        bad = dist < c.d_min
        if not np.any(bad):
            return p, True
        a, b, d, v = iu[bad], ju[bad], dist[bad], diff[bad]
        unit = np.empty_like(v)
        apart = d > 0
        unit[apart] = v[apart] / d[apart, None]
        # coincident points: split along a fixed index-dependent direction
        ang = 0.5 + 2.399963 * (a[~apart] + b[~apart])
        unit[~apart] = np.column_stack([np.cos(ang), np.sin(ang)])
        shift = 0.5 * (target - d)[:, None] * unit
        disp = np.zeros_like(p)
        np.add.at(disp, a, -shift)
        np.add.at(disp, b, shift)
        p = clamp_to_aperture(p + disp, aperture)
    diff = p[ju] - p[iu]
    ok = bool(np.all(np.sqrt(np.sum(diff ** 2, axis=1)) >= c.d_min))
    return p, ok


def ris_baseline_layout(m_side: int, wavelength: float) -> Tuple[Layout, SelectionMask]:
    """Conventional ``m_side`` x ``m_side`` panel at half-wavelength pitch, all ON."""
    if m_side < 1:
        raise ValueError(f"m_side must be >= 1, got {m_side}")
    half = wavelength / 2
    layout = grid_layout(Aperture(m_side * half, m_side * half), m_side, m_side)
    return layout, SelectionMask.full(m_side * m_side)


def layout_csv(layout: Layout, mask: SelectionMask) -> str:
    """Layout dump: ``index,x_m,z_m,on`` rows, LF line endings."""
    on = mask.as_bool()
    lines = ["index,x_m,z_m,on"]
    for i, (x, z) in enumerate(layout.positions):
        lines.append(f"{i},{x:.15g},{z:.15g},{int(on[i])}")
    return "\n".join(lines) + "\n"


def parse_layout_csv(text: str) -> Tuple[Layout, SelectionMask]:
    rows = [r for r in text.strip().split("\n")]
    if rows[0].strip() != "index,x_m,z_m,on":
        raise ValueError(f"unexpected layout header {rows[0]!r}")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    layout = Layout(data[:, 1:3])
    return layout, SelectionMask(np.flatnonzero(data[:, 3] > 0.5), len(data))


def anchor_bounds(mask_dims: Sequence[int], grid_dims: Sequence[int]) -> np.ndarray:
    """Largest valid anchor along each axis."""
    return np.array([grid_dims[0] - mask_dims[0], grid_dims[1] - mask_dims[1]], dtype=float)
