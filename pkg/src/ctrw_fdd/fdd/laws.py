"""Containers for mixed laws (atoms plus a density) and grid-valued two-time laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DomainError, ParameterError
from ..quadrature import QuadratureSpec, integrate_nested


@dataclass(frozen=True)
class StateXV:
    """(X_{t-}, V_{t-}): position and age."""
    x: float
    v: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and self.v >= 0 and np.isfinite(self.v)):
            raise DomainError(f"StateXV needs finite x and v >= 0, got ({self.x}, {self.v})")


@dataclass(frozen=True)
class StateYR:
    """(Y_t, R_t): position after the straddling jump and remaining lifetime."""
    y: float
    r: float

    def __post_init__(self):
        if not (np.isfinite(self.y) and self.r >= 0 and np.isfinite(self.r)):
            raise DomainError(f"StateYR needs finite y and r >= 0, got ({self.y}, {self.r})")


@dataclass(frozen=True)
class Atom:
    location: tuple
    weight: float


@dataclass
class DensityPart:
    """Absolutely continuous part on a lower-dimensional parametrisation.

    ``free`` names the integration variables, outermost first; ``density(*free)``
    is the density with respect to Lebesgue measure in those variables and
    ``embed(*free)`` returns the full coordinate tuple (so coupled coordinates
    such as ``x = x0 + t - v`` are carried exactly).  ``bounds`` are constant
    per axis; ``specs`` declare the endpoint behaviour for quadrature.
    ``region`` optionally tightens ``bounds`` for integration: per-axis
    ``(lo, hi)`` where a bound may be a callable of the outer free variables.
    """
    free: tuple
    density: Callable
    embed: Callable
    bounds: tuple
    specs: tuple
    region: tuple | None = None

    @property
    def integration_region(self):
        return list(self.region if self.region is not None else self.bounds)

    def __call__(self, *args):
        arrs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        shape = arrs[0].shape
        out = self.density(*[a.ravel() for a in arrs])
        return np.asarray(out, dtype=float).reshape(shape)


@dataclass
class KernelDensity:
    coords: tuple
    atoms: list
    part: DensityPart | None
    support_description: str = ""

    def __post_init__(self):
        for a in self.atoms:
            if not a.weight >= 0:
                raise DomainError(f"negative atom weight {a.weight}")
            if len(a.location) != len(self.coords):
                raise ParameterError("atom location does not match coords")

    @property
    def atom_mass(self) -> float:
        return float(sum(a.weight for a in self.atoms))

    @property
    def density(self):
        return self.part

    def on_grid(self, *axes):
        """Density on the tensor grid of the free coordinates (axes in ``part.free`` order)."""
        if self.part is None:
            return np.zeros([len(a) for a in axes])
        if len(axes) != len(self.part.free):
            raise ParameterError(f"need one axis per free coordinate {self.part.free}")
        mesh = np.meshgrid(*[np.asarray(a, float) for a in axes], indexing="ij")
        return self.part(*mesh)

    def support_points(self, *axes):
        """Full coordinates of the grid points of ``on_grid`` (dict name -> array)."""
        mesh = np.meshgrid(*[np.asarray(a, float) for a in axes], indexing="ij")
        full = self.part.embed(*mesh)
        return dict(zip(self.coords, np.broadcast_arrays(*full)))


@dataclass
class MassReport:
    total: float
    atoms: float
    density: float
    error_estimate: float
    converged: bool


def _restricted(part, grid):
    region = part.integration_region
    if grid:
        for k, name in enumerate(part.free):
            if name in grid:
                lo, hi = grid[name]
                a, b = region[k]
                region[k] = (_clip(a, lo, np.maximum), _clip(b, hi, np.minimum))
    return region


def _clip(bound, limit, pick):
    if callable(bound):
        return lambda *outer: pick(bound(*outer), limit)
    return float(pick(bound, limit))


def mass_report(law: KernelDensity, grid: dict | None = None, rel_tol: float = 1e-7) -> MassReport:
    """Atom weights plus the integral of the density.

    ``grid`` optionally maps free-coordinate names to ``(lo, hi)`` truncation
    intervals; by default the full support is integrated (infinite ranges are
    mapped, not truncated).
    """
    am = law.atom_mass
    if law.part is None:
        return MassReport(am, am, 0.0, 0.0, True)
    p = law.part
    specs = [s.replace(rel_tol=rel_tol) for s in p.specs]
    r = integrate_nested(p.density, _restricted(p, grid), specs)
    return MassReport(am + r.value, am, r.value, r.error_estimate, r.converged)


def total_mass(law, grid: dict | None = None, rel_tol: float = 1e-7) -> float:
    if isinstance(law, JointGrid):
        return law.total_mass()
    return mass_report(law, grid, rel_tol).total


def marginal_density(law: KernelDensity, coord: str, values, rel_tol: float = 1e-8) -> np.ndarray:
    """Density of one free coordinate, integrating the others out (atoms ignored)."""
    p = law.part
    if p is None or coord not in p.free:
        raise ParameterError(f"{coord!r} is not a free coordinate of this law")
    k = p.free.index(coord)
    rest = [i for i in range(len(p.free)) if i != k]
    values = np.atleast_1d(np.asarray(values, dtype=float))
    out = np.empty(values.size)
    for i, c in enumerate(values):
        if not (p.bounds[k][0] < c < p.bounds[k][1]):
            out[i] = 0.0
            continue
        if not rest:
            out[i] = float(p(c))
            continue

        def f(*xs, c=c):
            args = list(xs)
            args.insert(k, np.full(np.shape(xs[0]), c))
            return p.density(*np.broadcast_arrays(*args))

        region = p.integration_region
        reduced = [_with_fixed(region[j], j, k, c) for j in rest]
        specs = [p.specs[j].replace(rel_tol=rel_tol) for j in rest]
        out[i] = integrate_nested(f, reduced, specs).value
    return out


def _with_fixed(bounds, j, k, c):
    """Bounds of axis j once axis k is pinned at c (callables see the original outer variables)."""
    def fix(b):
        if not callable(b) or k > j:
            return b
        return lambda *outer: b(*outer[:k], np.full(np.shape(outer[0]) if outer else (), c), *outer[k:])
    return tuple(fix(b) for b in bounds)


def moments(law, powers: dict, rel_tol: float = 1e-8, tail_threshold: float = 1e-5):
    """E[prod coord^power].

    KernelDensity: atoms plus adaptive quadrature of the density.  JointGrid:
    cell-midpoint rule over the grid plus the diagonal line; raises
    DomainError if the grid's truncated mass exceeds ``tail_threshold``.
    """
    if isinstance(law, JointGrid):
        return law.moment(powers, tail_threshold)
    for name in powers:
        if name not in law.coords:
            raise ParameterError(f"unknown coordinate {name!r}; have {law.coords}")
    idx = [(law.coords.index(n), pw) for n, pw in powers.items()]
    total = sum(a.weight * np.prod([a.location[i] ** pw for i, pw in idx]) for a in law.atoms)
    if law.part is None:
        return float(total)
    p = law.part

    def f(*xs):
        full = np.broadcast_arrays(*p.embed(*xs))
        w = p.density(*xs)
        for i, pw in idx:
            w = w * full[i] ** pw
        return w

    specs = [s.replace(rel_tol=rel_tol) for s in p.specs]
    return float(total + integrate_nested(f, p.integration_region, specs).value)


@dataclass
class JointGrid:
    """Two-time law of (E_{t1}, E_{t2}) on a rectangular grid of cells.

    ``values[i, j]`` is the off-diagonal mass of cell ``[x_i, x_{i+1}] x [y_j, y_{j+1}]``
    (restricted to ``y > x``) divided by the cell area.  The diagonal part is
    kept on the line ``y = x`` as a density in x: ``diagonal_cells[i]`` is its
    mass over ``[x_i, x_{i+1}]`` and ``diagonal_atom`` the total on the grid.
    ``truncated_mass`` bounds the probability outside the grid; ``flagged``
    marks cells whose quadrature did not meet the tolerance.
    """
    x_edges: np.ndarray
    y_edges: np.ndarray
    values: np.ndarray
    diagonal_cells: np.ndarray | None = None
    diagonal_atom: float | None = None
    truncated_mass: float = 0.0
    flagged: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for e in (self.x_edges, self.y_edges):
            e = np.asarray(e)
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                raise DomainError("grid edges must be strictly increasing with at least 2 points")
        if self.values.shape != (len(self.x_edges) - 1, len(self.y_edges) - 1):
            raise ParameterError("values shape does not match the grid")
        if np.any(self.values < 0):
            raise DomainError("grid values must be non-negative")
        if self.diagonal_cells is not None and self.diagonal_atom is None:
            self.diagonal_atom = float(np.sum(self.diagonal_cells))

    @property
    def cell_areas(self):
        return np.outer(np.diff(self.x_edges), np.diff(self.y_edges))

    @property
    def cell_masses(self):
        return self.values * self.cell_areas

    def total_mass(self) -> float:
        return float(self.cell_masses.sum() + (self.diagonal_atom or 0.0))

    def moment(self, powers: dict, tail_threshold: float = 1e-5) -> float:
        if self.truncated_mass > tail_threshold:
            raise DomainError(f"truncated mass {self.truncated_mass:.3g} exceeds {tail_threshold:.3g}")
        px, py = powers.get("x", 0), powers.get("y", 0)
        if set(powers) - {"x", "y"}:
            raise ParameterError("JointGrid coordinates are 'x' and 'y'")
        xc = 0.5 * (self.x_edges[1:] + self.x_edges[:-1])
        yc = 0.5 * (self.y_edges[1:] + self.y_edges[:-1])
        m = float(np.sum(self.cell_masses * np.outer(xc ** px, yc ** py)))
        if self.diagonal_cells is not None:
            m += float(np.sum(self.diagonal_cells * xc ** (px + py)))
        return m
