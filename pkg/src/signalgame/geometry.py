"""Piecewise-linear geometry over probability simplices.

Beliefs live on the standard simplex in R^n.  Value functions are
piecewise linear and carried by a triangulation of the simplex with one
value per vertex.  This module provides that toolkit plus the concave
envelope step used by the backward induction: candidate kink points are
read off an arrangement of affine functionals, the candidates are
lifted by the objective and run through an upper convex hull, and the
upper faces are triangulated by the pulling rule (lexicographic vertex
order) so the output is reproducible bit for bit.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

# Membership and dedup tolerance for simplex points.
EPS_GEOM = 1e-12
# Slack for argmax tie sets.
EPS_TIE = 1e-9

__all__ = [
    "EPS_GEOM",
    "EPS_TIE",
    "GeometryDomainError",
    "AffineFunctional",
    "AffineMap",
    "SupportMeasure",
    "Triangulation",
    "VertexInterpolant",
    "PiecewiseAffine",
    "CellArrangement",
    "as_simplex_point",
    "simplex_grid",
    "validate_triangulation",
    "barycentric",
    "barycentric_indices",
    "interpolate",
    "pullback_affine",
    "candidate_vertices",
    "argcav",
]


class GeometryDomainError(ValueError):
    """Raised when an input is outside the geometric domain of an operation."""


def as_simplex_point(coords, *, eps: float = EPS_GEOM) -> np.ndarray:
    """Validate coordinates as a point of the standard simplex.

    Coordinates must be finite, nonnegative within eps, and sum to one
    within eps per coordinate.  The returned array is clipped to [0, 1]
    and renormalized so downstream arithmetic sees an exact point.
    """
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise GeometryDomainError(f"expected a 1-d coordinate vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise GeometryDomainError("coordinates must be finite")
    if x.min() < -eps:
        raise GeometryDomainError(f"negative coordinate {x.min():.3e} below tolerance -{eps:.1e}")
    total = float(x.sum())
    if abs(total - 1.0) > eps * x.size:
        raise GeometryDomainError(f"coordinates sum to {total!r}, expected 1")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def simplex_grid(n_states: int, resolution: int) -> np.ndarray:
    """All simplex points whose coordinates are multiples of 1/resolution.

    Returns an array of shape (C(resolution+n-1, n-1), n_states) in
    lexicographic order of the first coordinates.
    """
    if n_states < 1 or resolution < 1:
        raise GeometryDomainError("need n_states >= 1 and resolution >= 1")
    if n_states == 1:
        return np.ones((1, 1))
    rows = []
    for cuts in itertools.combinations(range(resolution + n_states - 1), n_states - 1):
        edges = (-1,) + cuts + (resolution + n_states - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(n_states)])
    return np.asarray(rows, dtype=float) / resolution


def _lex_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically (first coordinate major)."""
    return np.lexsort(points.T[::-1])


def _dedup_sorted(points: np.ndarray, tol: float) -> list[int]:
    """Indices of rows to keep, merging rows within tol in the sup norm.

    Points must be lexicographically sorted; the kept representative of
    each cluster is the lex-smallest one.  Only rows whose first
    coordinates are within tol can merge, so a sorted window keeps the
    scan near-linear.
    """
    kept: list[int] = []
    kept_first: list[float] = []
    for i in range(len(points)):
        row = points[i]
        lo = bisect.bisect_left(kept_first, row[0] - tol)
        for j in range(lo, len(kept)):
            if np.max(np.abs(points[kept[j]] - row)) <= tol:
                break
        else:
            kept.append(i)
            kept_first.append(float(row[0]))
    return kept


def _cluster_rows(rows: np.ndarray, tol: float) -> list[list[int]]:
    """Group row indices whose rows agree within tol in the sup norm."""
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for i in range(len(rows)):
        row = rows[i]
        for g, rep in zip(groups, reps):
            if np.max(np.abs(row - rep)) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
            reps.append(row)
    return groups


@dataclass(frozen=True, eq=False)
class AffineFunctional:
    """The map x -> weights . x + offset, used on the simplex."""

    weights: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise GeometryDomainError("functional weights must be a finite vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n_states(self) -> int:
        return self.weights.size

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            return float(pts @ self.weights + self.offset)
        return pts @ self.weights + self.offset

    def __add__(self, other: "AffineFunctional") -> "AffineFunctional":
        return AffineFunctional(self.weights + other.weights, self.offset + other.offset)

    def __sub__(self, other: "AffineFunctional") -> "AffineFunctional":
        return AffineFunctional(self.weights - other.weights, self.offset - other.offset)

    def simplex_canonical(self) -> tuple[np.ndarray, float]:
        """Equivalent (weights, offset) with mean-zero weights.

        On the simplex w.x + b equals (w - c).x + (b + c) for every
        constant c; centering the weights gives a canonical
        representative for comparisons restricted to the simplex.
        """
        shift = float(self.weights.mean())
        return self.weights - shift, self.offset + shift

    def is_constant_on_simplex(self, tol: float = EPS_GEOM) -> bool:
        w, _ = self.simplex_canonical()
        return bool(np.max(np.abs(w)) <= tol)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """The map x -> matrix @ x + offset between coordinate spaces."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or not np.all(np.isfinite(m)):
            raise GeometryDomainError("affine map matrix must be a finite 2-d array")
        b = np.asarray(self.offset, dtype=float)
        if b.shape != (m.shape[0],) or not np.all(np.isfinite(b)):
            raise GeometryDomainError("affine map offset shape does not match the matrix")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)

    @classmethod
    def linear(cls, matrix) -> "AffineMap":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix, np.zeros(matrix.shape[0]))

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            return self.matrix @ pts + self.offset
        return pts @ self.matrix.T + self.offset

    def pullback(self, functional: AffineFunctional) -> AffineFunctional:
        """The functional x -> functional(self(x))."""
        if functional.n_states != self.target_dim:
            raise GeometryDomainError("functional dimension does not match the map target")
        return AffineFunctional(
            self.matrix.T @ functional.weights,
            float(functional.weights @ self.offset) + functional.offset,
        )


@dataclass(frozen=True, eq=False)
class SupportMeasure:
    """Finitely supported probability measure on the simplex."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise GeometryDomainError("support points must form a nonempty 2-d array")
        pts = np.vstack([as_simplex_point(row) for row in pts])
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],) or not np.all(np.isfinite(w)):
            raise GeometryDomainError("weights shape does not match the support")
        if w.min() <= 0.0:
            raise GeometryDomainError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise GeometryDomainError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w / w.sum())

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def n_states(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Vertices on the simplex plus cells given as vertex index tuples."""

    vertices: np.ndarray
    simplices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] == 0:
            raise GeometryDomainError("vertices must form a nonempty 2-d array")
        verts = np.vstack([as_simplex_point(row) for row in verts])
        cells = []
        for cell in self.simplices:
            cell = tuple(int(i) for i in cell)
            if len(set(cell)) != len(cell):
                raise GeometryDomainError(f"cell {cell} repeats a vertex")
            if not cell or min(cell) < 0 or max(cell) >= verts.shape[0]:
                raise GeometryDomainError(f"cell {cell} references a missing vertex")
            cells.append(cell)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "simplices", tuple(cells))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_states(self) -> int:
        return self.vertices.shape[1]

    @property
    def dim(self) -> int:
        return self.n_states - 1

    @cached_property
    def _uniform_full_dim(self) -> bool:
        n = self.n_states
        return bool(self.simplices) and all(len(c) == n for c in self.simplices)

    @cached_property
    def _cell_inverses(self) -> np.ndarray:
        # Column j of each cell matrix is vertex j; barycentric weights of
        # omega in the cell are inverse @ omega (columns sum to one, so the
        # weights automatically sum to one on the simplex).
        n = self.n_states
        mats = np.stack([self.vertices[list(c)].T for c in self.simplices])
        invs = np.full_like(mats, np.nan)
        for i in range(mats.shape[0]):
            try:
                invs[i] = np.linalg.inv(mats[i])
            except np.linalg.LinAlgError:
                pass
        return invs

    def locate_many(self, points, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and barycentric weights for each query point.

        Points on shared faces resolve to the first feasible cell in
        listing order.  Raises GeometryDomainError when a point is not
        covered by any cell.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.simplices:
            raise GeometryDomainError("triangulation has no cells")
        if self._uniform_full_dim:
            bary = np.einsum("cij,pj->pci", self._cell_inverses, pts)
            with np.errstate(invalid="ignore"):
                feasible = (bary >= -tol).all(axis=2)
            if not feasible.any(axis=1).all():
                missing = pts[~feasible.any(axis=1)][0]
                raise GeometryDomainError(f"point {missing} is not covered by any cell")
            cell_idx = feasible.argmax(axis=1)
            lam = bary[np.arange(len(pts)), cell_idx]
            lam = np.clip(lam, 0.0, None)
            lam /= lam.sum(axis=1, keepdims=True)
            return cell_idx, lam
        cell_out = np.empty(len(pts), dtype=int)
        lam_out = []
        for k, p in enumerate(pts):
            hit = None
            for ci, cell in enumerate(self.simplices):
                verts = self.vertices[list(cell)]
                system = np.vstack([verts.T, np.ones(len(cell))])
                rhs = np.append(p, 1.0)
                lam, *_ = np.linalg.lstsq(system, rhs, rcond=None)
                if lam.min() >= -tol and np.linalg.norm(system @ lam - rhs) <= 1e-9:
                    hit = (ci, np.clip(lam, 0.0, None))
                    break
            if hit is None:
                raise GeometryDomainError(f"point {p} is not covered by any cell")
            cell_out[k] = hit[0]
            lam_out.append(hit[1] / hit[1].sum())
        return cell_out, lam_out


@dataclass(frozen=True, eq=False)
class VertexInterpolant:
    """Piecewise-linear function: one value per triangulation vertex."""

    triangulation: Triangulation
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.triangulation.n_vertices,):
            raise GeometryDomainError("need exactly one value per vertex")
        if not np.all(np.isfinite(vals)):
            raise GeometryDomainError("vertex values must be finite")
        object.__setattr__(self, "values", vals)

    @cached_property
    def _interp_xy(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.triangulation.vertices[:, 0]
        order = np.argsort(xs)
        return xs[order], self.values[order]

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tri = self.triangulation
        if tri.n_states == 2 and tri._uniform_full_dim:
            xs, ys = self._interp_xy
            return np.interp(pts[:, 0], xs, ys)
        cells, lam = tri.locate_many(pts)
        if tri._uniform_full_dim:
            cell_ids = np.asarray(tri.simplices, dtype=int)
            return np.einsum("pi,pi->p", lam, self.values[cell_ids[cells]])
        out = np.empty(len(pts))
        for k in range(len(pts)):
            ids = list(tri.simplices[cells[k]])
            out[k] = float(np.asarray(lam[k], dtype=float) @ self.values[ids])
        return out

    def __call__(self, omega) -> float:
        return float(self.evaluate_many(np.asarray(omega, dtype=float)[None, :])[0])

    @cached_property
    def cell_pieces(self) -> tuple[AffineFunctional, ...]:
        """The affine piece carried by each full-dimensional cell."""
        tri = self.triangulation
        if not tri._uniform_full_dim:
            raise GeometryDomainError("cell pieces need full-dimensional cells")
        pieces = []
        for ci, cell in enumerate(tri.simplices):
            inv = tri._cell_inverses[ci]
            if not np.all(np.isfinite(inv)):
                raise GeometryDomainError(f"cell {cell} is affinely degenerate")
            pieces.append(AffineFunctional(inv.T @ self.values[list(cell)], 0.0))
        return tuple(pieces)

    @cached_property
    def boundary_functionals(self) -> tuple[AffineFunctional, ...]:
        """Functionals vanishing on the cell facets (kink candidates)."""
        tri = self.triangulation
        if not tri._uniform_full_dim:
            raise GeometryDomainError("boundary functionals need full-dimensional cells")
        raw = []
        for ci in range(len(tri.simplices)):
            inv = tri._cell_inverses[ci]
            if not np.all(np.isfinite(inv)):
                raise GeometryDomainError("triangulation has a degenerate cell")
            for row in inv:
                # Barycentric coordinate of omega w.r.t. one vertex: zero
                # exactly on the opposite facet's hyperplane.
                raw.append(AffineFunctional(row, 0.0))
        return dedup_functionals(raw)


@dataclass(frozen=True, eq=False)
class PiecewiseAffine:
    """Piecewise-affine function given by pieces, kink loci, and an evaluator."""

    pieces: tuple[AffineFunctional, ...]
    boundary: tuple[AffineFunctional, ...]
    evaluator: Callable[[np.ndarray], np.ndarray]

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.evaluator(pts), dtype=float)

    def __call__(self, omega) -> float:
        return float(self.evaluate_many(np.asarray(omega, dtype=float)[None, :])[0])


@dataclass(frozen=True, eq=False)
class CellArrangement:
    """Affine functionals whose zero sets cut the simplex into cells."""

    n_states: int
    functionals: tuple[AffineFunctional, ...]

    def __post_init__(self):
        if self.n_states < 1:
            raise GeometryDomainError("need at least one state")
        fs = tuple(self.functionals)
        for f in fs:
            if f.n_states != self.n_states:
                raise GeometryDomainError("functional dimension does not match the arrangement")
        object.__setattr__(self, "functionals", fs)

    @property
    def dim(self) -> int:
        return self.n_states - 1


def dedup_functionals(functionals: Iterable[AffineFunctional], tol: float = 1e-9) -> tuple[AffineFunctional, ...]:
    """Canonical, scale/sign-normalized functionals with duplicates and constants removed.

    Two functionals are considered equal when their zero sets on the
    simplex match; constants (no zero set) are dropped.
    """
    kept: list[AffineFunctional] = []
    seen: set[tuple] = set()
    decimals = max(1, int(-math.log10(tol)))
    for f in functionals:
        w, b = f.simplex_canonical()
        scale = float(np.max(np.abs(w)))
        if scale <= tol:
            continue
        key = np.append(w, b) / scale
        lead = np.argmax(np.abs(key) > tol)
        if key[lead] < 0:
            key = -key
        rounded = tuple(np.round(key, decimals) + 0.0)
        if rounded in seen:
            continue
        seen.add(rounded)
        kept.append(AffineFunctional(key[:-1], float(key[-1])))
    return tuple(kept)


def validate_triangulation(t: Triangulation, tol: float = 1e-9) -> tuple[bool, list[str]]:
    """Check that t is a genuine triangulation of the whole simplex.

    Verifies pairwise-distinct vertices, affinely independent cells,
    the face-to-face property (each pairwise intersection is a common
    face, via small LPs), and that cell volumes add up to the simplex
    volume.  Returns (ok, list of human-readable problems).
    """
    problems: list[str] = []
    verts = t.vertices
    n = t.n_states

    diffs = np.max(np.abs(verts[:, None, :] - verts[None, :, :]), axis=2)
    np.fill_diagonal(diffs, 1.0)
    dup = np.argwhere(diffs <= EPS_GEOM)
    for i, j in dup:
        if i < j:
            problems.append(f"vertices {i} and {j} coincide")

    if not t.simplices:
        problems.append("no cells: the simplex is not covered")
        return False, problems

    if n == 1:
        return (len(problems) == 0), problems

    total_volume = 0.0
    degenerate = set()
    for ci, cell in enumerate(t.simplices):
        pts = verts[list(cell)]
        if len(cell) > n:
            problems.append(f"cell {ci} has {len(cell)} vertices in dimension {n - 1}")
            degenerate.add(ci)
            continue
        if len(cell) >= 2:
            edges = pts[1:] - pts[0]
            gram = edges @ edges.T
            det = float(np.linalg.det(gram))
            edge_scale = float(np.prod(np.linalg.norm(edges, axis=1)))
            if det <= (1e-9 * max(edge_scale, 1e-30)) ** 2:
                problems.append(f"cell {ci} is affinely degenerate")
                degenerate.add(ci)
                continue
            if len(cell) == n:
                total_volume += math.sqrt(det) / math.factorial(n - 1)

    # Pairwise face-to-face: any point common to two cells must be a convex
    # combination of their shared vertices.  Representations are unique for
    # affinely independent cells, so it suffices to maximize the weight put
    # on non-shared vertices over the intersection.
    for ai in range(len(t.simplices)):
        if ai in degenerate:
            continue
        for bi in range(ai + 1, len(t.simplices)):
            if bi in degenerate:
                continue
            cell_a, cell_b = t.simplices[ai], t.simplices[bi]
            if set(cell_a) == set(cell_b):
                problems.append(f"cells {ai} and {bi} are identical")
                continue
            pa, pb = verts[list(cell_a)], verts[list(cell_b)]
            if np.any(pa.min(axis=0) > pb.max(axis=0) + tol) or np.any(
                pb.min(axis=0) > pa.max(axis=0) + tol
            ):
                continue
            shared = set(cell_a) & set(cell_b)
            free = np.array(
                [1.0 * (v not in shared) for v in cell_a]
                + [1.0 * (v not in shared) for v in cell_b]
            )
            if not free.any():
                continue
            n_a, n_b = len(cell_a), len(cell_b)
            eq_rows = np.vstack(
                [
                    np.hstack([pa.T, -pb.T]),
                    np.hstack([np.ones(n_a), np.zeros(n_b)]),
                    np.hstack([np.zeros(n_a), np.ones(n_b)]),
                ]
            )
            rhs = np.concatenate([np.zeros(n), [1.0, 1.0]])
            res = linprog(-free, A_eq=eq_rows, b_eq=rhs, bounds=(0.0, None), method="highs")
            if res.status == 2:
                continue  # disjoint closures
            if res.success and -res.fun > tol:
                problems.append(
                    f"cells {ai} and {bi} intersect outside their common face"
                )
            elif not res.success:
                problems.append(f"cells {ai} and {bi}: face check LP failed ({res.message})")

    target = math.sqrt(n) / math.factorial(n - 1)
    if abs(total_volume - target) > 1e-9 * target:
        problems.append(
            f"cell volumes sum to {total_volume!r}, simplex volume is {target!r}"
        )

    return (len(problems) == 0), problems


def barycentric_indices(t: Triangulation, omega) -> tuple[np.ndarray, np.ndarray]:
    """Vertex indices and weights expressing omega in its containing cell.

    Weights below EPS_GEOM are dropped and the rest renormalized, so the
    returned atoms all carry strictly positive mass.
    """
    point = as_simplex_point(omega)
    if point.size != t.n_states:
        raise GeometryDomainError("point dimension does not match the triangulation")
    cells, lam = t.locate_many(point[None, :])
    cell = t.simplices[cells[0]]
    weights = np.asarray(lam[0], dtype=float)
    keep = weights > EPS_GEOM
    ids = np.asarray(cell, dtype=int)[keep]
    weights = weights[keep]
    weights = weights / weights.sum()
    order = np.argsort(ids)
    return ids[order], weights[order]


def barycentric(t: Triangulation, omega) -> SupportMeasure:
    """Barycentric split of omega: atoms at cell vertices, mean omega."""
    ids, weights = barycentric_indices(t, omega)
    return SupportMeasure(t.vertices[ids], weights)


def interpolate(f: VertexInterpolant, omega) -> float:
    """Evaluate the vertex interpolant at a single point."""
    return f(omega)


def pullback_affine(f: VertexInterpolant, mapping: AffineMap) -> PiecewiseAffine:
    """Compose a piecewise-linear function with an affine map.

    The result lives on the source simplex of the map; its pieces are
    the cell pieces of f composed with the map and its boundary set is
    the pullback of the cell facets of f (constants dropped).  Raises
    GeometryDomainError if the map can carry a source simplex point
    outside the domain of f.
    """
    if mapping.target_dim != f.triangulation.n_states:
        raise GeometryDomainError("map target does not match the interpolant domain")
    corners = np.eye(mapping.source_dim)
    images = mapping(corners)
    if images.min() < -1e-9 or np.max(np.abs(images.sum(axis=1) - 1.0)) > 1e-9:
        raise GeometryDomainError("affine map sends the simplex outside the target simplex")
    pieces = tuple(mapping.pullback(g) for g in f.cell_pieces)
    boundary = dedup_functionals(mapping.pullback(h) for h in f.boundary_functionals)

    def evaluator(pts: np.ndarray) -> np.ndarray:
        mapped = np.clip(mapping(pts), 0.0, None)
        mapped /= mapped.sum(axis=1, keepdims=True)
        return f.evaluate_many(mapped)

    return PiecewiseAffine(pieces=pieces, boundary=boundary, evaluator=evaluator)


def candidate_vertices(arrangement: CellArrangement) -> np.ndarray:
    """Vertices of the cell arrangement cut out on the simplex.

    Solves every (n-1)-subset of {arrangement functionals} united with
    the simplex facet equalities, together with the sum-to-one row;
    near-singular subsets are skipped as non-transversal.  The corners
    always appear.  Rows come back lexicographically sorted and deduped
    at EPS_GEOM.
    """
    n = arrangement.n_states
    if n == 1:
        return np.ones((1, 1))
    fs = dedup_functionals(arrangement.functionals)
    corners = np.eye(n)

    if n == 2:
        ps = [0.0, 1.0]
        for f in fs:
            w, b = f.weights, f.offset
            denom = w[0] - w[1]
            if abs(denom) <= EPS_GEOM:
                continue
            p = -(w[1] + b) / denom
            if -1e-9 <= p <= 1.0 + 1e-9:
                ps.append(min(max(p, 0.0), 1.0))
        ps = sorted(ps)
        pts = np.column_stack([ps, 1.0 - np.asarray(ps)])
        return pts[_dedup_sorted(pts, EPS_GEOM)]

    pool_w = [f.weights for f in fs] + [row for row in corners]
    pool_b = [f.offset for f in fs] + [0.0] * n
    pool_w = np.asarray(pool_w)
    pool_b = np.asarray(pool_b)

    subsets = np.asarray(list(itertools.combinations(range(len(pool_w)), n - 1)), dtype=int)
    points = [corners]
    if subsets.size:
        systems = np.empty((len(subsets), n, n))
        systems[:, : n - 1, :] = pool_w[subsets]
        systems[:, n - 1, :] = 1.0
        rhs = np.empty((len(subsets), n))
        rhs[:, : n - 1] = -pool_b[subsets]
        rhs[:, n - 1] = 1.0
        dets = np.abs(np.linalg.det(systems))
        scale = np.prod(np.linalg.norm(systems, axis=2), axis=1)
        transversal = dets > 1e-12 * np.maximum(scale, 1e-30)
        if transversal.any():
            sols = np.linalg.solve(systems[transversal], rhs[transversal][..., None])[..., 0]
            inside = sols.min(axis=1) >= -1e-9
            if inside.any():
                pts = np.clip(sols[inside], 0.0, None)
                pts /= pts.sum(axis=1, keepdims=True)
                points.append(pts)
    allpts = np.vstack(points)
    allpts = allpts[_lex_order(allpts)]
    return allpts[_dedup_sorted(allpts, EPS_GEOM)]


def _eval_objective(psi, points: np.ndarray) -> np.ndarray:
    """Evaluate psi on rows of points, tolerating scalar-only callables."""
    try:
        vals = np.asarray(psi(points), dtype=float)
        if vals.shape == (len(points),):
            return vals
    except Exception:
        pass
    return np.asarray([float(psi(p)) for p in points], dtype=float)


def _chain_envelope(cands: np.ndarray, vals: np.ndarray) -> VertexInterpolant:
    """Upper concave envelope on a segment via a monotone chain.

    Candidates must be sorted by first coordinate.  Collinear interior
    points are dropped, so vertices are exactly the envelope kinks plus
    the two endpoints.
    """
    p = cands[:, 0]
    tol_area = 1e-12 * max(1.0, float(np.ptp(vals)))
    keep: list[int] = []
    for i in range(len(p)):
        while len(keep) >= 2:
            a, b = keep[-2], keep[-1]
            cross = (p[b] - p[a]) * (vals[i] - vals[a]) - (vals[b] - vals[a]) * (p[i] - p[a])
            if cross >= -tol_area:
                keep.pop()  # middle point on or below the chord
            else:
                break
        keep.append(i)
    verts = cands[keep]
    cells = tuple((i, i + 1) for i in range(len(keep) - 1))
    tri = Triangulation(verts, cells)
    return VertexInterpolant(tri, vals[keep])


def _affine_envelope(cands: np.ndarray, vals: np.ndarray) -> VertexInterpolant:
    """Fallback when the lifted candidates are coplanar: psi is affine."""
    n = cands.shape[1]
    design = np.column_stack([cands[:, :-1], np.ones(len(cands))])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    fitted = design @ coef
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(fitted - vals)) > 1e-9 * scale:
        raise GeometryDomainError("degenerate lifted hull for a non-affine objective")
    corners = np.eye(n)
    corner_vals = np.column_stack([corners[:, :-1], np.ones(n)]) @ coef
    tri = Triangulation(corners, (tuple(range(n)),))
    return VertexInterpolant(tri, corner_vals)


def _face_facets(ids: tuple[int, ...], proj: np.ndarray, k: int) -> list[tuple[int, ...]]:
    """Facets of the k-dimensional face spanned by proj[ids] as vertex id tuples."""
    pts = proj[list(ids)]
    center = pts.mean(axis=0)
    centered = pts - center
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    local = centered @ vt[:k].T
    if k == 1:
        return [
            (ids[int(np.argmin(local[:, 0]))],),
            (ids[int(np.argmax(local[:, 0]))],),
        ]
    hull = ConvexHull(local)
    extremes = set(hull.vertices.tolist())
    facets = []
    for group in _cluster_rows(hull.equations, 1e-9):
        members = set()
        for row in group:
            members.update(hull.simplices[row].tolist())
        members &= extremes
        facets.append(tuple(sorted(ids[j] for j in members)))
    return facets


def _pull_face(ids: tuple[int, ...], proj: np.ndarray, k: int) -> list[tuple[int, ...]]:
    """Pulling triangulation of a k-face: cone the lex-least vertex over
    the pulled facets that avoid it."""
    if len(ids) == k + 1:
        return [tuple(ids)]
    v0 = ids[0]
    cells: list[tuple[int, ...]] = []
    for facet in _face_facets(ids, proj, k):
        if v0 in facet:
            continue
        for sub in _pull_face(facet, proj, k - 1):
            cells.append(tuple(sorted((v0,) + sub)))
    return cells


def _lifted_envelope(cands: np.ndarray, vals: np.ndarray) -> VertexInterpolant:
    """Upper-hull concave envelope for dimension >= 2."""
    n = cands.shape[1]
    d = n - 1
    if len(cands) == n:
        # Corners only: the envelope is the affine interpolant.
        return VertexInterpolant(Triangulation(cands, (tuple(range(n)),)), vals)
    proj = cands[:, :-1]
    lifted = np.column_stack([proj, vals])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        return _affine_envelope(cands, vals)
    extremes = set(hull.vertices.tolist())
    upper = np.where(hull.equations[:, d] > 1e-10)[0]
    if upper.size == 0:
        return _affine_envelope(cands, vals)
    cells: set[tuple[int, ...]] = set()
    for group in _cluster_rows(hull.equations[upper], 1e-9):
        members = set()
        for gi in group:
            members.update(hull.simplices[upper[gi]].tolist())
        members &= extremes
        face = tuple(sorted(members))
        cells.update(_pull_face(face, proj, d))
    used = sorted(set(itertools.chain.from_iterable(cells)))
    remap = {v: i for i, v in enumerate(used)}
    tri = Triangulation(
        cands[used],
        tuple(sorted(tuple(remap[v] for v in cell) for cell in cells)),
    )
    # Cheap coverage audit: projected cells must tile the simplex.
    vol = 0.0
    for cell in tri.simplices:
        pts = tri.vertices[list(cell)]
        edges = pts[1:] - pts[0]
        vol += abs(math.sqrt(max(np.linalg.det(edges @ edges.T), 0.0))) / math.factorial(d)
    target = math.sqrt(n) / math.factorial(d)
    if abs(vol - target) > 1e-7 * target:
        raise GeometryDomainError("upper-hull faces failed to tile the simplex")
    return VertexInterpolant(tri, vals[used])


def argcav(psi, arrangement: CellArrangement) -> VertexInterpolant:
    """Concave envelope of psi over the simplex, with its triangulation.

    psi must be piecewise affine with kinks contained in the zero sets
    of the arrangement functionals; it may be called with a (k, n)
    array (vectorized) or with single points.  The result interpolates
    psi at the returned triangulation's vertices and majorizes psi
    everywhere.  Output is deterministic: candidates are evaluated in
    lexicographic order and upper-hull faces are triangulated by the
    pulling rule anchored at lex-least vertices.
    """
    cands = candidate_vertices(arrangement)
    vals = _eval_objective(psi, cands)
    if not np.all(np.isfinite(vals)):
        raise GeometryDomainError("objective returned non-finite values")
    n = arrangement.n_states
    if n == 1:
        tri = Triangulation(np.ones((1, 1)), ((0,),))
        return VertexInterpolant(tri, vals)
    if n == 2:
        return _chain_envelope(cands, vals)
    return _lifted_envelope(cands, vals)
