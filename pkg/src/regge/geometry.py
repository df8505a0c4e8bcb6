"""Metric layer: Gram matrices, simplex volumes, dihedral angles, cone and cutoff.

Squared edge lengths are the fundamental variables.  A simplex is realizable
as a euclidean simplex iff its Gram matrix (built from squared lengths alone)
is positive definite; the set of realizable assignments is an open convex cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .complexes import EdgeOrdering, Reflection, SimplicialComplex, lex_edge_order

DET_EPS = 1e-12       # relative positivity guard, scaled by (max z)^k per face
ARCCOS_SLACK = 1e-9   # tolerated round-off excursion of arccos arguments


class NotRealizableError(ValueError):
    """A simplex has no euclidean realization for the given squared lengths."""


@dataclass(frozen=True)
class CutoffSpec:
    """Compact cutoff region: Gram determinants >= 1/kappa, block norms <= kappa."""

    kappa: float
    norm: str = "sup"  # "sup" or "l2"

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValueError("kappa must be positive")
        if self.norm not in ("sup", "l2"):
            raise ValueError(f"unknown norm {self.norm!r} (use 'sup' or 'l2')")


class Metric:
    """Vector of squared edge lengths indexed by an edge ordering."""

    __slots__ = ("values", "ordering")

    def __init__(self, values, ordering: EdgeOrdering):
        arr = np.asarray(values, dtype=float)
        if arr.shape != (len(ordering),):
            raise ValueError(
                f"metric has {arr.shape} entries, ordering has {len(ordering)} edges")
        if not np.all(np.isfinite(arr)):
            raise ValueError("metric entries must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        self.values = arr
        self.ordering = ordering

    @classmethod
    def ones(cls, ordering: EdgeOrdering, value: float = 1.0) -> "Metric":
        return cls(np.full(len(ordering), value), ordering)

    def __getitem__(self, edge) -> float:
        return float(self.values[self.ordering.position[tuple(edge)]])

    def __len__(self) -> int:
        return len(self.values)

    def scaled(self, c: float) -> "Metric":
        return Metric(self.values * c, self.ordering)

    def replace(self, values) -> "Metric":
        return Metric(values, self.ordering)


@dataclass(frozen=True)
class GramMatrix:
    base_vertex: int
    matrix: np.ndarray

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def gram_matrix(sigma, z: Metric, base_vertex=None) -> GramMatrix:
    """Gram matrix of edge vectors from a base vertex, in squared lengths.

    a_ii = z(base,i);  a_ij = (z(base,i) + z(base,j) - z(i,j)) / 2.
    """
    sigma = tuple(sigma)
    if len(sigma) < 2:
        raise ValueError("gram matrix needs a simplex of dimension >= 1")
    if base_vertex is None:
        base_vertex = sigma[0]
    if base_vertex not in sigma:
        raise ValueError(f"base vertex {base_vertex} not in simplex {sigma}")
    others = [v for v in sigma if v != base_vertex]
    k = len(others)
    pos = z.ordering.position

    def zval(a, b):
        key = (a, b) if a < b else (b, a)
        try:
            return z.values[pos[key]]
        except KeyError:
            raise KeyError(f"edge {key} of simplex {sigma} missing from the metric")

    A = np.empty((k, k))
    z0 = [zval(base_vertex, v) for v in others]
    for i in range(k):
        A[i, i] = z0[i]
        for j in range(i + 1, k):
            a = 0.5 * (z0[i] + z0[j] - zval(others[i], others[j]))
            A[i, j] = a
            A[j, i] = a
    return GramMatrix(base_vertex, A)


def gram_det(sigma, z: Metric, base_vertex=None) -> float:
    sigma = tuple(sigma)
    if len(sigma) == 2:  # 1-simplex: the squared length itself
        return z[sigma]
    return gram_matrix(sigma, z, base_vertex).det()


def det_tolerance(k: int, scale: float) -> float:
    """Homogeneity-aware floating-point guard for 'determinant > 0'."""
    return DET_EPS * max(scale, 1e-300) ** k


def simplex_volume(sigma, z: Metric) -> float:
    """Euclidean k-volume: sqrt(det A) / k!."""
    sigma = tuple(sigma)
    k = len(sigma) - 1
    if k == 0:
        return 1.0
    d = gram_det(sigma, z)
    scale = max(z[(a, b)] for a, b in _edge_pairs(sigma))
    if d <= det_tolerance(k, scale):
        raise NotRealizableError(
            f"simplex {sigma} is not realizable (gram det = {d:.3e})")
    return math.sqrt(d) / math.factorial(k)


def _edge_pairs(sigma):
    for i in range(len(sigma)):
        for j in range(i + 1, len(sigma)):
            yield (sigma[i], sigma[j])


# ---------------------------------------------------------------------------
# cone membership
#
# Per-face structures are cached per complex: for each face, the positions of
# its edges in lexicographic edge order, laid out for a closed-form
# determinant in dimensions <= 3 and a dense Gram build above.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _face_table(K: SimplicialComplex):
    """For every face (dim 1..n): (k, edge positions (base row), pair positions)."""
    order = lex_edge_order(K)
    pos = order.position
    faces = []
    for k in range(1, K.n + 1):
        for s in K.k_simplexes(k):
            base, rest = s[0], s[1:]
            p0 = tuple(pos[(base, v)] for v in rest)
            pij = tuple(tuple(pos[(rest[i], rest[j]) if rest[i] < rest[j]
                              else (rest[j], rest[i])]
                              for j in range(k)) for i in range(k))
            all_pos = tuple(pos[e if e[0] < e[1] else (e[1], e[0])]
                            for e in _edge_pairs(s))
            faces.append((k, s, p0, pij, all_pos))
    return order, tuple(faces)


def _chain_dets(values, k, p0, pij):
    """Leading principal minors of the Gram matrix along the sorted vertex chain.

    Returns the list [det_1, ..., det_k]; computing incrementally matches what
    the per-face path computes for the chain's own faces.
    """
    z0 = [values[p] for p in p0]
    if k == 1:
        return [z0[0]]
    a = [[0.0] * k for _ in range(k)]
    for i in range(k):
        a[i][i] = z0[i]
        for j in range(i + 1, k):
            v = 0.5 * (z0[i] + z0[j] - values[pij[i][j]])
            a[i][j] = v
            a[j][i] = v
    dets = [a[0][0]]
    d2 = a[0][0] * a[1][1] - a[0][1] * a[0][1]
    dets.append(d2)
    if k >= 3:
        d3 = (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[1][2])
              - a[0][1] * (a[0][1] * a[2][2] - a[1][2] * a[0][2])
              + a[0][2] * (a[0][1] * a[1][2] - a[1][1] * a[0][2]))
        dets.append(d3)
    for m in range(4, k + 1):
        dets.append(float(np.linalg.det(np.array(a)[:m, :m])))
    return dets


def _resolve_values(K, z):
    order, faces = _face_table(K)
    if z.ordering.edges == order.edges:
        return z.values, faces
    # re-index into lexicographic layout
    vals = np.array([z[e] for e in order.edges])
    return vals, faces


def is_metric(K: SimplicialComplex, z: Metric) -> bool:
    """Naive all-faces cone test: every face Gram determinant positive."""
    return not metric_violations(K, z, first_only=True)


def metric_violations(K: SimplicialComplex, z: Metric, first_only=False) -> list:
    values, faces = _resolve_values(K, z)
    bad = []
    for k, s, p0, pij, all_pos in faces:
        scale = max(values[p] for p in all_pos)
        d = _chain_dets(values, k, p0, pij)[-1]
        if d <= det_tolerance(k, scale):
            bad.append((s, d))
            if first_only:
                return bad
    return bad


@lru_cache(maxsize=None)
def _maximal_chain_table(K: SimplicialComplex):
    """Chain layout (p0, pij, per-level scale positions) for each maximal simplex."""
    order = lex_edge_order(K)
    pos = order.position
    chains = []
    for s in K.maximal:
        if len(s) < 2:
            continue
        k = len(s) - 1
        base, rest = s[0], s[1:]
        p0 = tuple(pos[(base, v)] for v in rest)
        pij = tuple(tuple(pos[(rest[i], rest[j]) if rest[i] < rest[j]
                          else (rest[j], rest[i])]
                          for j in range(k)) for i in range(k))
        level_pos = []
        for m in range(1, k + 1):
            face = (base,) + rest[:m]
            level_pos.append(tuple(pos[e if e[0] < e[1] else (e[1], e[0])]
                                   for e in _edge_pairs(face)))
        chains.append((k, p0, pij, tuple(level_pos)))
    return order, tuple(chains)


def is_metric_fast(K: SimplicialComplex, z: Metric) -> bool:
    """Cone test via one increasing face chain per maximal simplex.

    The leading principal minors of the top Gram matrix are exactly the chain
    faces' determinants; positivity along the chain implies positivity for all
    faces of that simplex.
    """
    order, chains = _maximal_chain_table(K)
    if z.ordering.edges == order.edges:
        values = z.values
    else:
        values = np.array([z[e] for e in order.edges])
    for k, p0, pij, level_pos in chains:
        dets = _chain_dets(values, k, p0, pij)
        for m in range(1, k + 1):
            scale = max(values[p] for p in level_pos[m - 1])
            if dets[m - 1] <= det_tolerance(m, scale):
                return False
    return True


def in_cutoff(K: SimplicialComplex, z: Metric, cut: CutoffSpec,
              refl: Reflection | None = None) -> bool:
    """Membership in the compact cutoff: det >= 1/kappa per face, norms <= kappa.

    With a reflection the norm bound applies to the two half vectors
    (interface included in both); without one it applies to the whole vector.
    """
    values, faces = _resolve_values(K, z)
    inv_kappa = 1.0 / cut.kappa
    for k, s, p0, pij, all_pos in faces:
        if _chain_dets(values, k, p0, pij)[-1] < inv_kappa:
            return False
    if refl is not None:
        o = z.ordering
        if o.blocks is None:
            raise ValueError("cutoff with a reflection needs the canonical edge ordering")
        plus = z.values[:o.n_plus]
        minus = z.values[o.n_plus_tilde:]
        if cut.norm == "sup":
            biggest = max(plus.max(), minus.max())
        else:
            biggest = max(float(np.linalg.norm(plus)), float(np.linalg.norm(minus)))
    else:
        biggest = z.values.max() if cut.norm == "sup" else float(np.linalg.norm(z.values))
    return biggest <= cut.kappa


# ---------------------------------------------------------------------------
# dihedral angles via a coordinate embedding
# ---------------------------------------------------------------------------


def simplex_embedding(sigma, z: Metric) -> np.ndarray:
    """Coordinates of the simplex in E^k: base vertex at the origin, Cholesky rows.

    Row i is the position of vertex sigma[i]; row 0 is the origin.
    """
    sigma = tuple(sigma)
    A = gram_matrix(sigma, z).matrix
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NotRealizableError(
            f"simplex {sigma} is not realizable (gram matrix not positive definite)")
    return np.vstack([np.zeros(L.shape[1]), L])


def _outward_facet_normal(points: np.ndarray, drop: int) -> np.ndarray:
    """Unit normal of the facet omitting vertex `drop`, pointing away from it."""
    idx = [i for i in range(points.shape[0]) if i != drop]
    base = points[idx[0]]
    D = points[idx[1:]] - base
    # 1-dim null space of the facet's direction matrix
    _, _, vt = np.linalg.svd(D)
    normal = vt[-1]
    if np.dot(normal, points[drop] - base) > 0:
        normal = -normal
    return normal / np.linalg.norm(normal)


def dihedral_angle(sigma_n2, sigma_n, z: Metric) -> float:
    """Dihedral angle (in units of a full turn) at a codimension-2 face.

    The two facets of sigma_n through sigma_n2 get outward unit normals n1, n2
    in the Cholesky embedding; the angle is 1/2 - arccos(<n1, n2>) / (2 pi).
    """
    sigma_n2, sigma_n = tuple(sigma_n2), tuple(sigma_n)
    if not set(sigma_n2) <= set(sigma_n):
        raise ValueError(f"{sigma_n2} is not a face of {sigma_n}")
    if len(sigma_n) - len(sigma_n2) != 2:
        raise ValueError("dihedral angle needs a codimension-2 face")
    points = simplex_embedding(sigma_n, z)
    u, w = (sigma_n.index(v) for v in sorted(set(sigma_n) - set(sigma_n2)))
    n1 = _outward_facet_normal(points, u)
    n2 = _outward_facet_normal(points, w)
    c = float(np.dot(n1, n2))
    if abs(c) > 1.0 + ARCCOS_SLACK:
        raise NotRealizableError(
            f"cosine {c} out of range at face {sigma_n2} of {sigma_n}")
    c = min(1.0, max(-1.0, c))
    return 0.5 - math.acos(c) / (2.0 * math.pi)
