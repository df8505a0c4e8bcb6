"""Combinatorial layer: finite simplicial complexes, pseudomanifolds, reflections.

A simplex is a strictly increasing tuple of non-negative integer vertex ids.
A complex is a face-closed set of simplexes.  Reflections split a pseudomanifold
into two halves glued along a fixed interface; they are the combinatorial input
for everything downstream (edge orderings, action splits, positivity checks).
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional

Simplex = tuple  # sorted tuple of vertex ids


class GluingError(ValueError):
    """Raised when a doubling would identify simplexes beyond the interface."""


def as_simplex(vertices: Iterable[int]) -> Simplex:
    """Canonical simplex: sorted tuple of distinct non-negative ints."""
    vs = tuple(sorted(int(v) for v in vertices))
    if not vs:
        raise ValueError("a simplex needs at least one vertex")
    if vs[0] < 0:
        raise ValueError(f"negative vertex id in {vs}")
    for a, b in zip(vs, vs[1:]):
        if a == b:
            raise ValueError(f"duplicate vertex {a} in {tuple(vertices)}")
    return vs


def faces_of(simplex: Simplex):
    """All nonempty subsets of a simplex, itself included."""
    for k in range(1, len(simplex) + 1):
        yield from itertools.combinations(simplex, k)


class SimplicialComplex:
    """Immutable face-closed set of simplexes.

    The empty complex (e.g. the boundary of a closed pseudomanifold) is
    represented with an empty simplex set and dimension -1.
    """

    __slots__ = ("simplexes", "n", "_by_dim", "_hash", "_cofaces")

    def __init__(self, simplexes: Iterable[Simplex]):
        simps = frozenset(simplexes)
        self.simplexes = simps
        self.n = max((len(s) for s in simps), default=0) - 1
        by_dim: dict[int, list] = {}
        for s in sorted(simps):
            by_dim.setdefault(len(s) - 1, []).append(s)
        self._by_dim = {k: tuple(v) for k, v in by_dim.items()}
        self._hash = hash(simps)
        self._cofaces: dict[int, dict] = {}

    # -- construction ----------------------------------------------------

    @classmethod
    def from_maximal(cls, maximal: Iterable[Iterable[int]]) -> "SimplicialComplex":
        """Face closure of the given generating simplexes."""
        gens = [as_simplex(m) for m in maximal]
        if not gens:
            raise ValueError("no generating simplexes")
        simps = set()
        for g in gens:
            simps.update(faces_of(g))
        return cls(simps)

    def closure_of(self, generators: Iterable[Iterable[int]]) -> "SimplicialComplex":
        """Subcomplex generated by simplexes of this complex."""
        gens = [as_simplex(g) for g in generators]
        for g in gens:
            if g not in self.simplexes:
                raise ValueError(f"{g} is not a simplex of the complex")
        return SimplicialComplex.from_maximal(gens)

    # -- basic queries ----------------------------------------------------

    def k_simplexes(self, k: int) -> tuple:
        return self._by_dim.get(k, ())

    @property
    def vertices(self) -> tuple:
        return tuple(s[0] for s in self.k_simplexes(0))

    @property
    def edges(self) -> tuple:
        return self.k_simplexes(1)

    @property
    def maximal(self) -> tuple:
        """Simplexes with no proper coface, sorted."""
        proper = set()
        for s in self.simplexes:
            for f in faces_of(s):
                if f != s:
                    proper.add(f)
        return tuple(sorted(s for s in self.simplexes if s not in proper))

    @property
    def is_empty(self) -> bool:
        return not self.simplexes

    def __contains__(self, simplex) -> bool:
        return tuple(simplex) in self.simplexes

    def __len__(self) -> int:
        return len(self.simplexes)

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplicialComplex) and self.simplexes == other.simplexes

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        counts = {k: len(v) for k, v in sorted(self._by_dim.items())}
        return f"SimplicialComplex(n={self.n}, counts={counts})"

    def cofaces(self, simplex: Simplex, dim: int) -> tuple:
        """All dim-simplexes containing the given simplex."""
        table = self._cofaces.get(dim)
        if table is None:
            table = {}
            for big in self.k_simplexes(dim):
                bigset = set(big)
                for k in range(1, len(big)):
                    for f in itertools.combinations(big, k):
                        table.setdefault(f, []).append(big)
                del bigset
            table = {f: tuple(v) for f, v in table.items()}
            self._cofaces[dim] = table
        return table.get(tuple(simplex), ())

    def intersection(self, other: "SimplicialComplex") -> "SimplicialComplex":
        return SimplicialComplex(self.simplexes & other.simplexes)

    def union(self, other: "SimplicialComplex") -> "SimplicialComplex":
        return SimplicialComplex(self.simplexes | other.simplexes)

    def is_subcomplex_of(self, other: "SimplicialComplex") -> bool:
        return self.simplexes <= other.simplexes


def build_complex(maximal_simplexes: Iterable[Iterable[int]]) -> SimplicialComplex:
    """Face closure of the given maximal simplexes."""
    return SimplicialComplex.from_maximal(maximal_simplexes)


def boundary_complex(K: SimplicialComplex) -> SimplicialComplex:
    """Subcomplex of facets lying in exactly one top simplex, with their faces.

    Empty for closed pseudomanifolds.
    """
    n = K.n
    free = [f for f in K.k_simplexes(n - 1) if len(K.cofaces(f, n)) == 1]
    if not free:
        return SimplicialComplex(())
    return SimplicialComplex.from_maximal(free)


class PseudomanifoldReport:
    __slots__ = ("ok", "violations")

    def __init__(self, ok: bool, violations: list):
        self.ok = ok
        self.violations = violations

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        return f"PseudomanifoldReport(ok={self.ok}, violations={self.violations})"


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def is_pseudomanifold(K: SimplicialComplex) -> PseudomanifoldReport:
    """Check the three pseudomanifold conditions, listing violations per condition.

    1. every simplex is a face of a top-dimensional simplex;
    2. every (n-1)-simplex has at most two n-cofaces;
    3. the facet-adjacency graph of the n-simplexes is connected.
    """
    violations = []
    if K.is_empty:
        return PseudomanifoldReport(False, ["complex is empty"])
    n = K.n
    tops = K.k_simplexes(n)

    covered = set()
    for t in tops:
        covered.update(faces_of(t))
    dangling = sorted(K.simplexes - covered)
    if dangling:
        violations.append(
            f"condition 1: {len(dangling)} simplexes not contained in any "
            f"{n}-simplex, e.g. {dangling[:3]}"
        )

    for f in K.k_simplexes(n - 1):
        deg = len(K.cofaces(f, n))
        if deg > 2:
            violations.append(f"condition 2: facet {f} has {deg} {n}-cofaces")

    if len(tops) > 1:
        uf = _UnionFind(tops)
        for f in K.k_simplexes(n - 1):
            cof = K.cofaces(f, n)
            for a, b in zip(cof, cof[1:]):
                uf.union(a, b)
        roots = {uf.find(t) for t in tops}
        if len(roots) > 1:
            violations.append(
                f"condition 3: facet-adjacency graph has {len(roots)} components"
            )

    return PseudomanifoldReport(not violations, violations)


class Automorphism:
    """Vertex permutation acting on simplexes by relabeling."""

    __slots__ = ("mapping", "_hash")

    def __init__(self, mapping: dict):
        mapping = {int(k): int(v) for k, v in mapping.items()}
        if set(mapping.keys()) != set(mapping.values()):
            raise ValueError("vertex mapping is not a bijection")
        self.mapping = mapping
        self._hash = hash(tuple(sorted(mapping.items())))

    @classmethod
    def extend_identity(cls, partial: dict, vertices: Iterable[int]) -> "Automorphism":
        """Complete a partial vertex map with the identity on remaining vertices."""
        m = {int(k): int(v) for k, v in partial.items()}
        for v in vertices:
            m.setdefault(int(v), int(v))
        return cls(m)

    def __call__(self, vertex: int) -> int:
        return self.mapping.get(vertex, vertex)

    def apply(self, simplex: Simplex) -> Simplex:
        return tuple(sorted(self.mapping.get(v, v) for v in simplex))

    def apply_complex(self, K: SimplicialComplex) -> SimplicialComplex:
        return SimplicialComplex(self.apply(s) for s in K.simplexes)

    def is_automorphism_of(self, K: SimplicialComplex) -> bool:
        return all(self.apply(s) in K.simplexes for s in K.simplexes)

    def is_involution(self) -> bool:
        return all(self.mapping.get(v, v) == k for k, v in self.mapping.items())

    def is_identity_on(self, vertices: Iterable[int]) -> bool:
        return all(self.mapping.get(v, v) == v for v in vertices)

    def is_identity(self) -> bool:
        return all(k == v for k, v in self.mapping.items())

    def fixed_vertices(self) -> tuple:
        return tuple(sorted(k for k, v in self.mapping.items() if k == v))

    def __eq__(self, other) -> bool:
        return isinstance(other, Automorphism) and self._hash == other._hash and \
            self.mapping == other.mapping

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        moved = {k: v for k, v in sorted(self.mapping.items()) if k != v}
        return f"Automorphism({moved})"


class Reflection:
    """Involutive automorphism with the two glued halves and their interface."""

    __slots__ = ("theta", "k_plus", "k_minus", "k_zero", "warnings", "_hash")

    def __init__(self, theta: Automorphism, k_plus: SimplicialComplex,
                 k_minus: SimplicialComplex, k_zero: SimplicialComplex,
                 warnings: tuple = ()):
        self.theta = theta
        self.k_plus = k_plus
        self.k_minus = k_minus
        self.k_zero = k_zero
        self.warnings = tuple(warnings)
        self._hash = hash((theta, k_plus.simplexes))

    def __eq__(self, other) -> bool:
        return isinstance(other, Reflection) and self.theta == other.theta and \
            self.k_plus == other.k_plus

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return (f"Reflection(theta={self.theta!r}, |K+|={len(self.k_plus)}, "
                f"|K0|={len(self.k_zero)})")


class ReflectionReport:
    """Outcome of verify_reflection: verified Reflection or itemized failures."""

    __slots__ = ("ok", "failures", "warnings", "reflection")

    def __init__(self, ok, failures, warnings, reflection):
        self.ok = ok
        self.failures = failures
        self.warnings = warnings
        self.reflection = reflection

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        return f"ReflectionReport(ok={self.ok}, failures={self.failures})"


def verify_reflection(K: SimplicialComplex, theta: Automorphism,
                      k_plus: SimplicialComplex) -> ReflectionReport:
    """Check every reflection axiom; collect one failure message per broken axiom.

    Axioms: theta is a non-identity involutive automorphism of K; the halves
    K+ and K- = theta(K+) are n-pseudomanifolds; the interface K0 is a
    nonempty (n-1)-pseudomanifold fixed pointwise by theta; K is exactly the
    gluing of the halves along K0.
    """
    failures = []
    warnings = []

    if not theta.is_automorphism_of(K):
        failures.append(("automorphism", "theta does not map simplexes of K to simplexes of K"))
    if not theta.is_involution():
        failures.append(("involution", "theta composed with itself is not the identity"))
    if theta.is_identity():
        failures.append(("identity", "theta must not be equal to the identity"))

    if not k_plus.is_subcomplex_of(K):
        failures.append(("k_plus_subcomplex", "K+ is not a subcomplex of K"))
        return ReflectionReport(False, failures, warnings, None)

    k_minus = theta.apply_complex(k_plus)
    k_zero = k_plus.intersection(k_minus)

    if k_plus.n != K.n:
        failures.append(("k_plus_dimension", f"K+ has dimension {k_plus.n}, expected {K.n}"))
    rep = is_pseudomanifold(k_plus)
    if not rep.ok:
        failures.append(("k_plus_pseudomanifold", f"K+ violates: {rep.violations}"))
    rep = is_pseudomanifold(k_minus)
    if not rep.ok:
        failures.append(("k_minus_pseudomanifold", f"K- violates: {rep.violations}"))

    if k_zero.is_empty:
        failures.append(("k_zero_nonempty", "K+ and theta(K+) have empty intersection"))
    else:
        if k_zero.n != K.n - 1:
            failures.append(("k_zero_dimension",
                             f"K0 has dimension {k_zero.n}, expected {K.n - 1}"))
        rep = is_pseudomanifold(k_zero)
        if not rep.ok:
            failures.append(("k_zero_pseudomanifold", f"K0 violates: {rep.violations}"))
        if not theta.is_identity_on(v for (v,) in k_zero.k_simplexes(0)):
            failures.append(("k_zero_pointwise_fixed",
                             "theta moves a vertex of K0"))

    if k_plus.simplexes | k_minus.simplexes != K.simplexes:
        failures.append(("gluing", "K+ and K- do not glue to the whole complex"))

    if failures:
        return ReflectionReport(False, failures, warnings, None)

    bd = boundary_complex(K)
    if not bd.is_empty and not k_zero.intersection(bd).is_empty:
        warnings.append("k_zero meets the boundary of K")

    refl = Reflection(theta, k_plus, k_minus, k_zero, tuple(warnings))
    return ReflectionReport(True, failures, warnings, refl)


def double_complex(k_prime: SimplicialComplex,
                   k_prime_0: SimplicialComplex) -> tuple:
    """Glue a fresh copy of k_prime to itself along k_prime_0.

    Copy vertices outside k_prime_0 get ids offset above the original maximum;
    the canonical reflection swaps each original with its copy and fixes the
    interface.  Raises GluingError if the glued object would identify simplexes
    beyond the interface (the vertex-subset representation cannot host two
    distinct simplexes on the same vertex set).
    """
    if k_prime_0.is_empty:
        raise ValueError("interface subcomplex is empty")
    bd = boundary_complex(k_prime)
    if not k_prime_0.is_subcomplex_of(bd):
        raise ValueError("interface subcomplex is not contained in the boundary")

    fixed = set(v for (v,) in k_prime_0.k_simplexes(0))
    for s in sorted(k_prime.simplexes - k_prime_0.simplexes):
        if set(s) <= fixed:
            raise GluingError(
                f"simplex {s} lies in the interface vertex set but not in the "
                "interface; its copy would collapse onto it"
            )

    offset = max(v for (v,) in k_prime.k_simplexes(0)) + 1
    copy_vertex = {v: (v if v in fixed else v + offset)
                   for (v,) in k_prime.k_simplexes(0)}
    copy = SimplicialComplex(
        tuple(sorted(copy_vertex[v] for v in s)) for s in k_prime.simplexes)

    K = k_prime.union(copy)
    mapping = {}
    for v, w in copy_vertex.items():
        mapping[v] = w
        mapping[w] = v
    theta = Automorphism(mapping)
    refl = Reflection(theta, k_prime, copy, k_prime.intersection(copy))
    return K, refl


class EdgeOrdering:
    """Bijection from edges to vector positions.

    With a reflection the layout is three contiguous blocks
    (K+ minus K0, K0, K- minus K0); the first two are lexicographic and the
    minus block mirrors the plus block through theta, so theta acts on
    positions as the involution swapping block 1 with block 3.  Without a
    reflection the layout is plain lexicographic with no block structure.
    """

    __slots__ = ("edges", "position", "blocks", "theta_positions", "_hash")

    def __init__(self, edges: tuple, blocks: Optional[tuple] = None,
                 theta_positions: Optional[tuple] = None):
        self.edges = tuple(edges)
        self.position = {e: i for i, e in enumerate(self.edges)}
        self.blocks = blocks
        self.theta_positions = theta_positions
        self._hash = hash((self.edges, blocks))

    def __len__(self) -> int:
        return len(self.edges)

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeOrdering) and self.edges == other.edges \
            and self.blocks == other.blocks

    def __hash__(self) -> int:
        return self._hash

    # block helpers (reflection orderings only)
    @property
    def n_plus_tilde(self) -> int:
        return self.blocks[0]

    @property
    def n_zero(self) -> int:
        return self.blocks[1]

    @property
    def n_plus(self) -> int:
        return self.blocks[0] + self.blocks[1]

    def plus_positions(self) -> range:
        return range(0, self.n_plus)

    def minus_positions(self) -> range:
        return range(self.n_plus_tilde, len(self.edges))

    def zero_positions(self) -> range:
        return range(self.n_plus_tilde, self.n_plus)

    def reflected_plus_positions(self) -> list:
        """Positions whose values form the plus vector of the reflected metric."""
        p, q = self.n_plus_tilde, self.n_zero
        return [p + q + i for i in range(p)] + [p + i for i in range(q)]


def lex_edge_order(K: SimplicialComplex) -> EdgeOrdering:
    return EdgeOrdering(K.edges)


def canonical_edge_order(K: SimplicialComplex, refl: Reflection) -> EdgeOrdering:
    """Deterministic 3-block ordering (plus-only, interface, minus-only)."""
    zero = set(refl.k_zero.edges)
    plus_tilde = tuple(e for e in refl.k_plus.edges if e not in zero)
    zero_edges = refl.k_zero.edges
    minus_tilde = tuple(refl.theta.apply(e) for e in plus_tilde)
    edges = plus_tilde + zero_edges + minus_tilde
    if len(edges) != len(K.edges) or set(edges) != set(K.edges):
        raise ValueError("reflection blocks do not partition the edges of K")
    p, q = len(plus_tilde), len(zero_edges)
    theta_pos = list(range(len(edges)))
    for i in range(p):
        theta_pos[i], theta_pos[p + q + i] = p + q + i, i
    return EdgeOrdering(edges, blocks=(p, q, p), theta_positions=tuple(theta_pos))
