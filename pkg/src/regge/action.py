"""Action layer: Regge curvature, volume, the combined action and its splits.

The action is gamma * R + lambda * V where R weights deficit angles by
codimension-2 volumes and V sums top-simplex volumes.  Under a reflection both
decompose into half terms that depend only on their own half's edge data; the
interface apportioning makes the decomposition exact term by term.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .batch import FixedComplexEngine
from .complexes import (EdgeOrdering, Reflection, SimplicialComplex,
                        boundary_complex, canonical_edge_order, lex_edge_order)
from .geometry import Metric, dihedral_angle, is_metric, simplex_volume


@dataclass(frozen=True)
class HilbertParams:
    """Couplings: gamma on the curvature, lam on the cosmological volume term."""

    gamma: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and np.isfinite(self.lam)):
            raise ValueError("couplings must be finite")


@dataclass(frozen=True)
class ActionBreakdown:
    R: float
    V: float
    H: float
    R_plus: float
    R_minus: float
    V_plus: float
    V_minus: float
    H_plus: float
    H_minus: float

    def split_residuals(self) -> dict:
        return {
            "R": abs(self.R_plus + self.R_minus - self.R),
            "V": abs(self.V_plus + self.V_minus - self.V),
            "H": abs(self.H_plus + self.H_minus - self.H),
        }


@lru_cache(maxsize=None)
def engine_for(K: SimplicialComplex,
               refl: Reflection | None = None) -> FixedComplexEngine:
    """Cached batch engine; canonical 3-block ordering when a reflection is given."""
    ordering = canonical_edge_order(K, refl) if refl is not None else lex_edge_order(K)
    return FixedComplexEngine(K, ordering, refl=refl)


def default_ordering(K: SimplicialComplex,
                     refl: Reflection | None = None) -> EdgeOrdering:
    return engine_for(K, refl).ordering


def _as_row(K: SimplicialComplex, z: Metric,
            refl: Reflection | None = None) -> tuple[FixedComplexEngine, np.ndarray]:
    eng = engine_for(K, refl)
    if z.ordering.edges == eng.ordering.edges:
        values = z.values
    else:
        values = np.array([z[e] for e in eng.ordering.edges])
    return eng, values[None, :]


def total_volume(K: SimplicialComplex, z: Metric) -> float:
    eng, Z = _as_row(K, z)
    return float(eng.actions(Z, validate=True).V[0])


def regge_curvature(K: SimplicialComplex, z: Metric) -> float:
    eng, Z = _as_row(K, z)
    return float(eng.actions(Z, validate=True).R[0])


def deficit(sigma_n2, K: SimplicialComplex, z: Metric) -> float:
    """Deficit angle at one codimension-2 face: constant minus dihedral sum.

    The constant is 1 for faces interior to K and 1/2 on the boundary; all
    angles are in units of a full turn.
    """
    sigma_n2 = tuple(sigma_n2)
    if len(sigma_n2) - 1 != K.n - 2:
        raise ValueError(f"{sigma_n2} is not a codimension-2 simplex of the complex")
    if sigma_n2 not in K.simplexes:
        raise ValueError(f"{sigma_n2} is not a simplex of the complex")
    const = 0.5 if sigma_n2 in boundary_complex(K).simplexes else 1.0
    total = sum(dihedral_angle(sigma_n2, top, z)
                for top in K.cofaces(sigma_n2, K.n))
    return const - total


def hilbert_action(K: SimplicialComplex, z: Metric, p: HilbertParams) -> float:
    eng, Z = _as_row(K, z)
    batch = eng.actions(Z, validate=True)
    return p.gamma * float(batch.R[0]) + p.lam * float(batch.V[0])


def split_action(K: SimplicialComplex, refl: Reflection, z: Metric,
                 p: HilbertParams) -> ActionBreakdown:
    """Full action breakdown with the exact half decomposition."""
    eng, Z = _as_row(K, z, refl)
    b = eng.actions(Z, validate=True)
    R, V = float(b.R[0]), float(b.V[0])
    Rp, Rm = float(b.R_plus[0]), float(b.R_minus[0])
    Vp, Vm = float(b.V_plus[0]), float(b.V_minus[0])
    return ActionBreakdown(
        R=R, V=V, H=p.gamma * R + p.lam * V,
        R_plus=Rp, R_minus=Rm, V_plus=Vp, V_minus=Vm,
        H_plus=p.gamma * Rp + p.lam * Vp,
        H_minus=p.gamma * Rm + p.lam * Vm,
    )


def theta_pullback(z: Metric, refl: Reflection) -> Metric:
    """Reflected metric: entry at edge e becomes the entry at theta(e)."""
    o = z.ordering
    if o.theta_positions is not None:
        perm = np.asarray(o.theta_positions, dtype=np.intp)
    else:
        perm = np.array([o.position[refl.theta.apply(e)] for e in o.edges],
                        dtype=np.intp)
    return Metric(z.values[perm], o)


@dataclass
class GradResult:
    values: np.ndarray
    flagged: list

    def __iter__(self):
        return iter(self.values)


def grad_R(K: SimplicialComplex, z: Metric, step: float = 1e-3) -> GradResult:
    """Curvature gradient by Richardson-extrapolated central differences.

    Per component the stencil points z +- h e_i and z +- h/2 e_i must stay in
    the metric cone; h shrinks adaptively, and components still outside at the
    minimal step are flagged (their entry is NaN).
    """
    if not is_metric(K, z):
        raise ValueError("gradient requested outside the metric cone")
    eng, Z0 = _as_row(K, z)
    base = Z0[0]
    E = base.size
    grads = np.empty(E)
    flagged = []

    pending = {i: step * max(abs(base[i]), 1.0) for i in range(E)}
    for _ in range(60):
        if not pending:
            break
        idx = sorted(pending)
        rows = []
        for i in idx:
            h = pending[i]
            for d in (h, -h, 0.5 * h, -0.5 * h):
                row = base.copy()
                row[i] += d
                rows.append(row)
        Z = np.stack(rows)
        ok = eng.metric_mask(Z)
        R = np.full(Z.shape[0], np.nan)
        if ok.any():
            R[ok] = eng.actions(Z[ok]).R
        still = {}
        for m, i in enumerate(idx):
            sl = slice(4 * m, 4 * m + 4)
            if ok[sl].all():
                rp, rm, rp2, rm2 = R[sl]
                h = pending[i]
                g1 = (rp - rm) / (2.0 * h)
                g2 = (rp2 - rm2) / h
                grads[i] = (4.0 * g2 - g1) / 3.0
            else:
                nh = 0.5 * pending[i]
                if nh < 1e-14 * max(abs(base[i]), 1.0):
                    grads[i] = np.nan
                    flagged.append(eng.ordering.edges[i])
                else:
                    still[i] = nh
        pending = still
    else:
        for i in pending:
            grads[i] = np.nan
            flagged.append(eng.ordering.edges[i])

    return GradResult(values=grads, flagged=flagged)


__all__ = [
    "HilbertParams", "ActionBreakdown", "GradResult",
    "engine_for", "default_ordering",
    "total_volume", "regge_curvature", "deficit", "hilbert_action",
    "split_action", "theta_pullback", "grad_R",
    "simplex_volume", "Metric", "SimplicialComplex",
]
