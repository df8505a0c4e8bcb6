"""Vectorized evaluation of a fixed complex over batches of metric vectors.

The combinatorial structure (faces, incidences, edge positions) is indexed
once per complex; determinants, volumes, dihedral angles and curvature then
run as array operations over (n_samples, n_edges) batches.  This is the hot
path behind Monte Carlo sampling and the action wrappers.

Dihedral cosines come from the inverse Gram matrix: the gradient of the i-th
barycentric coordinate is an inward facet normal, and the pairwise inner
products of those gradients are the entries of the inverse Gram (extended by
one row for the base vertex).  Determinant factors cancel in the normalized
cosine, so the adjugate is used directly where it has a cheap closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complexes import (EdgeOrdering, Reflection, SimplicialComplex,
                        boundary_complex)
from .geometry import ARCCOS_SLACK, DET_EPS, CutoffSpec, NotRealizableError


def intrinsic_constants(K: SimplicialComplex) -> dict:
    """Deficit constants per codimension-2 face: 1 interior, 1/2 on the boundary."""
    bd = boundary_complex(K)
    return {t: (0.5 if t in bd.simplexes else 1.0) for t in K.k_simplexes(K.n - 2)}


def split_constants(K: SimplicialComplex, refl: Reflection) -> tuple[dict, dict]:
    """Deficit constants apportioned to the two halves of a reflection.

    Faces owned by one half keep the full constant; interface faces take half
    of it on each side, so the per-face identity c_plus + c_minus = c holds
    exactly and the half actions depend only on their own edge data.
    """
    full = intrinsic_constants(K)
    zero = refl.k_zero.simplexes
    c_plus, c_minus = {}, {}
    for t, c in full.items():
        in_plus = t in refl.k_plus.simplexes
        in_minus = t in refl.k_minus.simplexes
        if in_plus and in_minus:  # interface face
            c_plus[t] = 0.5 * c
            c_minus[t] = 0.5 * c
        elif in_plus:
            c_plus[t] = c
        elif in_minus:
            c_minus[t] = c
        else:
            raise ValueError(f"face {t} belongs to neither half")
    del zero
    return c_plus, c_minus


@dataclass
class ActionBatch:
    """Per-sample action components; split fields are None without a reflection."""

    R: np.ndarray
    V: np.ndarray
    R_plus: np.ndarray | None = None
    R_minus: np.ndarray | None = None
    V_plus: np.ndarray | None = None
    V_minus: np.ndarray | None = None


class FixedComplexEngine:
    """Batched geometry for one complex under one edge ordering."""

    def __init__(self, K: SimplicialComplex, ordering: EdgeOrdering,
                 refl: Reflection | None = None,
                 constants: dict | None = None):
        if K.n < 2:
            raise ValueError("engine needs a complex of dimension >= 2")
        if set(ordering.edges) != set(K.edges):
            raise ValueError("ordering does not index the edges of this complex")
        self.K = K
        self.ordering = ordering
        self.refl = refl
        self.n = K.n
        pos = ordering.position

        def edge_pos(a, b):
            return pos[(a, b) if a < b else (b, a)]

        # --- per-dimension face index arrays --------------------------------
        self.faces = {}        # k -> tuple of simplexes
        self._diag_idx = {}    # k -> (F, k)
        self._off_idx = {}     # k -> (F, k, k), diagonal slots unused
        self._scale_idx = {}   # k -> (F, #edges of face)
        for k in range(1, self.n + 1):
            fs = K.k_simplexes(k)
            self.faces[k] = fs
            if k == 1:
                self._diag_idx[k] = np.array([[edge_pos(*s)] for s in fs], dtype=np.intp)
                self._off_idx[k] = None
                self._scale_idx[k] = self._diag_idx[k]
                continue
            diag = np.empty((len(fs), k), dtype=np.intp)
            off = np.zeros((len(fs), k, k), dtype=np.intp)
            scale = np.empty((len(fs), k * (k + 1) // 2), dtype=np.intp)
            for f, s in enumerate(fs):
                base, rest = s[0], s[1:]
                for i, v in enumerate(rest):
                    diag[f, i] = edge_pos(base, v)
                for i in range(k):
                    for j in range(i + 1, k):
                        e = edge_pos(rest[i], rest[j])
                        off[f, i, j] = e
                        off[f, j, i] = e
                m = 0
                for i in range(k + 1):
                    for j in range(i + 1, k + 1):
                        scale[f, m] = edge_pos(s[i], s[j])
                        m += 1
            self._diag_idx[k] = diag
            self._off_idx[k] = off
            self._scale_idx[k] = scale
        self._offdiag_mask = {
            k: ~np.eye(k, dtype=bool) for k in range(2, self.n + 1)
        }

        # --- top-simplex incidence structure for dihedral angles ------------
        tops = self.faces[self.n]
        tau_faces = self.faces.get(self.n - 2, ())
        tau_index = {t: i for i, t in enumerate(tau_faces)}
        inc_top, inc_lu, inc_lw, inc_tau = [], [], [], []
        for t_i, top in enumerate(tops):
            for lu in range(self.n + 1):
                for lw in range(lu + 1, self.n + 1):
                    tau = tuple(v for i, v in enumerate(top) if i not in (lu, lw))
                    inc_top.append(t_i)
                    inc_lu.append(lu)
                    inc_lw.append(lw)
                    inc_tau.append(tau_index[tau])
        self._inc_top = np.array(inc_top, dtype=np.intp)
        self._inc_lu = np.array(inc_lu, dtype=np.intp)
        self._inc_lw = np.array(inc_lw, dtype=np.intp)
        self._inc_tau = np.array(inc_tau, dtype=np.intp)

        # --- curvature constants and split masks ----------------------------
        consts = constants if constants is not None else intrinsic_constants(K)
        self._c_full = np.array([consts.get(t, 0.0) for t in tau_faces])
        if refl is not None:
            cp, cm = split_constants(K, refl)
            self._c_plus = np.array([cp.get(t, 0.0) for t in tau_faces])
            self._c_minus = np.array([cm.get(t, 0.0) for t in tau_faces])
            top_plus = np.array([t in refl.k_plus.simplexes for t in tops])
            self._top_plus = top_plus
            self._inc_plus = top_plus[self._inc_top]
        else:
            self._c_plus = self._c_minus = None
            self._top_plus = self._inc_plus = None

    # ------------------------------------------------------------------
    # determinants and masks
    # ------------------------------------------------------------------

    def _gram(self, Z: np.ndarray, k: int) -> np.ndarray:
        """Gram matrices (M, F, k, k) for the dim-k faces."""
        E0 = Z[:, self._diag_idx[k]]                       # (M, F, k)
        ZIJ = Z[:, self._off_idx[k]] * self._offdiag_mask[k]
        return 0.5 * (E0[:, :, :, None] + E0[:, :, None, :] - ZIJ)

    def face_dets(self, Z: np.ndarray, k: int) -> np.ndarray:
        """Determinants (M, F) of the dim-k face Gram matrices."""
        if k == 1:
            return Z[:, self._diag_idx[1][:, 0]]
        A = self._gram(Z, k)
        if k == 2:
            return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] ** 2
        if k == 3:
            a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
            d, e, f = A[..., 1, 1], A[..., 1, 2], A[..., 2, 2]
            return a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d)
        return np.linalg.det(A)

    def _face_scales(self, Z: np.ndarray, k: int) -> np.ndarray:
        return Z[:, self._scale_idx[k]].max(axis=2) if k > 1 else Z[:, self._scale_idx[1][:, 0]]

    def metric_mask(self, Z: np.ndarray) -> np.ndarray:
        """Cone membership per sample, same tolerance rule as the scalar path."""
        ok = np.ones(Z.shape[0], dtype=bool)
        for k in range(1, self.n + 1):
            eps = DET_EPS * self._face_scales(Z, k) ** k
            ok &= (self.face_dets(Z, k) > eps).all(axis=1)
        return ok

    def cutoff_mask(self, Z: np.ndarray, cut: CutoffSpec) -> np.ndarray:
        """Cutoff membership per sample: det floor plus block norm bound."""
        inv_kappa = 1.0 / cut.kappa
        ok = np.ones(Z.shape[0], dtype=bool)
        for k in range(1, self.n + 1):
            ok &= (self.face_dets(Z, k) >= inv_kappa).all(axis=1)
        o = self.ordering
        if o.blocks is not None:
            plus, minus = Z[:, :o.n_plus], Z[:, o.n_plus_tilde:]
            if cut.norm == "sup":
                biggest = np.maximum(plus.max(axis=1), minus.max(axis=1))
            else:
                biggest = np.maximum(np.linalg.norm(plus, axis=1),
                                     np.linalg.norm(minus, axis=1))
        else:
            biggest = Z.max(axis=1) if cut.norm == "sup" else np.linalg.norm(Z, axis=1)
        return ok & (biggest <= cut.kappa)

    def violating_face(self, z: np.ndarray, cut: CutoffSpec | None = None):
        """First face failing the cone (or cutoff) condition for one vector."""
        Z = z[None, :]
        for k in range(1, self.n + 1):
            dets = self.face_dets(Z, k)[0]
            if cut is None:
                eps = DET_EPS * self._face_scales(Z, k)[0] ** k
                bad = np.nonzero(dets <= eps)[0]
            else:
                bad = np.nonzero(dets < 1.0 / cut.kappa)[0]
            if bad.size:
                f = int(bad[0])
                return self.faces[k][f], float(dets[f])
        return None

    # ------------------------------------------------------------------
    # volumes, angles, actions
    # ------------------------------------------------------------------

    def top_volumes(self, Z: np.ndarray) -> np.ndarray:
        return np.sqrt(self.face_dets(Z, self.n)) / math.factorial(self.n)

    def _tau_volumes(self, Z: np.ndarray) -> np.ndarray:
        k = self.n - 2
        if k == 0:
            return np.ones((Z.shape[0], len(self.faces.get(0, ())) or
                            len(self.K.k_simplexes(0))))
        return np.sqrt(self.face_dets(Z, k)) / math.factorial(k)

    def _extended_inverse_gram(self, Z: np.ndarray) -> np.ndarray:
        """Pairwise inner products of barycentric gradients, (M, T, n+1, n+1).

        Entry (i, j) is proportional to <grad lambda_i, grad lambda_j> with a
        common positive factor per simplex, which cancels in angle cosines.
        """
        n = self.n
        A = self._gram(Z, n)
        if n == 3:
            a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
            d, e, f = A[..., 1, 1], A[..., 1, 2], A[..., 2, 2]
            adj = np.empty(A.shape)
            adj[..., 0, 0] = d * f - e * e
            adj[..., 0, 1] = adj[..., 1, 0] = c * e - b * f
            adj[..., 0, 2] = adj[..., 2, 0] = b * e - c * d
            adj[..., 1, 1] = a * f - c * c
            adj[..., 1, 2] = adj[..., 2, 1] = b * c - a * e
            adj[..., 2, 2] = a * d - b * b
            B = adj
        else:
            B = np.linalg.inv(A)
        M, T = B.shape[0], B.shape[1]
        ext = np.empty((M, T, n + 1, n + 1))
        ext[:, :, 1:, 1:] = B
        row = -B.sum(axis=2)
        ext[:, :, 0, 1:] = row
        ext[:, :, 1:, 0] = row
        ext[:, :, 0, 0] = B.sum(axis=(2, 3))
        return ext

    def incidence_angles(self, Z: np.ndarray) -> np.ndarray:
        """Dihedral angle per (codim-2 face, top simplex) incidence, (M, I)."""
        ext = self._extended_inverse_gram(Z)
        t, lu, lw = self._inc_top, self._inc_lu, self._inc_lw
        num = ext[:, t, lu, lw]
        den = np.sqrt(ext[:, t, lu, lu] * ext[:, t, lw, lw])
        cos = num / den
        excursion = np.abs(cos).max(initial=0.0) - 1.0
        if excursion > ARCCOS_SLACK:
            raise NotRealizableError(
                f"dihedral cosine exceeds [-1, 1] by {excursion:.3e}")
        np.clip(cos, -1.0, 1.0, out=cos)
        return 0.5 - np.arccos(cos) / (2.0 * math.pi)

    def actions(self, Z: np.ndarray, validate: bool = False) -> ActionBatch:
        """Curvature and volume per sample, with half splits when available."""
        Z = np.asarray(Z, dtype=float)
        if validate:
            bad = ~self.metric_mask(Z)
            if bad.any():
                culprit = self.violating_face(Z[int(np.nonzero(bad)[0][0])])
                raise NotRealizableError(
                    f"metric outside the cone, first violation at {culprit[0]} "
                    f"(det = {culprit[1]:.3e})")
        vols = self.top_volumes(Z)
        tau_vols = self._tau_volumes(Z)
        angles = self.incidence_angles(Z)
        weighted = angles * tau_vols[:, self._inc_tau]
        R = tau_vols @ self._c_full - weighted.sum(axis=1)
        V = vols.sum(axis=1)
        if self.refl is None:
            return ActionBatch(R=R, V=V)
        plus = self._inc_plus
        R_plus = tau_vols @ self._c_plus - weighted[:, plus].sum(axis=1)
        R_minus = tau_vols @ self._c_minus - weighted[:, ~plus].sum(axis=1)
        V_plus = vols[:, self._top_plus].sum(axis=1)
        V_minus = vols[:, ~self._top_plus].sum(axis=1)
        return ActionBatch(R=R, V=V, R_plus=R_plus, R_minus=R_minus,
                           V_plus=V_plus, V_minus=V_minus)


def plus_engine(K: SimplicialComplex, refl: Reflection,
                ordering: EdgeOrdering) -> FixedComplexEngine:
    """Engine for the plus half as its own complex, with the split constants.

    Its edge layout is the plus prefix of the canonical ordering (own edges
    first, interface edges last), so plus vectors feed it directly.  Its
    curvature is the half-action term, not the intrinsic curvature of the
    half complex: interface faces carry the apportioned constants.
    """
    if ordering.blocks is None:
        raise ValueError("plus engine needs the canonical 3-block ordering")
    plus_edges = ordering.edges[:ordering.n_plus]
    plus_ordering = EdgeOrdering(plus_edges)
    c_plus, _ = split_constants(K, refl)
    return FixedComplexEngine(refl.k_plus, plus_ordering, constants=c_plus)
