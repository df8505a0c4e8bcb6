"""Observable test functions on the plus-half coordinates.

Functions evaluate on plus vectors (own-edge block first, interface block
last, matching the canonical ordering prefix).  Minus-side functions use the
same vector layout through the reflection's block identification, which makes
the antilinear time-reversal map plain complex conjugation of the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import FixedComplexEngine, plus_engine
from .complexes import EdgeOrdering, Reflection, SimplicialComplex

KINDS = ("constant", "coordinate_monomial", "gaussian_radial",
         "curvature_plus", "volume_plus", "linear_form", "product")


class UnsupportedFunctionError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """One observable: a kind tag plus coefficients.

    support 'zero' marks functions of the interface coordinates only;
    side 'minus' marks functions living on the reflected half.
    """

    kind: str
    params: tuple = ()
    support: str = "plus"   # "plus" | "zero"
    side: str = "plus"      # "plus" | "minus"
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedFunctionError(f"unknown kind {self.kind!r}")
        if self.support not in ("plus", "zero"):
            raise ValueError(f"unknown support {self.support!r}")

    def with_side(self, side: str) -> "TestFunction":
        return TestFunction(self.kind, self.params, self.support, side, self.label)


def constant(value=1.0, label="") -> TestFunction:
    return TestFunction("constant", (complex(value),),
                        support="zero", label=label or f"const({value})")


def coordinate(index: int, power: int = 1, coeff=1.0, support: str = "plus",
               label="") -> TestFunction:
    return TestFunction("coordinate_monomial", (int(index), int(power), complex(coeff)),
                        support=support, label=label or f"z[{index}]^{power}")


def gaussian_radial(alpha: float, label="") -> TestFunction:
    return TestFunction("gaussian_radial", (float(alpha),),
                        label=label or f"exp(-{alpha}|z|^2)")


def linear_form(coeffs, power: int = 1, support: str = "plus", label="") -> TestFunction:
    a = tuple(complex(c) for c in coeffs)
    return TestFunction("linear_form", (a, int(power)), support=support,
                        label=label or f"<a,z>^{power}")


def curvature_plus() -> TestFunction:
    return TestFunction("curvature_plus", label="R_plus")


def volume_plus() -> TestFunction:
    return TestFunction("volume_plus", label="V_plus")


def product(f1: TestFunction, f2: TestFunction, label="") -> TestFunction:
    support = "zero" if f1.support == "zero" and f2.support == "zero" else "plus"
    return TestFunction("product", (f1, f2), support=support,
                        label=label or f"({f1.label})*({f2.label})")


class PlusContext:
    """Evaluation context for one (complex, reflection, ordering) triple."""

    def __init__(self, K: SimplicialComplex, refl: Reflection,
                 ordering: EdgeOrdering):
        if ordering.blocks is None:
            raise ValueError("plus context needs the canonical 3-block ordering")
        self.K = K
        self.refl = refl
        self.ordering = ordering
        self.n_plus = ordering.n_plus
        self.n_plus_tilde = ordering.n_plus_tilde
        self.zero_slice = slice(ordering.n_plus_tilde, ordering.n_plus)
        self._plus_engine: FixedComplexEngine | None = None

    @property
    def plus_engine(self) -> FixedComplexEngine:
        if self._plus_engine is None:
            self._plus_engine = plus_engine(self.K, self.refl, self.ordering)
        return self._plus_engine

    def check_support(self, f: TestFunction):
        """Reject zero-support declarations that actually read own-half edges."""
        if f.support != "zero":
            return
        if f.kind == "coordinate_monomial":
            if not (self.n_plus_tilde <= f.params[0] < self.n_plus):
                raise UnsupportedFunctionError(
                    f"coordinate {f.params[0]} is outside the interface block")
        elif f.kind == "linear_form":
            a = np.asarray(f.params[0])
            if np.any(a[:self.n_plus_tilde] != 0):
                raise UnsupportedFunctionError(
                    "linear form with zero support must vanish on own-half edges")
        elif f.kind == "product":
            self.check_support(f.params[0])
            self.check_support(f.params[1])
        elif f.kind != "constant":
            raise UnsupportedFunctionError(
                f"kind {f.kind!r} cannot be restricted to the interface")


def evaluate(f: TestFunction, ZP: np.ndarray, ctx: PlusContext) -> np.ndarray:
    """Evaluate on a batch of plus vectors, returning complex values."""
    if ZP.ndim == 1:
        return evaluate(f, ZP[None, :], ctx)[0]
    M = ZP.shape[0]
    if f.kind == "constant":
        return np.full(M, f.params[0], dtype=complex)
    if f.kind == "coordinate_monomial":
        idx, power, coeff = f.params
        return coeff * ZP[:, idx].astype(complex) ** power
    if f.kind == "gaussian_radial":
        (alpha,) = f.params
        return np.exp(-alpha * (ZP * ZP).sum(axis=1)).astype(complex)
    if f.kind == "linear_form":
        a, power = f.params
        return (ZP @ np.asarray(a, dtype=complex)) ** power
    if f.kind == "curvature_plus":
        return ctx.plus_engine.actions(ZP).R.astype(complex)
    if f.kind == "volume_plus":
        return ctx.plus_engine.actions(ZP).V.astype(complex)
    if f.kind == "product":
        f1, f2 = f.params
        return evaluate(f1, ZP, ctx) * evaluate(f2, ZP, ctx)
    raise UnsupportedFunctionError(f.kind)


def conj_function(f: TestFunction) -> TestFunction:
    """Pointwise complex conjugate, same side."""
    if f.kind == "constant":
        params = (f.params[0].conjugate(),)
    elif f.kind == "coordinate_monomial":
        params = (f.params[0], f.params[1], f.params[2].conjugate())
    elif f.kind == "gaussian_radial":
        params = f.params
    elif f.kind == "linear_form":
        params = (tuple(c.conjugate() for c in f.params[0]), f.params[1])
    elif f.kind in ("curvature_plus", "volume_plus"):
        params = f.params
    elif f.kind == "product":
        params = (conj_function(f.params[0]), conj_function(f.params[1]))
    else:
        raise UnsupportedFunctionError(f.kind)
    return TestFunction(f.kind, params, f.support, f.side,
                        label=f"conj({f.label})" if f.label else "")


def theta_map(f: TestFunction) -> TestFunction:
    """Antilinear time reversal: conjugate the kernel and flip the side.

    In the induced coordinates of the opposite half the reflected argument is
    the identity, so only conjugation and the side tag remain.
    """
    side = "minus" if f.side == "plus" else "plus"
    g = conj_function(f)
    return TestFunction(g.kind, g.params, g.support, side,
                        label=f"theta({f.label})" if f.label else "")


DIFFERENTIABLE = ("constant", "coordinate_monomial", "gaussian_radial",
                  "linear_form", "product")


def grad_eval(f: TestFunction, zp: np.ndarray, ctx: PlusContext) -> np.ndarray:
    """Symbolic gradient at one plus vector, for the polynomial/gaussian kinds."""
    zp = np.asarray(zp, dtype=float)
    g = np.zeros(zp.size, dtype=complex)
    if f.kind == "constant":
        return g
    if f.kind == "coordinate_monomial":
        idx, power, coeff = f.params
        g[idx] = coeff * power * zp[idx] ** (power - 1) if power != 0 else 0.0
        return g
    if f.kind == "gaussian_radial":
        (alpha,) = f.params
        return (-2.0 * alpha * np.exp(-alpha * (zp * zp).sum())) * zp.astype(complex)
    if f.kind == "linear_form":
        a, power = f.params
        a = np.asarray(a, dtype=complex)
        if power == 0:
            return g
        return power * (zp @ a) ** (power - 1) * a
    if f.kind == "product":
        f1, f2 = f.params
        v1 = evaluate(f1, zp, ctx)
        v2 = evaluate(f2, zp, ctx)
        return grad_eval(f1, zp, ctx) * v2 + v1 * grad_eval(f2, zp, ctx)
    raise UnsupportedFunctionError(
        f"kind {f.kind!r} has no implemented partial derivatives")


def default_corpus(ctx: PlusContext, kappa: float) -> list:
    """The fixed six-function family used by the positivity reports.

    Deterministic coefficients keyed only to the block sizes and the cutoff,
    so runs are comparable across machines.
    """
    n_plus = ctx.n_plus
    alpha = 1.0 / (2.0 * n_plus * kappa)
    a = tuple(((-1) ** j) / (j + 1.0) for j in range(n_plus))
    return [
        constant(1.0, label="unit"),
        coordinate(0, 1, label="z[first own edge]"),
        curvature_plus(),
        volume_plus(),
        gaussian_radial(alpha),
        linear_form(a, 1),
    ]


def sup_norm_on_samples(f: TestFunction, ZP: np.ndarray, ctx: PlusContext) -> float:
    return float(np.abs(evaluate(f, ZP, ctx)).max())
