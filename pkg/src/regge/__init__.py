"""Regge-calculus geometry on finite pseudomanifolds with Monte Carlo
reflection-positivity checks."""

__version__ = "0.1.0"

from .complexes import (Automorphism, EdgeOrdering, Reflection,  # noqa: F401
                        SimplicialComplex, boundary_complex, build_complex,
                        canonical_edge_order, double_complex,
                        is_pseudomanifold, lex_edge_order, verify_reflection)
from .geometry import (CutoffSpec, Metric, NotRealizableError,  # noqa: F401
                       dihedral_angle, gram_det, gram_matrix, in_cutoff,
                       is_metric, is_metric_fast, simplex_volume)
from .action import (ActionBreakdown, HilbertParams, deficit,  # noqa: F401
                     grad_R, hilbert_action, regge_curvature, split_action,
                     theta_pullback, total_volume)
