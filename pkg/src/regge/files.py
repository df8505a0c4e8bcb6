"""File formats: complex and metric JSON documents, sample-set binaries, reports.

Complex document:  {"n": int?, "maximal_simplexes": [[int, ...], ...],
                    "reflection": {"permutation": {"v": w, ...},
                                   "k_plus_maximal": [[int, ...], ...]}?}
Metric document:   {"z": {"v1-v2": number, ...}}  or  {"z": [flat array]}
                   (flat arrays follow the canonical edge order).
Sample sets:       binary, magic "RPSAMP1", then seed, kappa, norm flag,
                   edge count, point count, then row-major float64 points.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .action import default_ordering
from .complexes import (Automorphism, EdgeOrdering, Reflection,
                        SimplicialComplex, build_complex, verify_reflection)
from .geometry import CutoffSpec, Metric
from .mc import SampleSet

MAGIC = b"RPSAMP1\x00"
_HEADER = struct.Struct("<8sQdBxxxIQ")
NORM_FLAGS = {"sup": 0, "l2": 1}
NORM_NAMES = {0: "sup", 1: "l2"}


class DocumentError(ValueError):
    """Malformed input document, with field context in the message."""


@dataclass
class ComplexDocument:
    K: SimplicialComplex
    reflection: Reflection | None
    reflection_report: object | None
    raw: dict


def parse_complex_document(doc: dict) -> ComplexDocument:
    if not isinstance(doc, dict):
        raise DocumentError("complex document must be a JSON object")
    try:
        maximal = doc["maximal_simplexes"]
    except KeyError:
        raise DocumentError("missing field 'maximal_simplexes'")
    if not isinstance(maximal, list) or not maximal:
        raise DocumentError("'maximal_simplexes' must be a nonempty list of vertex lists")
    try:
        K = build_complex(maximal)
    except (ValueError, TypeError) as exc:
        raise DocumentError(f"bad simplex in 'maximal_simplexes': {exc}")
    if "n" in doc and doc["n"] is not None and int(doc["n"]) != K.n:
        raise DocumentError(f"declared n={doc['n']} but the complex has dimension {K.n}")

    reflection = None
    report = None
    if doc.get("reflection") is not None:
        spec = doc["reflection"]
        try:
            perm = {int(k): int(v) for k, v in spec["permutation"].items()}
            k_plus_max = spec["k_plus_maximal"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad 'reflection' section: {exc}")
        try:
            theta = Automorphism.extend_identity(perm, K.vertices)
            k_plus = K.closure_of(k_plus_max)
        except ValueError as exc:
            raise DocumentError(f"bad 'reflection' section: {exc}")
        report = verify_reflection(K, theta, k_plus)
        reflection = report.reflection
    return ComplexDocument(K=K, reflection=reflection, reflection_report=report,
                           raw=doc)


def load_complex(path) -> ComplexDocument:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_complex_document(doc)


def edge_key(edge) -> str:
    a, b = edge
    return f"{a}-{b}"


def parse_metric_document(doc: dict, ordering: EdgeOrdering) -> Metric:
    if not isinstance(doc, dict) or "z" not in doc:
        raise DocumentError("metric document must be an object with field 'z'")
    z = doc["z"]
    if isinstance(z, list):
        if len(z) != len(ordering):
            raise DocumentError(
                f"flat metric has {len(z)} entries, the complex has "
                f"{len(ordering)} edges")
        return Metric(np.asarray(z, dtype=float), ordering)
    if isinstance(z, dict):
        values = np.empty(len(ordering))
        seen = set()
        for key, val in z.items():
            try:
                a, b = (int(t) for t in key.split("-"))
            except ValueError:
                raise DocumentError(f"bad edge key {key!r}, expected 'v1-v2'")
            e = (a, b) if a < b else (b, a)
            if e not in ordering.position:
                raise DocumentError(f"edge {key!r} is not an edge of the complex")
            values[ordering.position[e]] = float(val)
            seen.add(e)
        missing = [e for e in ordering.edges if e not in seen]
        if missing:
            raise DocumentError(f"metric is missing {len(missing)} edges, "
                                f"e.g. {edge_key(missing[0])!r}")
        return Metric(values, ordering)
    raise DocumentError("'z' must be an edge map or a flat array")


def load_metric(path, K: SimplicialComplex,
                refl: Reflection | None = None) -> Metric:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_metric_document(doc, default_ordering(K, refl))


def metric_to_document(z: Metric) -> dict:
    return {"z": {edge_key(e): float(z.values[i])
                  for i, e in enumerate(z.ordering.edges)}}


# ---------------------------------------------------------------------------
# sample-set binary
# ---------------------------------------------------------------------------


def save_sampleset(path, samples: SampleSet) -> None:
    header = _HEADER.pack(MAGIC, samples.seed, samples.cut.kappa,
                          NORM_FLAGS[samples.cut.norm],
                          samples.points.shape[1], samples.points.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(samples.points, dtype="<f8").tobytes())


def load_sampleset(path, K: SimplicialComplex, refl: Reflection) -> SampleSet:
    """Rebuild a sample set from disk.

    The format stores no attempt count, so reloaded sets support expectations
    and Gram estimates but not absolute partition estimates.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise DocumentError(f"{path}: truncated sample-set header")
        magic, seed, kappa, norm_flag, n_edges, n_points = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise DocumentError(f"{path}: bad magic {magic!r}")
        if norm_flag not in NORM_NAMES:
            raise DocumentError(f"{path}: unknown norm flag {norm_flag}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n_edges * n_points:
        raise DocumentError(f"{path}: expected {n_edges * n_points} floats, "
                            f"found {data.size}")
    cut = CutoffSpec(kappa=kappa, norm=NORM_NAMES[norm_flag])
    ordering = default_ordering(K, refl)
    if len(ordering) != n_edges:
        raise DocumentError(
            f"{path}: sample set has {n_edges} edge columns, complex has "
            f"{len(ordering)}")
    points = data.reshape(n_points, n_edges)
    box_volume = (kappa - 1.0 / kappa) ** n_edges
    return SampleSet(K, refl, cut, points, seed, None, box_volume,
                     sampler="rejection")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def complex_matrix_to_json(m: np.ndarray) -> dict:
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
