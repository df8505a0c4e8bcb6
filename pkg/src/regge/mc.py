"""Monte Carlo layer: cutoff sampling, partition estimates, positivity checks.

Sampling is rejection from the bounding box of the cutoff region, in seeded
chunks so results never depend on thread count.  Estimators default to
reflection-paired evaluation: every draw is scored at the point and its
reflection, which turns the symmetry identities (Hermitian Gram entries,
time-reversal isometry, the full-vs-half curvature form identity) into exact
floating-point identities instead of statements up to Monte Carlo error.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .action import HilbertParams, engine_for
from .batch import FixedComplexEngine
from .complexes import Reflection, SimplicialComplex, canonical_edge_order
from .functions import PlusContext, TestFunction, evaluate, theta_map
from .geometry import CutoffSpec

DEFAULT_CHUNK = 16384
DEFAULT_JACKKNIFE_BLOCKS = 32


class FeasibilityError(RuntimeError):
    """The cutoff region admits no scaled uniform metric; kappa is too small."""


class AcceptanceFloorError(RuntimeError):
    """Rejection sampling fell below the configured acceptance-rate floor."""


class DegenerateWeightsError(RuntimeError):
    """Effective sample size of the importance weights is too small."""


@dataclass
class MCEstimate:
    value: complex
    stderr: float
    n_samples: int

    @property
    def real(self) -> float:
        return float(np.real(self.value))


def thread_count() -> int:
    raw = os.environ.get("REGGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# sample sets
# ---------------------------------------------------------------------------


class SampleSet:
    """Accepted cutoff points plus cached geometry for the estimators.

    Weights exp(-H) are recomputed per coupling choice so one sample set can
    serve several couplings with common random numbers.
    """

    def __init__(self, K: SimplicialComplex, refl: Reflection, cut: CutoffSpec,
                 points: np.ndarray, seed: int, attempt_count,
                 box_volume: float, sampler: str = "rejection"):
        self.K = K
        self.refl = refl
        self.cut = cut
        self.seed = int(seed)
        self.points = np.asarray(points, dtype=float)
        self.points.flags.writeable = False
        self.attempt_count = attempt_count
        self.box_volume = float(box_volume)
        self.sampler = sampler
        self.engine = engine_for(K, refl)
        self.ordering = self.engine.ordering
        self.ctx = PlusContext(K, refl, self.ordering)
        self._actions = None
        self._actions_theta = None
        self._weights: dict = {}
        self._func_cache: dict = {}

    @property
    def n(self) -> int:
        return self.points.shape[0]

    # -- cached geometry -------------------------------------------------

    def actions(self):
        if self._actions is None:
            self._actions = self.engine.actions(self.points)
        return self._actions

    def actions_theta(self):
        if self._actions_theta is None:
            perm = np.asarray(self.ordering.theta_positions, dtype=np.intp)
            self._actions_theta = self.engine.actions(self.points[:, perm])
        return self._actions_theta

    def weights(self, p: HilbertParams) -> np.ndarray:
        key = (p.gamma, p.lam)
        w = self._weights.get(key)
        if w is None:
            a = self.actions()
            w = np.exp(-(p.gamma * a.R + p.lam * a.V))
            if len(self._weights) > 16:
                self._weights.clear()
            self._weights[key] = w
        return w

    def plus_matrix(self) -> np.ndarray:
        """Plus vectors of the samples, (N, n_plus)."""
        return self.points[:, :self.ordering.n_plus]

    def reflected_plus_matrix(self) -> np.ndarray:
        """Plus vectors of the reflected samples, (N, n_plus)."""
        idx = np.asarray(self.ordering.reflected_plus_positions(), dtype=np.intp)
        return self.points[:, idx]

    def eval_pair(self, f: TestFunction) -> tuple[np.ndarray, np.ndarray]:
        """(f at the sample, f at the reflected sample), respecting the side tag."""
        self.ctx.check_support(f)
        on_a = self._eval_cached(f, "A")
        on_b = self._eval_cached(f, "B")
        return (on_a, on_b) if f.side == "plus" else (on_b, on_a)

    def _eval_cached(self, f: TestFunction, which: str) -> np.ndarray:
        key = (f, which)
        out = self._func_cache.get(key)
        if out is None:
            Z = self.plus_matrix() if which == "A" else self.reflected_plus_matrix()
            out = evaluate(f, Z, self.ctx)
            out.flags.writeable = False
            if len(self._func_cache) > 256:
                self._func_cache.clear()
            self._func_cache[key] = out
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.seed}|{self.cut.kappa}|{self.cut.norm}|{self.sampler}".encode())
        h.update(np.ascontiguousarray(self.points).tobytes())
        return h.hexdigest()


def feasibility_scale(engine: FixedComplexEngine, cut: CutoffSpec):
    """Smallest grid scale c with c * ones inside the cutoff, or None."""
    grid = np.geomspace(1.0 / cut.kappa, cut.kappa, 65)
    ones = np.ones(len(engine.ordering.edges))
    Z = grid[:, None] * ones[None, :]
    mask = engine.cutoff_mask(Z, cut)
    hits = np.nonzero(mask)[0]
    return float(grid[hits[0]]) if hits.size else None


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(index,)))


def sample_cutoff(K: SimplicialComplex, refl: Reflection, cut: CutoffSpec,
                  n_target: int, seed: int, chunk: int = DEFAULT_CHUNK,
                  floor: float = 1e-6, threads: int | None = None) -> SampleSet:
    """Exactly n_target i.i.d. uniform points of the cutoff region by rejection.

    Draws come from the box [1/kappa, kappa]^edges in fixed-size seeded chunks;
    chunk i is reproducible in isolation, and chunks are consumed in index
    order, so the result is identical for any thread count.  The attempt count
    runs through the draw that produced the last accepted point.
    """
    if n_target <= 0:
        raise ValueError("n_target must be positive")
    engine = engine_for(K, refl)
    if feasibility_scale(engine, cut) is None:
        raise FeasibilityError(
            f"no scaled uniform metric lies in the cutoff at kappa={cut.kappa}; "
            "increase kappa")
    E = len(engine.ordering.edges)
    lo, hi = 1.0 / cut.kappa, cut.kappa
    box_volume = (hi - lo) ** E

    def run_chunk(i: int):
        draws = _chunk_rng(seed, i).uniform(lo, hi, size=(chunk, E))
        return draws, engine.cutoff_mask(draws, cut)

    threads = thread_count() if threads is None else max(1, threads)
    accepted = []
    got = 0
    attempts = 0
    next_chunk = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while got < n_target:
            wave = list(range(next_chunk, next_chunk + max(threads, 1)))
            next_chunk = wave[-1] + 1
            results = pool.map(run_chunk, wave) if pool else map(run_chunk, wave)
            for draws, mask in results:
                if got >= n_target:
                    continue  # drain the wave; extra chunks are discarded
                hits = np.nonzero(mask)[0]
                need = n_target - got
                if hits.size >= need:
                    last = int(hits[need - 1])
                    accepted.append(draws[hits[:need]])
                    got = n_target
                    attempts += last + 1
                else:
                    accepted.append(draws[hits])
                    got += hits.size
                    attempts += chunk
            if got < n_target and attempts >= max(1_000_000, 10 * chunk):
                rate = got / attempts
                if rate < floor:
                    raise AcceptanceFloorError(
                        f"acceptance rate {rate:.2e} below floor {floor:.0e} "
                        f"after {attempts} attempts (kappa={cut.kappa}, "
                        f"norm={cut.norm}, {E} edges)")
    finally:
        if pool:
            pool.shutdown(wait=False, cancel_futures=True)

    points = np.concatenate(accepted, axis=0)
    return SampleSet(K, refl, cut, points, seed, attempts, box_volume,
                     sampler="rejection")


def sample_cutoff_metropolis(K: SimplicialComplex, refl: Reflection,
                             cut: CutoffSpec, n_target: int, seed: int,
                             burn_in: int = 2000, thin: int = 5,
                             step_fraction: float = 0.15) -> SampleSet:
    """Random-walk sampler targeting the uniform law on the cutoff region.

    Proposals are componentwise uniform steps, rejected whenever the candidate
    leaves the region; every other stored state applies the reflection, which
    preserves the target.  Partition estimates are not available from these
    sets (no acceptance-rate-to-volume link); expectations are.
    """
    engine = engine_for(K, refl)
    scale = feasibility_scale(engine, cut)
    if scale is None:
        raise FeasibilityError(
            f"no scaled uniform metric lies in the cutoff at kappa={cut.kappa}")
    E = len(engine.ordering.edges)
    lo, hi = 1.0 / cut.kappa, cut.kappa
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0x4D43,)))
    window = step_fraction * (hi - lo)
    perm = np.asarray(engine.ordering.theta_positions, dtype=np.intp)

    state = np.full(E, scale)
    out = np.empty((n_target, E))
    kept = 0
    it = 0
    while kept < n_target:
        cand = state + rng.uniform(-window, window, size=E)
        if np.all((cand >= lo) & (cand <= hi)) and \
                bool(engine.cutoff_mask(cand[None, :], cut)[0]):
            state = cand
        it += 1
        if it > burn_in and it % thin == 0:
            if (it // thin) % 2 == 0:
                flipped = state[perm]
                if bool(engine.cutoff_mask(flipped[None, :], cut)[0]):
                    state = flipped
            out[kept] = state
            kept += 1
    return SampleSet(K, refl, cut, out, seed, None, (hi - lo) ** E,
                     sampler="metropolis")


# ---------------------------------------------------------------------------
# ratio estimators with block jackknife errors
# ---------------------------------------------------------------------------


def _block_bounds(n: int, blocks: int = DEFAULT_JACKKNIFE_BLOCKS) -> np.ndarray:
    blocks = max(1, min(blocks, n))
    return np.linspace(0, n, blocks + 1, dtype=np.intp)[:-1]


def _block_sums(arr: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    # complex block sums go through the float64 path componentwise so that a
    # complex numerator with zero imaginary part reduces bitwise like a real
    # denominator (reduceat kernels differ between dtypes)
    if np.iscomplexobj(arr):
        return (np.add.reduceat(arr.real, bounds)
                + 1j * np.add.reduceat(arr.imag, bounds))
    return np.add.reduceat(arr, bounds)


def _div_by_real(num, den):
    # componentwise division: numpy's complex/real path rescales internally
    # and loses the exactness of equal-numerator ratios
    if np.iscomplexobj(num):
        return np.real(num) / den + 1j * (np.imag(num) / den)
    return num / den


def jackknife_ratio(num_terms: np.ndarray, den_terms: np.ndarray,
                    blocks: int = DEFAULT_JACKKNIFE_BLOCKS) -> tuple[complex, float]:
    """Self-normalized mean with leave-one-block-out standard error."""
    n = num_terms.shape[0]
    N, D = num_terms.sum(), den_terms.sum()
    value = _div_by_real(N, D)
    bounds = _block_bounds(n, blocks)
    if bounds.size < 2:
        return value, 0.0
    Nb = _block_sums(num_terms, bounds)
    Db = _block_sums(den_terms, bounds)
    loo = _div_by_real(N - Nb, D - Db)
    center = loo.mean()
    B = loo.size
    var = (B - 1) / B * np.abs(loo - center) ** 2
    return value, float(np.sqrt(var.sum()))


def effective_sample_size(w: np.ndarray) -> float:
    s = w.sum()
    return float(s * s / (w * w).sum())


def estimate_partition(K: SimplicialComplex, samples: SampleSet,
                       p: HilbertParams) -> MCEstimate:
    """Absolute partition estimate: box volume times the mean accepted weight.

    Z ~ box_volume * sum(exp(-H)) / attempts; the box volume keeps coupling
    finite differences meaningful.
    """
    if samples.n == 0:
        raise ValueError("empty sample set")
    if samples.sampler != "rejection" or samples.attempt_count is None:
        raise ValueError("partition estimates need a rejection sample set "
                         "with a recorded attempt count")
    w = samples.weights(p)
    attempts = samples.attempt_count
    total = w.sum()
    z = samples.box_volume * total / attempts
    mean_sq = (w * w).sum() / attempts
    mean = total / attempts
    var = max(mean_sq - mean * mean, 0.0) / attempts
    return MCEstimate(value=z, stderr=samples.box_volume * math.sqrt(var),
                      n_samples=samples.n)


def _observable_terms(obs, samples: SampleSet, paired: bool) -> np.ndarray:
    if isinstance(obs, TestFunction):
        fa, fb = samples.eval_pair(obs)
        return 0.5 * (fa + fb) if paired else fa
    if callable(obs):
        va = obs(samples.points)
        if not paired:
            return np.asarray(va)
        perm = np.asarray(samples.ordering.theta_positions, dtype=np.intp)
        vb = obs(samples.points[:, perm])
        return 0.5 * (np.asarray(va) + np.asarray(vb))
    a = samples.actions()
    if obs in ("R", "V"):
        va = a.R if obs == "R" else a.V
        if not paired:
            return va
        at = samples.actions_theta()
        vb = at.R if obs == "R" else at.V
        return 0.5 * (va + vb)
    raise ValueError(f"unknown observable {obs!r}")


def estimate_expectation(obs, samples: SampleSet, p: HilbertParams,
                         paired: bool = True) -> MCEstimate:
    """Self-normalized expectation sum(obs * w) / sum(w) under exp(-H)."""
    if samples.n == 0:
        raise ValueError("empty sample set")
    w = samples.weights(p)
    vals = _observable_terms(obs, samples, paired)
    value, se = jackknife_ratio(w * vals, w)
    return MCEstimate(value=value, stderr=se, n_samples=samples.n)


def check_thermo_identity(K: SimplicialComplex, samples: SampleSet,
                          p: HilbertParams, delta: float) -> dict:
    """Expectations versus coupling log-derivatives of Z, common random numbers.

    <R> should match -(ln Z(gamma+d) - ln Z(gamma-d)) / 2d and <V> the same in
    lambda.  Reusing one sample set for both shifted couplings makes the
    residual a smooth O(delta^2) quantity rather than a noisy difference.
    """
    if samples.n == 0:
        raise ValueError("empty sample set")
    a = samples.actions()
    w = samples.weights(p)
    ess = effective_sample_size(w)
    if ess < 10:
        raise DegenerateWeightsError(
            f"effective sample size {ess:.1f} < 10 at gamma={p.gamma}, lam={p.lam}")

    report = {"delta": delta, "ess": ess}
    for name, obs, shift in (("R", a.R, "gamma"), ("V", a.V, "lambda")):
        if shift == "gamma":
            wp = samples.weights(HilbertParams(p.gamma + delta, p.lam))
            wm = samples.weights(HilbertParams(p.gamma - delta, p.lam))
        else:
            wp = samples.weights(HilbertParams(p.gamma, p.lam + delta))
            wm = samples.weights(HilbertParams(p.gamma, p.lam - delta))

        num = w * obs
        mean = num.sum() / w.sum()
        diff = mean + (math.log(wp.sum()) - math.log(wm.sum())) / (2 * delta)

        bounds = _block_bounds(samples.n)
        Sb = np.add.reduceat(w, bounds)
        Nb = np.add.reduceat(num, bounds)
        Pb = np.add.reduceat(wp, bounds)
        Mb = np.add.reduceat(wm, bounds)
        loo = ((num.sum() - Nb) / (w.sum() - Sb)
               + (np.log(wp.sum() - Pb) - np.log(wm.sum() - Mb)) / (2 * delta))
        B = loo.size
        se = math.sqrt((B - 1) / B * ((loo - loo.mean()) ** 2).sum())
        report[name] = {
            "mean": float(mean),
            "log_z_slope": float(-(math.log(wp.sum()) - math.log(wm.sum())) / (2 * delta)),
            "residual": float(diff),
            "stderr": se,
            "sigma_units": float(abs(diff) / se) if se > 0 else 0.0,
            "relative": float(abs(diff) / max(abs(mean), 1e-300)),
        }
    return report


# ---------------------------------------------------------------------------
# reflection scalar product
# ---------------------------------------------------------------------------


def _inner_terms(f1: TestFunction, f2: TestFunction, samples: SampleSet,
                 p: HilbertParams, paired: bool) -> tuple[np.ndarray, np.ndarray]:
    if f1.side != f2.side:
        raise ValueError("inner product requires functions on the same side")
    w = samples.weights(p)
    f1_z, f1_tz = samples.eval_pair(f1)
    f2_z, f2_tz = samples.eval_pair(f2)
    if paired:
        core = 0.5 * (np.conj(f1_tz) * f2_z + np.conj(f1_z) * f2_tz)
    else:
        core = np.conj(f1_tz) * f2_z
    return w * core, w


def rp_inner(f1: TestFunction, f2: TestFunction, samples: SampleSet,
             p: HilbertParams, paired: bool = True) -> MCEstimate:
    """Reflection scalar product estimate <f1, f2>: conj at the reflected point.

    Pairing evaluates each draw at the point and its reflection, making
    conjugate symmetry exact at the estimator level.
    """
    num, den = _inner_terms(f1, f2, samples, p, paired)
    value, se = jackknife_ratio(num, den)
    return MCEstimate(value=value, stderr=se, n_samples=samples.n)


def time_zero_inner(f0: TestFunction, samples: SampleSet,
                    p: HilbertParams) -> MCEstimate:
    """Interface-sector squared norm: |f0|^2 is scored at the sample directly."""
    if f0.support != "zero":
        raise ValueError("time-zero inner product needs an interface-supported function")
    w = samples.weights(p)
    fa, _ = samples.eval_pair(f0)
    vals = np.abs(fa) ** 2
    value, se = jackknife_ratio(w * vals, w)
    return MCEstimate(value=value, stderr=se, n_samples=samples.n)


@dataclass
class RPReport:
    gram: np.ndarray
    entry_stderr: np.ndarray
    eigenvalues: np.ndarray
    min_eigenvalue: float
    verdict: str
    estimator: str
    extras: dict = field(default_factory=dict)


def rp_gram(fs, samples: SampleSet, p: HilbertParams,
            paired: bool = True) -> RPReport:
    """Hermitian Gram matrix of the reflection scalar product with jackknife errors."""
    fs = list(fs)
    if not fs:
        raise ValueError("need at least one test function")
    m = len(fs)
    gram = np.empty((m, m), dtype=complex)
    err = np.empty((m, m))
    for i, fi in enumerate(fs):
        for j, fj in enumerate(fs):
            num, den = _inner_terms(fi, fj, samples, p, paired)
            value, se = jackknife_ratio(num, den)
            gram[i, j] = value
            err[i, j] = se
    eigs = np.sort(np.linalg.eigvalsh(gram))
    min_eig = float(eigs[0])
    tol = 3.0 * float(err.max())
    verdict = "psd_within_tolerance" if min_eig >= -tol else "violation"
    return RPReport(gram=gram, entry_stderr=err, eigenvalues=eigs,
                    min_eigenvalue=min_eig, verdict=verdict,
                    estimator="naive_paired" if paired else "naive",
                    extras={"labels": [f.label for f in fs],
                            "psd_tolerance": tol})


def rp_gram_factorized(fs, K: SimplicialComplex, refl: Reflection,
                       cut: CutoffSpec, p: HilbertParams, n_z0: int,
                       m_inner: int, seed: int) -> RPReport:
    """Nested estimator: interface slices outside, conditional half-samples inside.

    For each interface draw the same conditional batch scores every function,
    so the accumulated matrix is a sum of rank-1 Hermitian outer products and
    hence positive semidefinite by construction, at the cost of an upward
    O(1/m_inner) bias that vanishes with the inner batch size.  Entries are
    normalized by the constant-function diagonal, the partition estimate.
    """
    fs = list(fs)
    if not fs:
        raise ValueError("need at least one test function")
    engine = engine_for(K, refl)
    ordering = engine.ordering
    ctx = PlusContext(K, refl, ordering)
    peng = ctx.plus_engine
    if feasibility_scale(engine, cut) is None:
        raise FeasibilityError(
            f"no scaled uniform metric lies in the cutoff at kappa={cut.kappa}")

    unit_idx = None
    for i, f in enumerate(fs):
        if f.kind == "constant" and f.params[0] == 1.0:
            unit_idx = i
            break
    cols = list(fs)
    if unit_idx is None:
        cols.append(TestFunction("constant", (complex(1.0),), support="zero"))
        unit_idx = len(cols) - 1
        appended = True
    else:
        appended = False

    pt, q = ordering.n_plus_tilde, ordering.n_zero
    lo, hi = 1.0 / cut.kappa, cut.kappa
    tilde_volume = (hi - lo) ** pt
    slice_rng = _chunk_rng(seed, 0)
    z0_batch = slice_rng.uniform(lo, hi, size=(n_z0, q))

    nf = len(cols)
    fhat = np.zeros((n_z0, nf), dtype=complex)
    skipped = 0
    for s in range(n_z0):
        rng = _chunk_rng(seed, s + 1)
        tilde = rng.uniform(lo, hi, size=(m_inner, pt))
        ZP = np.concatenate([tilde, np.broadcast_to(z0_batch[s], (m_inner, q))],
                            axis=1)
        mask = peng.cutoff_mask(ZP, cut)
        if not mask.any():
            skipped += 1
            continue
        inside = ZP[mask]
        a = peng.actions(inside)
        wt = np.exp(-(p.gamma * a.R + p.lam * a.V))
        for jf, f in enumerate(cols):
            ctx.check_support(f)
            vals = evaluate(f, inside, ctx)
            fhat[s, jf] = tilde_volume * (vals * wt).sum() / m_inner

    raw = fhat.conj().T @ fhat
    raw = 0.5 * (raw + raw.conj().T)
    zhat_quadratic = float(np.real(raw[unit_idx, unit_idx]))
    if zhat_quadratic <= 0:
        raise AcceptanceFloorError(
            f"all {n_z0} interface slices were infeasible or empty "
            f"({skipped} skipped)")
    gram_full = raw / zhat_quadratic
    zero_volume = (hi - lo) ** q
    zhat = zero_volume * zhat_quadratic / n_z0

    # jackknife over interface slices of the normalized entries
    num = np.einsum("si,sj->sij", fhat.conj(), fhat)
    den = (np.abs(fhat[:, unit_idx]) ** 2).real
    bounds = _block_bounds(n_z0)
    Nb = (np.add.reduceat(num.real, bounds, axis=0)
          + 1j * np.add.reduceat(num.imag, bounds, axis=0))
    Db = np.add.reduceat(den, bounds)
    Ntot, Dtot = num.sum(axis=0), den.sum()
    loo = _div_by_real(Ntot[None] - Nb, (Dtot - Db)[:, None, None])
    B = loo.shape[0]
    err_full = np.sqrt((B - 1) / B *
                       (np.abs(loo - loo.mean(axis=0)) ** 2).sum(axis=0))

    keep = slice(0, len(fs)) if appended else slice(0, nf)
    gram = gram_full[keep, keep]
    err = err_full[keep, keep]
    eigs = np.sort(np.linalg.eigvalsh(gram))
    min_eig = float(eigs[0])
    spectral = float(np.abs(eigs).max()) if eigs.size else 0.0
    verdict = ("psd_within_tolerance" if min_eig >= -1e-12 * max(spectral, 1e-300)
               else "violation")
    return RPReport(gram=gram, entry_stderr=err, eigenvalues=eigs,
                    min_eigenvalue=min_eig, verdict=verdict,
                    estimator="factorized",
                    extras={"labels": [f.label for f in fs],
                            "zhat": zhat, "n_z0": n_z0, "m_inner": m_inner,
                            "skipped_slices": skipped,
                            "psd_tolerance": 1e-12 * spectral})


# ---------------------------------------------------------------------------
# time reversal and field-operator quadratic forms
# ---------------------------------------------------------------------------


def check_theta_isometry(f1: TestFunction, f2: TestFunction,
                         samples: SampleSet, p: HilbertParams,
                         paired: bool = True) -> dict:
    """<Theta f1, Theta f2> on the minus side versus <f2, f1> on the plus side.

    The estimator algebra makes the two sides identical term by term, so the
    residual is exactly zero, paired or not.
    """
    lhs = rp_inner(theta_map(f1), theta_map(f2), samples, p, paired=paired)
    rhs = rp_inner(f2, f1, samples, p, paired=paired)
    residual = lhs.value - rhs.value
    return {"lhs": lhs, "rhs": rhs, "residual": residual,
            "exact": bool(residual == 0)}


def _quad_terms(g: TestFunction, f_pair, samples: SampleSet,
                paired: bool) -> np.ndarray:
    """Per-sample contributions of <psi(g), Phi(f) psi(g)> before weighting.

    f_pair = (f at the sample, f at the reflected sample).
    """
    g_z, g_tz = samples.eval_pair(g)
    f_z, f_tz = f_pair
    P = np.conj(g_tz) * g_z
    if paired:
        return 0.5 * (P * f_z + np.conj(P) * f_tz)
    return P * f_z


def _resolve_form_operand(f, samples: SampleSet):
    """Return a list of (f_z, f_tz) evaluation pairs whose terms add up to f.

    Whole-complex curvature and volume are split into the half observable and
    its reflection so the operator identities hold exactly under pairing.
    """
    if isinstance(f, TestFunction):
        return [samples.eval_pair(f)]
    if f in ("R_plus", "V_plus"):
        fn = TestFunction("curvature_plus" if f == "R_plus" else "volume_plus")
        return [samples.eval_pair(fn)]
    if f in ("R_full", "V_full"):
        fn = TestFunction("curvature_plus" if f == "R_full" else "volume_plus")
        z, tz = samples.eval_pair(fn)
        return [(z, tz), (tz, z)]  # the reflected-half observable swaps the pair
    raise ValueError(f"unknown field operand {f!r}")


def field_quadratic_form(g: TestFunction, f, samples: SampleSet,
                         p: HilbertParams, paired: bool = True) -> MCEstimate:
    """<psi(g), Phi(f) psi(g)>: multiplication operator f inside the product."""
    w = samples.weights(p)
    pairs = _resolve_form_operand(f, samples)
    terms = _quad_terms(g, pairs[0], samples, paired)
    for extra in pairs[1:]:
        terms = terms + _quad_terms(g, extra, samples, paired)
    value, se = jackknife_ratio(w * terms, w)
    return MCEstimate(value=value, stderr=se, n_samples=samples.n)


def check_curvature_form_identity(g: TestFunction, samples: SampleSet,
                                  p: HilbertParams) -> dict:
    """Whole-complex curvature form versus twice the real part of the half form.

    Under pairing the residual is exactly zero for any complex g; for real g
    the half form itself is real so the factor-2 variant holds too.
    """
    lhs = field_quadratic_form(g, "R_full", samples, p, paired=True)
    half = field_quadratic_form(g, "R_plus", samples, p, paired=True)
    rhs = 2.0 * np.real(half.value)
    residual = lhs.value - rhs
    return {"full": lhs, "half": half, "rhs": rhs, "residual": residual,
            "exact": bool(residual == 0)}


def find_interface_fixing_symmetry(K: SimplicialComplex, refl: Reflection,
                                   limit: int = 40320):
    """Search for a non-identity automorphism fixing the interface pointwise.

    Used by the null-direction diagnostics; returns None when the complex has
    no such symmetry (the common case for small fixtures).
    """
    import itertools as it

    from .complexes import Automorphism

    fixed = [v for (v,) in refl.k_zero.k_simplexes(0)]
    movable = [v for (v,) in K.k_simplexes(0) if v not in fixed]
    if math.factorial(len(movable)) > limit:
        return None
    for perm in it.permutations(movable):
        if perm == tuple(movable):
            continue
        mapping = dict(zip(movable, perm))
        auto = Automorphism.extend_identity(mapping, K.vertices)
        if auto.is_automorphism_of(K) and \
                auto.apply_complex(refl.k_plus) == refl.k_plus:
            return auto
    return None
