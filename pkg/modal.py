# -*- coding: utf-8 -*-
"""
Spectral Kalman analysis of a parabolic-transport system.

For each Fourier mode n the pair (B_n, M) gives the Kalman matrix

    [B_n | M]_k = (M  B_n M  ...  B_n^{k-1} M)

whose entries are polynomials in n. The Gram determinant of the polynomial
form locates the finitely many modes where the rank drops, the adjugate gives
the pseudo-inverse whose rational degrees fix the regularity index p, and the
transport eigenspaces are checked for unobservable directions.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from model import as_poly, find_n_min, k_mu_star, mode_matrix, t_star
from errors import DimensionMismatch, GapNotFound
from polymat import (IDENTICALLY_ZERO, GUARD, PolyMatrix, RationalDegree, det_bound, hstack, integer_roots,
                     polymat_adjugate, polymat_det)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
BOUNDARY_TOL = 1e-9


class _Never(object):
    def __repr__(self):
        return "never-full-rank"

    def __bool__(self):
        return False


NEVER_FULL_RANK = _Never()


class Verdict(enum.Enum):
    NEVER = "NEVER"
    TOO_SHORT = "TOO_SHORT"
    CONTROLLABLE_REGULAR = "CONTROLLABLE_REGULAR"
    BOUNDARY = "BOUNDARY"


@dataclass(frozen=True)
class ModeReport:
    n: int
    rank: int
    k_n: object
    range_basis: np.ndarray = field(repr=False)
    ambiguous: bool = False

    def violation(self, vector):
        """Distance of a coefficient vector to range([B_n|M])."""
        vector = np.asarray(vector, dtype=complex)
        Q = self.range_basis
        return float(la.norm(vector - Q @ (Q.conj().T @ vector)))

    def describe(self):
        d = self.range_basis.shape[0]
        if self.rank == d:
            return "no constraint"
        return "c_{0}(f0) in a {1}-dimensional subspace of C^{2}".format(self.n, self.rank, d)


@dataclass(frozen=True)
class RoughObstruction:
    mu: float
    obstructed: bool
    witness_dim: int
    witness_basis: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Regularity:
    p_index: int
    p_bound: int
    pinv_degree: int
    pinv_bound: int
    block_degrees: tuple


@dataclass(frozen=True)
class AnalysisReport:
    T: float
    t_star: float
    k0: object
    p_index: object
    p_bound: object
    pinv_degree: object
    pinv_bound: object
    exceptional: tuple
    k0_deficient: tuple
    rough_obstructions: tuple
    verdict: Verdict
    n_min: object = None
    notes: tuple = ()

    @property
    def regularity_class(self):
        if self.verdict is Verdict.NEVER or self.p_index is None:
            return None
        return "H^{0} (hyperbolic) x L^2 (parabolic), intersected with E".format(self.p_index)

    def exceptional_mode(self, n):
        for mode in self.exceptional:
            if mode.n == n:
                return mode
        return None

    def to_dict(self):
        return {
            "T": self.T,
            "t_star": self.t_star,
            "k0": self.k0 if self.k0 is not NEVER_FULL_RANK else repr(NEVER_FULL_RANK),
            "p_index": self.p_index,
            "p_bound": self.p_bound,
            "pinv_degree": self.pinv_degree,
            "pinv_bound": self.pinv_bound,
            "regularity_class": self.regularity_class,
            "exceptional": [{"n": m.n, "rank": m.rank, "ambiguous": m.ambiguous, "constraint": m.describe(),
                             "range_basis": _complex_to_pairs(m.range_basis)} for m in self.exceptional],
            "k0_deficient": list(self.k0_deficient),
            "rough_obstructions": [{"mu": r.mu, "obstructed": r.obstructed, "witness_dim": r.witness_dim}
                                   for r in self.rough_obstructions],
            "verdict": self.verdict.value,
            "n_min": self.n_min,
            "notes": list(self.notes),
        }


def _complex_to_pairs(array):
    return np.stack([array.real, array.imag], axis=-1).tolist()


# ---------------------------------------------------------------------------
# numeric helpers
# ---------------------------------------------------------------------------

def numeric_rank(matrix, tol=RANK_TOL):
    s = la.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(matrix.shape) * tol))


def range_basis(matrix, tol=RANK_TOL):
    U, s, _ = la.svd(matrix)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    rank = int(np.sum(s > s[0] * max(matrix.shape) * tol))
    return U[:, :rank]


def kalman_matrix(spec, n, k):
    """Numeric [B_n|M]_k."""
    Bn = mode_matrix(spec, n)
    blocks = [spec.M.astype(complex)]
    for _ in range(k - 1):
        blocks.append(Bn @ blocks[-1])
    return np.hstack(blocks)


def _balanced(matrix):
    # columns of [B_n|M]_k grow like n^(2j); unit columns keep the rank test scale free
    norms = la.norm(matrix, axis=0)
    keep = norms > 0
    return matrix[:, keep] / norms[keep]


def kalman_rank(spec, n, k):
    K = _balanced(kalman_matrix(spec, n, k))
    return numeric_rank(K) if K.size else 0


def kalman_poly(spec, k):
    """[B_n|M]_k as a d x (m k) PolyMatrix in n."""
    if not 1 <= k <= spec.d:
        raise DimensionMismatch("Kalman depth must lie in [1, {0}], got {1}".format(spec.d, k))
    Bn = as_poly(spec)
    blocks = [PolyMatrix.constant(spec.M)]
    for _ in range(k - 1):
        blocks.append(Bn @ blocks[-1])
    return hstack(blocks)


def gram(spec, k):
    K = kalman_poly(spec, k)
    return K, K @ K.herm_transpose()


def gram_determinant(spec, k):
    return polymat_det(gram(spec, k)[1])


def _gram_roots(spec, k, guard=GUARD):
    G = gram(spec, k)[1]
    P = polymat_det(G)
    bound = det_bound(G).coeffs
    if bound.size == 0:
        # every term of the permanent vanishes, so does the determinant
        return P, IDENTICALLY_ZERO
    reference = float(np.abs(bound).max())
    return P, integer_roots(P, guard=guard, reference=reference)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def kalman_depth(spec):
    """Smallest k whose Gram determinant is not identically zero, or NEVER_FULL_RANK."""
    for k in range(1, spec.d + 1):
        _, roots = _gram_roots(spec, k)
        if roots is not IDENTICALLY_ZERO:
            logger.debug("Kalman depth k0 = %d", k)
            return k
    logger.info("Kalman matrix never reaches full rank")
    return NEVER_FULL_RANK


def mode_depth(spec, n):
    """k(n): smallest k with rank [B_n|M]_k = d, or NEVER_FULL_RANK."""
    for k in range(1, spec.d + 1):
        if kalman_rank(spec, n, k) == spec.d:
            return k
    return NEVER_FULL_RANK


def _deficient(spec, k, guard=GUARD):
    """Modes with rank [B_n|M]_k < d, cross-checked by SVD over |n| <= guard."""
    _, roots = _gram_roots(spec, k, guard=guard)
    if roots is IDENTICALLY_ZERO:
        raise ValueError("Kalman matrix of depth {0} is rank deficient at every mode".format(k))
    symbolic = set(roots)
    numeric = {n for n in range(-guard, guard + 1) if kalman_rank(spec, n, k) < spec.d}
    return symbolic, numeric


def exceptional_modes(spec, guard=GUARD):
    """
        Description
        -----------
            Integer modes where rank [B_n|M]_d < d. Candidates are the integer
            roots of det(Gram) at depth d, confirmed by SVD; a mode where the
            polynomial and the SVD disagree is kept and flagged ambiguous.
        Input
        -----
            :param spec: SystemSpec with finite Kalman depth.
        Output
        ------
            :return: tuple of ModeReport sorted by n, each with an orthonormal
                basis of range([B_n|M]).
    """
    d = spec.d
    symbolic, numeric = _deficient(spec, d, guard=guard)
    modes = []
    for n in sorted(symbolic | numeric):
        K = kalman_matrix(spec, n, d)
        basis = range_basis(_balanced(K))
        ambiguous = (n in symbolic) != (basis.shape[1] < d)
        if ambiguous:
            logger.warning("mode n=%d: Gram determinant and SVD disagree on the Kalman rank", n)
        modes.append(ModeReport(n=n, rank=basis.shape[1], k_n=mode_depth(spec, n), range_basis=basis,
                                ambiguous=ambiguous))
    logger.debug("exceptional modes: %s", [m.n for m in modes])
    return tuple(modes)


def k0_deficient_modes(spec, k0=None, guard=GUARD):
    """Modes where depth k0 is not yet full rank (a superset of the exceptional modes)."""
    k0 = kalman_depth(spec) if k0 is None else k0
    if k0 is NEVER_FULL_RANK:
        raise ValueError("Kalman matrix never reaches full rank")
    symbolic, numeric = _deficient(spec, k0, guard=guard)
    return tuple(sorted(symbolic | numeric))


def regularity_index(spec, k0=None):
    """
    Regularity index p = max_j (j - 1 + deg Q_j^h - deg P) with

        P(n) = det(G),  Q(n) = [B_n|M]_k0^* Adj(G),  G = [B_n|M]_k0 [B_n|M]_k0^*,

    Q_j^h being the j-th block of m rows of Q restricted to the hyperbolic
    columns. Also reports the numerator degree of the pseudo-inverse Q / P.
    """
    k0 = kalman_depth(spec) if k0 is None else k0
    if k0 is NEVER_FULL_RANK:
        raise ValueError("regularity index needs a finite Kalman depth")
    K, G = gram(spec, k0)
    P = polymat_det(G)
    Q = K.herm_transpose() @ polymat_adjugate(G)
    m, d_h = spec.m, spec.d_h
    block_degrees = tuple(RationalDegree(j) + Q[j * m:(j + 1) * m, :d_h].degree - P.degree for j in range(k0))
    p = max(block_degrees)
    if p.is_minus_infinity:
        raise ValueError("pseudo-inverse vanishes on the hyperbolic block")
    d = spec.d
    result = Regularity(p_index=int(p), p_bound=4 * d * (k0 - 1), pinv_degree=max(0, int(Q.entry_degrees().max())),
                        pinv_bound=2 * (k0 - 1) * (2 * d - 1), block_degrees=block_degrees)
    logger.debug("regularity: p=%d (bound %d), pseudo-inverse degree %d (bound %d)", result.p_index,
                 result.p_bound, result.pinv_degree, result.pinv_bound)
    return result


def rough_obstruction(spec, mu):
    """
    Unobservable part of the adjoint transport eigenspace of mu.

    On range((P'_mu)^*) the adjoint profile obeys g' = -K_mu^* g and is seen
    through g -> M^*(g, 0). The witness subspace is the kernel of the
    observability matrix of that pair.
    """
    P = spec.transport.projection(mu)
    Q = la.orth(P.conj().T)
    Kr = Q.conj().T @ k_mu_star(spec, mu) @ Q
    C = spec.M[spec.hyperbolic, :].conj().T @ Q
    rows, block = [], C
    for _ in range(Q.shape[1]):
        rows.append(block)
        block = block @ Kr
    obs = np.vstack(rows)
    null = la.null_space(obs, rcond=max(obs.shape) * RANK_TOL)
    witness = Q @ null
    logger.debug("mu=%g: unobservable witness dimension %d", mu, witness.shape[1])
    return RoughObstruction(mu=float(mu), obstructed=witness.shape[1] > 0, witness_dim=witness.shape[1],
                            witness_basis=witness)


def time_verdict(T, tstar, tol=BOUNDARY_TOL):
    if np.isinf(tstar) or T < tstar - tol * max(1.0, tstar):
        return Verdict.TOO_SHORT
    if abs(T - tstar) <= tol * max(1.0, tstar):
        return Verdict.BOUNDARY
    return Verdict.CONTROLLABLE_REGULAR


def analyze(spec, w, T):
    """
        Description
        -----------
            Full controllability analysis of a validated system on the control
            region w for the horizon T.
        Output
        ------
            :return: AnalysisReport
    """
    tstar = t_star(spec, w)
    k0 = kalman_depth(spec)
    obstructions = tuple(rough_obstruction(spec, mu) for mu in spec.transport.eigenvalues)
    notes = []

    if k0 is NEVER_FULL_RANK:
        logger.info("verdict NEVER: Kalman rank condition fails at every mode")
        return AnalysisReport(T=T, t_star=tstar, k0=k0, p_index=None, p_bound=None, pinv_degree=None,
                              pinv_bound=None, exceptional=(), k0_deficient=(), rough_obstructions=obstructions,
                              verdict=Verdict.NEVER)

    exceptional = exceptional_modes(spec)
    reg = regularity_index(spec, k0)
    deficient = k0_deficient_modes(spec, k0)
    try:
        n_min = find_n_min(spec)
    except GapNotFound as err:
        logger.warning("hyperbolic/parabolic split unavailable: %s", err)
        n_min = None

    verdict = time_verdict(T, tstar)
    if verdict is Verdict.BOUNDARY:
        logger.warning("T = T* = %g: null-controllability at the minimal time is not decided", tstar)
        notes.append("T equals T*; the equality case is left open")
    if any(m.ambiguous for m in exceptional):
        notes.append("some exceptional modes are ambiguous between the polynomial and SVD rank tests")
    if any(r.obstructed for r in obstructions):
        notes.append("rough L^2 data cannot all be steered to zero (unobservable transport direction)")
    logger.info("verdict %s: T*=%g k0=%d p=%d exceptional=%s", verdict.value, tstar, k0, reg.p_index,
                [m.n for m in exceptional])
    return AnalysisReport(T=T, t_star=tstar, k0=k0, p_index=reg.p_index, p_bound=reg.p_bound,
                          pinv_degree=reg.pinv_degree, pinv_bound=reg.pinv_bound, exceptional=exceptional,
                          k0_deficient=deficient, rough_obstructions=obstructions, verdict=verdict, n_min=n_min,
                          notes=tuple(notes))
