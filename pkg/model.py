# -*- coding: utf-8 -*-
"""
System description for coupled parabolic-transport systems on the torus.

    d/dt f - B f_xx + A f_x + K f = M u 1_omega,   B = diag(0, D)

The first d_h components are transported, the last d_p are diffused. This
module validates the hypotheses on (D, A, K, M), describes the control region
as arcs of the torus, builds the Fourier mode matrices

    B_n = -n^2 B - i n A - K

and splits C^d into the hyperbolic and parabolic spectral subspaces of
E(z) = B + z A - z^2 K at z = i/n.
"""

import logging

import numpy as np
import scipy.linalg as la

from errors import (DimensionMismatch, EigenvalueNotInSpectrum, GapNotFound, H1Violated, H3Violated,
                    H4Violated)
from polymat import PolyMatrix

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
ARC_TOL = 1e-12

DIAG_TOL = 1e-9
IMAG_TOL = 1e-9
PROJ_TOL = 1e-8
GAP_TOL = 1e-6
N_MIN_LIMIT = 1024


# ---------------------------------------------------------------------------
# control region
# ---------------------------------------------------------------------------

def _normalize_arcs(arcs):
    pieces = []
    for arc in arcs:
        try:
            start, end = (float(v) for v in arc)
        except (TypeError, ValueError):
            raise ValueError("arc {0!r} is not a (start, end) pair".format(arc))
        if not np.isfinite(start) or not np.isfinite(end) or end <= start:
            raise ValueError("arc ({0}, {1}) must have end > start".format(start, end))
        length = end - start
        if length >= TWO_PI - ARC_TOL:
            return [(0.0, TWO_PI)]
        start = float(np.mod(start, TWO_PI))
        end = start + length
        if end > TWO_PI:
            pieces.append((start, TWO_PI))
            pieces.append((0.0, end - TWO_PI))
        else:
            pieces.append((start, end))

    pieces.sort()
    merged = []
    for start, end in pieces:
        if merged and start <= merged[-1][1] + ARC_TOL:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    if len(merged) == 1 and merged[0][0] <= ARC_TOL and merged[0][1] >= TWO_PI - ARC_TOL:
        return [(0.0, TWO_PI)]
    return merged


class TorusSubset(object):
    """
    Open subset of the torus R / 2 pi Z given as disjoint arcs (start, end)
    with 0 <= start < end <= 2 pi. Arcs touching 0 and 2 pi are kept apart
    but treated as one component when the complement is measured.
    """

    def __init__(self, arcs):
        self._arcs = tuple(_normalize_arcs(arcs))
        if not self._arcs:
            raise ValueError("control region must contain at least one arc")

    @classmethod
    def full(cls):
        return cls([(0.0, TWO_PI)])

    def __repr__(self):
        return "<TorusSubset arcs={0} measure={1:.6g}>".format(len(self._arcs), self.measure)

    def __eq__(self, other):
        if not isinstance(other, TorusSubset):
            return NotImplemented
        return len(self._arcs) == len(other._arcs) and np.allclose(self._arcs, other._arcs)

    __hash__ = None

    @property
    def arcs(self):
        return self._arcs

    @property
    def measure(self):
        return float(sum(end - start for start, end in self._arcs))

    @property
    def is_full(self):
        return self.measure >= TWO_PI - ARC_TOL

    def complement_arcs(self):
        """Components of the complement as (start, end) with end possibly past 2 pi."""
        if self.is_full:
            return []
        gaps = []
        for (_, end), (start, _) in zip(self._arcs[:-1], self._arcs[1:]):
            if start - end > ARC_TOL:
                gaps.append((end, start))
        wrap_start, wrap_end = self._arcs[-1][1], self._arcs[0][0] + TWO_PI
        if wrap_end - wrap_start > ARC_TOL:
            gaps.append((wrap_start, wrap_end))
        return gaps

    def largest_gap(self):
        gaps = self.complement_arcs()
        if not gaps:
            return None
        return max(gaps, key=lambda g: g[1] - g[0])

    def contains(self, x):
        """Vectorized membership test of points x (radians, any real value)."""
        x = np.mod(np.asarray(x, dtype=float), TWO_PI)
        inside = np.zeros(x.shape, dtype=bool)
        for start, end in self._arcs:
            inside |= (x > start) & (x < end)
        if self.is_full:
            inside[:] = True
        return inside

    def rotated(self, shift):
        return TorusSubset([(start + shift, end + shift) for start, end in self._arcs])


def ell_omega(w):
    """Length of the largest connected component of the complement of w."""
    gap = w.largest_gap()
    return 0.0 if gap is None else float(gap[1] - gap[0])


# ---------------------------------------------------------------------------
# system
# ---------------------------------------------------------------------------

class TransportSpectrum(object):
    """Eigenvalues of the transport block A' with their spectral projections."""

    def __init__(self, eigenvalues, multiplicities, projections, scale):
        self.eigenvalues = tuple(float(mu) for mu in eigenvalues)
        self.multiplicities = tuple(int(k) for k in multiplicities)
        self.projections = tuple(projections)
        self._match_tol = 1e-8 * max(1.0, scale)

    def __repr__(self):
        return "<TransportSpectrum mu={0}>".format(", ".join("{0:.6g}".format(mu) for mu in self.eigenvalues))

    def __iter__(self):
        return iter(zip(self.eigenvalues, self.projections))

    def __len__(self):
        return len(self.eigenvalues)

    def index(self, mu):
        for idx, nu in enumerate(self.eigenvalues):
            if abs(nu - mu) <= self._match_tol:
                return idx
        raise EigenvalueNotInSpectrum(mu, self.eigenvalues)

    def projection(self, mu):
        return self.projections[self.index(mu)]

    @property
    def mu_star(self):
        return min(abs(mu) for mu in self.eigenvalues)


def _transport_spectrum(A_prime, imag_tol=IMAG_TOL, diag_tol=DIAG_TOL):
    scale = max(1.0, la.norm(A_prime, 2))
    w, V = la.eig(A_prime)
    if np.max(np.abs(w.imag)) > imag_tol * scale:
        raise H4Violated("A' has non-real eigenvalues {0}".format(w[np.abs(w.imag) > imag_tol * scale]))
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1.0 / diag_tol:
        raise H4Violated("A' is not diagonalizable (eigenvector condition number {0:.3e})".format(cond))
    Vinv = la.inv(V)
    residual = la.norm(V @ np.diag(w) @ Vinv - A_prime, 2)
    if residual > diag_tol * scale:
        raise H4Violated("A' eigendecomposition residual {0:.3e} too large".format(residual))

    mus = w.real
    order = np.argsort(mus)
    clusters = []
    for idx in order:
        if clusters and abs(mus[idx] - mus[clusters[-1][-1]]) <= 1e-8 * scale:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    eigenvalues, projections = [], []
    for cluster in clusters:
        eigenvalues.append(float(np.mean(mus[cluster])))
        projections.append(V[:, cluster] @ Vinv[cluster, :])
    return TransportSpectrum(eigenvalues, [len(c) for c in clusters], projections, scale)


class SystemSpec(object):
    """Validated system; build it with validate()."""

    def __init__(self, d_h, d_p, D, A, K, M, transport):
        self.d_h = d_h
        self.d_p = d_p
        self.D = D
        self.A = A
        self.K = K
        self.M = M
        self.transport = transport
        for matrix in (D, A, K, M):
            matrix.flags.writeable = False

    def __repr__(self):
        return "<SystemSpec d_h={0} d_p={1} m={2}>".format(self.d_h, self.d_p, self.m)

    @property
    def d(self):
        return self.d_h + self.d_p

    @property
    def m(self):
        return self.M.shape[1]

    @property
    def B(self):
        B = np.zeros((self.d, self.d))
        B[self.d_h:, self.d_h:] = self.D
        return B

    @property
    def hyperbolic(self):
        return slice(0, self.d_h)

    @property
    def parabolic(self):
        return slice(self.d_h, self.d)

    def block(self, matrix, rows, cols):
        """Sub-block of a d x d matrix; rows/cols are 'h' or 'p'."""
        pick = {"h": self.hyperbolic, "p": self.parabolic}
        return matrix[pick[rows], pick[cols]]

    @property
    def A_prime(self):
        return self.block(self.A, "h", "h")

    def to_dict(self):
        return {"d_h": self.d_h, "d_p": self.d_p, "D": self.D.tolist(), "A": self.A.tolist(),
                "K": self.K.tolist(), "M": self.M.tolist()}


def _real_matrix(name, value, shape=None):
    matrix = np.atleast_2d(np.asarray(value))
    if np.iscomplexobj(matrix):
        if np.any(matrix.imag != 0):
            raise DimensionMismatch("{0} must be real".format(name))
        matrix = matrix.real
    try:
        matrix = np.array(matrix, dtype=float)
    except (TypeError, ValueError):
        raise DimensionMismatch("{0} is not a numeric matrix".format(name))
    if matrix.ndim != 2:
        raise DimensionMismatch("{0} must be two-dimensional, got shape {1}".format(name, matrix.shape))
    if shape is not None and matrix.shape != shape:
        raise DimensionMismatch("{0} has shape {1}, expected {2}".format(name, matrix.shape, shape))
    return matrix


def validate(d_h, d_p, D, A, K, M, diag_tol=DIAG_TOL, imag_tol=IMAG_TOL):
    """
        Description
        -----------
            Checks the hypotheses on a raw system and returns a SystemSpec
            carrying the transport spectrum of A'.
        Input
        -----
            :param d_h, d_p: int, number of transported / diffused components.
            :param D: (d_p, d_p) diffusion matrix, spectrum in Re > 0.
            :param A: (d, d) transport matrix, A' = A[:d_h, :d_h] diagonalizable
                with real spectrum.
            :param K: (d, d) coupling matrix.
            :param M: (d, m) control matrix.
        Output
        ------
            :return: SystemSpec
    """
    for name, value in (("d_h", d_h), ("d_p", d_p)):
        if int(value) != value or value < 1:
            raise H1Violated("{0} must be a positive integer, got {1}".format(name, value))
    d_h, d_p = int(d_h), int(d_p)
    d = d_h + d_p
    D = _real_matrix("D", D, (d_p, d_p))
    A = _real_matrix("A", A, (d, d))
    K = _real_matrix("K", K, (d, d))
    M = _real_matrix("M", M)
    if M.shape[0] != d:
        if M.shape[1] == d and M.shape[0] == 1:
            M = M.T
        else:
            raise DimensionMismatch("M has shape {0}, expected ({1}, m)".format(M.shape, d))

    diffusion = la.eigvals(D)
    if np.any(diffusion.real <= 0.0):
        raise H3Violated("D has eigenvalues with nonpositive real part: {0}".format(
            diffusion[diffusion.real <= 0.0]))

    transport = _transport_spectrum(A[:d_h, :d_h], imag_tol=imag_tol, diag_tol=diag_tol)
    spec = SystemSpec(d_h, d_p, D, A, K, M, transport)
    logger.debug("validated %r with transport spectrum %r", spec, transport)
    return spec


def t_star(spec, w):
    """Minimal control time ell(omega) / mu_*, infinite when mu_* = 0."""
    mu_star = spec.transport.mu_star
    if mu_star <= spec.transport._match_tol:
        return float("inf")
    return ell_omega(w) / mu_star


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def mode_matrix(spec, n):
    return -float(n) ** 2 * spec.B - 1j * n * spec.A - spec.K


def adjoint_mode_matrix(spec, n):
    return -float(n) ** 2 * spec.B.T + 1j * n * spec.A.T - spec.K.T


def as_poly(spec):
    return PolyMatrix.from_terms({0: -spec.K, 1: -1j * spec.A, 2: -spec.B})


def symbol(spec, z):
    """E(z) = B + z A - z^2 K, so that B_n = -n^2 E(i/n)."""
    return spec.B + z * spec.A - z ** 2 * spec.K


def default_radius(spec):
    return 0.5 * float(np.min(la.eigvals(spec.D).real))


def spectral_split(spec, z, r=None, gap_tol=GAP_TOL, proj_tol=PROJ_TOL):
    """Projections of E(z) onto the eigenvalues inside / outside |lambda| = r."""
    r = default_radius(spec) if r is None else r
    E = symbol(spec, z)
    w, V = la.eig(E)
    if np.any(np.abs(np.abs(w) - r) < gap_tol):
        raise GapNotFound("eigenvalue of E({0}) within {1:g} of the circle |lambda| = {2:g}".format(z, gap_tol, r))
    inside = np.abs(w) < r
    if inside.sum() != spec.d_h:
        raise GapNotFound("{0} eigenvalues of E({1}) inside |lambda| = {2:g}, expected {3}".format(
            inside.sum(), z, r, spec.d_h))
    try:
        Vinv = la.inv(V)
    except la.LinAlgError:
        raise GapNotFound("E({0}) is not diagonalizable".format(z))
    P_h = V[:, inside] @ Vinv[inside, :]
    P_p = np.eye(spec.d) - P_h
    commutator = la.norm(P_h @ E - E @ P_h, 2)
    if commutator > proj_tol * max(1.0, la.norm(E, 2)) * max(1.0, la.norm(P_h, 2)):
        raise GapNotFound("spectral projection of E({0}) fails to commute (residual {1:.3e})".format(z, commutator))
    return P_h, P_p


def eigenprojection_split(spec, n, r=None, gap_tol=GAP_TOL, proj_tol=PROJ_TOL):
    """
    Hyperbolic and parabolic projections P_h, P_p at mode n, i.e. the spectral
    projections of E(i/n) for the small and the large eigenvalues.
    """
    if n == 0:
        raise GapNotFound("the splitting is defined for n != 0 only")
    return spectral_split(spec, 1j / n, r=r, gap_tol=gap_tol, proj_tol=proj_tol)


def hyperbolic_projection_asymptotics(spec, n):
    """First-order expansion P_h(z) = diag(I, 0) - z [[0, A12 D^-1], [D^-1 A21, 0]] + O(z^2)."""
    z = 1j / n
    Dinv = la.inv(spec.D)
    P = np.zeros((spec.d, spec.d), dtype=complex)
    P[spec.hyperbolic, spec.hyperbolic] = np.eye(spec.d_h)
    P[spec.hyperbolic, spec.parabolic] = -z * spec.block(spec.A, "h", "p") @ Dinv
    P[spec.parabolic, spec.hyperbolic] = -z * Dinv @ spec.block(spec.A, "p", "h")
    return P


def find_n_min(spec, r=None, limit=N_MIN_LIMIT):
    """Smallest n >= 1 such that the split exists at every |n'| >= n up to the scan limit."""
    n_min = None
    for n in range(limit, 0, -1):
        try:
            eigenprojection_split(spec, n, r=r)
            eigenprojection_split(spec, -n, r=r)
        except GapNotFound:
            break
        n_min = n
    if n_min is None:
        raise GapNotFound("no spectral gap found for |n| <= {0}".format(limit))
    logger.debug("hyperbolic/parabolic split available from |n| = %d", n_min)
    return n_min


def k_mu_star(spec, mu):
    """
    Effective damping of the adjoint transport eigenspace of mu,

        K_mu^* = P^* (K'^* + A21^* D^-* A12^*) P^*,   P = P'_mu,

    returned as a d_h x d_h matrix acting on range(P^*).
    """
    P = spec.transport.projection(mu)
    K11 = spec.block(spec.K, "h", "h")
    A12 = spec.block(spec.A, "h", "p")
    A21 = spec.block(spec.A, "p", "h")
    inner = K11 + A12 @ la.solve(spec.D, A21)
    return (P @ inner @ P).conj().T
