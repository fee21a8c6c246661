# -*- coding: utf-8 -*-
"""
Minimum-energy control of the truncated system with forcing localized in omega.

The control is expanded as

    u(t, x) = sum_{q, |m| <= Nc} theta_{q,m} tau_q(t) e^{i m x}

on an orthonormal time basis tau_q of L^2(0, T). By Duhamel the final state of
mode n receives

    sum_{q,m} c_{n-m}(1_omega) G_{n,q} M theta_{q,m},   G_{n,q} = int_0^T e^{(T-s) B_n} tau_q(s) ds,

which defines the input map Phi. The least-norm solution of Phi theta = -e^{T L} f0
is the HUM control of the truncated problem, and the smallest retained singular
value of Phi measures how observable the truncated adjoint is.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from numpy.polynomial import Legendre, Polynomial
from scipy.integrate import quad_vec
from scipy.special import roots_jacobi

from dynamics import (PropagatorCache, SpectralField, evolve_free, indicator_coeffs, propagators, synthesize)
from errors import ConfigError, DimensionMismatch, QuadratureFailure, RankCollapse
from model import TWO_PI

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-10
QUAD_LIMIT = 20000
SVD_CUTOFF = 1e-10


# ---------------------------------------------------------------------------
# time bases
# ---------------------------------------------------------------------------

class PiecewiseConstantBasis(object):
    """tau_q = 1/sqrt(dt) on [q dt, (q+1) dt), q = 0..size-1."""

    kind = "pwc"

    def __init__(self, T, size):
        if T <= 0 or size < 1:
            raise ConfigError("piecewise-constant basis needs T > 0 and size >= 1")
        self.T = float(T)
        self.size = int(size)
        self.dt = self.T / self.size
        self.edges = np.linspace(0.0, self.T, self.size + 1)

    def __repr__(self):
        return "<PiecewiseConstantBasis T={0:.6g} size={1}>".format(self.T, self.size)

    def evaluate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.floor(t / self.dt).astype(int), 0, self.size - 1)
        out = np.zeros((self.size, t.size))
        inside = (t >= 0.0) & (t <= self.T)
        out[idx[inside], np.flatnonzero(inside)] = 1.0 / np.sqrt(self.dt)
        return out

    def derivative(self, order, t):
        if order == 0:
            return self.evaluate(t)
        raise ValueError("piecewise-constant basis has no derivatives")

    def describe(self):
        return {"kind": self.kind, "T": self.T, "size": self.size}


class BumpBasis(object):
    """
    tau_q(t) = (t (T - t))^k p_q(t), q = 0..size-1, with p_q polynomials chosen
    so that the tau_q are orthonormal in L^2(0, T). Every derivative of order
    below k vanishes at both endpoints.
    """

    kind = "bump"

    def __init__(self, T, size, flatness=3):
        if T <= 0 or size < 1 or flatness < 1:
            raise ConfigError("bump basis needs T > 0, size >= 1 and flatness >= 1")
        self.T = float(T)
        self.size = int(size)
        self.flatness = int(flatness)
        self.functions = self._orthonormal()

    def __repr__(self):
        return "<BumpBasis T={0:.6g} size={1} flatness={2}>".format(self.T, self.size, self.flatness)

    def _orthonormal(self):
        T, k, Q = self.T, self.flatness, self.size
        domain = [0.0, T]
        # nodes for the weight (1-s)^2k (1+s)^2k, exact for products of two Legendre polynomials below Q
        s, wts = roots_jacobi(Q + 1, 2 * k, 2 * k)
        legendre = np.stack([Legendre.basis(j)(s) for j in range(Q)], axis=1)
        scale = 0.5 * T * (0.25 * T ** 2) ** (2 * k)
        gram = scale * (legendre.T * wts) @ legendre
        L = la.cholesky(gram, lower=True)
        coeffs = la.solve_triangular(L, np.eye(Q), lower=True).T
        bump = Legendre.cast(Polynomial([0.0, T, -1.0]) ** k, domain=domain)
        return [bump * Legendre(coeffs[:, q], domain=domain) for q in range(Q)]

    def evaluate(self, t):
        return self.derivative(0, t)

    def derivative(self, order, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([f.deriv(order)(t) if order else f(t) for f in self.functions])

    def describe(self):
        return {"kind": self.kind, "T": self.T, "size": self.size, "flatness": self.flatness}


def make_basis(kind, T, size, flatness=3):
    if kind == "pwc":
        return PiecewiseConstantBasis(T, size)
    elif kind == "bump":
        return BumpBasis(T, size, flatness)
    else:
        raise ConfigError("{0} is not a valid time basis (pwc, bump)".format(kind))


# ---------------------------------------------------------------------------
# Duhamel integrals
# ---------------------------------------------------------------------------

def _quad(fun, a, b, shape, quad_tol, what):
    def integrand(s):
        v = fun(s)
        return np.concatenate([v.real.ravel(), v.imag.ravel()])

    res, err = quad_vec(integrand, a, b, epsabs=quad_tol, epsrel=0.0, norm="max", limit=QUAD_LIMIT)
    if not np.isfinite(err) or err > quad_tol * max(1.0, np.abs(res).max()):
        raise QuadratureFailure("{0}: error estimate {1:.3e} above tolerance {2:.1e}".format(what, err, quad_tol))
    half = res.size // 2
    return (res[:half] + 1j * res[half:]).reshape(shape)


def basis_integrals(spec, modes, basis, adjoint=False, quad_tol=QUAD_TOL):
    """
        Description
        -----------
            G_{n,q} = int_0^T e^{(T-s) B_n} tau_q(s) ds for every mode and basis
            function, by adaptive Gauss-Kronrod quadrature on the whole mode
            stack at once. With adjoint=True, B_n is replaced by B_n^*.
        Output
        ------
            :return: complex array (len(modes), size, d, d)
    """
    modes = np.asarray(modes, dtype=int)
    d = spec.d
    T = basis.T
    identity = np.stack([np.eye(d, dtype=complex)] * modes.size)

    if basis.kind == "pwc":
        # e^{(T - t_{q+1}) B_n} int_0^dt e^{s B_n} ds / sqrt(dt)
        def local(s):
            return propagators(spec, modes, s, adjoint=adjoint) if s > 0 else identity

        block = _quad(local, 0.0, basis.dt, (modes.size, d, d), quad_tol, "piecewise-constant element")
        cache = PropagatorCache(spec, modes)
        G = np.empty((modes.size, basis.size, d, d), dtype=complex)
        for q in range(basis.size):
            lag = max(0.0, T - basis.edges[q + 1])
            G[:, q] = np.einsum("nij,njk->nik", cache(lag, adjoint=adjoint), block) / np.sqrt(basis.dt)
        return G

    def full(s):
        E = propagators(spec, modes, T - s, adjoint=adjoint) if s < T else identity
        tau = basis.evaluate(s)[:, 0]
        return E[:, None, :, :] * tau[None, :, None, None]

    return _quad(full, 0.0, T, (modes.size, basis.size, d, d), quad_tol, "bump basis")


# ---------------------------------------------------------------------------
# input map
# ---------------------------------------------------------------------------

class InputMap(object):
    """
    Dense linear map from control coefficients theta (size, 2Nc+1, m) to the
    final-state coefficients (2N+1, d). With adjoint=True the stored matrix is
    the map in the opposite direction.
    """

    def __init__(self, spec, w, basis, N, Nc, matrix, adjoint=False):
        self.spec = spec
        self.w = w
        self.basis = basis
        self.N = N
        self.Nc = Nc
        self.matrix = matrix
        self.adjoint = adjoint

    def __repr__(self):
        return "<InputMap N={0} Nc={1} basis={2!r} shape={3}>".format(self.N, self.Nc, self.basis,
                                                                         self.matrix.shape)

    @property
    def T(self):
        return self.basis.T

    @property
    def control_shape(self):
        return (self.basis.size, 2 * self.Nc + 1, self.spec.m)

    @property
    def state_shape(self):
        return (2 * self.N + 1, self.spec.d)

    def apply(self, theta):
        if self.adjoint:
            raise ValueError("apply() maps controls to states; use apply_adjoint() on an adjoint map")
        theta = np.asarray(theta, dtype=complex).reshape(-1)
        return SpectralField((self.matrix @ theta).reshape(self.state_shape))

    def apply_adjoint(self, g):
        if not self.adjoint:
            raise ValueError("apply_adjoint() needs the independently assembled adjoint map")
        coeffs = g.coeffs if isinstance(g, SpectralField) else np.asarray(g, dtype=complex)
        return (self.matrix @ coeffs.reshape(-1)).reshape(self.control_shape)

    def rows_for(self, modes):
        """Forward map onto the state modes listed, as a plain (len(modes) d, cols) matrix."""
        if self.adjoint:
            raise ValueError("rows_for() needs a forward map")
        modes = np.asarray(modes, dtype=int)
        if np.any(np.abs(modes) > self.N):
            raise DimensionMismatch("modes {0} exceed the state band N={1}".format(modes, self.N))
        d = self.spec.d
        idx = ((modes[:, None] + self.N) * d + np.arange(d)[None, :]).reshape(-1)
        return self.matrix[idx]

    def describe(self):
        return {"N": self.N, "N_c": self.Nc, "basis": self.basis.describe(), "rows": self.matrix.shape[0],
                "cols": self.matrix.shape[1]}


def _check_bands(N, Nc):
    Nc = N if Nc is None else Nc
    if Nc > N or Nc < 0:
        raise DimensionMismatch("control band N_c={0} must lie in [0, N={1}]".format(Nc, N))
    return Nc


def assemble_input_map(spec, w, T, N, Nc=None, basis=None, quad_tol=QUAD_TOL):
    """Phi[(n, i), (q, m, k)] = c_{n-m}(1_omega) (G_{n,q} M)_{ik}."""
    Nc = _check_bands(N, Nc)
    basis = PiecewiseConstantBasis(T, 64) if basis is None else basis
    if abs(basis.T - T) > 1e-12 * max(1.0, T):
        raise DimensionMismatch("time basis lives on [0, {0}], horizon is {1}".format(basis.T, T))
    modes = np.arange(-N, N + 1)
    G = basis_integrals(spec, modes, basis, quad_tol=quad_tol)
    C = indicator_coeffs(w, N + Nc).convolution_matrix(N, Nc)
    phi = np.einsum("nm,nqij,jk->niqmk", C, G, spec.M)
    matrix = phi.reshape((2 * N + 1) * spec.d, -1)
    logger.info("assembled input map %s for T=%g", matrix.shape, T)
    return InputMap(spec, w, basis, N, Nc, matrix)


def assemble_adjoint_input_map(spec, w, T, N, Nc=None, basis=None, quad_tol=QUAD_TOL):
    """Phi^*[(q, m, k), (n, i)] = conj(c_{n-m}) (M^T G^*_{n,q})_{ki}, from the adjoint propagators."""
    Nc = _check_bands(N, Nc)
    basis = PiecewiseConstantBasis(T, 64) if basis is None else basis
    modes = np.arange(-N, N + 1)
    Gadj = basis_integrals(spec, modes, basis, adjoint=True, quad_tol=quad_tol)
    C = indicator_coeffs(w, N + Nc).convolution_matrix(N, Nc)
    phi = np.einsum("nm,jk,nqji->qmkni", np.conj(C), spec.M, Gadj)
    matrix = phi.reshape(-1, (2 * N + 1) * spec.d)
    return InputMap(spec, w, basis, N, Nc, matrix, adjoint=True)


# ---------------------------------------------------------------------------
# control plans and the least-norm solve
# ---------------------------------------------------------------------------

class ControlPlan(object):
    """Coefficients theta (basis size, 2Nc+1, m) of a control on a time basis."""

    def __init__(self, basis, Nc, theta):
        self.basis = basis
        self.Nc = Nc
        self.theta = theta

    def __repr__(self):
        slist = ["plan"]
        slist.append("basis={0}".format(self.basis.kind))
        slist.append("Nc={0}".format(self.Nc))
        slist.append("channels={0}".format(self.theta.shape[-1]))
        return "<{0}>".format(" ".join(slist))

    def spectrum(self, t):
        """Control coefficients u_m(t), shape (len(t), 2Nc+1, m)."""
        return np.einsum("qt,qmk->tmk", self.basis.evaluate(t), self.theta)

    def evaluate(self, t, x):
        """u(t, x), shape (len(t), len(x), m)."""
        return synthesize(self.spectrum(t), x)

    def l2_norm(self):
        """L^2((0,T) x T) norm; the basis is orthonormal and the torus has measure 2 pi."""
        return float(np.sqrt(TWO_PI) * la.norm(self.theta))

    def describe(self):
        return {"basis": self.basis.describe(), "N_c": self.Nc, "channels": self.theta.shape[-1],
                "l2_norm": self.l2_norm()}


def min_norm_control(phi, target_deficit, cutoff=SVD_CUTOFF, modes=None):
    """
        Description
        -----------
            Least-norm theta with Phi theta = target_deficit, through the SVD
            of Phi truncated at cutoff * sigma_max.
        Input
        -----
            :param phi: InputMap
            :param target_deficit: SpectralField or (2N+1, d) array, usually
                minus the free evolution of f0 up to T.
            :param modes: optional subset of state modes; the solve then only
                asks for the rows of those modes and target_deficit has shape
                (len(modes), d).
        Output
        ------
            :return: (ControlPlan, relative residual, smallest retained
                singular value)
    """
    target = target_deficit.coeffs if isinstance(target_deficit, SpectralField) else np.asarray(target_deficit)
    target = np.asarray(target, dtype=complex).reshape(-1)
    matrix = phi.matrix if modes is None else phi.rows_for(modes)
    if target.size != matrix.shape[0]:
        raise DimensionMismatch("target has {0} entries, input map has {1} rows".format(target.size, matrix.shape[0]))
    U, s, Vh = la.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise RankCollapse("input map vanishes identically")
    keep = s >= cutoff * s[0]
    theta = Vh[keep].conj().T @ ((U[:, keep].conj().T @ target) / s[keep])
    norm = la.norm(target)
    residual = 0.0 if norm == 0.0 else float(la.norm(matrix @ theta - target) / norm)
    sigma_min = float(s[keep][-1])
    logger.debug("min-norm solve: %d of %d singular values kept, sigma_min=%.3e residual=%.3e",
                 keep.sum(), s.size, sigma_min, residual)
    plan = ControlPlan(basis=phi.basis, Nc=phi.Nc, theta=theta.reshape(phi.control_shape))
    return plan, residual, sigma_min


def control_deficit(spec, f0, T, N):
    """-(e^{T L} f0) truncated to |n| <= N."""
    return evolve_free(spec, f0.truncated(N), T) * -1.0


@dataclass(frozen=True)
class SweepPoint:
    T: float
    sigma_min: float
    residual: float


def time_sweep(spec, w, f0, T_grid, N, Nc=None, basis_kind="pwc", basis_size=64, flatness=3,
               quad_tol=QUAD_TOL):
    """For each T: assemble Phi, solve the least-norm problem, record (T, sigma_min, residual)."""
    rows = []
    for T in T_grid:
        basis = make_basis(basis_kind, T, basis_size, flatness)
        phi = assemble_input_map(spec, w, T, N, Nc, basis, quad_tol=quad_tol)
        _, residual, sigma_min = min_norm_control(phi, control_deficit(spec, f0, T, N))
        logger.info("sweep T=%g: sigma_min=%.3e residual=%.3e", T, sigma_min, residual)
        rows.append(SweepPoint(float(T), sigma_min, residual))
    return rows
