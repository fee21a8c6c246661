# -*- coding: utf-8 -*-
"""
Fictitious control and algebraic solvability, mode by mode.

A control v acting on every component of X' = B_n X + v is built first, then
rewritten through the Kalman pseudo-inverse as w = [B_n|M]_k^+ v and collapsed
to an actual control u = w_1 + w_2' + ... + w_k^(k-1) in range(M). Both steer
X_n identically as long as w is flat at the endpoints, which is what
verify_lemma integrates and telescoping_gap checks coefficient by coefficient.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npoly
import scipy.linalg as la
from scipy.integrate import solve_ivp
from scipy.special import comb

from dynamics import evolve_free, synthesize
from errors import NotControllable, NotInE, NumericalFailure, RankDeficientMode, TimeTooShort
from hum import BumpBasis, PiecewiseConstantBasis, assemble_input_map, min_norm_control
from modal import NEVER_FULL_RANK, exceptional_modes, k0_deficient_modes, kalman_depth, kalman_matrix, kalman_rank
from model import TWO_PI, mode_matrix, t_star

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14
E_TOL = 1e-8
LEAKAGE_NODES = 64


class SmoothModalControl(object):
    """
    Vector-valued time function on [start, start + T] attached to one Fourier mode,

        value(t) = sum_i W_i d^i/dt^i [ e^{s G} Y tau(s) ],   s = t - start,

    where tau(s) are the functions of a flat bump basis. Every time derivative
    is evaluated analytically; the function and its derivatives of order below
    the basis flatness vanish at both endpoints whenever only W_0 is present.
    Outside the interval the value is zero.
    """

    def __init__(self, n, start, basis, G, Y, weights):
        self.n = int(n)
        self.start = float(start)
        self.basis = basis
        self.G = np.asarray(G, dtype=complex)
        self.Y = np.asarray(Y, dtype=complex)
        self.weights = tuple(np.asarray(W, dtype=complex) for W in weights)
        if self.Y.shape != (self.G.shape[0], basis.size):
            raise ValueError("Y must map the {0} basis functions into the generator space".format(basis.size))

    def __repr__(self):
        return "<SmoothModalControl n={0} channels={1} on [{2:.4g}, {3:.4g}] flatness={4}>".format(
            self.n, self.channels, self.start, self.end, self.flatness)

    @classmethod
    def from_basis(cls, n, basis, coeffs, start=0.0):
        """Plain polynomial control sum_q coeffs[q] tau_q(t); coeffs has shape (size, channels)."""
        coeffs = np.asarray(coeffs, dtype=complex)
        channels = coeffs.shape[1]
        return cls(n, start, basis, np.zeros((channels, channels)), coeffs.T, [np.eye(channels)])

    @property
    def T(self):
        return self.basis.T

    @property
    def end(self):
        return self.start + self.basis.T

    @property
    def flatness(self):
        return self.basis.flatness

    @property
    def channels(self):
        return self.weights[0].shape[0]

    def _core_derivatives(self, s, orders):
        """d^r/ds^r [e^{sG} Y tau(s)] for r in orders, shape (len(orders), len(s), g)."""
        E = la.expm(s[:, None, None] * self.G[None, :, :])
        top = max(orders)
        powers = [np.eye(self.G.shape[0], dtype=complex)]
        for _ in range(top):
            powers.append(powers[-1] @ self.G)
        taus = [self.basis.derivative(order, s) for order in range(top + 1)]
        out = np.zeros((len(orders), s.size, self.G.shape[0]), dtype=complex)
        for idx, r in enumerate(orders):
            for l in range(r + 1):
                profile = self.Y @ taus[l]
                out[idx] += comb(r, l, exact=True) * np.einsum("ab,tbc,ct->ta", powers[r - l], E, profile)
        return out

    def evaluate(self, t, order=0):
        """order-th time derivative at the times t, shape (len(t), channels)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, self.channels), dtype=complex)
        inside = (t >= self.start) & (t <= self.end)
        if not inside.any():
            return out
        s = t[inside] - self.start
        orders = [order + i for i in range(len(self.weights))]
        core = self._core_derivatives(s, orders)
        for i, W in enumerate(self.weights):
            out[inside] += core[i] @ W.T
        return out

    def __call__(self, t):
        return self.evaluate([t])[0]

    def transformed(self, weights):
        """Same core, new output weights."""
        return SmoothModalControl(self.n, self.start, self.basis, self.G, self.Y, weights)


def _flat_step_profile(T, flatness):
    """Bump basis of one function and the coefficient c with int_0^T c tau_0 = -1."""
    basis = BumpBasis(T, 1, flatness)
    antiderivative = basis.functions[0].integ()
    area = antiderivative(T) - antiderivative(0.0)
    return basis, -1.0 / area


def fictitious_control(spec, n, X0, T, flatness=3, start=0.0):
    """
        Description
        -----------
            Control on all d components steering X0 to 0 over [start, start + T]
            along the trajectory X(t) = e^{(t-start) B_n} X0 s(t), where s falls
            from 1 to 0 with its first flatness derivatives vanishing at both
            ends. The control is v = X' - B_n X = e^{(t-start) B_n} X0 s'(t).
        Input
        -----
            :param X0: complex d-vector at time start.
            :param flatness: number of vanishing derivatives of s' at the ends.
        Output
        ------
            :return: SmoothModalControl with d channels
    """
    if T <= 0:
        raise ValueError("fictitious control needs T > 0, got {0}".format(T))
    X0 = np.asarray(X0, dtype=complex)
    basis, c = _flat_step_profile(T, flatness)
    return SmoothModalControl(n, start, basis, mode_matrix(spec, n), c * X0[:, None], [np.eye(spec.d)])


def kalman_pinv(spec, n, k):
    """[B_n|M]_k^+ = K^* (K K^*)^{-1}; RankDeficientMode where the rank drops."""
    rank = kalman_rank(spec, n, k)
    if rank < spec.d:
        raise RankDeficientMode(n, rank, spec.d)
    K = kalman_matrix(spec, n, k)
    return K.conj().T @ la.inv(K @ K.conj().T)


def lift(spec, n, v, k):
    """w = [B_n|M]_k^+ v, stacked as k blocks of m channels."""
    pinv = kalman_pinv(spec, n, k)
    return v.transformed([pinv @ W for W in v.weights])


def collapse(w, m, k):
    """u = w_1 + w_2' + ... + w_k^(k-1) for w stacked as k blocks of m channels."""
    if w.channels != m * k:
        raise ValueError("w has {0} channels, expected {1} blocks of {2}".format(w.channels, k, m))
    g = w.weights[0].shape[1]
    out = [np.zeros((m, g), dtype=complex) for _ in range(len(w.weights) + k - 1)]
    for i, W in enumerate(w.weights):
        for j in range(k):
            out[i + j] += W[j * m:(j + 1) * m]
    return w.transformed(out)


def reduce(spec, n, v, k=None):
    """
    Actual control u in range(M) with the same effect on X_n as the fictitious
    v: u = sum_j d^{j-1}/dt^{j-1} ([B_n|M]_k^+ v)_j. k defaults to the Kalman
    depth k0.
    """
    if k is None:
        k = kalman_depth(spec)
        if k is NEVER_FULL_RANK:
            raise RankDeficientMode(n, kalman_rank(spec, n, spec.d), spec.d)
    return collapse(lift(spec, n, v, k), spec.m, k)


def _integrate(Bn, forcing, X0, t0, t1, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL):
    def rhs(t, y):
        return Bn @ y + forcing(t)

    kwargs = {"jac": Bn} if method == "BDF" else {}
    sol = solve_ivp(rhs, (t0, t1), np.asarray(X0, dtype=complex), method=method, rtol=rtol, atol=atol, **kwargs)
    if not sol.success:
        raise NumericalFailure("ODE integration failed: {0}".format(sol.message))
    return sol.y[:, -1]


def verify_lemma(spec, n, X0, w, k=None):
    """
    Integrates X' = B_n X + [B_n|M]_k w and X~' = B_n X~ + M u, u collapsed from
    w, from the same X0 with DOP853 at rtol 1e-12; returns (X(T), X~(T), gap).
    """
    m = spec.m
    k = w.channels // m if k is None else k
    Bn = mode_matrix(spec, n)
    K = kalman_matrix(spec, n, k)
    u = collapse(w, m, k)
    X_T = _integrate(Bn, lambda t: K @ w(t), X0, w.start, w.end)
    Xt_T = _integrate(Bn, lambda t: spec.M @ u(t), X0, w.start, w.end)
    gap = float(la.norm(X_T - Xt_T))
    logger.debug("lemma check n=%d k=%d: gap=%.3e", n, k, gap)
    return X_T, Xt_T, gap


def _pad(c, rows):
    out = np.zeros((rows, c.shape[1]), dtype=complex)
    out[:c.shape[0]] = c
    return out


def telescoping_gap(spec, n, k, coeffs):
    """
        Description
        -----------
            Exact check of P o M~_k = [B_n|M]_k on a polynomial control
            w(t) = sum_r coeffs[r] t^r, where

                M~_{k,1} w = -sum_l sum_{j<l} B_n^{l-1-j} M w_l^(j),
                M~_{k,2} w = -sum_l w_l^(l),
                P(X, W) = X' - B_n X - M W,

            with blocks l = 0..k-1. Returns the largest coefficient mismatch
            relative to the largest coefficient of [B_n|M]_k w.
        Input
        -----
            :param coeffs: array (degree + 1, k m) of power-series coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    m, d = spec.m, spec.d
    rows = coeffs.shape[0]
    Bn = mode_matrix(spec, n)
    powers = [np.eye(d, dtype=complex)]
    for _ in range(k):
        powers.append(powers[-1] @ Bn)
    X1 = np.zeros((rows, d), dtype=complex)
    W2 = np.zeros((rows, m), dtype=complex)
    for l in range(k):
        block = coeffs[:, l * m:(l + 1) * m]
        for j in range(l):
            X1 -= _pad(npoly.polyder(block, j, axis=0), rows) @ (powers[l - 1 - j] @ spec.M).T
        W2 -= _pad(npoly.polyder(block, l, axis=0), rows)
    lhs = _pad(npoly.polyder(X1, 1, axis=0), rows) - X1 @ Bn.T - W2 @ spec.M.T
    rhs = coeffs @ kalman_matrix(spec, n, k).T
    scale = max(1.0, np.abs(rhs).max())
    return float(np.abs(lhs - rhs).max() / scale)


# ---------------------------------------------------------------------------
# two-stage pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineReport:
    T: float
    eps: float
    N: int
    k0: int
    stage1_modes: tuple
    stage1_sigma_min: float
    stage1_residual: float
    mode_residuals: dict = field(default_factory=dict)
    leakage: float = 0.0
    control_norm: float = 0.0

    @property
    def max_residual(self):
        return max(self.mode_residuals.values(), default=0.0)

    def to_dict(self):
        return {"T": self.T, "eps": self.eps, "N": self.N, "k0": self.k0,
                "stage1_modes": list(self.stage1_modes),
                "stage1_sigma_min": self.stage1_sigma_min, "stage1_residual": self.stage1_residual,
                "mode_residuals": {str(n): r for n, r in sorted(self.mode_residuals.items())},
                "max_residual": self.max_residual, "leakage": self.leakage, "control_norm": self.control_norm}


def check_in_E(spec, f0, exceptional=None, tol=E_TOL):
    """NotInE for the first exceptional mode whose coefficient leaves range([B_n|M])."""
    exceptional = exceptional_modes(spec) if exceptional is None else exceptional
    for mode in exceptional:
        if abs(mode.n) > f0.N:
            continue
        c = f0.coeff(mode.n)
        violation = mode.violation(c)
        if violation > tol * max(1.0, la.norm(c)):
            raise NotInE(mode.n, violation)


def _stage_one(spec, w, f0, eps, N, modes, basis_size):
    """Localized least-norm control on [0, eps] for the listed modes."""
    basis = PiecewiseConstantBasis(eps, basis_size)
    phi = assemble_input_map(spec, w, eps, N, N, basis)
    free = evolve_free(spec, f0, eps)
    target = -np.stack([free.coeff(n) for n in modes])
    plan, residual, sigma_min = min_norm_control(phi, target, modes=modes)
    state = free + phi.apply(plan.theta)
    return plan, state, residual, sigma_min


def _stage_one_energy(plan, w, npts):
    """int_0^eps int_T |1_omega u|^2 and nothing outside omega."""
    x = TWO_PI * np.arange(npts) / npts
    mid = plan.basis.edges[:-1] + 0.5 * plan.basis.dt
    values = plan.evaluate(mid, x) * w.contains(x)[None, :, None]
    return float(plan.basis.dt * (TWO_PI / npts) * np.sum(np.abs(values) ** 2))


def pipeline(spec, f0, w, T, eps=None, N=None, basis_size=32, flatness=None, method="DOP853"):
    """
        Description
        -----------
            Two-stage null control of f0. Stage 1 steers the exceptional and
            k0-deficient modes to zero on [0, eps] with a control localized in
            omega. Stage 2 steers every other mode |n| <= N to zero on
            [eps, T] by fictitious control followed by algebraic reduction.
            The stage-2 control is not localized; the report measures the
            fraction of the control energy falling outside omega.
        Input
        -----
            :param f0: SpectralField initial datum.
            :param eps: duration of stage 1, default 0.05 T.
            :param flatness: bump flatness of the fictitious trajectories,
                default 2 k0 so that the reduced control stays flat.
            :param method: solve_ivp method for the terminal residuals.
        Output
        ------
            :return: PipelineReport
    """
    N = f0.N if N is None else N
    eps = 0.05 * T if eps is None else eps
    f0 = f0.truncated(N)
    T_star = t_star(spec, w)
    if T <= T_star + 2.0 * eps:
        raise TimeTooShort("T={0:.6g} does not exceed T*={1:.6g} + 2 eps".format(T, T_star))
    k0 = kalman_depth(spec)
    if k0 is NEVER_FULL_RANK:
        raise NotControllable("the Kalman rank condition fails at every mode")
    exceptional = exceptional_modes(spec)
    check_in_E(spec, f0, exceptional)
    flatness = 2 * k0 if flatness is None else flatness

    special = sorted({m.n for m in exceptional} | set(k0_deficient_modes(spec, k0)))
    special = tuple(n for n in special if abs(n) <= N)
    residuals = {}
    if special:
        plan, state, stage1_residual, sigma_min = _stage_one(spec, w, f0, eps, N, special, basis_size)
        energy_inside = _stage_one_energy(plan, w, 8 * (2 * N + 1))
        for n in special:
            Bn = mode_matrix(spec, n)
            residuals[n] = float(la.norm(la.expm((T - eps) * Bn) @ state.coeff(n)))
        logger.info("stage 1 on modes %s: sigma_min=%.3e residual=%.3e", special, sigma_min, stage1_residual)
    else:
        state = evolve_free(spec, f0, eps)
        stage1_residual, sigma_min, energy_inside = 0.0, float("nan"), 0.0

    controls = {}
    for n in state.modes:
        n = int(n)
        X = state.coeff(n)
        if n in special or not np.any(X):
            continue
        v = fictitious_control(spec, n, X, T - eps, flatness=flatness, start=eps)
        u = reduce(spec, n, v, k0)
        Bn = mode_matrix(spec, n)
        X_T = _integrate(Bn, lambda t, u=u: spec.M @ u(t), X, eps, T, method=method, rtol=1e-11, atol=1e-13)
        residuals[n] = float(la.norm(X_T))
        controls[n] = u
        logger.debug("stage 2 mode %d: residual %.3e", n, residuals[n])

    outside, inside = _stage_two_energy(controls, w, eps, T, N)
    total = energy_inside + inside + outside
    leakage = 0.0 if total == 0.0 else outside / total
    report = PipelineReport(T=float(T), eps=float(eps), N=int(N), k0=int(k0), stage1_modes=special,
                            stage1_sigma_min=sigma_min, stage1_residual=stage1_residual,
                            mode_residuals=residuals, leakage=float(leakage), control_norm=float(np.sqrt(total)))
    logger.info("pipeline: %d modes, max residual %.3e, leakage %.3f", len(residuals), report.max_residual,
                report.leakage)
    return report


def _stage_two_energy(controls, w, eps, T, N):
    """(energy outside omega, energy inside omega) of sum_n u_n(t) e^{inx} on (eps, T) x torus."""
    if not controls:
        return 0.0, 0.0
    nodes, weights = np.polynomial.legendre.leggauss(LEAKAGE_NODES)
    t = eps + 0.5 * (T - eps) * (nodes + 1.0)
    weights = 0.5 * (T - eps) * weights
    m = next(iter(controls.values())).channels
    spectrum = np.zeros((t.size, 2 * N + 1, m), dtype=complex)
    for n, u in controls.items():
        spectrum[:, n + N] = u.evaluate(t)
    npts = 8 * (2 * N + 1)
    x = TWO_PI * np.arange(npts) / npts
    density = np.sum(np.abs(synthesize(spectrum, x)) ** 2, axis=-1)
    mask = w.contains(x)
    dx = TWO_PI / npts
    inside = float(np.sum(weights[:, None] * density * mask[None, :]) * dx)
    outside = float(np.sum(weights[:, None] * density * ~mask[None, :]) * dx)
    return outside, inside
