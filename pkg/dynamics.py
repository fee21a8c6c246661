# -*- coding: utf-8 -*-
"""
Truncated Fourier-Galerkin evolution on the torus.

A field is stored through its Fourier coefficients

    f(x) = sum_{|n| <= N} c_n e^{i n x},   c_n = (1/2 pi) int f(x) e^{-i n x} dx,

one complex d-vector per mode, in an array of shape (2N+1, d) ordered from
n = -N to n = N. Each mode evolves independently through the matrix
exponential of B_n (forward) or of B_n^* (adjoint), so no time stepping is
involved.
"""

import logging

import numexpr as ne
import numpy as np
import scipy.linalg as la

from errors import DimensionMismatch, OverflowRisk
from model import TWO_PI, adjoint_mode_matrix, default_radius, eigenprojection_split, mode_matrix

logger = logging.getLogger(__name__)

EXP_BUDGET = 700.0
HYPERBOLIC_TOL = 1e-8


class SpectralField(object):
    """Immutable truncated Fourier representation of a C^d valued field."""

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] % 2 != 1:
            raise DimensionMismatch("coefficients must have shape (2N+1, d), got {0}".format(c.shape))
        c.flags.writeable = False
        self.coeffs = c

    def __repr__(self):
        return "<SpectralField N={0} d={1}>".format(self.N, self.d)

    @property
    def N(self):
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def d(self):
        return self.coeffs.shape[1]

    @property
    def modes(self):
        return np.arange(-self.N, self.N + 1)

    def coeff(self, n):
        if abs(n) > self.N:
            return np.zeros(self.d, dtype=complex)
        return self.coeffs[n + self.N]

    @classmethod
    def zeros(cls, N, d):
        return cls(np.zeros((2 * N + 1, d), dtype=complex))

    @classmethod
    def single_mode(cls, N, n, vector):
        vector = np.asarray(vector, dtype=complex)
        c = np.zeros((2 * N + 1, vector.size), dtype=complex)
        c[n + N] = vector
        return cls(c)

    @classmethod
    def from_grid(cls, values, N):
        """Coefficients of samples at x_j = 2 pi j / npts, npts > 2N."""
        values = np.asarray(values)
        if values.ndim == 1:
            values = values[:, None]
        npts = values.shape[0]
        if npts <= 2 * N:
            raise DimensionMismatch("{0} grid points cannot resolve modes up to {1}".format(npts, N))
        spectrum = np.fft.fft(values, axis=0) / npts
        return cls(spectrum[np.mod(np.arange(-N, N + 1), npts)])

    @classmethod
    def smooth(cls, d, N, decay=3.0, rng=None, zero_mean=()):
        """
        Random real field with |c_n| ~ (1 + n^2)^(-decay); components listed in
        zero_mean get c_0 = 0.
        """
        rng = np.random.default_rng(rng)
        n = np.arange(0, N + 1)[:, None]
        weight = ne.evaluate("(1 + n ** 2) ** (-decay)", local_dict={"n": n.astype(float), "decay": float(decay)})
        half = (rng.normal(size=(N + 1, d)) + 1j * rng.normal(size=(N + 1, d))) * weight
        half[0] = half[0].real
        for k in zero_mean:
            half[0, k] = 0.0
        c = np.concatenate([np.conj(half[:0:-1]), half], axis=0)
        return cls(c)

    def to_grid(self, x):
        """Point values at the positions x, shape (len(x), d)."""
        x = np.asarray(x, dtype=float)
        return synthesize(self.coeffs, x)

    def sobolev_norm(self, s=0.0):
        n = self.modes.astype(float)
        weight = ne.evaluate("(1 + n ** 2) ** s", local_dict={"n": n, "s": float(s)})
        return float(np.sqrt(np.sum(weight * np.sum(np.abs(self.coeffs) ** 2, axis=1))))

    def l2_norm(self):
        """L^2(T) norm, including the 2 pi measure of the torus."""
        return float(np.sqrt(TWO_PI * np.sum(np.abs(self.coeffs) ** 2)))

    def inner(self, other):
        """L^2(T) inner product <self, other>, linear in self."""
        N = min(self.N, other.N)
        a = self.coeffs[self.N - N:self.N + N + 1]
        b = other.coeffs[other.N - N:other.N + N + 1]
        return complex(TWO_PI * np.sum(a * np.conj(b)))

    def high_pass(self, N0):
        """pi_N0: keeps the modes |n| > N0."""
        c = self.coeffs.copy()
        c[np.abs(self.modes) <= N0] = 0.0
        return SpectralField(c)

    def truncated(self, N):
        if N > self.N:
            c = np.zeros((2 * N + 1, self.d), dtype=complex)
            c[N - self.N:N + self.N + 1] = self.coeffs
            return SpectralField(c)
        return SpectralField(self.coeffs[self.N - N:self.N + N + 1])

    def components(self, sl):
        return SpectralField(self.coeffs[:, sl])

    def is_conjugate_symmetric(self, tol=1e-12):
        scale = max(1.0, np.abs(self.coeffs).max())
        return bool(np.abs(self.coeffs - np.conj(self.coeffs[::-1])).max() <= tol * scale)

    def __add__(self, other):
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(scalar * self.coeffs)

    __rmul__ = __mul__


def synthesize(coeffs, x):
    """sum_n c_n e^{i n x} for coefficient arrays of shape (..., 2N+1, k)."""
    N = (coeffs.shape[-2] - 1) // 2
    n = np.arange(-N, N + 1)
    arg = 1j * np.outer(np.asarray(x, dtype=float), n)
    phase = ne.evaluate("exp(arg)")
    return np.einsum("xn,...nk->...xk", phase, coeffs)


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------

def _generator(spec, n, adjoint):
    return adjoint_mode_matrix(spec, n) if adjoint else mode_matrix(spec, n)


def _abscissa(matrices):
    eig = np.linalg.eigvals(matrices)
    return np.max(eig.real, axis=-1)


def _hyperbolic_exp(spec, n, t, adjoint, r=None):
    """e^{t B_n} on the hyperbolic spectral subspace, zero on the parabolic one."""
    r = default_radius(spec) if r is None else r
    Bn = _generator(spec, n, adjoint)
    w, V = la.eig(Bn)
    keep = np.abs(w) < r * float(n) ** 2
    if keep.sum() != spec.d_h:
        raise ValueError("mode n={0} has no clean hyperbolic subspace for backward evolution".format(n))
    if np.max(t * w[keep].real) > EXP_BUDGET:
        raise OverflowRisk("backward evolution of mode n={0} over t={1} overflows".format(n, t))
    Vinv = la.inv(V)
    return (V[:, keep] * np.exp(t * w[keep])) @ Vinv[keep, :]


def propagators(spec, modes, t, adjoint=False):
    """
        Description
        -----------
            Batched e^{t B_n} (or e^{t B_n^*}) for every n in modes, by scaling
            and squaring with a Pade approximant.
        Input
        -----
            :param modes: sequence of int.
            :param t: float >= 0.
            :param adjoint: bool, use B_n^* = -n^2 B^T + i n A^T - K^T.
        Output
        ------
            :return: complex array (len(modes), d, d)
    """
    if t < 0:
        raise ValueError("forward semigroup needs t >= 0, got {0}".format(t))
    modes = np.atleast_1d(np.asarray(modes, dtype=int))
    gens = np.stack([_generator(spec, n, adjoint) for n in modes])
    if t == 0:
        return np.broadcast_to(np.eye(spec.d, dtype=complex), gens.shape).copy()
    growth = t * _abscissa(gens)
    if np.max(growth) > EXP_BUDGET:
        worst = modes[np.argmax(growth)]
        raise OverflowRisk("e^(t B_n) overflows at mode n={0} (t * abscissa = {1:.3g})".format(worst, growth.max()))
    return la.expm(t * gens)


def propagator(spec, n, t, hyperbolic=False, adjoint=False):
    """
    e^{t B_n}. Negative t is accepted only with hyperbolic=True and then acts on
    the hyperbolic spectral subspace of B_n, where the evolution is a group.
    """
    if t < 0:
        if not hyperbolic:
            raise ValueError("negative time is only defined on the hyperbolic subspace")
        return _hyperbolic_exp(spec, n, t, adjoint)
    return propagators(spec, [n], t, adjoint=adjoint)[0]


class PropagatorCache(object):
    """Mode stacks of e^{t B_n} keyed by (t, adjoint); shared read-only."""

    def __init__(self, spec, modes):
        self.spec = spec
        self.modes = np.asarray(modes, dtype=int)
        self._stacks = {}

    def __repr__(self):
        return "<PropagatorCache modes={0} entries={1}>".format(self.modes.size, len(self._stacks))

    def __call__(self, t, adjoint=False):
        key = (float(t), bool(adjoint))
        if key not in self._stacks:
            self._stacks[key] = propagators(self.spec, self.modes, t, adjoint=adjoint)
        return self._stacks[key]

    def __len__(self):
        return len(self._stacks)


def _apply(stack, field):
    return SpectralField(np.einsum("nij,nj->ni", stack, field.coeffs))


def evolve_free(spec, field, t, cache=None):
    """Mode-wise e^{t B_n} c_n; negative t only for fields in the hyperbolic range."""
    if field.d != spec.d:
        raise DimensionMismatch("field has {0} components, system has {1}".format(field.d, spec.d))
    if t < 0:
        return _evolve_backward(spec, field, t, adjoint=False)
    stack = cache(t) if cache is not None else propagators(spec, field.modes, t)
    return _apply(stack, field)


def evolve_adjoint(spec, field, t, cache=None):
    """Mode-wise e^{t B_n^*} c_n, the adjoint dynamics (d/dt - B^T d_xx - A^T d_x + K^T) g = 0."""
    if field.d != spec.d:
        raise DimensionMismatch("field has {0} components, system has {1}".format(field.d, spec.d))
    if t < 0:
        return _evolve_backward(spec, field, t, adjoint=True)
    stack = cache(t, adjoint=True) if cache is not None else propagators(spec, field.modes, t, adjoint=True)
    return _apply(stack, field)


def _evolve_backward(spec, field, t, adjoint):
    out = np.zeros_like(field.coeffs)
    for idx, n in enumerate(field.modes):
        c = field.coeffs[idx]
        scale = la.norm(c)
        if scale == 0.0:
            continue
        if n == 0:
            raise ValueError("backward evolution of the zero mode is not defined")
        P_h, P_p = eigenprojection_split(spec, n)
        if adjoint:
            P_h, P_p = P_h.conj().T, P_p.conj().T
        if la.norm(P_p @ c) > HYPERBOLIC_TOL * scale:
            raise ValueError("mode n={0} is not in the hyperbolic range; backward evolution refused".format(n))
        out[idx] = _hyperbolic_exp(spec, n, t, adjoint) @ c
    return SpectralField(out)


# ---------------------------------------------------------------------------
# localized forcing
# ---------------------------------------------------------------------------

class IndicatorSpectrum(object):
    """Fourier coefficients c_m(1_omega) for |m| <= upto."""

    def __init__(self, upto, coeffs):
        self.upto = int(upto)
        self.coeffs = np.asarray(coeffs, dtype=complex)

    def __repr__(self):
        return "<IndicatorSpectrum upto={0} c0={1:.6g}>".format(self.upto, self.coeffs[self.upto].real)

    def __getitem__(self, m):
        m = np.asarray(m)
        if np.any(np.abs(m) > self.upto):
            raise IndexError("indicator coefficients known up to |m| = {0}".format(self.upto))
        return self.coeffs[m + self.upto]

    def convolution_matrix(self, N, Nc):
        """C[n, m] = c_{n-m}, rows |n| <= N, columns |m| <= Nc."""
        n = np.arange(-N, N + 1)[:, None]
        m = np.arange(-Nc, Nc + 1)[None, :]
        return self[n - m]


def indicator_coeffs(w, upto):
    """
    Exact c_m(1_omega) = sum over arcs (e^{-i m a} - e^{-i m b}) / (2 pi i m),
    c_0 = |omega| / 2 pi.
    """
    m = np.arange(-upto, upto + 1).astype(float)
    coeffs = np.zeros(m.size, dtype=complex)
    nonzero = m != 0
    mm = m[nonzero]
    for a, b in w.arcs:
        ea, eb = -1j * mm * a, -1j * mm * b
        denom = 2j * np.pi * mm
        coeffs[nonzero] += ne.evaluate("(exp(ea) - exp(eb)) / denom")
    coeffs[upto] = w.measure / TWO_PI
    return IndicatorSpectrum(upto, coeffs)


def apply_localized_control(spec, indicator, u, N):
    """
    Forcing coefficients F_n = M sum_m c_{n-m}(1_omega) u_m for |n| <= N.

    u has shape (..., 2Nc+1, m); the result has shape (..., 2N+1, d).
    """
    u = np.asarray(u, dtype=complex)
    Nc = (u.shape[-2] - 1) // 2
    if Nc > N:
        raise DimensionMismatch("control band {0} exceeds the state band {1}".format(Nc, N))
    if u.shape[-1] != spec.m:
        raise DimensionMismatch("control has {0} channels, M has {1}".format(u.shape[-1], spec.m))
    C = indicator.convolution_matrix(N, Nc)
    return np.einsum("nm,...mk,dk->...nd", C, u, spec.M)
