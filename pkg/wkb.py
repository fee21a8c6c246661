# -*- coding: utf-8 -*-
"""
WKB quasi-modes of the adjoint system

    (d/dt - B^T d_xx - A^T d_x + K^T) g = 0,

written as (d/dt - B d_xx + A d_x + K) g = 0 with (B, A, K) -> (B^T, -A^T, K^T),
so that the transport block has the eigenvalues mu_adj = -mu, mu in Sp(A').

The ansatz g_h = sum_{j <= q} h^j Y_j(t, x) e^{i phi(t, x) / h} with
phi(t, x) = psi(x - mu_adj t), psi(s) = i amp(s) + n0 s, leaves the operator

    L g_h = e^{i phi / h} sum_j h^{j-2} (L0 Y_j + L1 Y_{j-1} + L2 Y_{j-2})

    L0 = psi'^2 B
    L1 = i (phi_t + phi_x A - phi_xx B - 2 phi_x B d_x)
    L2 = d_t - B d_xx + A d_x + K

and the profiles are chosen level by level so that every bracket up to j = q
vanishes: the parabolic rows fix Y_j^p, the rows of the transport block outside
the eigenspace of mu_adj fix Y_j^{h,!=mu} through the reduced resolvent, and the
rows inside it give a transport equation along x - mu_adj t for Y_j^{h,mu}. In
the moving frame s = x - mu_adj t that equation is an ODE in t per grid point,
solved with RK4. The leftover is O(h^{q-1}).
"""

import logging
from dataclasses import dataclass

import numexpr as ne
import numpy as np
import scipy.linalg as la
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import make_interp_spline

from dynamics import SpectralField, evolve_adjoint, propagators
from errors import GeometryMismatch, GridTooCoarse, NoObstructionWitness, PhaseDegenerate
from modal import rough_obstruction
from model import TWO_PI, k_mu_star

logger = logging.getLogger(__name__)

PHASE_TOL = 1e-8
PROJ_TOL = 1e-10
WITNESS_TOL = 1e-8
OVERSAMPLING = 8
SPLINE_ORDER = 5
TIME_PANELS = 8
PANEL_NODES = 8
FLOOR = 1e-13


# ---------------------------------------------------------------------------
# spectral helpers
# ---------------------------------------------------------------------------

def _wavenumbers(npts):
    k = np.fft.fftfreq(npts, d=1.0 / npts)
    if npts % 2 == 0:
        k[npts // 2] = 0.0
    return k


def _ds(values, order=1, axis=-2):
    """Spectral derivative along the periodic grid axis (Nyquist mode dropped)."""
    npts = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = npts
    factor = (1j * _wavenumbers(npts)) ** order
    spectrum = np.fft.fft(values, axis=axis) * factor.reshape(shape)
    return np.fft.ifft(spectrum, axis=axis)


def _resample(values, npts, shift=0.0):
    """
    Trigonometric interpolant of samples on 2 pi k / len(values), evaluated at
    2 pi k / npts - shift (axis 0).
    """
    ncoarse = values.shape[0]
    spectrum = np.fft.fft(values, axis=0) / ncoarse
    k = np.fft.fftfreq(ncoarse, d=1.0 / ncoarse).round().astype(int)
    # the Nyquist bin would land on the mean in the scatter below
    keep = 2 * np.abs(k) < ncoarse
    k, spectrum = k[keep], spectrum[keep]
    if shift:
        spectrum = spectrum * np.exp(-1j * k * shift).reshape((-1,) + (1,) * (values.ndim - 1))
    padded = np.zeros((npts,) + values.shape[1:], dtype=complex)
    padded[np.mod(k, npts)] = spectrum
    return np.fft.ifft(padded, axis=0) * npts


def _grid_values(coeffs, npts):
    """Point values on 2 pi k / npts of a coefficient array (2N+1, d), 2N+1 <= npts."""
    N = (coeffs.shape[0] - 1) // 2
    padded = np.zeros((npts, coeffs.shape[1]), dtype=complex)
    padded[np.mod(np.arange(-N, N + 1), npts)] = coeffs
    return np.fft.ifft(padded, axis=0) * npts


def _check_h(h):
    inv = 1.0 / float(h)
    k = int(round(inv))
    if k < 1 or abs(inv - k) > 1e-9 * k:
        raise ValueError("h = {0!r} is not the reciprocal of a positive integer".format(h))
    return k


def _lab_grid(n0, h, grid=None):
    need = OVERSAMPLING * n0 * _check_h(h)
    if grid is None:
        return need
    if grid < need:
        raise GridTooCoarse("grid of {0} points under-resolves the carrier {1}/h at h={2:g} "
                            "(need at least {3})".format(grid, n0, h, need))
    return int(grid)


# ---------------------------------------------------------------------------
# phase
# ---------------------------------------------------------------------------

def well(x0):
    """amp(s) = 1 - cos(s - x0) = 2 sin^2((s - x0) / 2): amp(x0) = 0, amp''(x0) = 1, amp > 0 elsewhere."""
    return lambda s: 1.0 - np.cos(np.asarray(s, dtype=float) - x0)


class PhaseSpec(object):
    """
    phi(t, x) = i amp(x - mu t) + n0 (x - mu t) for the adjoint transport speed
    mu; amp is a nonnegative smooth function on the torus, vanishing at x0.
    """

    def __init__(self, mu, n0=1, x0=0.0, flat=False, amplitude=None):
        if int(n0) != n0 or n0 < 0:
            raise ValueError("carrier n0 must be a nonnegative integer, got {0!r}".format(n0))
        self.mu = float(mu)
        self.n0 = int(n0)
        self.x0 = float(x0)
        self.flat = bool(flat)
        self.amplitude = amplitude
        s = TWO_PI * np.arange(256) / 256
        if np.min(self.amp(s)) < -PHASE_TOL:
            raise ValueError("phase amplitude must be nonnegative")

    def __repr__(self):
        slist = ["phase"]
        slist.append("mu={0:g}".format(self.mu))
        slist.append("n0={0}".format(self.n0))
        slist.append("x0={0:g}".format(self.x0))
        if self.flat:
            slist.append("flat")
        return "<{0}>".format(" ".join(slist))

    @classmethod
    def for_adjoint(cls, spec, mu, n0=1, x0=0.0, flat=False, amplitude=None):
        """Phase attached to the eigenvalue mu of A', moving with the adjoint speed -mu."""
        mu = spec.transport.eigenvalues[spec.transport.index(mu)]
        return cls(mu=-mu, n0=int(n0), x0=float(x0), flat=flat, amplitude=amplitude)

    def amp(self, s):
        s = np.asarray(s, dtype=float)
        if self.flat:
            return np.zeros_like(s)
        if self.amplitude is not None:
            return np.asarray(self.amplitude(s), dtype=float)
        return well(self.x0)(s)

    def derivatives(self, npts):
        """psi', psi'' on the uniform grid 2 pi k / npts."""
        s = TWO_PI * np.arange(npts) / npts
        if self.flat:
            d1 = d2 = np.zeros(npts)
        elif self.amplitude is None:
            d1, d2 = np.sin(s - self.x0), np.cos(s - self.x0)
        else:
            values = self.amp(s)[:, None]
            d1 = _ds(values, 1, axis=0)[:, 0].real
            d2 = _ds(values, 2, axis=0)[:, 0].real
        return self.n0 + 1j * d1, 1j * d2

    def factor(self, s, h):
        """e^{i psi(s) / h}; periodic because n0 / h is an integer."""
        _check_h(h)
        arg = (-self.amp(s) + 1j * self.n0 * np.asarray(s, dtype=float)) / h
        return ne.evaluate("exp(arg)")

    def carrier(self, s, h):
        arg = 1j * self.n0 * np.asarray(s, dtype=float) / h
        return ne.evaluate("exp(arg)")

    def describe(self):
        return {"mu": self.mu, "n0": self.n0, "x0": self.x0,
                "amplitude": "flat" if self.flat else ("well" if self.amplitude is None else "custom")}


# ---------------------------------------------------------------------------
# the adjoint operator and its profile recursion
# ---------------------------------------------------------------------------

class AdjointOperator(object):
    """
    Coefficients of the adjoint system in the form d_t - B d_xx + A d_x + K,
    with the spectral data of the transport eigenvalue mu_adj.
    """

    def __init__(self, spec, mu_adj):
        self.d_h, self.d_p = spec.d_h, spec.d_p
        self.mu = float(mu_adj)
        self.D = spec.D.T
        self.A = -spec.A.T
        self.K = spec.K.T
        self.B = spec.B.T
        self.Dinv = la.inv(self.D)
        idx = spec.transport.index(-self.mu)
        d_h = self.d_h
        self.P = np.asarray(spec.transport.projections[idx].T, dtype=complex)
        self.R = np.zeros((d_h, d_h), dtype=complex)
        for k, (nu, proj) in enumerate(spec.transport):
            if k != idx:
                self.R += proj.T / (-nu - self.mu)
        h, p = slice(0, d_h), slice(d_h, spec.d)
        self.A12 = self.A[h, p]
        self.A21 = self.A[p, h]
        self.K11 = self.K[h, h]
        self.K12 = self.K[h, p]
        self.K_eff = self.P @ (self.K11 + self.A12 @ self.Dinv @ self.A21) @ self.P

    def __repr__(self):
        return "<AdjointOperator mu_adj={0:.6g} d_h={1} d_p={2}>".format(self.mu, self.d_h, self.d_p)

    def L0(self, Z, psi1):
        return (psi1 ** 2)[:, None] * (Z @ self.B.T)

    def L1(self, Z, psi1, psi2):
        Zs = _ds(Z)
        return 1j * (psi1[:, None] * (Z @ self.A.T - self.mu * Z) - psi2[:, None] * (Z @ self.B.T)
                     - 2.0 * psi1[:, None] * (Zs @ self.B.T))

    def L2(self, Z, Zt):
        """d_t|_x = d_t|_s - mu_adj d_s in the moving frame."""
        Zs = _ds(Z)
        Zss = _ds(Z, 2)
        return Zt - self.mu * Zs - Zss @ self.B.T + Zs @ self.A.T + Z @ self.K.T


def _time_derivative(times, values):
    spline = make_interp_spline(times, values, k=SPLINE_ORDER, axis=0)
    return spline.derivative()(times)


def _rk4_transport(times, K_eff, start, source):
    """Z' = -K_eff Z + S(t) on the time grid, S interpolated between nodes."""
    Z = np.zeros((times.size,) + start.shape, dtype=complex)
    Z[0] = start
    forced = source is not None and np.abs(source).max() > 0.0
    spline = make_interp_spline(times, source, k=SPLINE_ORDER, axis=0) if forced else None

    def rhs(t, z):
        out = -z @ K_eff.T
        if spline is not None:
            out = out + spline(t)
        return out

    for i in range(times.size - 1):
        t, dt = times[i], times[i + 1] - times[i]
        z = Z[i]
        k1 = rhs(t, z)
        k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2)
        k4 = rhs(t + dt, z + dt * k3)
        Z[i + 1] = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Z


class WkbProfileSet(object):
    """
    Profiles Y_j(t, s) on a (time x moving frame) grid, s = x - mu_adj t,
    stored split into the mu-eigenspace part, the rest of the transport block
    and the parabolic block.
    """

    def __init__(self, q, T, phase, operator, times, hyper_mu, hyper_other, parabolic, rates):
        self.q = q
        self.T = T
        self.phase = phase
        self.operator = operator
        self.times = times
        self.hyper_mu = tuple(hyper_mu)
        self.hyper_other = tuple(hyper_other)
        self.parabolic = tuple(parabolic)
        self.rates = tuple(rates)

    def __repr__(self):
        slist = ["profiles"]
        slist.append("q={0}".format(self.q))
        slist.append("T={0:g}".format(self.T))
        slist.append("grid={0}x{1}".format(self.times.size, self.grid))
        slist.append(repr(self.phase))
        return "<{0}>".format(" ".join(slist))

    @property
    def grid(self):
        return self.hyper_mu[0].shape[1]

    @property
    def steps(self):
        return self.times.size - 1

    def profile(self, j):
        """Full d-vector profile Y_j on the grid, shape (steps+1, grid, d); zero for j outside 0..q."""
        if j < 0 or j > self.q:
            return np.zeros(self.hyper_mu[0].shape[:2] + (self.operator.d_h + self.operator.d_p,),
                            dtype=complex)
        return np.concatenate([self.hyper_mu[j] + self.hyper_other[j], self.parabolic[j]], axis=-1)

    def rate(self, j):
        """Time derivative d_t Y_j at fixed s."""
        if j < 0 or j > self.q:
            return np.zeros_like(self.profile(0))
        return self.rates[j]

    def is_zero(self):
        return all(np.abs(self.profile(j)).max() == 0.0 for j in range(self.q + 1))

    def at(self, t):
        """Profiles (Y_0(t, .), ..., Y_q(t, .)) at an arbitrary time in [0, T]."""
        if t < -1e-12 or t > self.T * (1.0 + 1e-12):
            raise ValueError("t = {0} outside [0, {1}]".format(t, self.T))
        idx = np.flatnonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12 * max(1.0, self.T)))
        if idx.size:
            return [self.profile(j)[idx[0]] for j in range(self.q + 1)]
        return [make_interp_spline(self.times, self.profile(j), k=SPLINE_ORDER, axis=0)(t)
                for j in range(self.q + 1)]

    def level_defect(self, j):
        """max |L0 Y_j + L1 Y_{j-1} + L2 Y_{j-2}| over the grid; vanishes for j <= q."""
        op = self.operator
        psi1, psi2 = self.phase.derivatives(self.grid)
        total = op.L0(self.profile(j), psi1) + op.L1(self.profile(j - 1), psi1, psi2) \
            + op.L2(self.profile(j - 2), self.rate(j - 2))
        return float(np.abs(total).max())

    def projector_defect(self):
        """Largest |(I - P) Y^{h,mu}| and |P Y^{h,!=mu}| over all levels."""
        P = self.operator.P
        eye = np.eye(P.shape[0])
        worst = 0.0
        for j in range(self.q + 1):
            worst = max(worst, np.abs(self.hyper_mu[j] @ (eye - P).T).max(),
                        np.abs(self.hyper_other[j] @ P.T).max())
        return float(worst)

    def describe(self):
        return {"q": self.q, "T": self.T, "grid": self.grid, "steps": self.steps, "phase": self.phase.describe()}


def _initial_profile(op, Y0_init, grid):
    s = TWO_PI * np.arange(grid) / grid
    if callable(Y0_init):
        values = np.asarray(Y0_init(s), dtype=complex)
    else:
        values = np.broadcast_to(np.asarray(Y0_init, dtype=complex), (grid, op.d_h))
    values = np.array(values, dtype=complex).reshape(grid, op.d_h)
    leak = np.abs(values @ (np.eye(op.d_h) - op.P).T).max()
    if leak > PROJ_TOL * max(1.0, np.abs(values).max()):
        raise ValueError("initial profile leaves the eigenspace of mu_adj = {0:g} (leak {1:.3e})".format(
            op.mu, leak))
    return values @ op.P.T


def build_profiles(spec, phase, q, Y0_init, T, grid=128, steps=400):
    """
        Description
        -----------
            Solves the profile recursion of the adjoint WKB ansatz up to order q
            on [0, T] x (moving-frame grid).
        Input
        -----
            :param spec: SystemSpec of the forward system.
            :param phase: PhaseSpec with mu = mu_adj.
            :param q: int >= 0, highest profile index.
            :param Y0_init: callable s -> (len(s), d_h) or constant d_h-vector,
                valued in ker(-A'^T - mu_adj); initial datum of Y_0^{h,mu}.
                The higher mu-parts start from zero.
            :param grid: int, points of the moving-frame grid.
            :param steps: int, RK4 steps over [0, T].
        Output
        ------
            :return: WkbProfileSet
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    if T <= 0:
        raise ValueError("T must be positive")
    if steps < SPLINE_ORDER + 1:
        raise ValueError("need at least {0} time steps".format(SPLINE_ORDER + 1))
    op = AdjointOperator(spec, phase.mu)
    psi1, psi2 = phase.derivatives(grid)
    if np.min(np.abs(psi1)) <= PHASE_TOL:
        worst = TWO_PI * np.argmin(np.abs(psi1)) / grid
        raise PhaseDegenerate("psi' vanishes near s = {0:.6g}".format(worst))

    times = np.linspace(0.0, float(T), steps + 1)
    h_rows, p_rows = slice(0, op.d_h), slice(op.d_h, op.d_h + op.d_p)
    shape = (times.size, grid)
    start = _initial_profile(op, Y0_init, grid)
    hyper_mu, hyper_other, parabolic, rates = [], [], [], []
    full = [np.zeros(shape + (spec.d,), dtype=complex)] * 2
    full_rates = [np.zeros(shape + (spec.d,), dtype=complex)] * 2
    sq = (psi1 ** 2)[:, None]

    for j in range(q + 1):
        prev, prev2 = full[-1], full[-2]
        prev_rate, prev2_rate = full_rates[-1], full_rates[-2]

        forcing = op.L1(prev, psi1, psi2) + op.L2(prev2, prev2_rate)
        Zp = -(forcing[..., p_rows] @ op.Dinv.T) / sq

        lagged = op.L2(prev, prev_rate)
        Zo = -(Zp @ op.A12.T + lagged[..., h_rows] / (1j * psi1[:, None])) @ op.R.T

        rest = np.concatenate([Zo, Zp], axis=-1)
        ahead = (op.L1(rest, psi1, psi2) + lagged)[..., p_rows] @ op.Dinv.T
        source = -(_ds(Zp) @ op.A12.T + Zo @ op.K11.T + Zp @ op.K12.T) @ op.P.T \
            + ((1j / psi1)[:, None] * ahead) @ (op.P @ op.A12).T
        Zmu = _rk4_transport(times, op.K_eff, start if j == 0 else np.zeros_like(start), source)

        Z = np.concatenate([Zmu + Zo, Zp], axis=-1)
        Zt = _time_derivative(times, Z)
        hyper_mu.append(Zmu)
        hyper_other.append(Zo)
        parabolic.append(Zp)
        rates.append(Zt)
        full, full_rates = [prev, Z], [prev_rate, Zt]
        logger.debug("profile %d: max |Y^mu| %.3e, |Y^other| %.3e, |Y^p| %.3e", j, np.abs(Zmu).max(),
                     np.abs(Zo).max(), np.abs(Zp).max())

    profiles = WkbProfileSet(q=q, T=float(T), phase=phase, operator=op, times=times, hyper_mu=tuple(hyper_mu),
                             hyper_other=tuple(hyper_other), parabolic=tuple(parabolic), rates=tuple(rates))
    logger.info("built WKB profiles up to q=%d on %d x %d grid", q, times.size, grid)
    return profiles


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    """values ~ C h^exponent; exponent None when every value is exactly zero."""
    h: tuple
    values: tuple
    exponent: object

    @property
    def exact_zero(self):
        return self.exponent is None

    def to_dict(self):
        return {"h": list(self.h), "values": list(self.values), "exponent": self.exponent}


def fit_rate(h_list, values):
    h = np.asarray(h_list, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.all(v == 0.0):
        return RateFit(tuple(h), tuple(v), None)
    keep = v > 0.0
    if keep.sum() < 2:
        return RateFit(tuple(h), tuple(v), float("inf"))
    slope = np.polyfit(np.log(h[keep]), np.log(v[keep]), 1)[0]
    return RateFit(tuple(h), tuple(v), float(slope))


def _field(profiles, h, t_index, npts):
    """g_h and d_t|_s g_h at a profile time node on the moving-frame grid of npts points."""
    s = TWO_PI * np.arange(npts) / npts
    E = profiles.phase.factor(s, h)[:, None]
    G = sum(h ** j * _resample(profiles.profile(j)[t_index], npts) for j in range(profiles.q + 1))
    Gt = sum(h ** j * _resample(profiles.rate(j)[t_index], npts) for j in range(profiles.q + 1))
    return s, G * E, Gt * E


def residual_order(spec, profiles, h_list, grid=None, samples=21):
    """
        Description
        -----------
            Applies (d_t - B^T d_xx - A^T d_x + K^T) to g_h on a fine grid by
            spectral differentiation, removes the carrier e^{i n0 (x - mu t)/h}
            and fits the sup norm of what is left against h.
        Output
        ------
            :return: RateFit, exponent close to q - 1
    """
    phase = profiles.phase
    nodes = np.unique(np.linspace(0, profiles.steps, samples).round().astype(int))
    sups = []
    for h in h_list:
        npts = _lab_grid(phase.n0, h, grid)
        worst = 0.0
        for idx in nodes:
            s, g, gt = _field(profiles, h, idx, npts)
            gs = _ds(g, axis=0)
            gss = _ds(g, 2, axis=0)
            Lg = gt - phase.mu * gs - gss @ spec.B - gs @ spec.A + g @ spec.K
            r = Lg * np.conj(phase.carrier(s, h))[:, None]
            worst = max(worst, float(np.max(np.linalg.norm(r, axis=1))))
        sups.append(worst)
        logger.debug("h=%g: sup residual %.3e", h, worst)
    fit = fit_rate(h_list, sups)
    logger.info("WKB residual exponent %s (q=%d)", fit.exponent, profiles.q)
    return fit


def _lab_values(profiles, h, t, npts):
    """g_h(t, x) at x = 2 pi k / npts, shape (npts, d)."""
    phase = profiles.phase
    x = TWO_PI * np.arange(npts) / npts
    shift = phase.mu * t
    G = sum(h ** j * _resample(Y, npts, shift=shift) for j, Y in enumerate(profiles.at(t)))
    return G * phase.factor(x - shift, h)[:, None]


def nonstationary_decay(profiles, n, h_list, grid=None):
    """
    |(g_h(t, .), e_n)| at t = 0, T/2, T against h for a fixed Fourier index n;
    returns the smallest fitted decay exponent. Pairings below the round-off
    floor are left out of the fit.
    """
    phase = profiles.phase
    exponents = []
    for t in (0.0, 0.5 * profiles.T, profiles.T):
        values = []
        for h in h_list:
            npts = _lab_grid(phase.n0, h, grid)
            g = _lab_values(profiles, h, t, npts)
            pairing = TWO_PI * np.fft.fft(g, axis=0)[np.mod(n, npts)] / npts
            value = float(la.norm(pairing))
            values.append(value if value > FLOOR * np.abs(g).max() else 0.0)
        fit = fit_rate(h_list, values)
        if fit.exact_zero:
            continue
        exponents.append(fit.exponent)
        logger.debug("t=%g: pairing with e_%d decays like h^%s", t, n, fit.exponent)
    if not exponents:
        return float("inf")
    return float(min(exponents))


# ---------------------------------------------------------------------------
# observability experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRow:
    h: float
    lhs: float
    rhs: float

    @property
    def quotient(self):
        return self.lhs / self.rhs if self.rhs > 0.0 else float("inf")


@dataclass(frozen=True)
class WkbExperiment:
    kind: str
    rows: tuple
    lhs_fit: RateFit
    rhs_fit: RateFit
    quotient_growth: object
    mu: float
    x0: float
    lhs_limit: object = None

    header = ("h", "lhs", "rhs", "quotient")

    def table(self):
        return [(r.h, r.lhs, r.rhs, r.quotient) for r in self.rows]

    def to_dict(self):
        return {"kind": self.kind, "mu": self.mu, "x0": self.x0, "lhs_limit": self.lhs_limit,
                "quotient_growth": self.quotient_growth, "lhs_fit": self.lhs_fit.to_dict(),
                "rhs_fit": self.rhs_fit.to_dict(), "rows": [list(r) for r in self.table()]}


def admissible_x0(w, mu_adj, T):
    """
    A start point whose characteristic x0 + mu_adj t, 0 <= t <= T, stays off
    the closure of w, centred in the largest gap.
    """
    gap = w.largest_gap()
    travel = abs(mu_adj) * T
    if gap is None or travel >= gap[1] - gap[0] - 1e-12:
        raise GeometryMismatch("the characteristic of speed {0:g} over T={1:g} cannot avoid omega "
                               "(T >= T* for this eigenvalue)".format(mu_adj, T))
    a, b = gap
    slack = 0.5 * (b - a - travel)
    x0 = a + slack if mu_adj >= 0 else b - slack
    return float(np.mod(x0, TWO_PI))


def _observed_energy(spec, w, coeffs, T, npts):
    """||M^* g||^2 over (0, T) x w for the adjoint evolution of coeffs, composite Gauss in t."""
    modes = np.arange(-((coeffs.shape[0] - 1) // 2), (coeffs.shape[0] - 1) // 2 + 1)
    x = TWO_PI * np.arange(npts) / npts
    mask = w.contains(x)
    s, wts = leggauss(PANEL_NODES)
    edges = np.linspace(0.0, T, TIME_PANELS + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        for node, weight in zip(0.5 * (b - a) * (s + 1.0) + a, 0.5 * (b - a) * wts):
            stack = propagators(spec, modes, node, adjoint=True)
            g = _grid_values(np.einsum("nij,nj->ni", stack, coeffs), npts)
            observed = g @ spec.M.conj()
            total += weight * np.sum(np.abs(observed[mask]) ** 2) * TWO_PI / npts
    return total


def _run(spec, w, T, profiles, h_list, N, grid, kind, lhs_limit=None):
    rows = []
    for h in h_list:
        npts = _lab_grid(profiles.phase.n0, h, grid)
        values = _lab_values(profiles, h, 0.0, npts)
        datum = SpectralField.from_grid(values, (npts - 1) // 2)
        lhs = evolve_adjoint(spec, datum, T).high_pass(N).l2_norm()
        rhs = float(np.sqrt(_observed_energy(spec, w, datum.coeffs, T, npts)))
        rows.append(ExperimentRow(float(h), float(lhs), rhs))
        logger.info("%s h=%g: lhs %.6e rhs %.6e", kind, h, lhs, rhs)
    lhs_fit = fit_rate(h_list, [r.lhs for r in rows])
    rhs_fit = fit_rate(h_list, [r.rhs for r in rows])
    quotients = [r.quotient for r in rows]
    if not all(np.isfinite(quotients)):
        growth = float("inf")
    else:
        quotient_fit = fit_rate(h_list, quotients)
        growth = None if quotient_fit.exact_zero else -quotient_fit.exponent
    return WkbExperiment(kind=kind, rows=tuple(rows), lhs_fit=lhs_fit, rhs_fit=rhs_fit, quotient_growth=growth,
                         mu=profiles.phase.mu, x0=profiles.phase.x0, lhs_limit=lhs_limit)


def _eigenvector(spec, mu):
    P = spec.transport.projection(mu).conj().T
    return la.orth(P)[:, 0]


def small_time_experiment(spec, w, T, h_list, N, mu=None, q=2, n0=1, grid=None, profile_grid=128, steps=400,
                          enforce_geometry=True, x0=None):
    """
        Description
        -----------
            Quasi-mode concentrated on a characteristic that avoids omega over
            [0, T]: the datum g_h(0) is evolved by the truncated adjoint
            dynamics and the two sides of the observability inequality

                lhs = ||pi_N g_h(T)||,   rhs = ||M^* g_h||_{L^2((0,T) x omega)}

            are tabulated against h.
        Input
        -----
            :param mu: eigenvalue of A'; the slowest one by default.
            :param n0: carrier frequency of the phase, in units of 1/h.
            :param enforce_geometry: if False, x0 is not required to avoid omega
                (sanity runs with omega = torus).
        Output
        ------
            :return: WkbExperiment; quotient_growth is the fitted exponent of
                lhs / rhs in 1/h.
    """
    if mu is None:
        mu = min(spec.transport.eigenvalues, key=abs)
    phase = PhaseSpec.for_adjoint(spec, mu, n0=n0)
    if x0 is None:
        try:
            x0 = admissible_x0(w, phase.mu, T)
        except GeometryMismatch:
            if enforce_geometry:
                raise
            x0 = np.pi
    elif enforce_geometry:
        path = x0 + phase.mu * np.linspace(0.0, T, 257)
        if np.any(w.contains(path)):
            raise GeometryMismatch("characteristic from x0={0:g} meets omega before T={1:g}".format(x0, T))
    phase = PhaseSpec.for_adjoint(spec, mu, n0=n0, x0=x0)
    profiles = build_profiles(spec, phase, q, _eigenvector(spec, mu), T, grid=profile_grid, steps=steps)
    result = _run(spec, w, T, profiles, h_list, N, grid, "small-time")
    logger.info("small-time experiment: quotient grows like (1/h)^%s", result.quotient_growth)
    return result


def rough_data_experiment(spec, w, T, mu, h_list, N, V0=None, q=2, n0=1, grid=None, profile_grid=32, steps=400):
    """
    Flat-phase quasi-mode on an unobserved direction V0 of the eigenspace of mu:
    lhs tends to sqrt(2 pi) |e^{-T K_mu^*} V0| while rhs vanishes with h.
    """
    obstruction = rough_obstruction(spec, mu)
    if not obstruction.obstructed:
        raise NoObstructionWitness("M^* observes every direction of the eigenspace of mu={0:g}".format(mu))
    Q = obstruction.witness_basis
    if V0 is None:
        V0 = Q[:, 0]
    V0 = np.asarray(V0, dtype=complex).ravel()
    if la.norm(V0) == 0.0:
        raise ValueError("V0 must be nonzero")
    if la.norm(V0 - Q @ (Q.conj().T @ V0)) > WITNESS_TOL * la.norm(V0):
        raise NoObstructionWitness("V0 is not in the unobserved subspace of mu={0:g}".format(mu))
    phase = PhaseSpec.for_adjoint(spec, mu, n0=n0, flat=True)
    profiles = build_profiles(spec, phase, q, V0, T, grid=profile_grid, steps=steps)
    limit = float(np.sqrt(TWO_PI) * la.norm(la.expm(-T * k_mu_star(spec, mu)) @ V0))
    result = _run(spec, w, T, profiles, h_list, N, grid, "rough-data", lhs_limit=limit)
    logger.info("rough-data experiment: lhs -> %.6e (limit %.6e), rhs ~ h^%s", result.rows[-1].lhs, limit,
                result.rhs_fit.exponent)
    return result
