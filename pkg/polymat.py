# -*- coding: utf-8 -*-
"""
Polynomials and polynomial matrices in one real variable n.

Coefficients are complex floats stored lowest power first. Every product and
determinant keeps track of the coefficientwise magnitude it was built from, so
that cancellation residues can be told apart from genuine coefficients.
"""

import logging
from functools import total_ordering

import numpy as np
from numpy.polynomial import polynomial as npoly

from errors import DimensionMismatch, SizeExceeded

logger = logging.getLogger(__name__)

COEFF_TOL = 1e-12
ROOT_TOL = 1e-8
GUARD = 64
MAX_COFACTOR_SIZE = 8


@total_ordering
class RationalDegree(object):
    """Degree of a rational function; ``value=None`` stands for minus infinity."""

    __slots__ = ("value",)

    def __init__(self, value=None):
        self.value = None if value is None else int(value)

    @property
    def is_minus_infinity(self):
        return self.value is None

    @staticmethod
    def _coerce(other):
        if isinstance(other, RationalDegree):
            return other
        return RationalDegree(other)

    def __add__(self, other):
        other = self._coerce(other)
        if self.value is None or other.value is None:
            return MINUS_INFINITY
        return RationalDegree(self.value + other.value)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other.value is None:
            raise ZeroDivisionError("degree of a quotient by the zero polynomial")
        if self.value is None:
            return MINUS_INFINITY
        return RationalDegree(self.value - other.value)

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.value == other.value

    def __lt__(self, other):
        other = self._coerce(other)
        if self.value is None:
            return other.value is not None
        if other.value is None:
            return False
        return self.value < other.value

    def __hash__(self):
        return hash(("RationalDegree", self.value))

    def __int__(self):
        if self.value is None:
            raise ValueError("minus infinity has no integer value")
        return self.value

    def __repr__(self):
        return "-inf" if self.value is None else str(self.value)


MINUS_INFINITY = RationalDegree(None)


class _IdenticallyZero(object):
    def __repr__(self):
        return "IdenticallyZero"

    def __bool__(self):
        return False


IDENTICALLY_ZERO = _IdenticallyZero()


def _trim(coeffs):
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return np.zeros(0, dtype=complex)
    return coeffs[:nz[-1] + 1]


def _padd(a, b):
    if a.size < b.size:
        a, b = b, a
    out = a.astype(complex, copy=True)
    out[:b.size] += b
    return out


def _clean(values, bound, tol=COEFF_TOL):
    values = np.array(values, dtype=complex, copy=True)
    values[np.abs(values) <= tol * bound] = 0.0
    return values


class Poly(object):
    """Immutable polynomial ``sum_j coeffs[j] * n**j``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
        c = _trim(c).copy()
        c.flags.writeable = False
        self.coeffs = c

    def __repr__(self):
        return "<Poly deg={0} coeffs={1}>".format(self.degree, np.array2string(self.coeffs, precision=4))

    @property
    def degree(self):
        if self.coeffs.size == 0:
            return MINUS_INFINITY
        return RationalDegree(self.coeffs.size - 1)

    def is_zero(self):
        return self.coeffs.size == 0

    def __call__(self, n):
        if self.coeffs.size == 0:
            return np.zeros_like(np.asarray(n, dtype=complex))
        return npoly.polyval(n, self.coeffs)

    def scale(self, n):
        """Sum of ``|c_j| |n|^j``, the magnitude evaluation is compared against."""
        if self.coeffs.size == 0:
            return 0.0
        return npoly.polyval(np.abs(n), np.abs(self.coeffs))

    def herm_conjugate(self):
        # n is real, so conjugating p(n) conjugates the coefficients only
        return Poly(np.conj(self.coeffs))

    def __add__(self, other):
        return poly_arith(self, _as_poly(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return poly_arith(self, _as_poly(other), "sub")

    def __rsub__(self, other):
        return poly_arith(_as_poly(other), self, "sub")

    def __mul__(self, other):
        return poly_arith(self, _as_poly(other), "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return Poly(-self.coeffs)

    def allclose(self, other, rtol=1e-12, atol=0.0):
        other = _as_poly(other)
        size = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(size, complex)
        b = np.zeros(size, complex)
        a[:self.coeffs.size] = self.coeffs
        b[:other.coeffs.size] = other.coeffs
        return np.allclose(a, b, rtol=rtol, atol=atol)


def _as_poly(value):
    if isinstance(value, Poly):
        return value
    return Poly([value])


def poly_arith(a, b, op):
    """
        Description
        -----------
            Adds, subtracts or multiplies two polynomials.
        Input
        -----
            :param a: Poly
            :param b: Poly
            :param op: string, one of "add", "sub", "mul".
        Output
        ------
            :return: Poly, renormalized so that the top coefficient is nonzero.
    """
    if op == "add":
        return Poly(_padd(a.coeffs, b.coeffs))
    elif op == "sub":
        return Poly(_padd(a.coeffs, -b.coeffs))
    elif op == "mul":
        if a.is_zero() or b.is_zero():
            return Poly()
        values = np.convolve(a.coeffs, b.coeffs)
        bound = np.convolve(np.abs(a.coeffs), np.abs(b.coeffs))
        return Poly(_clean(values, bound))
    else:
        raise ValueError("{0} is not a valid operation".format(op))


class PolyMatrix(object):
    """
    Matrix whose entries are polynomials in n.

    Stored as a complex array of shape ``(rows, cols, layers)`` where layer j
    holds the coefficient matrix of ``n**j``.
    """

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[:, :, None]
        if c.ndim != 3 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DimensionMismatch("PolyMatrix needs a (rows, cols, layers) coefficient array, "
                                    "got shape {0}".format(c.shape))
        layers = np.flatnonzero(np.any(c != 0, axis=(0, 1)))
        top = layers[-1] + 1 if layers.size else 1
        c = c[:, :, :top].copy()
        c.flags.writeable = False
        self.coeffs = c

    @classmethod
    def constant(cls, matrix):
        return cls(np.atleast_2d(np.asarray(matrix, dtype=complex)))

    @classmethod
    def identity(cls, size):
        return cls(np.eye(size, dtype=complex))

    @classmethod
    def from_terms(cls, terms):
        """Build ``sum_j terms[j] * n**j`` from a mapping power -> matrix."""
        if not terms:
            raise DimensionMismatch("at least one term is needed")
        top = max(terms)
        shape = np.shape(terms[top])
        c = np.zeros(shape + (top + 1,), dtype=complex)
        for power, matrix in terms.items():
            if np.shape(matrix) != shape:
                raise DimensionMismatch("term of power {0} has shape {1}, expected {2}".format(
                    power, np.shape(matrix), shape))
            c[:, :, power] += matrix
        return cls(c)

    @classmethod
    def from_entries(cls, rows, cols, entries):
        if len(entries) != rows * cols:
            raise DimensionMismatch("{0} entries given for a {1}x{2} matrix".format(len(entries), rows, cols))
        entries = [_as_poly(e) for e in entries]
        layers = max([1] + [e.coeffs.size for e in entries])
        c = np.zeros((rows, cols, layers), dtype=complex)
        for idx, e in enumerate(entries):
            c[idx // cols, idx % cols, :e.coeffs.size] = e.coeffs
        return cls(c)

    def __repr__(self):
        return "<PolyMatrix rows={0} cols={1} deg={2}>".format(self.rows, self.cols, self.degree)

    @property
    def rows(self):
        return self.coeffs.shape[0]

    @property
    def cols(self):
        return self.coeffs.shape[1]

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    def entry(self, i, j):
        return Poly(self.coeffs[i, j])

    @property
    def entries(self):
        return [self.entry(i, j) for i in range(self.rows) for j in range(self.cols)]

    def entry_degrees(self):
        """Integer degree of every entry, -1 marking the zero polynomial."""
        nonzero = self.coeffs != 0
        layers = np.arange(self.coeffs.shape[2])
        return np.where(nonzero.any(axis=2), np.max(np.where(nonzero, layers, -1), axis=2), -1)

    @property
    def degree(self):
        top = int(self.entry_degrees().max())
        return MINUS_INFINITY if top < 0 else RationalDegree(top)

    def is_zero(self):
        return not np.any(self.coeffs)

    def evaluate(self, n):
        out = self.coeffs[:, :, -1].copy()
        for k in range(self.coeffs.shape[2] - 2, -1, -1):
            out = out * n + self.coeffs[:, :, k]
        return out

    def __getitem__(self, key):
        rows, cols = key
        return PolyMatrix(self.coeffs[rows, cols, :])

    def _padded(self, other):
        layers = max(self.coeffs.shape[2], other.coeffs.shape[2])
        a = np.zeros(self.shape + (layers,), complex)
        b = np.zeros(other.shape + (layers,), complex)
        a[:, :, :self.coeffs.shape[2]] = self.coeffs
        b[:, :, :other.coeffs.shape[2]] = other.coeffs
        return a, b

    def __add__(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch("cannot add {0} and {1}".format(self.shape, other.shape))
        a, b = self._padded(other)
        return PolyMatrix(a + b)

    def __sub__(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch("cannot subtract {0} and {1}".format(self.shape, other.shape))
        a, b = self._padded(other)
        return PolyMatrix(a - b)

    def __neg__(self):
        return PolyMatrix(-self.coeffs)

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise DimensionMismatch("cannot multiply {0} by {1}".format(self.shape, other.shape))
        la, lb = self.coeffs.shape[2], other.coeffs.shape[2]
        out = np.zeros((self.rows, other.cols, la + lb - 1), complex)
        bound = np.zeros(out.shape)
        abs_a, abs_b = np.abs(self.coeffs), np.abs(other.coeffs)
        for i in range(la):
            out[:, :, i:i + lb] += np.einsum("ij,jkl->ikl", self.coeffs[:, :, i], other.coeffs)
            bound[:, :, i:i + lb] += np.einsum("ij,jkl->ikl", abs_a[:, :, i], abs_b)
        return PolyMatrix(_clean(out, bound))

    def scaled(self, poly):
        """Multiply every entry by the scalar polynomial ``poly``."""
        poly = _as_poly(poly)
        if poly.is_zero():
            return PolyMatrix(np.zeros(self.shape, complex))
        out = np.apply_along_axis(np.convolve, 2, self.coeffs, poly.coeffs)
        bound = np.apply_along_axis(np.convolve, 2, np.abs(self.coeffs), np.abs(poly.coeffs))
        return PolyMatrix(_clean(out, bound))

    def transpose(self):
        return PolyMatrix(self.coeffs.transpose(1, 0, 2))

    def herm_transpose(self):
        return PolyMatrix(np.conj(self.coeffs).transpose(1, 0, 2))


def hstack(mats):
    layers = max(m.coeffs.shape[2] for m in mats)
    rows = mats[0].rows
    blocks = []
    for m in mats:
        if m.rows != rows:
            raise DimensionMismatch("cannot stack {0} rows next to {1}".format(m.rows, rows))
        c = np.zeros(m.shape + (layers,), complex)
        c[:, :, :m.coeffs.shape[2]] = m.coeffs
        blocks.append(c)
    return PolyMatrix(np.concatenate(blocks, axis=1))


def _cofactor(coeffs, signed=True):
    """Laplace expansion along successive rows, memoized on the remaining columns."""
    size = coeffs.shape[0]
    memo = {}

    def minor(row, cols):
        if row == size:
            return np.ones(1, complex)
        key = (row, cols)
        if key in memo:
            return memo[key]
        acc = np.zeros(1, complex)
        for pos, col in enumerate(cols):
            entry = coeffs[row, col]
            if not entry.any():
                continue
            term = np.convolve(entry, minor(row + 1, cols[:pos] + cols[pos + 1:]))
            if signed and pos % 2:
                term = -term
            acc = _padd(acc, term)
        memo[key] = acc
        return acc

    return minor(0, tuple(range(size)))


def _check_square(M):
    if M.rows != M.cols:
        raise DimensionMismatch("matrix of shape {0} is not square".format(M.shape))
    if M.rows > MAX_COFACTOR_SIZE:
        raise SizeExceeded("cofactor expansion limited to size {0}, got {1}".format(MAX_COFACTOR_SIZE, M.rows))


def _det_coeffs(coeffs):
    values = _cofactor(coeffs)
    bound = _cofactor(np.abs(coeffs), signed=False).real
    size = max(values.size, bound.size)
    values = np.pad(values, (0, size - values.size))
    bound = np.pad(bound, (0, size - bound.size))
    return _clean(values, bound)


def polymat_det(M):
    """
        Description
        -----------
            Determinant of a square PolyMatrix by memoized cofactor expansion.
            Coefficients smaller than COEFF_TOL times the matching coefficient
            of the permanent of |M| are cancellation residue and dropped.
        Input
        -----
            :param M: PolyMatrix, square, size <= MAX_COFACTOR_SIZE.
        Output
        ------
            :return: Poly
    """
    _check_square(M)
    return Poly(_det_coeffs(M.coeffs))


def det_bound(M):
    """Coefficients of the permanent of |M|, the magnitude scale of det(M)."""
    _check_square(M)
    return Poly(_cofactor(np.abs(M.coeffs), signed=False).real)


def polymat_adjugate(M):
    """Adjugate with ``Adj(M) M = det(M) I``; the 1x1 adjugate is (1)."""
    _check_square(M)
    size = M.rows
    if size == 1:
        return PolyMatrix.identity(1)
    entries = [[None] * size for _ in range(size)]
    for i in range(size):
        keep_rows = [r for r in range(size) if r != i]
        for j in range(size):
            keep_cols = [c for c in range(size) if c != j]
            cof = _det_coeffs(M.coeffs[np.ix_(keep_rows, keep_cols)])
            entries[j][i] = cof if (i + j) % 2 == 0 else -cof
    layers = max(1, max(e.size for row in entries for e in row))
    c = np.zeros((size, size, layers), complex)
    for j in range(size):
        for i in range(size):
            c[j, i, :entries[j][i].size] = entries[j][i]
    return PolyMatrix(c)


def _vanishes(poly, n, root_tol):
    return abs(poly(n)) <= root_tol * poly.scale(n)


def integer_roots(p, guard=GUARD, reference=None, coeff_tol=COEFF_TOL, root_tol=ROOT_TOL):
    """
        Description
        -----------
            Integer zeros of p. Candidates come from the companion-matrix roots
            rounded to the nearest integer plus a brute scan of |n| <= guard;
            each candidate is kept only if |p(n)| <= root_tol * sum_j |c_j||n|^j.
        Input
        -----
            :param p: Poly
            :param guard: int, half-width of the brute scan.
            :param reference: float, optional magnitude the coefficients are
                compared with when deciding that p vanishes identically.
        Output
        ------
            :return: IDENTICALLY_ZERO or a sorted tuple of ints.
    """
    c = p.coeffs
    top = float(np.abs(c).max()) if c.size else 0.0
    ref = top if reference is None else max(float(reference), top)
    if top == 0.0 or top <= coeff_tol * ref:
        return IDENTICALLY_ZERO
    if c.size == 1:
        return ()

    candidates = set(range(-guard, guard + 1))
    for root in npoly.polyroots(c):
        if not np.isfinite(root) or abs(root.real) > 1e12:
            continue
        if abs(root.imag) <= 0.5:
            candidates.add(int(np.rint(root.real)))
    found = sorted(n for n in candidates if _vanishes(p, n, root_tol))
    logger.debug("integer roots of degree-%s polynomial: %s", p.degree, found)
    return tuple(found)
