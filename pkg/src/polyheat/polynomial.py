r"""Real polynomial weights and their Wirtinger calculus.

A weight is a real-valued polynomial on C, stored through its expansion

    p(z) = sum_{j,k} c_{jk} z^j zbar^k,       c_{kj} = conj(c_{jk}),

so reality is the conjugate symmetry of the coefficient table.  All of the
geometry and operator code consumes polynomials through this module: exact
point evaluation, gradients and Laplacians via

    d/dx1 p = 2 Re dp/dz,   d/dx2 p = -2 Im dp/dz,   Lap p = 4 d2p/dz dzbar,

and recentered Taylor tables

    A_{jk}(z0) = (1/(j! k!)) d^{j+k} p / dz^j dzbar^k (z0)
               = sum_{J>=j, K>=k} c_{JK} C(J,j) C(K,k) z0^{J-j} conj(z0)^{K-k},

which are exact finite sums (no truncation, no floating differentiation).
The mixed entries A_{jk} with j,k >= 1 are the only coefficients that carry
curvature; a table whose mixed entries all vanish is harmonic and is
rejected as a weight.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import comb
from typing import Dict, Tuple

import numpy as np

from .errors import (
    AllMixedTermsVanishError,
    DegreeTooLowError,
    HarmonicError,
    NotRealError,
)

__all__ = [
    "PolynomialSpec",
    "RecenteredTaylor",
    "SubharmonicityReport",
    "make_polynomial",
    "model_p1",
    "model_p2",
    "eval_p",
    "gradient",
    "laplacian",
    "recenter",
    "taylor_coefficient_grid",
    "subharmonicity_check",
    "poly_id",
]

CoeffTable = Dict[Tuple[int, int], complex]

#: Relative conjugate-asymmetry above which a coefficient table is rejected
#: instead of being silently symmetrized.
REALITY_TOL = 1e-12


@dataclass(frozen=True)
class PolynomialSpec:
    """Validated real polynomial in the z/zbar expansion.

    Attributes
    ----------
    coeffs : dict
        Map ``(j, k) -> complex`` with ``coeffs[k, j] == conj(coeffs[j, k])``
        exactly (enforced by :func:`make_polynomial`).  Zero entries are
        dropped.  Treated as immutable.
    degree : int
        Total degree ``max(j + k)``.
    """

    coeffs: CoeffTable
    degree: int

    def coefficient(self, j: int, k: int) -> complex:
        return self.coeffs.get((j, k), 0.0 + 0.0j)

    def __repr__(self) -> str:  # keep reprs short in test failure output
        terms = ", ".join(
            f"({j},{k}): {c:.6g}" for (j, k), c in sorted(self.coeffs.items())
        )
        return f"PolynomialSpec(degree={self.degree}, {{{terms}}})"


@dataclass(frozen=True)
class RecenteredTaylor:
    """Exact Taylor table of a weight about a center.

    ``table[(j, k)]`` holds A_{jk}(center); zero entries are omitted, and
    conjugate symmetry ``A_{kj} = conj(A_{jk})`` is inherited from the
    source polynomial.
    """

    center: complex
    degree: int
    table: CoeffTable

    def coefficient(self, j: int, k: int) -> complex:
        return self.table.get((j, k), 0.0 + 0.0j)

    def mixed_terms(self) -> CoeffTable:
        """Entries with j >= 1 and k >= 1 (the curvature-carrying ones)."""
        return {jk: c for jk, c in self.table.items() if jk[0] >= 1 and jk[1] >= 1}

    def nonconstant_terms(self) -> CoeffTable:
        """Entries with j + k >= 1."""
        return {jk: c for jk, c in self.table.items() if jk[0] + jk[1] >= 1}


def make_polynomial(coeffs: CoeffTable) -> PolynomialSpec:
    """Validate a coefficient table and return a :class:`PolynomialSpec`.

    The table is symmetrized via ``c_jk <- (c_jk + conj(c_kj)) / 2`` provided
    the asymmetry is below ``1e-12`` relative to the largest coefficient;
    a larger asymmetry raises :class:`NotRealError` rather than silently
    repairing a typo.

    Raises
    ------
    NotRealError
        Conjugate asymmetry above tolerance.
    HarmonicError
        No surviving mixed term (j, k >= 1): the weight carries no curvature.
    DegreeTooLowError
        Total degree below 2.
    """
    if not coeffs:
        raise DegreeTooLowError("empty coefficient table")
    clean: CoeffTable = {}
    for (j, k), c in coeffs.items():
        if not (isinstance(j, int) and isinstance(k, int)) or j < 0 or k < 0:
            raise NotRealError(f"invalid monomial index ({j}, {k})")
        clean[(j, k)] = complex(c)

    scale = max(abs(c) for c in clean.values())
    if scale == 0.0:
        raise DegreeTooLowError("all coefficients vanish")

    keys = set(clean) | {(k, j) for (j, k) in clean}
    sym: CoeffTable = {}
    worst = 0.0
    for (j, k) in keys:
        a = clean.get((j, k), 0.0 + 0.0j)
        b = clean.get((k, j), 0.0 + 0.0j)
        worst = max(worst, abs(a - b.conjugate()))
        sym[(j, k)] = 0.5 * (a + b.conjugate())
    if worst > REALITY_TOL * max(1.0, scale):
        raise NotRealError(
            f"coefficient table is not conjugate-symmetric: "
            f"max |c_jk - conj(c_kj)| = {worst:.3e} (scale {scale:.3e})"
        )

    sym = {jk: c for jk, c in sym.items() if c != 0.0}
    if not sym:
        raise DegreeTooLowError("all coefficients vanish after symmetrization")
    degree = max(j + k for (j, k) in sym)
    if degree < 2:
        raise DegreeTooLowError(f"degree {degree} < 2")
    if not any(j >= 1 and k >= 1 for (j, k) in sym):
        raise HarmonicError("no mixed z^j zbar^k term with j, k >= 1: "
                            "polynomial is harmonic")
    return PolynomialSpec(coeffs=sym, degree=degree)


def model_p1(m: int) -> PolynomialSpec:
    """|z|^(2m), the radial model weight."""
    if m < 1:
        raise DegreeTooLowError(f"model p1 needs m >= 1, got {m}")
    return make_polynomial({(m, m): 1.0})


def model_p2(m: int) -> PolynomialSpec:
    """(Re z)^(2m) = ((z + zbar)/2)^(2m), the one-directional model weight."""
    if m < 1:
        raise DegreeTooLowError(f"model p2 needs m >= 1, got {m}")
    n = 2 * m
    return make_polynomial({(j, n - j): comb(n, j) / 4.0**m for j in range(n + 1)})


def _derivative_table(coeffs: CoeffTable, a: int, b: int) -> CoeffTable:
    """Coefficient table of d^a/dz^a d^b/dzbar^b applied to the table."""
    out: CoeffTable = {}
    for (j, k), c in coeffs.items():
        if j < a or k < b:
            continue
        fall = 1.0
        for t in range(a):
            fall *= j - t
        for t in range(b):
            fall *= k - t
        out[(j - a, k - b)] = c * fall
    return out


def _eval_table(coeffs: CoeffTable, z: np.ndarray) -> np.ndarray:
    zb = np.conjugate(z)
    out = np.zeros_like(z, dtype=complex)
    for (j, k), c in coeffs.items():
        out += c * z**j * zb**k
    return out


def _as_z(x) -> np.ndarray:
    """Accept a complex array/scalar or an (x1, x2) pair."""
    if isinstance(x, tuple) and len(x) == 2:
        return np.asarray(x[0], dtype=float) + 1j * np.asarray(x[1], dtype=float)
    return np.asarray(x, dtype=complex)


def eval_p(p: PolynomialSpec, x) -> np.ndarray:
    """Evaluate p at points given as complex values or an (x1, x2) pair."""
    return _eval_table(p.coeffs, _as_z(x)).real


def gradient(p: PolynomialSpec, x):
    """(d/dx1 p, d/dx2 p) evaluated exactly from the Wirtinger derivative."""
    gz = _eval_table(_derivative_table(p.coeffs, 1, 0), _as_z(x))
    return 2.0 * gz.real, -2.0 * gz.imag


def laplacian(p: PolynomialSpec, x) -> np.ndarray:
    """Lap p = 4 d2p/dz dzbar, real because the table is conjugate-symmetric."""
    return 4.0 * _eval_table(_derivative_table(p.coeffs, 1, 1), _as_z(x)).real


def recenter(p: PolynomialSpec, z0: complex) -> RecenteredTaylor:
    """Exact Taylor table of p about z0 via the binomial shift.

    Returns
    -------
    RecenteredTaylor
        Table with ``A[(j, k)] = (1/(j!k!)) d^{j+k} p/dz^j dzbar^k (z0)``
        for ``0 <= j + k <= degree``; recentering at 0 reproduces the input
        coefficients exactly.
    """
    z0 = complex(z0)
    z0b = z0.conjugate()
    table: CoeffTable = {}
    for (J, K), c in p.coeffs.items():
        for j in range(J + 1):
            for k in range(K + 1):
                w = c * comb(J, j) * comb(K, k) * z0 ** (J - j) * z0b ** (K - k)
                if w != 0.0:
                    table[(j, k)] = table.get((j, k), 0.0 + 0.0j) + w
    table = {jk: c for jk, c in table.items() if c != 0.0}
    return RecenteredTaylor(center=z0, degree=p.degree, table=table)


def taylor_coefficient_grid(p: PolynomialSpec, z: np.ndarray, j: int, k: int) -> np.ndarray:
    """A_{jk}(z) for an array of centers z, via the same binomial shift."""
    z = np.asarray(z, dtype=complex)
    zb = np.conjugate(z)
    out = np.zeros_like(z, dtype=complex)
    for (J, K), c in p.coeffs.items():
        if J >= j and K >= k:
            out += c * comb(J, j) * comb(K, k) * z ** (J - j) * zb ** (K - k)
    return out


def mixed_index_range(p: PolynomialSpec):
    """All (j, k), j, k >= 1, j + k <= degree — candidate mixed indices."""
    d = p.degree
    return [(j, k) for j in range(1, d) for k in range(1, d + 1 - j)]


@dataclass(frozen=True)
class SubharmonicityReport:
    min_laplacian: float
    max_laplacian: float
    passed: bool


def subharmonicity_check(p: PolynomialSpec, box_halfwidth: float = 4.0,
                         n: int = 101) -> SubharmonicityReport:
    """Sample Lap p on an n-by-n grid over the centered box.

    The flag trips when the sampled minimum is more negative than
    ``-1e-10 * (1 + max |Lap p|)``; a clean pass certifies subharmonicity
    on the sample only (it is not a proof).
    """
    t = np.linspace(-box_halfwidth, box_halfwidth, n)
    X1, X2 = np.meshgrid(t, t, indexing="ij")
    lap = laplacian(p, (X1, X2))
    lo = float(lap.min())
    hi = float(np.abs(lap).max())
    return SubharmonicityReport(min_laplacian=lo, max_laplacian=hi,
                                passed=lo >= -1e-10 * (1.0 + hi))


def require_some_mixed_term(table: RecenteredTaylor, scale: float = 1.0) -> None:
    """Raise AllMixedTermsVanishError when every mixed entry is ~ 0."""
    tol = 1e-14 * max(scale, 1e-300)
    if not any(abs(c) > tol for c in table.mixed_terms().values()):
        raise AllMixedTermsVanishError(
            f"all mixed Taylor coefficients vanish at center {table.center}"
        )


def poly_id(p: PolynomialSpec) -> str:
    """Stable 12-hex digest of the coefficient table (for manifests)."""
    text = ";".join(
        f"{j},{k},{c.real:.17g},{c.imag:.17g}"
        for (j, k), c in sorted(p.coeffs.items())
    )
    return hashlib.sha256(text.encode()).hexdigest()[:12]
