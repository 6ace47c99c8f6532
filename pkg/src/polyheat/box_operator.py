r"""Discretization of the weighted Laplacian on a square grid.

For a real weight p and coupling tau >= 0 the operator acting on u is

    Box u = -(1/4) Lap u + [ (tau/4) Lap p + (tau^2/4) |grad p|^2 ] u
            + (i tau / 2) ( p_x1 d/dx2 - p_x2 d/dx1 ) u,

the real form of -Zbar Z with Zbar = d/dzbar + tau p_zbar and
Z = d/dz - tau p_z.  Discretization on the uniform origin-centered grid
with homogeneous Dirichlet boundary:

* -(1/4) Lap  ->  (1/4) x standard 5-point stencil (symmetric positive);
* the potential is evaluated exactly at the nodes (diagonal, real);
* the drift coefficient b = (-p_x2, p_x1) is divergence free, so
  b . grad = (1/2)(b . grad + grad . b) exactly, and the discrete drift is
  the skew-symmetrized centered form (1/2)(B_k D_k + D_k B_k).  That form
  is second-order consistent *and* exactly antisymmetric in floating
  point (its (r, c) entry is (b_r + b_c) D_{rc} with D antisymmetric),
  which makes the assembled matrix Hermitian to rounding.  The naive
  product B_k D_k is not antisymmetric and would leak a spurious
  non-selfadjoint part of size O(h) near where b varies.

Positivity holds discretely: centered differences are dominated by the
Dirichlet difference form, |D_k u|^2 <= <T_k u, u>, so

    <A u, u> >= sum_k ( (1/2)||D_k u|| - (tau/2)|| b_k u || )^2
                + (tau/4) <(Lap p) u, u>  >=  0

whenever p is subharmonic.  Assembly verifies Hermiticity and positivity
on random vectors and refuses to return an operator that fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotHermitianError, NotPSDError
from .polynomial import PolynomialSpec, gradient, laplacian

__all__ = [
    "Grid2D",
    "ComplexField",
    "DiscreteBox",
    "assemble_box",
    "apply_field",
    "smallest_eigenvalues",
    "FIELD_KINDS",
]

FIELD_KINDS = ("Zbar", "Z", "X1", "X2", "U1", "U2")


@dataclass(frozen=True)
class Grid2D:
    """Uniform origin-centered grid on [-L, L]^2 with n nodes per side.

    n must be odd (so the origin is a node) and at least 33.  Arrays over
    the grid are indexed ``values[iy, ix]`` with ``x1 = coords[ix]`` and
    ``x2 = coords[iy]``; flattening is row-major, matching the operator
    matrices.
    """

    L: float
    n: int

    def __post_init__(self):
        if self.n < 33 or self.n % 2 == 0:
            raise ValueError(f"grid needs odd n >= 33, got n = {self.n}")
        if self.L <= 0:
            raise ValueError(f"grid half-width must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    def mesh(self):
        c = self.coords
        return np.meshgrid(c, c, indexing="xy")

    def zmesh(self) -> np.ndarray:
        X1, X2 = self.mesh()
        return X1 + 1j * X2

    def nearest_node(self, z: complex):
        """(iy, ix) of the node closest to the complex point z."""
        z = complex(z)
        ix = int(np.clip(round((z.real + self.L) / self.h), 0, self.n - 1))
        iy = int(np.clip(round((z.imag + self.L) / self.h), 0, self.n - 1))
        return iy, ix

    def node_point(self, iy: int, ix: int) -> complex:
        c = self.coords
        return complex(c[ix], c[iy])


@dataclass
class ComplexField:
    """A complex-valued grid function plus bookkeeping of the boundary ring
    whose values must not be trusted (widens by one with each centered
    derivative applied)."""

    grid: Grid2D
    values: np.ndarray
    invalid_margin: int = 0

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.invalid_margin)

    def interior(self, extra: int = 0) -> np.ndarray:
        """View of the trustworthy part of the field."""
        m = max(1, self.invalid_margin + extra)
        return self.values[m:-m, m:-m]

    def interior_mask(self, extra: int = 0) -> np.ndarray:
        m = max(1, self.invalid_margin + extra)
        mask = np.zeros(self.values.shape, dtype=bool)
        mask[m:-m, m:-m] = True
        return mask

    def l2_norm(self) -> float:
        """Grid L2 norm: sqrt(h^2 sum |u|^2)."""
        return float(self.grid.h * np.linalg.norm(self.values))

    def max_abs(self, extra: int = 0) -> float:
        return float(np.abs(self.interior(extra)).max())


@dataclass
class DiscreteBox:
    """Assembled sparse operator together with its audit results."""

    grid: Grid2D
    tau: float
    poly: PolynomialSpec
    matrix: sp.csr_matrix
    herm_defect: float
    psd_floor: float
    _diag: np.ndarray = dc_field(repr=False, default=None)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def diagonal(self) -> np.ndarray:
        if self._diag is None:
            self._diag = self.matrix.diagonal().real
        return self._diag

    def apply(self, u):
        """Box u.  Accepts a ComplexField (margin grows by 1) or an array
        (returned in the same shape)."""
        if isinstance(u, ComplexField):
            flat = self.matrix @ u.values.ravel()
            return ComplexField(u.grid, flat.reshape(u.values.shape),
                                u.invalid_margin + 1)
        arr = np.asarray(u)
        return (self.matrix @ arr.ravel()).reshape(arr.shape)


def assemble_box(p: PolynomialSpec, tau: float, grid: Grid2D) -> DiscreteBox:
    """Assemble the discrete weighted Laplacian and audit it.

    tau = 0 is accepted (free Laplacian limit, used for oracle runs); any
    negative tau is rejected.  The returned operator must be Hermitian to
    rounding and positive semidefinite on random test vectors; violations
    raise NotHermitianError / NotPSDError instead of returning a broken
    matrix.  Tolerances are scaled by the operator magnitude so that pure
    floating-point accumulation noise on huge potentials cannot trip them.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    n, h = grid.n, grid.h
    X1, X2 = grid.mesh()

    g1, g2 = gradient(p, (X1, X2))
    lap = laplacian(p, (X1, X2))
    V = 0.25 * tau * lap + 0.25 * tau**2 * (g1**2 + g2**2)

    one = np.ones(n)
    T = sp.diags([-one[:-1], 2.0 * one, -one[:-1]], [-1, 0, 1]) / h**2
    Dc = sp.diags([-one[:-1], one[:-1]], [-1, 1]) / (2.0 * h)
    I = sp.identity(n)

    A = (0.25 * (sp.kron(I, T) + sp.kron(T, I))).astype(complex)
    A = A + sp.diags(V.ravel().astype(complex))
    if tau > 0:
        D1 = sp.kron(I, Dc)   # d/dx1: neighbors at +-1 in flat row-major index
        D2 = sp.kron(Dc, I)   # d/dx2: neighbors at +-n
        B1 = sp.diags((-g2).ravel())
        B2 = sp.diags(g1.ravel())
        skew = (B1 @ D1 + D1 @ B1) + (B2 @ D2 + D2 @ B2)
        A = A + (0.25j * tau) * skew
    A = sp.csr_matrix(A)
    A.sort_indices()

    # audit on 8 random vectors; scale-aware tolerances
    rng = np.random.default_rng(7)
    m = n * n
    herm_defect = 0.0
    psd_floor = 0.0
    for _ in range(8):
        u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        Au, Av = A @ u, A @ v
        scale = np.linalg.norm(Au) * np.linalg.norm(v) + np.linalg.norm(u) * np.linalg.norm(Av)
        defect = abs(np.vdot(v, Au) - np.vdot(Av, u)) / max(scale, 1e-300)
        herm_defect = max(herm_defect, defect)
        if defect > 1e-12:
            raise NotHermitianError(
                f"assembled operator not self-adjoint: relative defect {defect:.3e}"
            )
        quad = np.vdot(u, Au)
        uu = np.vdot(u, u).real
        floor = quad.real / uu
        psd_floor = min(psd_floor, floor)
        if quad.real < -(1e-10 * uu + 1e-12 * np.linalg.norm(Au) * np.linalg.norm(u)):
            raise NotPSDError(
                f"assembled operator has negative quadratic form: "
                f"<Au,u>/<u,u> = {floor:.3e}"
            )
    return DiscreteBox(grid=grid, tau=tau, poly=p, matrix=A,
                       herm_defect=herm_defect, psd_floor=psd_floor)


def _dx(values: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * h)
    return out


def _dy(values: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:-1, :] = (values[2:, :] - values[:-2, :]) / (2.0 * h)
    return out


def apply_field(kind: str, p: PolynomialSpec, tau: float,
                field: ComplexField) -> ComplexField:
    """Apply one of the weighted first-order fields with centered differences.

    Kinds (all with exact polynomial coefficients at the nodes):

        Zbar = d/dzbar + tau p_zbar          Z  = d/dz - tau p_z
        X1   = d/dx1 + i tau p_x2            X2 = d/dx2 - i tau p_x1
        U1   = d/dx1 - i tau p_x2            U2 = d/dx2 + i tau p_x1

    The outermost ring of the result is invalid (centered stencil), so the
    returned field's invalid margin grows by one.
    """
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")
    grid, h = field.grid, field.grid.h
    u = field.values
    X1m, X2m = grid.mesh()
    g1, g2 = gradient(p, (X1m, X2m))

    if kind in ("Zbar", "Z"):
        du = 0.5 * (_dx(u, h) + 1j * _dy(u, h)) if kind == "Zbar" \
            else 0.5 * (_dx(u, h) - 1j * _dy(u, h))
        pz = 0.5 * (g1 - 1j * g2)
        coeff = tau * np.conjugate(pz) if kind == "Zbar" else -tau * pz
        out = du + coeff * u
    elif kind in ("X1", "U1"):
        sgn = 1.0 if kind == "X1" else -1.0
        out = _dx(u, h) + sgn * 1j * tau * g2 * u
    else:  # X2 / U2
        sgn = -1.0 if kind == "X2" else 1.0
        out = _dy(u, h) + sgn * 1j * tau * g1 * u
    return ComplexField(grid, out, field.invalid_margin + 1)


def smallest_eigenvalues(box: DiscreteBox, k: int = 1) -> np.ndarray:
    """Lowest k eigenvalues of the assembled operator via shift-invert
    Lanczos at sigma = 0 (the matrix is Hermitian positive semidefinite)."""
    vals = spla.eigsh(box.matrix.tocsc(), k=k, sigma=0, which="LM",
                      return_eigenvectors=False)
    return np.sort(vals.real)
