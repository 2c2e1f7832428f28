"""Finite element assembly of the three closed-loop beam variants.

Discretization on a uniform mesh of (0, L):

* longitudinal displacements v1, v3 and (magnetic model) charges p1, p3:
  piecewise-linear Lagrange elements, the x = 0 node eliminated by the clamp;
* transverse deflection w: Hermite cubic elements carrying value and slope
  dofs, both x = 0 dofs eliminated.

Every bilinear form is assembled from its energy expression, element by
element, with 4-point Gauss quadrature (exact for all polynomial integrands
that occur, degree <= 6), so M, K, D are symmetric by construction and the
stored energy of the magnetic stretching/charge block is the manifestly
nonnegative  alpha1 h v_x^2 + beta h (gamma v_x - p_x)^2.

Boundary feedback is velocity-proportional and enters only through the
diagonal damping matrix D: gains s1, s3 act on the tip values of the
Lagrange fields (v in the electrostatic/decoupled models, p with the extra
1/(2 h_i) factor in the magnetic model), k1 on the tip slope of w and k2 on
the tip value of w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import InvalidConfig
from .params import BeamConfig, DerivedConstants, Model, derive_constants

_GAUSS_XI, _GAUSS_W = np.polynomial.legendre.leggauss(4)
_GAUSS_XI = 0.5 * (_GAUSS_XI + 1.0)  # reference element [0, 1]
_GAUSS_W = 0.5 * _GAUSS_W


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of (0, L) with n_elems elements."""

    n_elems: int
    L: float

    def __post_init__(self):
        if self.n_elems < 1:
            raise ValueError(f"n_elems must be >= 1 (got {self.n_elems})")
        if not self.L > 0:
            raise ValueError(f"mesh length must be positive (got {self.L})")

    @property
    def spacing(self) -> float:
        return self.L / self.n_elems

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_elems + 1)


@dataclass(frozen=True)
class DofLayout:
    """Block layout of the packed dof vector.

    Order: v1 (n), v3 (n), w (2n, value/slope interleaved per node), then for
    the magnetic model p1 (n) and p3 (n).  n = n_elems because the clamped
    x = 0 dofs are eliminated.
    """

    n_elems: int
    magnetic: bool

    @property
    def n_lagrange(self) -> int:
        return self.n_elems

    @property
    def off_v1(self) -> int:
        return 0

    @property
    def off_v3(self) -> int:
        return self.n_elems

    @property
    def off_w(self) -> int:
        return 2 * self.n_elems

    @property
    def off_p1(self) -> int | None:
        return 4 * self.n_elems if self.magnetic else None

    @property
    def off_p3(self) -> int | None:
        return 5 * self.n_elems if self.magnetic else None

    @property
    def total(self) -> int:
        return (6 if self.magnetic else 4) * self.n_elems

    def lagrange_dof(self, offset: int, node: int) -> int:
        """Global dof of a Lagrange node; -1 for the eliminated clamp node."""
        return offset + node - 1 if node >= 1 else -1

    def w_dof(self, node: int, deriv: int) -> int:
        """Global dof of a Hermite node (deriv 0: value, 1: slope)."""
        return self.off_w + 2 * (node - 1) + deriv if node >= 1 else -1

    # tip (x = L) dofs used by the boundary feedback and the observables
    @property
    def tip_v1(self) -> int:
        return self.off_v1 + self.n_elems - 1

    @property
    def tip_v3(self) -> int:
        return self.off_v3 + self.n_elems - 1

    @property
    def tip_w(self) -> int:
        return self.w_dof(self.n_elems, 0)

    @property
    def tip_wx(self) -> int:
        return self.w_dof(self.n_elems, 1)

    @property
    def tip_p1(self) -> int | None:
        return self.off_p1 + self.n_elems - 1 if self.magnetic else None

    @property
    def tip_p3(self) -> int | None:
        return self.off_p3 + self.n_elems - 1 if self.magnetic else None

    def field_slices(self) -> dict:
        n = self.n_elems
        slices = {
            "v1": slice(0, n),
            "v3": slice(n, 2 * n),
            "w": slice(2 * n, 4 * n),
        }
        if self.magnetic:
            slices["p1"] = slice(4 * n, 5 * n)
            slices["p3"] = slice(5 * n, 6 * n)
        return slices


#: energy-form component names; M = kinetic + rotational, K = sum of the rest
FORM_NAMES = ("kinetic", "rotational", "stretching", "bending", "shear", "electric")


@dataclass
class SystemMatrices:
    """Second-order system  M qdd + D qd + K q = 0  for one model variant.

    ``forms`` holds the Gram matrix of each energy component so trajectories
    can be audited part by part; the sums reproduce M and K exactly.
    """

    M: np.ndarray
    K: np.ndarray
    D: np.ndarray
    layout: DofLayout
    model: Model
    mesh: Mesh
    config: BeamConfig
    constants: DerivedConstants
    forms: dict = field(repr=False)
    _steppers: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_dofs(self) -> int:
        return self.layout.total


def _lagrange_shapes(xi: float, h: float):
    n = np.array([1.0 - xi, xi])
    dn = np.array([-1.0 / h, 1.0 / h])
    return n, dn


def _hermite_shapes(xi: float, h: float):
    hval = np.array([
        1.0 - 3.0 * xi**2 + 2.0 * xi**3,
        h * (xi - 2.0 * xi**2 + xi**3),
        3.0 * xi**2 - 2.0 * xi**3,
        h * (xi**3 - xi**2),
    ])
    dh = np.array([
        (6.0 * xi**2 - 6.0 * xi) / h,
        1.0 - 4.0 * xi + 3.0 * xi**2,
        (6.0 * xi - 6.0 * xi**2) / h,
        3.0 * xi**2 - 2.0 * xi,
    ])
    d2h = np.array([
        (12.0 * xi - 6.0) / h**2,
        (6.0 * xi - 4.0) / h,
        (6.0 - 12.0 * xi) / h**2,
        (6.0 * xi - 2.0) / h,
    ])
    return hval, dh, d2h


def _scatter(target: np.ndarray, dofs, local: np.ndarray) -> None:
    for i, gi in enumerate(dofs):
        if gi < 0:
            continue
        for j, gj in enumerate(dofs):
            if gj < 0:
                continue
            target[gi, gj] += local[i, j]


def _assemble(config: BeamConfig, mesh: Mesh, model: Model) -> SystemMatrices:
    constants = derive_constants(config)
    magnetic = model is Model.MAGNETIC
    include_shear = model is not Model.DECOUPLED
    layout = DofLayout(n_elems=mesh.n_elems, magnetic=magnetic)
    ndof = layout.total
    h = mesh.spacing
    l1, core, l3 = config.layer1, config.layer2, config.layer3

    forms = {name: np.zeros((ndof, ndof)) for name in FORM_NAMES}

    # element matrices are identical on a uniform mesh: build them once
    mass_l = np.zeros((2, 2))        # int N N
    stiff_l = np.zeros((2, 2))       # int N' N'
    mass_w = np.zeros((4, 4))        # int H H
    slope_w = np.zeros((4, 4))       # int H' H'
    bend_w = np.zeros((4, 4))        # int H'' H''
    shear_el = np.zeros((8, 8))      # Gram of -v1 + v3 + H w_x over (v1,v3,w)
    for xi, wq in zip(_GAUSS_XI, _GAUSS_W):
        nl, dnl = _lagrange_shapes(xi, h)
        hw, dhw, d2hw = _hermite_shapes(xi, h)
        mass_l += wq * h * np.outer(nl, nl)
        stiff_l += wq * h * np.outer(dnl, dnl)
        mass_w += wq * h * np.outer(hw, hw)
        slope_w += wq * h * np.outer(dhw, dhw)
        bend_w += wq * h * np.outer(d2hw, d2hw)
        phi_row = np.concatenate([-nl, nl, constants.H * dhw])
        shear_el += wq * h * np.outer(phi_row, phi_row)

    for e in range(mesh.n_elems):
        nodes = (e, e + 1)
        d_v1 = [layout.lagrange_dof(layout.off_v1, nd) for nd in nodes]
        d_v3 = [layout.lagrange_dof(layout.off_v3, nd) for nd in nodes]
        d_w = [layout.w_dof(nodes[0], 0), layout.w_dof(nodes[0], 1),
               layout.w_dof(nodes[1], 0), layout.w_dof(nodes[1], 1)]

        for lay, d_v in ((l1, d_v1), (l3, d_v3)):
            _scatter(forms["kinetic"], d_v, lay.rho * lay.h * mass_l)
            _scatter(forms["stretching"], d_v, lay.alpha1 * lay.h * stiff_l)

        _scatter(forms["kinetic"], d_w, constants.m * mass_w)
        _scatter(forms["rotational"], d_w, constants.K1 * slope_w)
        _scatter(forms["bending"], d_w, constants.K2 * bend_w)
        if include_shear:
            _scatter(forms["shear"], d_v1 + d_v3 + d_w, (core.G2 / core.h) * shear_el)

        if magnetic:
            d_p1 = [layout.lagrange_dof(layout.off_p1, nd) for nd in nodes]
            d_p3 = [layout.lagrange_dof(layout.off_p3, nd) for nd in nodes]
            for lay, d_v, d_p in ((l1, d_v1, d_p1), (l3, d_v3, d_p3)):
                _scatter(forms["kinetic"], d_p, lay.mu * lay.h * mass_l)
                # beta h (gamma v_x - p_x)^2 as a Gram over (v, p) dofs
                coupled = np.zeros((4, 4))
                coupled[:2, :2] = lay.gamma**2 * stiff_l
                coupled[2:, 2:] = stiff_l
                coupled[:2, 2:] = -lay.gamma * stiff_l
                coupled[2:, :2] = -lay.gamma * stiff_l
                _scatter(forms["electric"], d_v + d_p, lay.beta * lay.h * coupled)

    M = forms["kinetic"] + forms["rotational"]
    K = forms["stretching"] + forms["bending"] + forms["shear"] + forms["electric"]

    D = np.zeros((ndof, ndof))
    gains = config.gains
    if magnetic:
        # charge feedback voltages carry the 1/(2 h_i) factor
        if gains.s1 > 0:
            D[layout.tip_p1, layout.tip_p1] += gains.s1 / (2.0 * l1.h)
        if gains.s3 > 0:
            D[layout.tip_p3, layout.tip_p3] += gains.s3 / (2.0 * l3.h)
    else:
        if gains.s1 > 0:
            D[layout.tip_v1, layout.tip_v1] += gains.s1
        if gains.s3 > 0:
            D[layout.tip_v3, layout.tip_v3] += gains.s3
    if gains.k1 > 0:
        D[layout.tip_wx, layout.tip_wx] += gains.k1
    if gains.k2 > 0:
        D[layout.tip_w, layout.tip_w] += gains.k2

    return SystemMatrices(M=M, K=K, D=D, layout=layout, model=model, mesh=mesh,
                          config=config, constants=constants, forms=forms)


def _require_model(config: BeamConfig, expected: Model) -> None:
    if config.model is not expected:
        raise InvalidConfig(
            [f"config.model is {config.model.value!r}, expected {expected.value!r}"]
        )


def assemble_electrostatic(config: BeamConfig, mesh: Mesh) -> SystemMatrices:
    """Electrostatic closed loop: v1, v3 waves shear-coupled to the w beam."""
    _require_model(config, Model.ELECTROSTATIC)
    return _assemble(config, mesh, Model.ELECTROSTATIC)


def assemble_magnetic(config: BeamConfig, mesh: Mesh) -> SystemMatrices:
    """Fully dynamic model: adds the charge waves p1, p3 and their feedback."""
    _require_model(config, Model.MAGNETIC)
    return _assemble(config, mesh, Model.MAGNETIC)


def assemble_decoupled(config: BeamConfig, mesh: Mesh) -> SystemMatrices:
    """Electrostatic variant with the shear coupling form dropped entirely."""
    _require_model(config, Model.DECOUPLED)
    return _assemble(config, mesh, Model.DECOUPLED)


def assemble(config: BeamConfig, mesh: Mesh) -> SystemMatrices:
    """Dispatch on ``config.model``."""
    return _assemble(config, mesh, config.model)


def coupling_matrix(config: BeamConfig, mesh: Mesh) -> np.ndarray:
    """Gram matrix of the shear form on the electrostatic layout.

    K(electrostatic) = K(decoupled) + coupling_matrix; the form factors
    through the scalar shear angle, so the rank is at most 2 n_elems.
    """
    sys_full = _assemble(config, mesh, Model.ELECTROSTATIC)
    return sys_full.forms["shear"]


def dump_matrix(stream: TextIO, name: str, matrix: np.ndarray) -> None:
    """Plain-text nonzero triplets with a `# acl-matrix v1` header line."""
    nrows, ncols = matrix.shape
    stream.write(f"# acl-matrix v1 {name} {nrows} {ncols}\n")
    rows, cols = np.nonzero(matrix)
    for r, c in zip(rows, cols):
        stream.write(f"{r} {c} {matrix[r, c]:.17g}\n")
