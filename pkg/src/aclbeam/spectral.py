"""Spectrum of the closed-loop generator and the analytic resonant mode.

The quadratic pencil  lambda^2 M + lambda D + K  is linearized in companion
form and solved as the generalized eigenproblem

    [[0, I], [-K, -D]] z = lambda [[I, 0], [0, M]] z,      z = (x, lambda x),

which avoids forming M^-1.  Every reported eigenpair carries a backward-error
style residual

    ||(lambda^2 M + lambda D + K) x|| / (||x|| (|lambda|^2 ||M|| + |lambda| ||D|| + ||K||)),

and classification (imaginary axis / strictly stable / unstable) is only
done relative to those residuals and an axis tolerance proportional to the
spectral radius.

The analytic resonant mode is the closed-form eigenfunction of the magnetic
closed loop that exists whenever zeta_plus/zeta_minus is a ratio of odd
integers: a two-sine profile shared by both face layers whose shear angle
vanishes identically and whose tip traces (v_x, p_x, p at x = L) are all
zero, so no boundary feedback can see it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, DegenerateWaveSpeeds, NotResonant, TooLargeForDense
from .fem import SystemMatrices
from .params import DerivedConstants, Model

#: dense generalized eigensolve limit on the second-order dof count
EIG_MAX_DOFS = 2000

#: default axis tolerance is this factor times the spectral radius
AXIS_TOL_FACTOR = 1e-8


class ModeClass(str, Enum):
    IMAGINARY_AXIS = "imaginary_axis"
    STRICTLY_STABLE = "strictly_stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class EigMode:
    """One eigenvalue with its position-part shape and classification."""

    value: complex
    shape: np.ndarray
    classification: ModeClass
    residual: float


@dataclass
class Spectrum:
    """All eigenvalues of one discrete closed-loop generator.

    eigenvalues   complex array sorted by imaginary part
    residuals     scaled pencil residual per eigenvalue
    shapes        position parts of the companion eigenvectors (n_dofs x 2 n_dofs)
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    shapes: np.ndarray
    model: Model
    n_elems: int

    @property
    def abscissa(self) -> float:
        """max Re(lambda): negative for a strictly stable discrete loop."""
        return float(np.max(self.eigenvalues.real))

    @property
    def radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def default_tol_axis(self) -> float:
        return AXIS_TOL_FACTOR * self.radius

    def mode(self, index: int, tol_axis: float | None = None) -> EigMode:
        if tol_axis is None:
            tol_axis = self.default_tol_axis()
        lam = complex(self.eigenvalues[index])
        return EigMode(
            value=lam,
            shape=self.shapes[:, index],
            classification=_classify_one(lam, tol_axis),
            residual=float(self.residuals[index]),
        )

    def nearest(self, target: complex) -> int:
        """Index of the eigenvalue closest to ``target``."""
        return int(np.argmin(np.abs(self.eigenvalues - target)))


@dataclass(frozen=True)
class SpectrumClasses:
    """Partition counts of one spectrum plus the imaginary-axis modes."""

    imaginary_axis: int
    strictly_stable: int
    unstable: int
    axis_modes: list
    tol_axis: float


def _classify_one(lam: complex, tol_axis: float) -> ModeClass:
    if abs(lam.real) <= tol_axis:
        return ModeClass.IMAGINARY_AXIS
    if lam.real > tol_axis:
        return ModeClass.UNSTABLE
    return ModeClass.STRICTLY_STABLE


def generator_spectrum(sys: SystemMatrices) -> Spectrum:
    """Dense spectrum of the companion linearization of lambda^2 M + lambda D + K."""
    n = sys.n_dofs
    if n > EIG_MAX_DOFS:
        raise TooLargeForDense(f"{n} dofs exceed the dense eigensolver limit {EIG_MAX_DOFS}")

    lhs = np.zeros((2 * n, 2 * n))
    lhs[:n, n:] = np.eye(n)
    lhs[n:, :n] = -sys.K
    lhs[n:, n:] = -sys.D
    rhs = np.zeros((2 * n, 2 * n))
    rhs[:n, :n] = np.eye(n)
    rhs[n:, n:] = sys.M
    try:
        eigvals, eigvecs = sla.eig(lhs, rhs)
    except Exception as exc:
        raise ConvergenceFailure(f"dense QZ eigensolve failed: {exc}") from exc
    if not np.all(np.isfinite(eigvals)):
        raise ConvergenceFailure("QZ returned non-finite eigenvalues")

    order = np.argsort(eigvals.imag, kind="stable")
    eigvals = eigvals[order]
    shapes = eigvecs[:n, order]

    # scaled pencil residual, three matmuls for the whole batch
    kx = sys.K @ shapes
    dx = sys.D @ shapes
    mx = sys.M @ shapes
    res_vec = mx * eigvals**2 + dx * eigvals + kx
    pencil_scale = (np.abs(eigvals) ** 2 * np.linalg.norm(sys.M, 1)
                    + np.abs(eigvals) * np.linalg.norm(sys.D, 1)
                    + np.linalg.norm(sys.K, 1))
    shape_norms = np.linalg.norm(shapes, axis=0)
    residuals = np.linalg.norm(res_vec, axis=0) / (shape_norms * pencil_scale)

    return Spectrum(eigenvalues=eigvals, residuals=residuals, shapes=shapes,
                    model=sys.model, n_elems=sys.mesh.n_elems)


def classify(spectrum: Spectrum, tol_axis: float | None = None) -> SpectrumClasses:
    """Partition the spectrum by |Re lambda| against the axis tolerance."""
    if tol_axis is None:
        tol_axis = spectrum.default_tol_axis()
    re = spectrum.eigenvalues.real
    on_axis = np.abs(re) <= tol_axis
    unstable = re > tol_axis
    axis_modes = [spectrum.mode(i, tol_axis) for i in np.nonzero(on_axis)[0]]
    return SpectrumClasses(
        imaginary_axis=int(np.sum(on_axis)),
        strictly_stable=int(np.sum(~on_axis & ~unstable)),
        unstable=int(np.sum(unstable)),
        axis_modes=axis_modes,
        tol_axis=tol_axis,
    )


def spectrum_report(spectrum: Spectrum, tol_axis: float | None = None) -> dict:
    """JSON-ready report: model, mesh, tolerance and every classified mode."""
    if tol_axis is None:
        tol_axis = spectrum.default_tol_axis()
    return {
        "model": spectrum.model.value,
        "n_elems": spectrum.n_elems,
        "tol_axis": tol_axis,
        "eigenvalues": [
            {
                "re": float(lam.real),
                "im": float(lam.imag),
                "residual": float(res),
                "class": _classify_one(complex(lam), tol_axis).value,
            }
            for lam, res in zip(spectrum.eigenvalues, spectrum.residuals)
        ],
    }


# ---------------------------------------------------------------------------
# analytic resonant mode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticResonantMode:
    """Closed-form undamped eigenmode of the resonant magnetic closed loop.

    Both face layers carry the same longitudinal profile v and charge
    profile p (so the shear angle vanishes and w = 0):

        v(x) = [k1 (a+ b+ sin(a- x) - a- b- sin(a+ x))
                + k2 (a- sin(a+ x) - a+ sin(a- x))] / (a+ a- (b+ - b-))
        p(x) = [k1 b+ b- (a+ sin(a- x) - a- sin(a+ x))
                + k2 (a- b+ sin(a+ x) - a+ b- sin(a- x))] / (a+ a- (b+ - b-))

    with wavenumbers a+ = tau zeta+ = (2n-1) pi / (2L) and
    a- = tau zeta- = (2m-1) pi / (2L), and k1, k2 chosen so that the
    overdetermined tip conditions v_x(L) = p_x(L) = p(L) = 0 all hold.
    The generator then has the eigenvalue pair +- i tau.
    """

    n: int
    m: int
    L: float
    tau: float
    a_plus: float
    a_minus: float
    b_plus: float
    b_minus: float
    k1_coef: float
    k2_coef: float
    # sine-term coefficients: v = cv_m sin(a- x) + cv_p sin(a+ x), same for p
    cv_minus: float
    cv_plus: float
    cp_minus: float
    cp_plus: float

    def v(self, x):
        x = np.asarray(x, dtype=float)
        return self.cv_minus * np.sin(self.a_minus * x) + self.cv_plus * np.sin(self.a_plus * x)

    def p(self, x):
        x = np.asarray(x, dtype=float)
        return self.cp_minus * np.sin(self.a_minus * x) + self.cp_plus * np.sin(self.a_plus * x)

    def v_x(self, x):
        x = np.asarray(x, dtype=float)
        return (self.cv_minus * self.a_minus * np.cos(self.a_minus * x)
                + self.cv_plus * self.a_plus * np.cos(self.a_plus * x))

    def p_x(self, x):
        x = np.asarray(x, dtype=float)
        return (self.cp_minus * self.a_minus * np.cos(self.a_minus * x)
                + self.cp_plus * self.a_plus * np.cos(self.a_plus * x))

    def v_xx(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.cv_minus * self.a_minus**2 * np.sin(self.a_minus * x)
                 + self.cv_plus * self.a_plus**2 * np.sin(self.a_plus * x))

    def p_xx(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.cp_minus * self.a_minus**2 * np.sin(self.a_minus * x)
                 + self.cp_plus * self.a_plus**2 * np.sin(self.a_plus * x))

    def w(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def amplitude(self, n_points: int = 1001) -> tuple:
        """(max |v|, max |p|) over a uniform grid."""
        xs = np.linspace(0.0, self.L, n_points)
        return float(np.max(np.abs(self.v(xs)))), float(np.max(np.abs(self.p(xs))))

    def boundary_residuals(self, n_points: int = 1001) -> dict:
        """Clamp and overdetermined tip traces, scaled by the field amplitudes."""
        vmax, pmax = self.amplitude(n_points)
        scale_vx = max(self.a_plus, self.a_minus) * vmax
        scale_px = max(self.a_plus, self.a_minus) * pmax
        return {
            "v_0": abs(float(self.v(0.0))) / vmax,
            "p_0": abs(float(self.p(0.0))) / pmax,
            "v_x_L": abs(float(self.v_x(self.L))) / scale_vx,
            "p_x_L": abs(float(self.p_x(self.L))) / scale_px,
            "p_L": abs(float(self.p(self.L))) / pmax,
        }


def build_resonant_mode(constants: DerivedConstants, n: int, m: int,
                        L: float, rtol: float = 1e-10) -> AnalyticResonantMode:
    """Construct the closed-form resonant mode for slowness ratio (2n-1)/(2m-1).

    Raises :class:`NotResonant` when the configuration's slowness ratio does
    not match the requested odd ratio (or the two face layers differ), and
    :class:`DegenerateWaveSpeeds` when the two branches coincide.
    """
    if n < 1 or m < 1:
        raise NotResonant(f"n and m must be positive integers (got {n}, {m})")
    lay1, lay3 = constants.layer1, constants.layer3
    if lay1.zeta_plus is None or lay3.zeta_plus is None:
        raise DegenerateWaveSpeeds("slownesses undefined: set mu on both face layers")
    for attr in ("zeta_plus", "zeta_minus", "b_plus", "b_minus"):
        v1, v3 = getattr(lay1, attr), getattr(lay3, attr)
        if v1 is None or v3 is None:
            raise DegenerateWaveSpeeds(f"{attr} undefined (gamma = 0?)")
        if abs(v1 - v3) > rtol * max(abs(v1), abs(v3)):
            raise NotResonant("face layers must have identical material properties")
    if abs(lay1.zeta_plus - lay1.zeta_minus) <= rtol * lay1.zeta_plus:
        raise DegenerateWaveSpeeds("zeta_plus == zeta_minus: no resonant construction")

    target = (2 * n - 1) / (2 * m - 1)
    ratio = lay1.ratio
    if abs(ratio - target) > rtol * target:
        raise NotResonant(
            f"zeta_plus/zeta_minus = {ratio!r} does not match (2n-1)/(2m-1) = {target!r}"
        )

    a_plus = (2 * n - 1) * np.pi / (2.0 * L)
    a_minus = (2 * m - 1) * np.pi / (2.0 * L)
    tau = a_plus / lay1.zeta_plus
    b_plus, b_minus = lay1.b_plus, lay1.b_minus

    denom = a_plus * a_minus * (b_plus - b_minus)
    sin_p = np.sin(a_plus * L)
    sin_m = np.sin(a_minus * L)
    k1 = (a_minus * b_plus * sin_p - a_plus * b_minus * sin_m) / denom
    k2 = -(a_plus * sin_m - a_minus * sin_p) * b_plus * b_minus / denom

    cv_minus = (k1 * a_plus * b_plus - k2 * a_plus) / denom
    cv_plus = (-k1 * a_minus * b_minus + k2 * a_minus) / denom
    cp_minus = (k1 * a_plus * b_plus * b_minus - k2 * a_plus * b_minus) / denom
    cp_plus = (-k1 * a_minus * b_plus * b_minus + k2 * a_minus * b_plus) / denom

    return AnalyticResonantMode(
        n=n, m=m, L=L, tau=tau, a_plus=a_plus, a_minus=a_minus,
        b_plus=b_plus, b_minus=b_minus, k1_coef=k1, k2_coef=k2,
        cv_minus=cv_minus, cv_plus=cv_plus, cp_minus=cp_minus, cp_plus=cp_plus,
    )


def strong_form_residual(mode: AnalyticResonantMode, constants: DerivedConstants,
                         n_points: int = 2001) -> float:
    """Max pointwise residual of the time-harmonic field equations.

    With the shear angle identically zero along the mode, the two remaining
    equations per face layer (lambda = i tau inserted into the dynamic
    system, derivatives of the sines taken in closed form) are

        alpha h v_xx - gamma beta h p_xx + tau^2 rho h v = 0
        beta h p_xx  - gamma beta h v_xx + tau^2 mu  h p = 0.

    The residual is reported relative to tau^2 times the field magnitude.
    """
    lay = constants.layer1
    params = lay.params
    rho, h, beta, gamma, mu = params.rho, params.h, params.beta, params.gamma, params.mu
    alpha = lay.alpha
    tau2 = mode.tau**2

    xs = np.linspace(0.0, mode.L, n_points)
    v, p = mode.v(xs), mode.p(xs)
    v_xx, p_xx = mode.v_xx(xs), mode.p_xx(xs)

    r_stretch = alpha * h * v_xx - gamma * beta * h * p_xx + tau2 * rho * h * v
    r_charge = beta * h * p_xx - gamma * beta * h * v_xx + tau2 * mu * h * p

    vmax, pmax = np.max(np.abs(v)), np.max(np.abs(p))
    rel_stretch = np.max(np.abs(r_stretch)) / (tau2 * rho * h * vmax)
    rel_charge = np.max(np.abs(r_charge)) / (tau2 * mu * h * pmax)
    return float(max(rel_stretch, rel_charge))
