"""Time integration of  M qdd + D qd + K q = 0  with an exact energy audit.

The integrator is the implicit midpoint rule on the first-order form
z = (q, qd).  For a linear constant-coefficient system it reduces to one
symmetric positive definite solve per step,

    (M + dt^2/4 K + dt/2 D) qd_{n+1} = (M - dt^2/4 K - dt/2 D) qd_n - dt K q_n,
    q_{n+1} = q_n + dt/2 (qd_n + qd_{n+1}),

whose Cholesky factor is computed once per (system, dt) and reused.  The
scheme conserves the quadratic energy exactly when D = 0 and satisfies the
discrete dissipation identity

    E_{n+1} - E_n = -dt * qd_mid^T D qd_mid,     qd_mid = (qd_n + qd_{n+1})/2,

so energy is nonincreasing whenever D >= 0, independent of dt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, SingularStepMatrix, TooLargeForDense
from .fem import SystemMatrices
from .params import Model
from .prng import Xorshift64Star

#: dense matrix-exponential reference is limited to this many dofs
EXPM_MAX_DOFS = 400


@dataclass
class State:
    """Packed positions and velocities at time t."""

    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.q.copy(), self.qdot.copy(), self.t)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy split by physical mechanism; total = 1/2 (qd M qd + q K q)."""

    kinetic: float
    rotational: float
    stretching: float
    bending: float
    shear: float
    electric: float
    total: float

    def parts_sum(self) -> float:
        return (self.kinetic + self.rotational + self.stretching
                + self.bending + self.shear + self.electric)


@dataclass
class Trajectory:
    """Sampled energies and tip observables of one closed-loop run."""

    times: np.ndarray
    total_energy: np.ndarray
    breakdowns: list
    observables: dict
    model: Model
    final_state: State | None = None

    @classmethod
    def from_energies(cls, times, energies, model: Model = Model.ELECTROSTATIC):
        """Bare trajectory carrying only an energy history (fits, tests)."""
        return cls(times=np.asarray(times, dtype=float),
                   total_energy=np.asarray(energies, dtype=float),
                   breakdowns=[], observables={}, model=model)


def _check_state(sys: SystemMatrices, state: State) -> None:
    n = sys.n_dofs
    if state.q.shape != (n,) or state.qdot.shape != (n,):
        raise DimensionMismatch(
            f"state has shapes {state.q.shape}/{state.qdot.shape}, layout needs ({n},)"
        )
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qdot))):
        raise DimensionMismatch("state contains non-finite entries")


def energy(sys: SystemMatrices, state: State) -> EnergyBreakdown:
    """Energy audit of one state, split over the assembled component forms."""
    _check_state(sys, state)
    q, qd = state.q, state.qdot
    f = sys.forms
    return EnergyBreakdown(
        kinetic=0.5 * (qd @ f["kinetic"] @ qd),
        rotational=0.5 * (qd @ f["rotational"] @ qd),
        stretching=0.5 * (q @ f["stretching"] @ q),
        bending=0.5 * (q @ f["bending"] @ q),
        shear=0.5 * (q @ f["shear"] @ q),
        electric=0.5 * (q @ f["electric"] @ q),
        total=0.5 * (qd @ sys.M @ qd + q @ sys.K @ q),
    )


class MidpointStepper:
    """Implicit midpoint stepper with a cached Cholesky factorization."""

    def __init__(self, sys: SystemMatrices, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive (got {dt})")
        self.sys = sys
        self.dt = dt
        step_matrix = sys.M + 0.25 * dt * dt * sys.K + 0.5 * dt * sys.D
        try:
            self._chol = sla.cho_factor(step_matrix)
        except np.linalg.LinAlgError as exc:  # cannot happen for SPD M, guard anyway
            raise SingularStepMatrix(f"step matrix factorization failed: {exc}") from exc
        self._rhs_matrix = sys.M - 0.25 * dt * dt * sys.K - 0.5 * dt * sys.D

    def step(self, state: State) -> State:
        q, qd, dt = state.q, state.qdot, self.dt
        qd_new = sla.cho_solve(self._chol, self._rhs_matrix @ qd - dt * (self.sys.K @ q))
        q_new = q + 0.5 * dt * (qd + qd_new)
        return State(q_new, qd_new, state.t + dt)


def stepper_for(sys: SystemMatrices, dt: float) -> MidpointStepper:
    """Per-(system, dt) stepper cache."""
    stp = sys._steppers.get(dt)
    if stp is None:
        stp = MidpointStepper(sys, dt)
        sys._steppers[dt] = stp
    return stp


def step(sys: SystemMatrices, state: State, dt: float) -> State:
    """One implicit midpoint step."""
    _check_state(sys, state)
    return stepper_for(sys, dt).step(state)


def _observable_dofs(sys: SystemMatrices) -> dict:
    lay = sys.layout
    dofs = {"w_dot_L": lay.tip_w, "wx_dot_L": lay.tip_wx,
            "v1_dot_L": lay.tip_v1, "v3_dot_L": lay.tip_v3}
    if lay.magnetic:
        dofs["p1_dot_L"] = lay.tip_p1
        dofs["p3_dot_L"] = lay.tip_p3
    return dofs


def simulate(sys: SystemMatrices, initial: State, dt: float, horizon: float,
             sample_every: int = 1) -> Trajectory:
    """Integrate over [0, horizon] sampling energy and tip velocities.

    The initial state is always the first sample and the final state the
    last; horizon = 0 yields a single-sample trajectory.
    """
    _check_state(sys, initial)
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative (got {horizon})")
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1 (got {sample_every})")

    n_steps = int(round(horizon / dt)) if horizon > 0 else 0
    obs_dofs = _observable_dofs(sys)

    times, totals, breakdowns = [], [], []
    observables = {name: [] for name in obs_dofs}

    def record(state: State) -> None:
        bd = energy(sys, state)
        times.append(state.t)
        totals.append(bd.total)
        breakdowns.append(bd)
        for name, dof in obs_dofs.items():
            observables[name].append(state.qdot[dof])

    state = initial.copy()
    record(state)
    if n_steps > 0:
        stp = stepper_for(sys, dt)
        for k in range(1, n_steps + 1):
            state = stp.step(state)
            if k % sample_every == 0 or k == n_steps:
                record(state)

    return Trajectory(
        times=np.array(times),
        total_energy=np.array(totals),
        breakdowns=breakdowns,
        observables={name: np.array(vals) for name, vals in observables.items()},
        model=sys.model,
        final_state=state,
    )


def expm_oracle(sys: SystemMatrices, initial: State, t: float) -> State:
    """Dense matrix-exponential reference solution z(t) = exp(t A) z(0).

    A is the companion generator [[0, I], [-M^-1 K, -M^-1 D]]; intended as an
    independent check of :func:`step`/:func:`simulate` on small meshes.
    """
    _check_state(sys, initial)
    n = sys.n_dofs
    if n > EXPM_MAX_DOFS:
        raise TooLargeForDense(f"{n} dofs exceed the dense expm limit {EXPM_MAX_DOFS}")
    gen = np.zeros((2 * n, 2 * n))
    gen[:n, n:] = np.eye(n)
    gen[n:, :n] = -np.linalg.solve(sys.M, sys.K)
    gen[n:, n:] = -np.linalg.solve(sys.M, sys.D)
    z = np.concatenate([initial.q, initial.qdot])
    zt = sla.expm(t * gen) @ z
    return State(zt[:n], zt[n:], initial.t + t)


def energy_norm_distance(sys: SystemMatrices, a: State, b: State) -> float:
    """Energy norm of the state difference, normalized by the energy of b."""
    dq, dv = a.q - b.q, a.qdot - b.qdot
    num = 0.5 * (dv @ sys.M @ dv + dq @ sys.K @ dq)
    den = 0.5 * (b.qdot @ sys.M @ b.qdot + b.q @ sys.K @ b.q)
    return float(np.sqrt(num / den))


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def nodal_state(sys: SystemMatrices,
                v1: Callable | None = None, v3: Callable | None = None,
                w: Callable | None = None, w_x: Callable | None = None,
                p1: Callable | None = None, p3: Callable | None = None,
                v1_t: Callable | None = None, v3_t: Callable | None = None,
                w_t: Callable | None = None, w_x_t: Callable | None = None,
                p1_t: Callable | None = None, p3_t: Callable | None = None,
                t: float = 0.0) -> State:
    """Interpolate user functions of x at the nodes (and slope dofs for w).

    Missing fields default to zero.  The clamp at x = 0 is built into the
    dof layout, so the functions are only sampled at the interior and tip
    nodes; pass w together with its exact derivative w_x when slope content
    matters (for example polynomial test states).
    """
    lay = sys.layout
    xs = sys.mesh.nodes[1:]
    q = np.zeros(lay.total)
    qd = np.zeros(lay.total)

    def fill_lagrange(vec, offset, func):
        if func is not None:
            vec[offset:offset + lay.n_lagrange] = np.asarray(func(xs), dtype=float)

    def fill_hermite(vec, func, dfunc):
        if func is not None:
            vec[lay.off_w:lay.off_w + 2 * lay.n_elems:2] = np.asarray(func(xs), dtype=float)
        if dfunc is not None:
            vec[lay.off_w + 1:lay.off_w + 2 * lay.n_elems:2] = np.asarray(dfunc(xs), dtype=float)

    fill_lagrange(q, lay.off_v1, v1)
    fill_lagrange(q, lay.off_v3, v3)
    fill_hermite(q, w, w_x)
    fill_lagrange(qd, lay.off_v1, v1_t)
    fill_lagrange(qd, lay.off_v3, v3_t)
    fill_hermite(qd, w_t, w_x_t)
    if lay.magnetic:
        fill_lagrange(q, lay.off_p1, p1)
        fill_lagrange(q, lay.off_p3, p3)
        fill_lagrange(qd, lay.off_p1, p1_t)
        fill_lagrange(qd, lay.off_p3, p3_t)
    elif any(f is not None for f in (p1, p3, p1_t, p3_t)):
        raise DimensionMismatch("p fields supplied for a model without charge dofs")
    return State(q, qd, t)


def random_smooth_state(sys: SystemMatrices, seed: int, amplitude: float = 1.0,
                        n_profiles: int = 4) -> State:
    """Random finite-energy initial data, reproducible and mesh-independent.

    Draws xorshift64* coefficients c_k in [-1, 1) and builds smooth continuum
    profiles (then interpolates them nodally):

        v, p fields:  sum_k c_k sin((k - 1/2) pi x / L) / k^2
        w field:      sum_k c_k (1 - cos(k pi x / L)) / k^2

    All profiles satisfy the clamp conditions at x = 0.  The coefficients
    depend only on the seed, never on the mesh, so refining the mesh keeps
    the same continuum initial condition; refinement studies of decay rates
    rely on this.
    """
    gen = Xorshift64Star(seed)
    L = sys.mesh.L

    def draw():
        return [amplitude * gen.uniform_symmetric() / k**2
                for k in range(1, n_profiles + 1)]

    def sine_profile(coeffs):
        def f(x):
            return sum(c * np.sin((k - 0.5) * np.pi * x / L)
                       for k, c in enumerate(coeffs, start=1))
        return f

    def cosine_profile(coeffs):
        def f(x):
            return sum(c * (1.0 - np.cos(k * np.pi * x / L))
                       for k, c in enumerate(coeffs, start=1))
        def fx(x):
            return sum(c * (k * np.pi / L) * np.sin(k * np.pi * x / L)
                       for k, c in enumerate(coeffs, start=1))
        return f, fx

    w_fun, wx_fun = cosine_profile(draw())
    wt_fun, wxt_fun = cosine_profile(draw())
    fields = {
        "v1": sine_profile(draw()), "v3": sine_profile(draw()),
        "w": w_fun, "w_x": wx_fun,
        "v1_t": sine_profile(draw()), "v3_t": sine_profile(draw()),
        "w_t": wt_fun, "w_x_t": wxt_fun,
    }
    if sys.layout.magnetic:
        fields["p1"] = sine_profile(draw())
        fields["p3"] = sine_profile(draw())
        fields["p1_t"] = sine_profile(draw())
        fields["p3_t"] = sine_profile(draw())
    return nodal_state(sys, **fields)


# ---------------------------------------------------------------------------
# trajectory CSV
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory, stream: TextIO) -> None:
    """Write the sampled energy audit and tip observables, 17 significant digits."""
    magnetic = traj.model is Model.MAGNETIC
    columns = ["t", "E_total", "E_kinetic", "E_stretch", "E_bend", "E_shear",
               "E_electric", "E_rot", "w_dot_L", "wx_dot_L", "v1_dot_L", "v3_dot_L"]
    if magnetic:
        columns += ["p1_dot_L", "p3_dot_L"]
    stream.write(",".join(columns) + "\n")
    for i, t in enumerate(traj.times):
        bd = traj.breakdowns[i]
        row = [t, bd.total, bd.kinetic, bd.stretching, bd.bending, bd.shear,
               bd.electric, bd.rotational]
        row += [traj.observables[name][i]
                for name in ("w_dot_L", "wx_dot_L", "v1_dot_L", "v3_dot_L")]
        if magnetic:
            row += [traj.observables[name][i] for name in ("p1_dot_L", "p3_dot_L")]
        stream.write(",".join(f"{value:.17g}" for value in row) + "\n")
