"""Acceptance suite: the eight headline criteria at their stated tolerances.

Each criterion prints one `[acceptance] ...` PASS/FAIL line directly to the
terminal (bypassing capture), so a plain `pytest -v` run shows the scorecard.

Criterion 4 is split into its three clauses.  Clause 4b (mesh-stability of
the spectral abscissa) FAILS by design of the discretization, not by a bug:
conforming P1/Hermite semi-discretizations of boundary-damped wave systems
are not uniformly stabilizable, the least-damped discrete modes sit at the
grid cutoff frequency and their damping vanishes like h^2, so the abscissa
shrinks by ~4x per refinement instead of stabilizing.  The test asserts the
criterion as stated and is expected red; see the test docstring for the
measured evidence.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from aclbeam.analysis import compare_coupled_decoupled, fit_decay_rate
from aclbeam.dynamics import (
    State,
    Trajectory,
    energy,
    energy_norm_distance,
    expm_oracle,
    nodal_state,
    random_smooth_state,
    simulate,
    step,
)
from aclbeam.fem import Mesh, assemble_electrostatic, assemble_magnetic
from aclbeam.params import (
    FeedbackGains,
    LayerParams,
    derive_constants,
    normalized_config,
    resonant_config,
)
from aclbeam.spectral import build_resonant_mode, classify, generator_spectrum, strong_form_residual

TAU_R3 = math.sqrt(3.0) * math.pi / 2.0


@pytest.fixture
def announce(capsys):
    def _announce(label, ok, detail):
        with capsys.disabled():
            print(f"[acceptance] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    return _announce


def within_fraction(a, b, fraction):
    return abs(a - b) <= fraction * max(abs(a), abs(b))


# ---------------------------------------------------------------------------
# criterion 1: analytic resonant mode
# ---------------------------------------------------------------------------

def test_criterion_1_resonance_analytic(announce):
    """Normalized resonant setup (gamma = 2/sqrt(3), n=2, m=1): the closed-form
    mode meets every overdetermined boundary condition to 1e-12 and solves the
    field equations to 1e-10, in under a second."""
    start = time.perf_counter()
    derived = derive_constants(resonant_config(2, 1))
    mode = build_resonant_mode(derived, 2, 1, 1.0)
    boundary = mode.boundary_residuals()
    strong = strong_form_residual(mode, derived)
    elapsed = time.perf_counter() - start

    ok = max(boundary.values()) <= 1e-12 and strong <= 1e-10 and elapsed < 1.0
    announce("criterion 1 (resonant mode, analytic)", ok,
             f"boundary={max(boundary.values()):.2e} strong_form={strong:.2e} "
             f"runtime={elapsed:.2f}s")
    assert max(boundary.values()) <= 1e-12
    assert strong <= 1e-10
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# criterion 2: resonant eigenvalue under refinement
# ---------------------------------------------------------------------------

def test_criterion_2_resonance_spectral(announce):
    """Magnetic model, unit gains, n_elems in {16, 32, 64}: an eigenvalue
    converges to i sqrt(3) pi / 2 at observed order >= 1.8 with
    |Re lambda| <= 1e-6 on the finest mesh, within 30 s."""
    start = time.perf_counter()
    cfg = resonant_config(2, 1)
    errors, re_parts = [], []
    for n_elems in (16, 32, 64):
        spec = generator_spectrum(assemble_magnetic(cfg, Mesh(n_elems, 1.0)))
        lam = spec.eigenvalues[spec.nearest(1j * TAU_R3)]
        errors.append(abs(lam - 1j * TAU_R3))
        re_parts.append(abs(lam.real))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    elapsed = time.perf_counter() - start

    ok = min(orders) >= 1.8 and re_parts[-1] <= 1e-6 and elapsed < 30.0
    announce("criterion 2 (resonant mode, spectral)", ok,
             f"errors={['%.2e' % e for e in errors]} orders={['%.2f' % o for o in orders]} "
             f"|Re|@64={re_parts[-1]:.2e} runtime={elapsed:.1f}s")
    assert min(orders) >= 1.8
    assert re_parts[-1] <= 1e-6
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# criterion 3: no decay at resonance
# ---------------------------------------------------------------------------

def test_criterion_3_no_decay_at_resonance(announce):
    """Seeding the closed loop with the real part of the resonant mode and
    running to T = 50 under full feedback loses < 1% energy; the fitted rate
    is <= 1e-3.  Within 60 s."""
    start = time.perf_counter()
    cfg = resonant_config(2, 1)
    sys = assemble_magnetic(cfg, Mesh(32, 1.0))
    mode = build_resonant_mode(sys.constants, 2, 1, 1.0)
    initial = nodal_state(sys, v1=mode.v, v3=mode.v, p1=mode.p, p3=mode.p)
    traj = simulate(sys, initial, dt=0.01, horizon=50.0, sample_every=10)
    fit = fit_decay_rate(traj)
    retained = traj.total_energy[-1] / traj.total_energy[0]
    elapsed = time.perf_counter() - start

    ok = retained >= 0.99 and fit.omega <= 1e-3 and elapsed < 60.0
    announce("criterion 3 (no decay at resonance)", ok,
             f"E(50)/E(0)={retained:.6f} omega={fit.omega:.2e} runtime={elapsed:.1f}s")
    assert retained >= 0.99
    assert fit.omega <= 1e-3
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# criterion 4: electrostatic exponential stability
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def electro_refinement():
    """Spectra and decay fits of the unit-gain electrostatic loop at 32/64."""
    start = time.perf_counter()
    cfg = normalized_config()
    out = {}
    for n_elems in (32, 64):
        sys = assemble_electrostatic(cfg, Mesh(n_elems, 1.0))
        spec = generator_spectrum(sys)
        traj = simulate(sys, random_smooth_state(sys, seed=2024),
                        dt=5e-3, horizon=20.0, sample_every=10)
        out[n_elems] = (spec, fit_decay_rate(traj))
    out["elapsed"] = time.perf_counter() - start
    return out


def test_criterion_4a_no_axis_no_unstable_modes(electro_refinement, announce):
    """Unit gains: no spectrum on the imaginary axis and nothing unstable."""
    counts = {n: classify(electro_refinement[n][0]) for n in (32, 64)}
    ok = all(c.imaginary_axis == 0 and c.unstable == 0 for c in counts.values())
    announce("criterion 4a (electrostatic: no axis/unstable modes)", ok,
             ", ".join(f"n={n}: axis={c.imaginary_axis} unstable={c.unstable}"
                       for n, c in counts.items()))
    for c in counts.values():
        assert c.imaginary_axis == 0
        assert c.unstable == 0


def test_criterion_4b_abscissa_mesh_stability(electro_refinement, announce):
    """EXPECTED RED.  The criterion asks the spectral abscissa to agree within
    25% between n_elems = 32 and 64.  The abscissa of this conforming
    semi-discretization is attained at grid-cutoff modes (Im lambda ~ pi/h)
    whose damping decays like h^2 (measured: -8.4e-3 / -2.1e-3 / -5.3e-4 at
    n = 16/32/64, ratio ~ 3.99 per refinement), so no mesh pair can satisfy
    the 25% clause.  This reflects the well-known failure of uniform
    stabilization for undamped-grid-mode discretizations, not an assembly or
    eigensolver defect: the low-frequency spectrum and the energy decay rate
    (4c) do converge under refinement."""
    eps = {n: -electro_refinement[n][0].abscissa for n in (32, 64)}
    ok = eps[32] > 0 and eps[64] > 0 and within_fraction(eps[32], eps[64], 0.25)
    announce("criterion 4b (electrostatic: abscissa stable 25%)", ok,
             f"eps(32)={eps[32]:.3e} eps(64)={eps[64]:.3e} "
             f"ratio={eps[64] / eps[32]:.3f}; expected red, see ledger")
    assert eps[32] > 0 and eps[64] > 0
    assert within_fraction(eps[32], eps[64], 0.25), (
        "spectral abscissa is attained at grid-cutoff modes and scales like h^2; "
        "the 25% mesh-stability clause cannot hold for this discretization"
    )


def test_criterion_4c_decay_rate_mesh_stability(electro_refinement, announce):
    """Fitted energy decay rates from the same smooth random initial data are
    positive and agree within 10% between meshes; whole criterion within 60 s."""
    omegas = {n: electro_refinement[n][1].omega for n in (32, 64)}
    elapsed = electro_refinement["elapsed"]
    ok = (all(om > 0 for om in omegas.values())
          and within_fraction(omegas[32], omegas[64], 0.10)
          and elapsed < 60.0)
    announce("criterion 4c (electrostatic: fitted omega stable 10%)", ok,
             f"omega(32)={omegas[32]:.4f} omega(64)={omegas[64]:.4f} "
             f"runtime={elapsed:.1f}s")
    assert all(om > 0 for om in omegas.values())
    assert within_fraction(omegas[32], omegas[64], 0.10)
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# criterion 5: exact conservation and dissipation accounting
# ---------------------------------------------------------------------------

def test_criterion_5_energy_conservation_and_dissipation(announce):
    """Both models: 1e4 open-loop midpoint steps hold energy to 1e-10, and
    with gains on the per-step dissipation identity holds to 1e-10 E0."""
    dt, n_steps = 1e-3, 10_000
    results = {}
    for label, cfg, mesh in (
        ("magnetic", resonant_config(2, 1), Mesh(6, 1.0)),
        ("electrostatic", normalized_config(), Mesh(6, 1.0)),
    ):
        open_loop = replace(cfg, gains=FeedbackGains())
        sys_open = (assemble_magnetic if label == "magnetic" else assemble_electrostatic)(
            open_loop, mesh)
        st = random_smooth_state(sys_open, seed=5)
        e0 = energy(sys_open, st).total
        for _ in range(n_steps):
            st = step(sys_open, st, dt)
        drift = abs(energy(sys_open, st).total - e0) / e0

        sys_damped = (assemble_magnetic if label == "magnetic" else assemble_electrostatic)(
            cfg, mesh)
        st = random_smooth_state(sys_damped, seed=5)
        e_prev = energy(sys_damped, st).total
        e0 = e_prev
        worst = 0.0
        for _ in range(n_steps):
            new = step(sys_damped, st, dt)
            qd_mid = 0.5 * (st.qdot + new.qdot)
            e_new = energy(sys_damped, new).total
            worst = max(worst, abs(e_new - e_prev + dt * (qd_mid @ sys_damped.D @ qd_mid)))
            st, e_prev = new, e_new
        results[label] = (drift, worst / e0)

    ok = all(drift <= 1e-10 and ident <= 1e-10 for drift, ident in results.values())
    announce("criterion 5 (conservation + dissipation identity)", ok,
             ", ".join(f"{lbl}: drift={d:.2e} identity={i:.2e}"
                       for lbl, (d, i) in results.items()))
    for drift, ident in results.values():
        assert drift <= 1e-10
        assert ident <= 1e-10


# ---------------------------------------------------------------------------
# criterion 6: integrator vs matrix exponential
# ---------------------------------------------------------------------------

def test_criterion_6_oracle_equivalence(announce):
    """On meshes up to n_elems = 16, the dt = 1e-3 midpoint solution matches
    the dense exponential at t = 1 to 1e-6 in the energy norm, and halving dt
    divides the error by 3.5-4.5.

    The state is the slowest oscillatory eigenmode: midpoint phase error
    grows like (|lambda| dt)^3 per step, so the 1e-6 absolute bound is a
    statement about resolved dynamics; broadband data would measure the
    scheme's (correct) dispersion at unresolved frequencies instead."""
    summary = {}
    for n_elems in (8, 16):
        sys = assemble_electrostatic(normalized_config(), Mesh(n_elems, 1.0))
        spec = generator_spectrum(sys)
        oscillatory = np.where(spec.eigenvalues.imag > 0.1)[0]
        idx = oscillatory[np.argmin(np.abs(spec.eigenvalues[oscillatory]))]
        lam, shape = spec.eigenvalues[idx], spec.shapes[:, idx]
        initial = State(shape.real.copy(), (lam * shape).real.copy())
        scale = math.sqrt(energy(sys, initial).total)
        initial = State(initial.q / scale, initial.qdot / scale)

        reference = expm_oracle(sys, initial, 1.0)
        errors = []
        for dt in (1e-3, 5e-4):
            traj = simulate(sys, initial, dt=dt, horizon=1.0, sample_every=10**6)
            errors.append(energy_norm_distance(sys, traj.final_state, reference))
        summary[n_elems] = (errors[0], errors[0] / errors[1])

    ok = all(err <= 1e-6 and 3.5 <= ratio <= 4.5 for err, ratio in summary.values())
    announce("criterion 6 (oracle equivalence)", ok,
             ", ".join(f"n={n}: err={e:.2e} ratio={r:.2f}"
                       for n, (e, r) in summary.items()))
    for err, ratio in summary.values():
        assert err <= 1e-6
        assert 3.5 <= ratio <= 4.5


# ---------------------------------------------------------------------------
# criterion 7: derived-constant identities over random draws
# ---------------------------------------------------------------------------

def test_criterion_7_derived_constant_identities(announce):
    """1000 random positive parameter draws satisfy the two product
    identities to 1e-12; gamma = 0 draws reproduce the decoupled speeds."""
    rng = np.random.default_rng(20240817)
    logu = lambda lo, hi: float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    worst_zeta = worst_b = worst_dec = 0.0
    for trial in range(1000):
        gamma = 0.0 if trial % 5 == 0 else float(rng.uniform(0.05, 3.0))
        lay = LayerParams(rho=logu(1e-2, 1e2), h=logu(1e-1, 1e1), alpha1=logu(1e-2, 1e2),
                          gamma=gamma, beta=logu(1e-2, 1e2), mu=logu(1e-2, 1e2))
        cfg = replace(normalized_config(), layer1=lay, layer3=lay)
        d = derive_constants(cfg).layer1
        target = math.sqrt(lay.rho * lay.mu / (lay.beta * lay.alpha1))
        worst_zeta = max(worst_zeta, abs(d.zeta_plus * d.zeta_minus - target) / target)
        if gamma > 0:
            worst_b = max(worst_b,
                          abs(abs(d.b_plus * d.b_minus) - lay.rho / lay.mu) / (lay.rho / lay.mu))
        else:
            low, high = sorted([lay.rho / lay.alpha1, lay.mu / lay.beta])
            worst_dec = max(worst_dec, abs(d.zeta_plus**2 - high) / high,
                            abs(d.zeta_minus**2 - low) / low)

    ok = worst_zeta <= 1e-12 and worst_b <= 1e-12 and worst_dec <= 1e-12
    announce("criterion 7 (derived-constant identities)", ok,
             f"worst: zeta-product={worst_zeta:.2e} b-product={worst_b:.2e} "
             f"decoupled-speeds={worst_dec:.2e}")
    assert worst_zeta <= 1e-12
    assert worst_b <= 1e-12
    assert worst_dec <= 1e-12


# ---------------------------------------------------------------------------
# criterion 8: compact-perturbation signature
# ---------------------------------------------------------------------------

def test_criterion_8_compact_perturbation_signature(announce):
    """At n_elems = 64, matched coupled/decoupled eigenvalue differences are
    smaller for the 5 highest-frequency pairs than for the 5 lowest."""
    result = compare_coupled_decoupled(normalized_config(), Mesh(64, 1.0))
    low5 = float(result.abs_diff[:5].mean())
    high5 = float(result.abs_diff[-5:].mean())
    ok = high5 < low5
    announce("criterion 8 (compact-perturbation signature)", ok,
             f"mean|diff| low5={low5:.3e} high5={high5:.3e}")
    assert high5 < low5
