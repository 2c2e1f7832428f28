"""Decay-rate fits, resonance scans and coupled/decoupled spectral comparison."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np

from .dynamics import Trajectory
from .errors import InsufficientSamples, InvalidConfig, NonpositiveEnergy
from .fem import Mesh, assemble_decoupled, assemble_electrostatic
from .params import BeamConfig, Model, derive_constants
from .spectral import generator_spectrum

#: samples below this fraction of E(0) are dropped from fits (numerical floor)
ENERGY_FLOOR_FACTOR = 1e-14

#: default fit window as fractions of the trajectory horizon
DEFAULT_WINDOW = (0.2, 0.9)

#: exact-construction and exploratory near-resonance flag tolerances
RESONANCE_TOL = 1e-6
NEAR_RESONANCE_TOL = 1e-2


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential rate: E(t) ~ C exp(-2 omega t) on the window."""

    omega: float
    window: tuple
    residual: float
    n_samples: int


def fit_decay_rate(traj: Trajectory, window: tuple | None = None,
                   min_samples: int = 10) -> DecayFit:
    """Fit log E(t) over a window, skipping the numerical floor.

    The default window [0.2 T, 0.9 T] avoids both the initial transient and
    late samples where E has collapsed toward roundoff.  omega is minus half
    the fitted slope; the returned residual is the rms misfit of log E.
    """
    times = np.asarray(traj.times, dtype=float)
    energies = np.asarray(traj.total_energy, dtype=float)
    if len(times) == 0 or energies[0] <= 0.0:
        raise NonpositiveEnergy("initial energy must be positive to fit a decay rate")

    horizon = times[-1]
    if window is None:
        if not horizon > 0:
            raise InsufficientSamples("trajectory horizon is zero; nothing to fit")
        window = (DEFAULT_WINDOW[0] * horizon, DEFAULT_WINDOW[1] * horizon)
    t0, t1 = window
    if not t1 > t0:
        raise ValueError(f"fit window must satisfy t1 > t0 (got {window})")

    mask = (times >= t0) & (times <= t1) & (energies > ENERGY_FLOOR_FACTOR * energies[0])
    n_used = int(np.sum(mask))
    if n_used < min_samples:
        raise InsufficientSamples(
            f"only {n_used} usable samples in window [{t0}, {t1}] (need {min_samples})"
        )

    log_e = np.log(energies[mask])
    design = np.vstack([np.ones(n_used), times[mask]]).T
    coef, *_ = np.linalg.lstsq(design, log_e, rcond=None)
    misfit = log_e - design @ coef
    return DecayFit(
        omega=-0.5 * float(coef[1]),
        window=(float(t0), float(t1)),
        residual=float(np.sqrt(np.mean(misfit**2))),
        n_samples=n_used,
    )


# ---------------------------------------------------------------------------
# resonance scan
# ---------------------------------------------------------------------------

@dataclass
class ResonanceScanResult:
    """Slowness ratios over a gamma grid with odd/odd rational proximity flags.

    flagged marks exact constructions (|ratio - (2n-1)/(2m-1)| <= tol);
    near_flagged uses the coarser exploratory tolerance.
    """

    gammas: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    ratios: np.ndarray
    flagged: np.ndarray
    near_flagged: np.ndarray
    n_best: np.ndarray
    m_best: np.ndarray
    tol: float
    near_tol: float
    n_max: int


def _best_odd_pair(ratio: float, n_max: int) -> tuple:
    """(n, m, error) minimizing |ratio - (2n-1)/(2m-1)| over n, m <= n_max."""
    best = (1, 1, abs(ratio - 1.0))
    for n in range(1, n_max + 1):
        for m in range(1, n_max + 1):
            err = abs(ratio - (2 * n - 1) / (2 * m - 1))
            if err < best[2]:
                best = (n, m, err)
    return best


def resonance_scan(config: BeamConfig, gammas, n_max: int = 9,
                   tol: float = RESONANCE_TOL,
                   near_tol: float = NEAR_RESONANCE_TOL) -> ResonanceScanResult:
    """Sweep the piezoelectric coefficient on both face layers.

    Each grid point recomputes the derived constants and checks the slowness
    ratio against every odd/odd rational with indices up to n_max.
    """
    gammas = np.asarray(list(gammas), dtype=float)
    if gammas.size == 0:
        raise ValueError("gamma grid must be nonempty")

    zp = np.empty_like(gammas)
    zm = np.empty_like(gammas)
    ratios = np.empty_like(gammas)
    n_best = np.empty(gammas.shape, dtype=int)
    m_best = np.empty(gammas.shape, dtype=int)
    errors = np.empty_like(gammas)

    for i, gamma in enumerate(gammas):
        cfg = replace(
            config,
            layer1=replace(config.layer1, gamma=float(gamma)),
            layer3=replace(config.layer3, gamma=float(gamma)),
        )
        derived = derive_constants(cfg).layer1
        zp[i], zm[i] = derived.zeta_plus, derived.zeta_minus
        ratios[i] = derived.ratio
        n_best[i], m_best[i], errors[i] = _best_odd_pair(ratios[i], n_max)

    return ResonanceScanResult(
        gammas=gammas, zeta_plus=zp, zeta_minus=zm, ratios=ratios,
        flagged=errors <= tol, near_flagged=errors <= near_tol,
        n_best=n_best, m_best=m_best, tol=tol, near_tol=near_tol, n_max=n_max,
    )


def scan_to_csv(result: ResonanceScanResult, stream: TextIO) -> None:
    stream.write("gamma,zeta_plus,zeta_minus,ratio,flagged,n,m\n")
    for i in range(len(result.gammas)):
        stream.write(
            f"{result.gammas[i]:.17g},{result.zeta_plus[i]:.17g},"
            f"{result.zeta_minus[i]:.17g},{result.ratios[i]:.17g},"
            f"{int(result.flagged[i])},{result.n_best[i]},{result.m_best[i]}\n"
        )


# ---------------------------------------------------------------------------
# coupled vs decoupled spectra
# ---------------------------------------------------------------------------

@dataclass
class ModeComparison:
    """Matched upper-half-plane eigenvalue pairs, sorted by |lambda_coupled|."""

    lam_coupled: np.ndarray
    lam_decoupled: np.ndarray
    abs_diff: np.ndarray

    def __len__(self) -> int:
        return len(self.lam_coupled)


def _greedy_match(im_a: np.ndarray, im_b: np.ndarray) -> list:
    """One-to-one greedy pairing by closest imaginary parts."""
    dist = np.abs(im_a[:, None] - im_b[None, :])
    order = np.argsort(dist, axis=None, kind="stable")
    used_a = np.zeros(len(im_a), dtype=bool)
    used_b = np.zeros(len(im_b), dtype=bool)
    pairs = []
    n_pairs = min(len(im_a), len(im_b))
    for flat in order:
        i, j = np.unravel_index(flat, dist.shape)
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        pairs.append((int(i), int(j)))
        if len(pairs) == n_pairs:
            break
    return pairs


def compare_coupled_decoupled(config: BeamConfig, mesh: Mesh,
                              k_modes: int | None = None) -> ModeComparison:
    """Spectral fingerprint of the shear coupling.

    Computes the electrostatic and decoupled spectra on the same mesh,
    matches upper-half-plane modes by nearest imaginary part (one-to-one
    greedy), and reports |lambda_coupled - lambda_decoupled| per pair.  A
    coupling that acts compactly shrinks the differences as the frequency
    grows; the returned pairs are sorted by |lambda_coupled| so the trend
    can be read off directly.
    """
    if config.model is not Model.ELECTROSTATIC:
        raise InvalidConfig(
            [f"compare_coupled_decoupled needs an electrostatic config "
             f"(got {config.model.value!r})"]
        )
    sys_coupled = assemble_electrostatic(config, mesh)
    sys_decoupled = assemble_decoupled(replace(config, model=Model.DECOUPLED), mesh)

    spec_c = generator_spectrum(sys_coupled)
    spec_d = generator_spectrum(sys_decoupled)
    lam_c = spec_c.eigenvalues[spec_c.eigenvalues.imag > 1e-9]
    lam_d = spec_d.eigenvalues[spec_d.eigenvalues.imag > 1e-9]

    pairs = _greedy_match(lam_c.imag, lam_d.imag)
    lam_c = np.array([lam_c[i] for i, _ in pairs])
    lam_d = np.array([lam_d[j] for _, j in pairs])

    order = np.argsort(np.abs(lam_c), kind="stable")
    lam_c, lam_d = lam_c[order], lam_d[order]
    if k_modes is not None:
        lam_c, lam_d = lam_c[:k_modes], lam_d[:k_modes]

    return ModeComparison(lam_coupled=lam_c, lam_decoupled=lam_d,
                          abs_diff=np.abs(lam_c - lam_d))


def comparison_to_csv(result: ModeComparison, stream: TextIO) -> None:
    stream.write("idx,im_decoupled,re_decoupled,im_coupled,re_coupled,abs_diff\n")
    for i in range(len(result)):
        stream.write(
            f"{i},{result.lam_decoupled[i].imag:.17g},{result.lam_decoupled[i].real:.17g},"
            f"{result.lam_coupled[i].imag:.17g},{result.lam_coupled[i].real:.17g},"
            f"{result.abs_diff[i]:.17g}\n"
        )
