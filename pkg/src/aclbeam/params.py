"""Physical inputs of the three-layer ACL cantilever and their derived scalars.

The composite is two piezoelectric face layers (indices 1 and 3) bonded to a
compliant core (index 2) that carries only shear.  Everything downstream
(assembly, spectra, the analytic resonant mode) consumes the closed-form
constants computed here: the line density ``m``, rotary inertia ``K1``,
bending stiffness ``K2``, half-thickness sum ``H``, the stiffened modulus
``alpha`` per face layer, and the characteristic slownesses ``zeta_plus`` /
``zeta_minus`` with their companion amplitude ratios ``b_plus`` / ``b_minus``.

Normalized units (every layer constant equal to one, L = 1) are the default
working regime; they make all reference values analytically derivable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Integral

from .errors import (
    DegenerateWaveSpeeds,
    InvalidRatio,
    MissingMagneticParams,
    NonPositiveParameter,
)

#: relative tolerance used when checking closed-form identities
IDENTITY_RTOL = 1e-12


class Model(str, Enum):
    """Which closed-loop PDE variant to assemble."""

    MAGNETIC = "magnetic"
    ELECTROSTATIC = "electrostatic"
    DECOUPLED = "decoupled"


@dataclass(frozen=True)
class LayerParams:
    """Material constants of one piezoelectric face layer.

    rho     volumetric density (mass/length^3, times unit width)
    h       layer thickness
    alpha1  elastic stiffness c11
    gamma   piezoelectric coefficient gamma_31
    beta    impermittivity 1/eps_33
    mu      magnetic permeability; may be None for electrostatic-only runs
    """

    rho: float
    h: float
    alpha1: float
    gamma: float = 0.0
    beta: float = 1.0
    mu: float | None = None

    @property
    def alpha(self) -> float:
        """Stiffened stretching modulus alpha1 + gamma^2 * beta."""
        return self.alpha1 + self.gamma**2 * self.beta


@dataclass(frozen=True)
class CoreParams:
    """Compliant middle layer: density, thickness and shear modulus only."""

    rho: float
    h: float
    G2: float


@dataclass(frozen=True)
class FeedbackGains:
    """Boundary feedback gains; all zero defines the conservative open loop.

    k1, k2  bending gains on the tip rotation rate and tip velocity
    s1, s3  longitudinal/electrical gains on the face layers
    """

    k1: float = 0.0
    k2: float = 0.0
    s1: float = 0.0
    s3: float = 0.0

    def as_tuple(self):
        return (self.k1, self.k2, self.s1, self.s3)


@dataclass(frozen=True)
class BeamConfig:
    """Full description of one beam: geometry, three layers, gains, model."""

    L: float
    layer1: LayerParams
    layer2: CoreParams
    layer3: LayerParams
    gains: FeedbackGains
    model: Model = Model.ELECTROSTATIC


@dataclass(frozen=True)
class LayerDerived:
    """Derived scalars of one face layer (slownesses and amplitude ratios).

    zeta_plus/zeta_minus are the two characteristic slownesses of the coupled
    stretching/charge pair; b_plus/b_minus are the charge-to-displacement
    amplitude ratios carried by each branch.  Both are None when they are
    undefined (mu unset, or gamma == 0 for the b pair).
    """

    params: LayerParams
    alpha: float
    zeta_plus: float | None = None
    zeta_minus: float | None = None
    b_plus: float | None = None
    b_minus: float | None = None

    @property
    def ratio(self) -> float | None:
        """Slowness ratio zeta_plus / zeta_minus (>= 1)."""
        if self.zeta_plus is None:
            return None
        return self.zeta_plus / self.zeta_minus


@dataclass(frozen=True)
class DerivedConstants:
    """All composite scalars used by the PDE models."""

    m: float
    K1: float
    K2: float
    H: float
    layer1: LayerDerived
    layer3: LayerDerived

    def layer(self, index: int) -> LayerDerived:
        if index == 1:
            return self.layer1
        if index == 3:
            return self.layer3
        raise KeyError(f"no derived constants for layer {index}")


def validate_config(config: BeamConfig) -> BeamConfig:
    """Check every positivity/consistency invariant at once.

    Returns the config unchanged when it is valid and raises
    :class:`InvalidConfig` carrying the complete list of violations
    otherwise.  Magnetic-permeability problems raise the
    :class:`MissingMagneticParams` subclass so callers can distinguish them.
    """
    violations = []
    missing_mu = []

    if not config.L > 0:
        violations.append(f"beam length must be positive (got {config.L})")

    for name, layer in (("layer1", config.layer1), ("layer3", config.layer3)):
        for field_name in ("rho", "h", "alpha1", "beta"):
            value = getattr(layer, field_name)
            if not value > 0:
                violations.append(f"{name}.{field_name} must be positive (got {value})")
        if layer.mu is not None and not layer.mu > 0:
            violations.append(f"{name}.mu must be positive when set (got {layer.mu})")
        if config.model is Model.MAGNETIC and layer.mu is None:
            missing_mu.append(f"{name}.mu must be set for the magnetic model")

    core = config.layer2
    if not core.h > 0:
        violations.append("middle layer thickness must be positive")
    if core.rho < 0:
        violations.append(f"layer2.rho must be nonnegative (got {core.rho})")
    # G2 == 0 is allowed: it turns the shear coupling off (decoupled studies)
    if core.G2 < 0:
        violations.append(f"layer2.G2 must be nonnegative (got {core.G2})")

    for gain_name in ("k1", "k2", "s1", "s3"):
        value = getattr(config.gains, gain_name)
        if value < 0:
            violations.append(f"gains.{gain_name} must be nonnegative (got {value})")

    if missing_mu and not violations:
        raise MissingMagneticParams(missing_mu)
    if violations or missing_mu:
        raise NonPositiveParameter(violations + missing_mu)
    return config


def _derive_layer(params: LayerParams) -> LayerDerived:
    """Closed-form slownesses and amplitude ratios of one face layer.

    zeta_+- solve  x^4 - S x^2 + P = 0  with
        S = gamma^2 mu/alpha1 + mu/beta + rho/alpha1,   P = rho mu/(beta alpha1),
    so zeta_+ zeta_- = sqrt(P).  b_+- solve  x^2 - A x - rho/mu = 0  with
        A = gamma + alpha1/(gamma beta) - rho/(gamma mu),
    so |b_+ b_-| = rho/mu.  Both quadratics are resolved with the stable
    root recipe (large root from the formula, small root from the product)
    to keep the product identities at machine precision.
    """
    alpha = params.alpha
    if params.mu is None:
        return LayerDerived(params=params, alpha=alpha)

    rho, a1, beta, mu, gamma = params.rho, params.alpha1, params.beta, params.mu, params.gamma
    u = gamma**2 * mu / a1
    a = mu / beta
    b = rho / a1
    s = u + a + b
    prod = a * b
    # s^2 - 4 prod rewritten as a sum of nonnegative terms (no cancellation)
    disc = (a - b) ** 2 + u * (u + 2.0 * (a + b))
    z2_plus = 0.5 * (s + math.sqrt(disc))
    z2_minus = prod / z2_plus
    zeta_plus = math.sqrt(z2_plus)
    zeta_minus = math.sqrt(z2_minus)

    b_plus = b_minus = None
    if gamma != 0.0:
        a = gamma + a1 / (gamma * beta) - rho / (gamma * mu)
        rad = math.sqrt(a * a + 4.0 * rho / mu)
        if a >= 0.0:
            b_plus = 0.5 * (a + rad)
            b_minus = -(rho / mu) / b_plus
        else:
            b_minus = 0.5 * (a - rad)
            b_plus = -(rho / mu) / b_minus

    return LayerDerived(
        params=params,
        alpha=alpha,
        zeta_plus=zeta_plus,
        zeta_minus=zeta_minus,
        b_plus=b_plus,
        b_minus=b_minus,
    )


def derive_constants(config: BeamConfig) -> DerivedConstants:
    """Populate every derived scalar from a validated config.

    m  = rho1 h1 + rho2 h2 + rho3 h3          (total line density)
    K1 = (rho1 h1^3 + rho3 h3^3) / 12         (rotary inertia)
    K2 = (alpha^1 h1^3 + alpha^3 h3^3) / 12   (bending stiffness)
    H  = (h1 + 2 h2 + h3) / 2
    """
    config = validate_config(config)
    l1, core, l3 = config.layer1, config.layer2, config.layer3
    return DerivedConstants(
        m=l1.rho * l1.h + core.rho * core.h + l3.rho * l3.h,
        K1=(l1.rho * l1.h**3 + l3.rho * l3.h**3) / 12.0,
        K2=(l1.alpha * l1.h**3 + l3.alpha * l3.h**3) / 12.0,
        H=(l1.h + 2.0 * core.h + l3.h) / 2.0,
        layer1=_derive_layer(l1),
        layer3=_derive_layer(l3),
    )


def _is_odd_ratio(ratio) -> bool:
    if isinstance(ratio, Integral):
        return int(ratio) % 2 == 1
    if isinstance(ratio, Fraction):
        return ratio.numerator % 2 == 1 and ratio.denominator % 2 == 1
    return False


def solve_resonant_gamma(ratio, base: LayerParams | None = None,
                         require_odd_ratio: bool = False) -> float:
    """Piezoelectric coefficient that pins zeta_plus/zeta_minus to ``ratio``.

    ``base`` must have rho = mu = beta = alpha1 (any common value); in that
    regime the slowness product is 1 and the sum is gamma^2 + 2, which gives
    the closed form gamma^2 = r + 1/r - 2 = (r - 1)^2 / r.

    ``ratio`` may be a float, int or Fraction.  With ``require_odd_ratio``
    it must be an exact ratio of odd integers (pass a Fraction), which is
    the resonant family of the magnetic closed loop.
    """
    r = float(ratio)
    if not r >= 1.0:
        raise InvalidRatio(f"slowness ratio must be >= 1 (got {r})")
    if require_odd_ratio and not _is_odd_ratio(ratio):
        raise InvalidRatio(
            f"ratio {ratio!r} is not an exact odd/odd rational; "
            "pass a Fraction such as Fraction(3, 1)"
        )

    if base is None:
        base = LayerParams(rho=1.0, h=1.0, alpha1=1.0, gamma=0.0, beta=1.0, mu=1.0)
    if base.mu is None:
        raise MissingMagneticParams(["base.mu must be set to solve for a resonant gamma"])
    values = (base.rho, base.mu, base.beta, base.alpha1)
    scale = max(abs(v) for v in values)
    if any(abs(v - values[0]) > 1e-12 * scale for v in values):
        raise ValueError(
            "solve_resonant_gamma needs rho = mu = beta = alpha1 on the base layer"
        )

    return math.sqrt((r - 1.0) ** 2 / r)


def normalized_layer(gamma: float = 0.0, mu: float | None = 1.0) -> LayerParams:
    """All-ones face layer, optionally with a piezoelectric coefficient."""
    return LayerParams(rho=1.0, h=1.0, alpha1=1.0, gamma=gamma, beta=1.0, mu=mu)


def normalized_config(model: Model = Model.ELECTROSTATIC, gamma: float = 0.0,
                      gains: FeedbackGains | None = None, G2: float = 1.0,
                      L: float = 1.0) -> BeamConfig:
    """Normalized beam: every layer constant 1, unit gains, unit length."""
    if gains is None:
        gains = FeedbackGains(k1=1.0, k2=1.0, s1=1.0, s3=1.0)
    layer = normalized_layer(gamma=gamma)
    return BeamConfig(
        L=L,
        layer1=layer,
        layer2=CoreParams(rho=1.0, h=1.0, G2=G2),
        layer3=layer,
        gains=gains,
        model=model,
    )


def resonant_config(n: int = 2, m: int = 1, model: Model = Model.MAGNETIC,
                    gains: FeedbackGains | None = None) -> BeamConfig:
    """Normalized beam whose slowness ratio equals (2n-1)/(2m-1).

    With identical face layers this is exactly the family of configurations
    whose closed loop keeps undamped modes on the imaginary axis.
    """
    if n < 1 or m < 1:
        raise InvalidRatio(f"n and m must be positive integers (got {n}, {m})")
    ratio = Fraction(2 * n - 1, 2 * m - 1)
    if ratio < 1:
        raise InvalidRatio(f"(2n-1)/(2m-1) must be >= 1 (got {ratio})")
    gamma = solve_resonant_gamma(ratio, require_odd_ratio=True)
    if gamma == 0.0:
        raise DegenerateWaveSpeeds(
            "ratio 1 gives gamma = 0 and coinciding slownesses; the resonant "
            "construction needs two distinct characteristic branches"
        )
    return normalized_config(model=model, gamma=gamma, gains=gains)
