"""Equation of state and transport closures for a calorically perfect gas.

Defaults describe a cold, low-density CO2-like atmosphere. Every routine is a
pure function of its inputs and broadcasts over numpy arrays, so state
conversions can be applied to a single probe value or to a whole nodal field.

Array state layout used throughout the package:

    primitive    V = [rho, vx, vy, p]          shape (..., 4)
    conservative W = [rho, rho*vx, rho*vy, E]  shape (..., 4)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GasModel",
    "PrimitiveState",
    "ConservativeState",
    "NonPhysicalStateError",
    "to_conservative",
    "to_primitive",
    "prim_array_to_cons",
    "cons_array_to_prim",
    "temperature",
    "sound_speed",
    "sutherland_viscosity",
    "conductivity",
    "viscous_stress",
    "vreman_eddy_viscosity",
]


class NonPhysicalStateError(ValueError):
    """Raised when a recovered density or pressure is not strictly positive."""


@dataclass(frozen=True)
class GasModel:
    """Calorically perfect gas with Sutherland viscosity and a Vreman closure.

    mu_v_ratio is the bulk-to-dynamic viscosity ratio; set it to zero to drop
    the dilatational term from the stress.
    """

    R: float = 188.4          # gas constant, J/(kg K)
    gamma: float = 1.33       # specific heat ratio
    mu0: float = 1.57e-6      # Sutherland reference viscosity, kg/(m s)
    T0: float = 240.0         # Sutherland reference temperature, K
    mu_v_ratio: float = 1000.0
    Pr: float = 0.72
    Pr_t: float = 0.9
    Cs: float = 0.07          # Vreman model constant

    def __post_init__(self):
        if not (self.R > 0.0):
            raise ValueError("gas constant must be positive")
        if not (self.gamma > 1.0):
            raise ValueError("specific heat ratio must exceed 1")
        if self.mu0 < 0.0 or not (self.T0 > 0.0):
            raise ValueError("invalid Sutherland parameters")
        if not (self.Pr > 0.0) or not (self.Pr_t > 0.0):
            raise ValueError("Prandtl numbers must be positive")
        if self.mu_v_ratio < 0.0:
            raise ValueError("bulk viscosity ratio must be non-negative")

    @property
    def cp(self) -> float:
        """Specific heat at constant pressure, R*gamma/(gamma-1)."""
        return self.R * self.gamma / (self.gamma - 1.0)


@dataclass(frozen=True)
class PrimitiveState:
    """Pointwise primitive fluid state (rho, v, p)."""

    rho: float
    v: np.ndarray
    p: float

    def __post_init__(self):
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))
        if not (self.rho > 0.0 and self.p > 0.0):
            raise NonPhysicalStateError(
                f"primitive state needs rho, p > 0 (got rho={self.rho}, p={self.p})"
            )

    def as_array(self) -> np.ndarray:
        v = np.zeros(2)
        v[: self.v.size] = self.v
        return np.array([self.rho, v[0], v[1], self.p])


@dataclass(frozen=True)
class ConservativeState:
    """Pointwise conservative fluid state (rho, momentum, total energy)."""

    rho: float
    mom: np.ndarray
    E: float

    def __post_init__(self):
        object.__setattr__(self, "mom", np.atleast_1d(np.asarray(self.mom, dtype=float)))
        e_int = self.E - 0.5 * float(self.mom @ self.mom) / self.rho
        if not (self.rho > 0.0 and e_int > 0.0):
            raise NonPhysicalStateError(
                f"conservative state needs rho > 0 and positive internal energy "
                f"(got rho={self.rho}, e_int={e_int})"
            )

    def as_array(self) -> np.ndarray:
        m = np.zeros(2)
        m[: self.mom.size] = self.mom
        return np.array([self.rho, m[0], m[1], self.E])


def to_conservative(V: PrimitiveState, gas: GasModel) -> ConservativeState:
    """E = p/(gamma-1) + rho |v|^2 / 2, momentum = rho v."""
    ke = 0.5 * V.rho * float(V.v @ V.v)
    return ConservativeState(rho=V.rho, mom=V.rho * V.v, E=V.p / (gas.gamma - 1.0) + ke)


def to_primitive(W: ConservativeState, gas: GasModel) -> PrimitiveState:
    """Invert to_conservative; raises NonPhysicalStateError on p <= 0 or rho <= 0."""
    if W.rho <= 0.0:
        raise NonPhysicalStateError(f"non-physical density {W.rho}")
    v = W.mom / W.rho
    p = (gas.gamma - 1.0) * (W.E - 0.5 * W.rho * float(v @ v))
    if p <= 0.0:
        raise NonPhysicalStateError(f"non-physical pressure {p}")
    return PrimitiveState(rho=W.rho, v=v, p=p)


def prim_array_to_cons(V: np.ndarray, gas: GasModel) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    W = np.empty_like(V)
    rho = V[..., 0]
    W[..., 0] = rho
    W[..., 1] = rho * V[..., 1]
    W[..., 2] = rho * V[..., 2]
    W[..., 3] = V[..., 3] / (gas.gamma - 1.0) + 0.5 * rho * (V[..., 1] ** 2 + V[..., 2] ** 2)
    return W


def cons_array_to_prim(W: np.ndarray, gas: GasModel, check: bool = False) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    V = np.empty_like(W)
    rho = W[..., 0]
    V[..., 0] = rho
    V[..., 1] = W[..., 1] / rho
    V[..., 2] = W[..., 2] / rho
    V[..., 3] = (gas.gamma - 1.0) * (W[..., 3] - 0.5 * (W[..., 1] ** 2 + W[..., 2] ** 2) / rho)
    if check and (np.any(rho <= 0.0) or np.any(V[..., 3] <= 0.0)):
        bad = np.nonzero((rho <= 0.0) | (V[..., 3] <= 0.0))
        raise NonPhysicalStateError(f"non-physical state at indices {bad[0][:8]}")
    return V


def temperature(V, gas: GasModel):
    """Ideal gas temperature T = p / (rho R); accepts a state or (rho, p) arrays."""
    if isinstance(V, PrimitiveState):
        return V.p / (V.rho * gas.R)
    V = np.asarray(V, dtype=float)
    return V[..., 3] / (V[..., 0] * gas.R)


def sound_speed(V, gas: GasModel):
    """a = sqrt(gamma p / rho)."""
    if isinstance(V, PrimitiveState):
        return float(np.sqrt(gas.gamma * V.p / V.rho))
    V = np.asarray(V, dtype=float)
    return np.sqrt(gas.gamma * V[..., 3] / V[..., 0])


def sutherland_viscosity(T, gas: GasModel):
    """Sutherland law mu = mu0 sqrt(T) / (1 + T0/T)."""
    T = np.asarray(T, dtype=float)
    mu = gas.mu0 * np.sqrt(T) / (1.0 + gas.T0 / T)
    return float(mu) if mu.ndim == 0 else mu


def conductivity(mu, gas: GasModel):
    """kappa = cp mu / Pr with cp = R gamma / (gamma - 1)."""
    return gas.cp * np.asarray(mu, dtype=float) / gas.Pr


def viscous_stress(grad_v: np.ndarray, mu, mu_v) -> np.ndarray:
    """Newtonian stress tau = mu (grad v + grad v^T) + (mu_v - 2/3 mu) div(v) I.

    grad_v has shape (..., 2, 2) with grad_v[..., i, j] = d v_i / d x_j. The
    deviatoric coefficient keeps its 3D value (-2/3 mu) so that bulk-viscosity
    parameters calibrated for 3D apply unchanged.
    """
    grad_v = np.asarray(grad_v, dtype=float)
    mu = np.asarray(mu, dtype=float)[..., None, None]
    mu_v = np.asarray(mu_v, dtype=float)[..., None, None]
    div = np.trace(grad_v, axis1=-2, axis2=-1)[..., None, None]
    eye = np.eye(2)
    return mu * (grad_v + np.swapaxes(grad_v, -1, -2)) + (mu_v - 2.0 / 3.0 * mu) * div * eye


def vreman_eddy_viscosity(grad_v: np.ndarray, rho, delta, gas: GasModel):
    """Vreman (2004) eddy viscosity mu_t = rho c sqrt(B_beta / (a_ij a_ij)).

    a_ij = d v_j / d x_i, beta = delta^2 a^T a, and
    B_beta = b11 b22 - b12^2 (third direction carries no gradients in 2D).
    Returns zero wherever the gradient magnitude vanishes. The model constant
    c is taken directly from the gas model (Cs).
    """
    grad_v = np.asarray(grad_v, dtype=float)
    alpha = np.swapaxes(grad_v, -1, -2)  # a[i, j] = d v_j / d x_i
    delta2 = np.asarray(delta, dtype=float) ** 2
    beta = delta2[..., None, None] * (np.swapaxes(alpha, -1, -2) @ alpha)
    b_beta = beta[..., 0, 0] * beta[..., 1, 1] - beta[..., 0, 1] ** 2
    aa = np.sum(alpha * alpha, axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(aa > 0.0, np.clip(b_beta, 0.0, None) / np.where(aa > 0.0, aa, 1.0), 0.0)
    mu_t = np.asarray(rho, dtype=float) * gas.Cs * np.sqrt(ratio)
    return float(mu_t) if np.ndim(mu_t) == 0 else mu_t
