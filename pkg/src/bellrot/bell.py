"""
Bell-measurement outcome probabilities.

A Bell state prepared in the z-basis is rotated by the same operator on both
qubits and then measured in the Bell basis built from a rotated single-qubit
frame. The frame is fixed by two angles (elevation, azimuth) through
``U = Rz(elevation) Ry(azimuth)``, so the measurement quantisation axis is

    n = (sin(azimuth) cos(elevation), sin(azimuth) sin(elevation), cos(azimuth)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .quantum import (
    BELL_ORDER,
    AxisAngle,
    BellKind,
    RotationVector,
    bell_matrix,
    bell_state,
    density,
    joint_rotation,
    mix_with_identity,
    rotation_single,
    rotations_from_vectors,
)

NEGATIVE_PROB_TOL = 1e-10

# Equal-probability axes used by the estimation protocol.
PHI_PLUS_AXIS_ANGLES = (0.95531662, 0.78539816)
PHI_MINUS_AXIS_ANGLES = (0.61547971, 0.78539816)


class SolverError(RuntimeError):
    """Numerical search failed to reach its target accuracy."""


@dataclass(frozen=True)
class MeasurementAxis:
    elevation: float
    azimuth: float

    def __post_init__(self):
        if not (np.isfinite(self.elevation) and 0.0 <= self.elevation <= np.pi):
            raise ValueError(f"elevation must lie in [0, pi], got {self.elevation}")
        if not (np.isfinite(self.azimuth) and 0.0 <= self.azimuth < 2 * np.pi):
            raise ValueError(f"azimuth must lie in [0, 2pi), got {self.azimuth}")

    @classmethod
    def wrapped(cls, elevation: float, azimuth: float) -> "MeasurementAxis":
        """Fold arbitrary angles into range.

        Uses Rz(e + pi) Ry(a) = Rz(e) Ry(-a) Rz(pi); the trailing Rz(pi) only
        changes Bell-state phases, so outcome probabilities are unchanged.
        """
        elevation = float(np.mod(elevation, 2 * np.pi))
        if elevation > np.pi:
            elevation -= np.pi
            azimuth = -azimuth
        azimuth = float(np.mod(azimuth, 2 * np.pi))
        if azimuth >= 2 * np.pi:
            azimuth = 0.0
        return cls(elevation, azimuth)

    def direction(self) -> np.ndarray:
        e, a = self.elevation, self.azimuth
        return np.array([np.sin(a) * np.cos(e), np.sin(a) * np.sin(e), np.cos(a)])


PHI_PLUS_AXIS = MeasurementAxis(*PHI_PLUS_AXIS_ANGLES)
PHI_MINUS_AXIS = MeasurementAxis(*PHI_MINUS_AXIS_ANGLES)


@dataclass(frozen=True)
class OutcomeDistribution:
    p_phi_plus: float
    p_phi_minus: float
    p_psi_plus: float
    p_psi_minus: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_phi_plus, self.p_phi_minus, self.p_psi_plus, self.p_psi_minus])

    def __getitem__(self, kind: BellKind) -> float:
        return float(self.as_array()[BELL_ORDER.index(kind)])


def measurement_frame(axis: MeasurementAxis) -> np.ndarray:
    return rotation_single("z", axis.elevation) @ rotation_single("y", axis.azimuth)


def _frames(elevations: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    """Batched measurement_frame over matching arrays of angles, shape (n, 2, 2)."""
    ce, se = np.cos(elevations / 2), np.sin(elevations / 2)
    ca, sa = np.cos(azimuths / 2), np.sin(azimuths / 2)
    em, ep = ce - 1j * se, ce + 1j * se
    out = np.empty((len(elevations), 2, 2), dtype=complex)
    out[:, 0, 0] = em * ca
    out[:, 0, 1] = -em * sa
    out[:, 1, 0] = ep * sa
    out[:, 1, 1] = ep * ca
    return out


def _clamp(p: np.ndarray) -> np.ndarray:
    if np.any(p < -NEGATIVE_PROB_TOL):
        raise ArithmeticError(f"negative outcome probability {p.min():.3g}")
    return np.clip(p, 0.0, 1.0)


def outcome_distribution(
    initial: BellKind,
    rot: RotationVector,
    axis: MeasurementAxis,
    alpha: float = 0.0,
) -> OutcomeDistribution:
    """P(outcome | initial) from Tr(projector * rho) with rho the rotated, mixed state."""
    return outcome_distribution_in_frame(initial, rot, measurement_frame(axis), alpha)


def outcome_distribution_in_frame(
    initial: BellKind,
    rot: RotationVector,
    frame: np.ndarray,
    alpha: float = 0.0,
) -> OutcomeDistribution:
    """outcome_distribution for an arbitrary single-qubit measurement frame."""
    r = joint_rotation(rot.to_axis_angle())
    rho = mix_with_identity(r @ density(bell_state(initial)) @ r.conj().T, alpha)
    probs = []
    for kind in BELL_ORDER:
        phi = bell_state(kind, frame)
        probs.append(np.real(phi.conj() @ rho @ phi))
    return OutcomeDistribution(*(float(p) for p in _clamp(np.array(probs))))


def outcome_probabilities(
    initial: BellKind,
    thetas: np.ndarray,
    axis: MeasurementAxis,
    alpha: float = 0.0,
) -> np.ndarray:
    """Vectorised outcome_distribution over an (n, 3) array of rotations.

    Returns an (n, 4) array in BELL_ORDER. Uses the pure-state amplitude
    <Z|(U^dag R) (x) (U^dag R)|initial>, with the mixed part contributing
    alpha/4 to every outcome.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"mixing fraction must lie in [0, 1], got {alpha}")
    v = measurement_frame(axis).conj().T @ rotations_from_vectors(thetas)
    m = bell_matrix(initial)
    # (V (x) V) vec(M) == vec(V M V^T) for row-major vec.
    rotated = (v @ m @ v.transpose(0, 2, 1)).reshape(len(v), 4)
    basis = np.stack([bell_matrix(k).ravel() for k in BELL_ORDER])
    amps = rotated @ basis.conj().T
    return _clamp((1.0 - alpha) * np.abs(amps) ** 2 + alpha / 4.0)


def closed_form_coefficients(initial: BellKind, aa: AxisAngle) -> np.ndarray:
    """Bell-basis amplitudes of R(theta)|initial>, ordered (phi+, phi-, psi+, psi-).

    Polynomial expressions in the axis components and cos/sin of the angle.
    """
    kx, ky, kz = aa.k
    c, s = np.cos(aa.theta), np.sin(aa.theta)
    if initial is BellKind.PHI_PLUS:
        coeffs = (
            c - ky**2 * c + ky**2,
            -1j * kz * s + 1j * kx * ky - 1j * kx * ky * c,
            -1j * kx * s - 1j * ky * kz + 1j * ky * kz * c,
            0.0,
        )
    elif initial is BellKind.PHI_MINUS:
        coeffs = (
            -1j * kz * s - 1j * kx * ky + 1j * kx * ky * c,
            c - kx**2 * c + kx**2,
            ky * s - kx * kz + kx * kz * c,
            0.0,
        )
    elif initial is BellKind.PSI_PLUS:
        coeffs = (
            -1j * kx * s + 1j * ky * kz - 1j * ky * kz * c,
            -ky * s - kx * kz + kx * kz * c,
            c - kz**2 * c + kz**2,
            0.0,
        )
    else:
        coeffs = (0.0, 0.0, 0.0, 1.0)
    return np.array(coeffs, dtype=complex)


def matrix_coefficients(initial: BellKind, aa: AxisAngle) -> np.ndarray:
    """Same amplitudes as closed_form_coefficients, by Kronecker-product arithmetic."""
    rotated = joint_rotation(aa) @ bell_state(initial)
    return np.array([np.vdot(bell_state(k), rotated) for k in BELL_ORDER])


@dataclass(frozen=True)
class SphereMap:
    initial: BellKind
    rot: RotationVector
    alpha: float
    elevations: np.ndarray
    azimuths: np.ndarray
    probabilities: np.ndarray  # (n_elevation, n_azimuth, 4) in BELL_ORDER

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.elevations), len(self.azimuths)

    def cell(self, i: int, j: int) -> OutcomeDistribution:
        return OutcomeDistribution(*(float(p) for p in self.probabilities[i, j]))

    def rows(self):
        """(elevation, azimuth, p_phi_plus, p_phi_minus, p_psi_plus, p_psi_minus), row-major."""
        for i, e in enumerate(self.elevations):
            for j, a in enumerate(self.azimuths):
                yield (e, a, *self.probabilities[i, j])


def sphere_map(
    initial: BellKind,
    rot: RotationVector = RotationVector(),
    alpha: float = 0.0,
    n_theta: int = 91,
    n_lambda: int = 180,
) -> SphereMap:
    """Outcome probabilities over an elevation x azimuth grid.

    Elevation is endpoint-inclusive on [0, pi]; azimuth is periodic on [0, 2pi).
    """
    if n_theta < 2 or n_lambda < 2:
        raise ValueError("grid needs at least 2 points along each angle")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"mixing fraction must lie in [0, 1], got {alpha}")
    elevations = np.pi * np.arange(n_theta) / (n_theta - 1)
    azimuths = 2 * np.pi * np.arange(n_lambda) / n_lambda
    ee, aa = np.meshgrid(elevations, azimuths, indexing="ij")
    frames = _frames(ee.ravel(), aa.ravel())

    rotated = joint_rotation(rot.to_axis_angle()) @ bell_state(initial)
    psi = rotated.reshape(2, 2)
    # <Z|(U (x) U)^dag|psi> = <Z| vec(U^dag Psi U^*)
    udag = frames.conj().transpose(0, 2, 1)
    local = np.einsum("nij,jk,nlk->nil", udag, psi, udag)
    basis = np.stack([bell_matrix(k) for k in BELL_ORDER])
    amps = np.einsum("zil,nil->nz", basis.conj(), local)
    probs = _clamp((1.0 - alpha) * np.abs(amps) ** 2 + alpha / 4.0)
    return SphereMap(
        initial=initial,
        rot=rot,
        alpha=alpha,
        elevations=elevations,
        azimuths=azimuths,
        probabilities=probs.reshape(n_theta, n_lambda, 4),
    )


def _three_way(initial: BellKind, elevation: float, azimuth: float) -> np.ndarray:
    frame = _frames(np.array([elevation]), np.array([azimuth]))[0]
    v = frame.conj().T
    local = v @ bell_matrix(initial) @ v.T
    return np.array([abs(np.vdot(bell_matrix(k), local)) ** 2 for k in BELL_ORDER[:3]])


def probability_variance(initial: BellKind, elevation: float, azimuth: float) -> float:
    """Variance of the three rotation-sensitive outcome probabilities."""
    return float(np.var(_three_way(initial, elevation, azimuth)))


@dataclass(frozen=True)
class EqualPoint:
    axis: MeasurementAxis
    variance: float
    spread: float


def equal_probability_axes(
    initial: BellKind,
    grid_step_deg: float = 1.0,
    target_variance: float = 1e-18,
) -> list[EqualPoint]:
    """Measurement axes where phi+, phi- and psi+ outcomes are equally likely.

    Zero rotation, pure state. A coarse grid scan picks local minima of the
    probability variance; each is refined with Nelder-Mead and deduplicated.
    """
    if initial not in (BellKind.PHI_PLUS, BellKind.PHI_MINUS):
        raise ValueError("equal-probability axes are defined for phi+ and phi- only")
    step = np.radians(grid_step_deg)
    elevations = np.arange(0.0, np.pi + step / 2, step)
    azimuths = np.arange(0.0, 2 * np.pi - step / 2, step)
    grid = sphere_map(initial, n_theta=len(elevations), n_lambda=len(azimuths))
    var = np.var(grid.probabilities[..., :3], axis=-1)

    # Local minima with periodic azimuth and clipped elevation.
    padded = np.pad(var, ((1, 1), (0, 0)), mode="constant", constant_values=np.inf)
    is_min = np.ones_like(var, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.roll(padded, dj, axis=1)[1 + di : 1 + di + var.shape[0]]
            is_min &= var <= shifted
    # Candidates must be near the bottom of the basin to be worth refining.
    is_min &= var < 1e-3

    found: list[EqualPoint] = []
    for i, j in zip(*np.nonzero(is_min)):
        start = np.array([grid.elevations[i], grid.azimuths[j]])
        res = minimize(
            lambda x: probability_variance(initial, x[0], x[1]),
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-32, "maxiter": 4000, "initial_simplex": None},
        )
        axis = MeasurementAxis.wrapped(res.x[0], res.x[1])
        value = probability_variance(initial, axis.elevation, axis.azimuth)
        if value >= target_variance:
            continue
        if any(_same_axis(axis, p.axis) for p in found):
            continue
        probs = _three_way(initial, axis.elevation, axis.azimuth)
        found.append(EqualPoint(axis, value, float(probs.max() - probs.min())))
    if not found:
        raise SolverError(f"no equal-probability axis reached variance < {target_variance:g}")
    found.sort(key=lambda p: (round(p.axis.elevation, 6), round(p.axis.azimuth, 6)))
    return found


def _same_axis(a: MeasurementAxis, b: MeasurementAxis, tol: float = 1e-6) -> bool:
    de = abs(a.elevation - b.elevation)
    da = abs(a.azimuth - b.azimuth)
    da = min(da, 2 * np.pi - da)
    return de < tol and da < tol


# Rotation of each Bell state about a coordinate axis, keyed by (axis, initial):
# list of (outcome, amplitude(theta)).
_SINGLE_AXIS_TABLE = {
    ("x", BellKind.PSI_MINUS): [(BellKind.PSI_MINUS, lambda t: 1.0)],
    ("x", BellKind.PSI_PLUS): [(BellKind.PSI_PLUS, np.cos), (BellKind.PHI_PLUS, lambda t: -1j * np.sin(t))],
    ("x", BellKind.PHI_PLUS): [(BellKind.PHI_PLUS, np.cos), (BellKind.PSI_PLUS, lambda t: -1j * np.sin(t))],
    ("x", BellKind.PHI_MINUS): [(BellKind.PHI_MINUS, lambda t: 1.0)],
    ("y", BellKind.PSI_MINUS): [(BellKind.PSI_MINUS, lambda t: 1.0)],
    ("y", BellKind.PSI_PLUS): [(BellKind.PSI_PLUS, np.cos), (BellKind.PHI_MINUS, lambda t: -np.sin(t))],
    ("y", BellKind.PHI_PLUS): [(BellKind.PHI_PLUS, lambda t: 1.0)],
    ("y", BellKind.PHI_MINUS): [(BellKind.PHI_MINUS, np.cos), (BellKind.PSI_PLUS, np.sin)],
    ("z", BellKind.PSI_MINUS): [(BellKind.PSI_MINUS, lambda t: 1.0)],
    ("z", BellKind.PSI_PLUS): [(BellKind.PSI_PLUS, lambda t: 1.0)],
    ("z", BellKind.PHI_PLUS): [(BellKind.PHI_PLUS, np.cos), (BellKind.PHI_MINUS, lambda t: -1j * np.sin(t))],
    ("z", BellKind.PHI_MINUS): [(BellKind.PHI_MINUS, np.cos), (BellKind.PHI_PLUS, lambda t: -1j * np.sin(t))],
}

SINGLE_AXIS_TERMS = {
    ("x", BellKind.PSI_PLUS): "cos(t) psi+ - i sin(t) phi+",
    ("x", BellKind.PHI_PLUS): "cos(t) phi+ - i sin(t) psi+",
    ("y", BellKind.PSI_PLUS): "cos(t) psi+ - sin(t) phi-",
    ("y", BellKind.PHI_MINUS): "cos(t) phi- + sin(t) psi+",
    ("z", BellKind.PHI_PLUS): "cos(t) phi+ - i sin(t) phi-",
    ("z", BellKind.PHI_MINUS): "cos(t) phi- - i sin(t) phi+",
}

SINGLE_AXIS_INITIALS = (BellKind.PSI_MINUS, BellKind.PSI_PLUS, BellKind.PHI_PLUS, BellKind.PHI_MINUS)


def single_axis_amplitudes(axis: str, initial: BellKind, theta: float) -> np.ndarray:
    """Expected Bell-basis amplitudes of R_axis(theta) (x) R_axis(theta)|initial>."""
    out = np.zeros(4, dtype=complex)
    for outcome, amp in _SINGLE_AXIS_TABLE[(axis, initial)]:
        out[BELL_ORDER.index(outcome)] = amp(theta)
    return out


def single_axis_term(axis: str, initial: BellKind) -> str:
    return SINGLE_AXIS_TERMS.get((axis, initial), initial.value)
