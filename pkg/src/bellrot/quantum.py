"""
Small-dimension complex linear algebra for two spin-1/2 systems.

Basis ordering is |00>, |01>, |10>, |11> everywhere. States are complex
numpy vectors, operators and density matrices are complex numpy arrays of
shape (2, 2) or (4, 4). Global phases are never canonicalised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

ATOL = 1e-12
UNIT_TOL = 1e-9
ZERO_ANGLE = 1e-12

_SQRT_HALF = 1.0 / np.sqrt(2.0)

IDENTITY2 = np.eye(2, dtype=complex)
IDENTITY4 = np.eye(4, dtype=complex)

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class BellKind(enum.Enum):
    """The four Bell states. Values are the labels used in files and on the CLI."""

    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @classmethod
    def parse(cls, text: str) -> "BellKind":
        key = text.strip().lower().replace("_", "").replace("plus", "+").replace("minus", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown Bell state {text!r}; expected one of {[k.value for k in cls]}")


# Fixed outcome order used by every probability table in the package.
BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)

_BELL_Z = {
    BellKind.PHI_PLUS: np.array([1, 0, 0, 1], dtype=complex) * _SQRT_HALF,
    BellKind.PHI_MINUS: np.array([1, 0, 0, -1], dtype=complex) * _SQRT_HALF,
    BellKind.PSI_PLUS: np.array([0, 1, 1, 0], dtype=complex) * _SQRT_HALF,
    BellKind.PSI_MINUS: np.array([0, 1, -1, 0], dtype=complex) * _SQRT_HALF,
}


@dataclass(frozen=True)
class AxisAngle:
    """Rotation by ``theta`` radians about the unit vector ``k``."""

    k: tuple[float, float, float]
    theta: float

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.shape != (3,):
            raise ValueError("rotation axis must be a 3-vector")
        if abs(np.linalg.norm(k) - 1.0) > UNIT_TOL:
            raise ValueError(f"rotation axis must be a unit vector, got norm {np.linalg.norm(k):.3g}")
        object.__setattr__(self, "k", tuple(float(c) for c in k))
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class RotationVector:
    """Euler angle errors (theta_x, theta_y, theta_z) in radians."""

    theta_x: float = 0.0
    theta_y: float = 0.0
    theta_z: float = 0.0

    @classmethod
    def from_array(cls, values) -> "RotationVector":
        x, y, z = (float(v) for v in values)
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_x, self.theta_y, self.theta_z])

    def to_axis_angle(self) -> AxisAngle:
        """theta = |v|, k = v / |v|; a vanishing rotation maps to the identity about z."""
        v = self.as_array()
        theta = float(np.linalg.norm(v))
        if theta < ZERO_ANGLE:
            return AxisAngle((0.0, 0.0, 1.0), 0.0)
        return AxisAngle(tuple(v / theta), theta)


def pauli(axis: str) -> np.ndarray:
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None


def rotation_single(axis: str, theta: float) -> np.ndarray:
    """cos(theta/2) I - i sin(theta/2) sigma_axis."""
    if not np.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    return np.cos(theta / 2) * IDENTITY2 - 1j * np.sin(theta / 2) * pauli(axis)


def _k_dot_sigma(k) -> np.ndarray:
    return k[0] * _PAULI["x"] + k[1] * _PAULI["y"] + k[2] * _PAULI["z"]


def rotation_axis_angle(aa: AxisAngle) -> np.ndarray:
    """exp(-i theta (k.sigma) / 2) in closed form."""
    return np.cos(aa.theta / 2) * IDENTITY2 - 1j * np.sin(aa.theta / 2) * _k_dot_sigma(aa.k)


def rotation_from_vector(rot: RotationVector) -> np.ndarray:
    return rotation_axis_angle(rot.to_axis_angle())


def fold_rotation_vectors(thetas: np.ndarray) -> np.ndarray:
    """Map (n, 3) rotation vectors into the ball of radius pi.

    Shifting the angle by a multiple of 2 pi along the same axis only flips the
    sign of R, so R (x) R is unchanged. Vectors already inside the ball are
    returned as they are.
    """
    thetas = np.array(thetas, dtype=float, ndmin=2)
    angle = np.linalg.norm(thetas, axis=1)
    outside = angle > np.pi
    if np.any(outside):
        a = angle[outside]
        folded = np.mod(a + np.pi, 2 * np.pi) - np.pi
        thetas[outside] *= (folded / a)[:, None]
    return thetas


def rotations_from_vectors(thetas: np.ndarray) -> np.ndarray:
    """Batched single-qubit rotations for an (n, 3) array of rotation vectors.

    Same axis-angle reading as :meth:`RotationVector.to_axis_angle`, returned as
    an (n, 2, 2) array.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    angle = np.linalg.norm(thetas, axis=1)
    # k.sigma * sin(angle/2) with k = v/angle; the ratio is taken as 1/2 near zero.
    safe = np.where(angle < ZERO_ANGLE, 1.0, angle)
    scale = np.where(angle < ZERO_ANGLE, 0.0, np.sin(angle / 2) / safe)
    c = np.cos(angle / 2)
    vx, vy, vz = (thetas[:, i] * scale for i in range(3))
    out = np.empty((len(thetas), 2, 2), dtype=complex)
    out[:, 0, 0] = c - 1j * vz
    out[:, 0, 1] = -1j * vx - vy
    out[:, 1, 0] = -1j * vx + vy
    out[:, 1, 1] = c + 1j * vz
    return out


def expm_series(a: np.ndarray, terms: int = 30) -> np.ndarray:
    """Truncated power series for exp(a); an independent check on closed forms."""
    result = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ a / n
        result = result + term
    return result


def joint_rotation(aa: AxisAngle) -> np.ndarray:
    """R(theta) (x) R(theta): the same rotation applied to both qubits."""
    r = rotation_axis_angle(aa)
    return np.kron(r, r)


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=atol)


def is_hermitian(h: np.ndarray, atol: float = ATOL) -> bool:
    return np.allclose(h, h.conj().T, rtol=0, atol=atol)


def bell_state(kind: BellKind, frame: np.ndarray | None = None) -> np.ndarray:
    """(U (x) U)|kind>_z for a single-qubit basis change ``frame`` (default identity)."""
    psi = _BELL_Z[kind].copy()
    if frame is None:
        return psi
    frame = np.asarray(frame, dtype=complex)
    if frame.shape != (2, 2) or not is_unitary(frame, atol=UNIT_TOL):
        raise ValueError("measurement frame must be a 2x2 unitary")
    return np.kron(frame, frame) @ psi


def bell_matrix(kind: BellKind) -> np.ndarray:
    """Amplitudes of the z-basis Bell state arranged as a 2x2 array psi[a, b]."""
    return _BELL_Z[kind].reshape(2, 2)


def density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, atol: float = ATOL) -> None:
    """Raise ValueError unless ``rho`` is Hermitian, unit-trace and positive semidefinite."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4):
        raise ValueError(f"density matrix must be 2x2 or 4x4, got shape {rho.shape}")
    if not is_hermitian(rho, atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.12g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix has a negative eigenvalue")


def mix_with_identity(rho: np.ndarray, alpha: float) -> np.ndarray:
    """(1 - alpha) rho + alpha I/d, the maximally-mixed admixture."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"mixing fraction must lie in [0, 1], got {alpha}")
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return (1.0 - alpha) * rho + alpha * np.eye(d, dtype=complex) / d


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def partial_trace_b(rho: np.ndarray) -> np.ndarray:
    """Reduced state of qubit A from a two-qubit density matrix."""
    return np.einsum("ajbj->ab", np.asarray(rho).reshape(2, 2, 2, 2))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits; eigenvalues below 1e-14 contribute nothing."""
    evals = np.linalg.eigvalsh(rho)
    evals = evals[evals > 1e-14]
    return float(-np.sum(evals * np.log2(evals)))


def entanglement_entropy(psi: np.ndarray) -> float:
    """Entropy of the reduced state of qubit A for a pure two-qubit state."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (4,):
        raise ValueError("expected a two-qubit state vector")
    if abs(np.vdot(psi, psi).real - 1.0) > ATOL:
        raise ValueError("state vector is not normalised")
    return von_neumann_entropy(partial_trace_b(density(psi)))


def trace_probability(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Tr(rho_a rho_b) clamped to [0, 1]."""
    rho_a = np.asarray(rho_a)
    rho_b = np.asarray(rho_b)
    if rho_a.shape != rho_b.shape:
        raise ValueError(f"dimension mismatch: {rho_a.shape} vs {rho_b.shape}")
    value = float(np.real(np.trace(rho_a @ rho_b)))
    return min(max(value, 0.0), 1.0)
