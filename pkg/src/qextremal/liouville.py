"""Real-vector representation of quantum states, observables and generators.

Hermitian N x N operators are expanded over an orthonormal Hermitian basis
(identity/sqrt(N) followed by generalized Gell-Mann matrices), turning density
matrices into real N^2-vectors and Liouville superoperators into real
N^2 x N^2 matrices.  In this representation the trace functional is the single
row vector <1| = (sqrt(N), 0, ..., 0), and every trace-preserving generator
annihilates it from the left.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundsError,
    HermiticityError,
    InvalidDimensionError,
    NegativeRateError,
    ShapeError,
    StateValidityError,
)

__all__ = [
    "HermitianBasis",
    "LiouvilleVector",
    "Superoperator",
    "ControlChannel",
    "QuantumModel",
    "build_hermitian_basis",
    "vectorize",
    "devectorize",
    "superop_from_action",
    "hamiltonian_superop",
    "lindblad_superop",
    "collision_superop",
    "coherent_channel",
    "lindblad_channel",
    "collision_channel",
]

_HERM_ATOL = 1e-10


def _check_hermitian(op: np.ndarray, atol: float = _HERM_ATOL) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ShapeError(f"operator must be square, got shape {op.shape}")
    dev = np.linalg.norm(op - op.conj().T)
    if dev > atol:
        raise HermiticityError(f"anti-Hermitian part norm {dev:.3g} exceeds {atol:.1g}")
    return op


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal Hermitian operator basis; element 0 is identity/sqrt(N)."""

    dimension: int
    elements: np.ndarray  # (N^2, N, N) complex

    def __post_init__(self):
        self.elements.setflags(write=False)

    @property
    def size(self) -> int:
        return self.dimension ** 2

    @property
    def trace_vector(self) -> np.ndarray:
        """Coefficients of <1|, i.e. vec(identity): (sqrt(N), 0, ..., 0)."""
        v = np.zeros(self.size)
        v[0] = np.sqrt(self.dimension)
        return v

    def gram_matrix(self) -> np.ndarray:
        return np.einsum("aij,bji->ab", self.elements, self.elements).real


def build_hermitian_basis(dimension: int) -> HermitianBasis:
    """Identity/sqrt(N) plus the N^2 - 1 unit-norm generalized Gell-Mann matrices.

    Ordering: identity, then for each pair j < k (lexicographic) the symmetric
    and antisymmetric off-diagonal elements, then the diagonal elements.  For
    N = 2 this is exactly {I, sx, sy, sz}/sqrt(2).
    """
    if int(dimension) != dimension or dimension < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {dimension}")
    n = int(dimension)
    mats = [np.eye(n, dtype=complex) / np.sqrt(n)]
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            mats.append(sym)
            asym = np.zeros((n, n), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            mats.append(asym)
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag.astype(complex)) / np.sqrt(l * (l + 1)))
    return HermitianBasis(dimension=n, elements=np.array(mats))


@dataclass(frozen=True)
class LiouvilleVector:
    """Real coefficient vector of a Hermitian operator in a HermitianBasis."""

    coeffs: np.ndarray  # (N^2,) float
    basis: HermitianBasis

    def __post_init__(self):
        if self.coeffs.shape != (self.basis.size,):
            raise ShapeError(
                f"coefficient vector has shape {self.coeffs.shape}, "
                f"expected ({self.basis.size},)"
            )
        self.coeffs.setflags(write=False)

    def to_matrix(self) -> np.ndarray:
        return np.tensordot(self.coeffs, self.basis.elements, axes=1)

    def trace(self) -> float:
        """<1|x>, the trace of the represented operator."""
        return float(self.basis.trace_vector @ self.coeffs)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.to_matrix())[0])


def vectorize(operator: np.ndarray, basis: HermitianBasis,
              atol: float = _HERM_ATOL) -> LiouvilleVector:
    """Expand a Hermitian operator: coefficients O_i = Tr[sigma_i O]."""
    op = _check_hermitian(operator, atol)
    if op.shape[0] != basis.dimension:
        raise ShapeError(
            f"operator dimension {op.shape[0]} does not match basis dimension "
            f"{basis.dimension}"
        )
    coeffs = np.einsum("aij,ji->a", basis.elements, op)
    return LiouvilleVector(coeffs=coeffs.real.copy(), basis=basis)


def devectorize(vec: LiouvilleVector) -> np.ndarray:
    """Inverse of vectorize: O = sum_i O_i sigma_i."""
    return vec.to_matrix()


@dataclass(frozen=True)
class Superoperator:
    """Real matrix representation of a Liouville superoperator."""

    matrix: np.ndarray  # (N^2, N^2) float
    basis: HermitianBasis

    def __post_init__(self):
        sz = self.basis.size
        if self.matrix.shape != (sz, sz):
            raise ShapeError(
                f"superoperator matrix has shape {self.matrix.shape}, "
                f"expected ({sz}, {sz})"
            )
        self.matrix.setflags(write=False)

    def apply(self, vec: LiouvilleVector) -> LiouvilleVector:
        return LiouvilleVector(coeffs=self.matrix @ vec.coeffs, basis=self.basis)

    def trace_row_norm(self) -> float:
        """Norm of <1| L; vanishes for trace-preserving generators."""
        return float(np.linalg.norm(self.basis.trace_vector @ self.matrix))

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.basis is not self.basis:
            raise ShapeError("superoperators combine only within a shared basis")
        return Superoperator(matrix=self.matrix + other.matrix, basis=self.basis)


def superop_from_action(action, basis: HermitianBasis,
                        imag_atol: float = 1e-11) -> Superoperator:
    """Project a matrix-level map onto the basis: L_ij = Tr[sigma_i L(sigma_j)].

    The action must preserve Hermiticity, otherwise the projected matrix picks
    up an imaginary part and this raises.
    """
    images = np.array([action(sig) for sig in basis.elements])
    mat = np.einsum("aij,bji->ab", basis.elements, images)
    if np.abs(mat.imag).max() > imag_atol:
        raise HermiticityError(
            "superoperator action does not preserve Hermiticity "
            f"(imaginary part {np.abs(mat.imag).max():.3g})"
        )
    return Superoperator(matrix=np.ascontiguousarray(mat.real), basis=basis)


def hamiltonian_superop(hamiltonian: np.ndarray, basis: HermitianBasis) -> Superoperator:
    """Generator of rho -> -i[H, rho]; real antisymmetric in this basis."""
    ham = _check_hermitian(hamiltonian)
    if ham.shape[0] != basis.dimension:
        raise ShapeError("Hamiltonian dimension does not match basis")
    return superop_from_action(lambda x: -1j * (ham @ x - x @ ham), basis)


def lindblad_superop(jump: np.ndarray, rate: float, basis: HermitianBasis) -> Superoperator:
    """Dissipator gamma (L rho Ld - {Ld L, rho}/2) for a single jump operator."""
    if rate < 0:
        raise NegativeRateError(f"rate must be >= 0, got {rate}")
    jump = np.asarray(jump, dtype=complex)
    if jump.shape != (basis.dimension, basis.dimension):
        raise ShapeError("jump operator dimension does not match basis")
    ld = jump.conj().T
    ldl = ld @ jump

    def action(x):
        return rate * (jump @ x @ ld - 0.5 * (ldl @ x + x @ ldl))

    return superop_from_action(action, basis)


def check_density_matrix(rho: np.ndarray, basis: HermitianBasis,
                         eig_atol: float = 1e-10) -> LiouvilleVector:
    """Validate trace one and positive semidefiniteness, then vectorize."""
    vec = vectorize(rho, basis)
    tr = vec.trace()
    if abs(tr - 1.0) > 1e-9:
        raise StateValidityError(f"trace is {tr}, expected 1")
    mineig = vec.min_eigenvalue()
    if mineig < -eig_atol:
        raise StateValidityError(f"minimum eigenvalue {mineig:.3g} below -{eig_atol:.1g}")
    return vec


def collision_superop(target: np.ndarray, basis: HermitianBasis) -> Superoperator:
    """Collision channel rho -> -rho + rho_k, stored as -I + |rho_k><1|.

    The rank-one term makes the affine map linear on the whole space while
    agreeing with the physical action on every trace-one vector.
    """
    tvec = check_density_matrix(target, basis)
    mat = -np.eye(basis.size) + np.outer(tvec.coeffs, basis.trace_vector)
    return Superoperator(matrix=mat, basis=basis)


@dataclass(frozen=True)
class ControlChannel:
    """One control: its generator, admissible range, and physical kind."""

    superop: Superoperator
    lower: float
    upper: float
    label: str = ""
    kind: str = "hamiltonian"  # "hamiltonian" | "lindblad" | "collision" | "custom"
    target: LiouvilleVector | None = None  # collision equilibrium state

    def __post_init__(self):
        if not (self.lower <= self.upper):
            raise BoundsError(
                f"channel '{self.label}': lower bound {self.lower} exceeds "
                f"upper bound {self.upper}"
            )

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.lower) and np.isfinite(self.upper)


def coherent_channel(operator: np.ndarray, basis: HermitianBasis,
                     lower: float, upper: float, label: str = "",
                     scale: float = 1.0) -> ControlChannel:
    """Hamiltonian control channel u * scale * (-i)[op, rho]."""
    sup = hamiltonian_superop(operator, basis)
    if scale != 1.0:
        sup = Superoperator(matrix=scale * sup.matrix, basis=basis)
    return ControlChannel(superop=sup, lower=lower, upper=upper,
                          label=label, kind="hamiltonian")


def lindblad_channel(jump: np.ndarray, basis: HermitianBasis,
                     lower: float, upper: float, label: str = "") -> ControlChannel:
    """Dissipative channel with tunable rate u (unit base rate)."""
    sup = lindblad_superop(jump, 1.0, basis)
    return ControlChannel(superop=sup, lower=lower, upper=upper,
                          label=label, kind="lindblad")


def collision_channel(target: np.ndarray, basis: HermitianBasis,
                      lower: float, upper: float, label: str = "") -> ControlChannel:
    """Collision channel with tunable rate u toward the given equilibrium."""
    sup = collision_superop(target, basis)
    tvec = vectorize(target, basis)
    return ControlChannel(superop=sup, lower=lower, upper=upper,
                          label=label, kind="collision", target=tvec)


@dataclass(frozen=True)
class QuantumModel:
    """Drift generator, control channels with bounds, and the objective."""

    basis: HermitianBasis
    drift: Superoperator
    controls: tuple[ControlChannel, ...]
    observable: LiouvilleVector

    def __post_init__(self):
        for ch in self.controls:
            if ch.superop.basis is not self.basis:
                raise ShapeError("all channels must share the model basis")
        if self.drift.basis is not self.basis:
            raise ShapeError("drift must share the model basis")

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def dim(self) -> int:
        return self.basis.size

    def control_matrices(self) -> np.ndarray:
        return np.array([ch.superop.matrix for ch in self.controls])

    def bounds_array(self) -> np.ndarray:
        return np.array([[ch.lower, ch.upper] for ch in self.controls])

    def generator(self, u) -> np.ndarray:
        """Drift plus sum_k u_k L_k as a plain matrix."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_controls,):
            raise ShapeError(f"expected {self.n_controls} control values, got {u.shape}")
        mat = self.drift.matrix.copy()
        for val, ch in zip(u, self.controls):
            mat += val * ch.superop.matrix
        return mat

    def is_closed(self, atol: float = 1e-10) -> bool:
        """True when drift and all channels generate orthogonal (unitary) flow."""
        mats = [self.drift.matrix] + [ch.superop.matrix for ch in self.controls]
        return all(np.abs(m + m.T).max() < atol for m in mats)

    def drift_scale(self) -> float:
        return float(np.linalg.norm(self.drift.matrix, 2))
