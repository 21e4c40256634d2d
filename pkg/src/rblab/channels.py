"""Pauli transfer matrices and the inner-product / fidelity algebra built on them.

A channel is stored as its real d**2 x d**2 transfer matrix in the normalized
Pauli basis {I/sqrt(d), P_1/sqrt(d), ...}, with tensor products in lexicographic
order for two qubits.  In this basis trace preservation pins the first row to
(1, 0, ..., 0), unitary channels are orthogonal on the traceless block, and the
projector onto traceless operators is the diagonal matrix diag(0, 1, ..., 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Structural invariants (trace rows, unitarity) are held to STRUCT_TOL;
# quantities derived through floating-point chains are held to DERIVED_TOL.
STRUCT_TOL = 1e-12
DERIVED_TOL = 1e-10

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_PAULIS_1Q = (SIGMA_I, SIGMA_X, SIGMA_Y, SIGMA_Z)


@lru_cache(maxsize=None)
def _pauli_stack(dim: int) -> np.ndarray:
    """Unnormalized Pauli basis as a (dim**2, dim, dim) stack."""
    if dim == 2:
        stack = np.stack(_PAULIS_1Q)
    elif dim == 4:
        stack = np.stack([np.kron(a, b) for a in _PAULIS_1Q for b in _PAULIS_1Q])
    else:
        raise ValueError(f"unsupported dimension {dim}; expected 2 or 4")
    stack.setflags(write=False)
    return stack


def pauli_basis(dim: int) -> np.ndarray:
    """Unnormalized Pauli operators for dimension 2 or 4, identity first."""
    return _pauli_stack(dim)


def check_unitary(u: np.ndarray, tol: float = 1e-8) -> None:
    """Raise ValueError when u'u deviates from the identity by more than tol."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    defect = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if defect > tol:
        raise ValueError(f"matrix is not unitary: orthogonality defect {defect:.3e}")


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


@dataclass(frozen=True)
class SuperOp:
    """Trace-preserving channel in the normalized Pauli basis.

    The matrix is real with first row (1, 0, ..., 0); composition is plain
    matrix multiplication with the rightmost factor applied first.
    """

    dim: int
    mat: np.ndarray

    def __post_init__(self):
        mat = self.mat
        n = self.dim ** 2
        if np.iscomplexobj(mat):
            raise ValueError("transfer matrix entries must be real")
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {mat.shape}")
        row = np.zeros(n)
        row[0] = 1.0
        if np.max(np.abs(mat[0] - row)) > STRUCT_TOL:
            raise ValueError("first row deviates from trace preservation")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in composition")
        return SuperOp(self.dim, self.mat @ other.mat)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Act on a Pauli-coefficient vector."""
        return self.mat @ coeffs


def identity_superop(dim: int) -> SuperOp:
    return SuperOp(dim, np.eye(dim ** 2))


def unitary_to_superop(u: np.ndarray, tol: float = 1e-8) -> SuperOp:
    """Transfer matrix of conjugation by u, entries tr(P_j u P_k u')/d."""
    u = np.asarray(u, dtype=complex)
    check_unitary(u, tol)
    dim = u.shape[0]
    paulis = _pauli_stack(dim)
    conj = u @ paulis @ u.conj().T
    mat = np.einsum("jab,kba->jk", paulis, conj) / dim
    if np.max(np.abs(mat.imag)) > DERIVED_TOL:
        raise ValueError("transfer matrix has a non-negligible imaginary part")
    mat = mat.real.copy()
    # conjugation is trace preserving and unital: pin the exact rows/columns
    mat[0, :] = 0.0
    mat[:, 0] = 0.0
    mat[0, 0] = 1.0
    return SuperOp(dim, mat)


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization, so vec(A B C) = kron(C^T, A) vec(B)."""
    m = np.asarray(m)
    return m.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product tr(a' b) for real blocks."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def fro_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(np.asarray(a), 2))


@lru_cache(maxsize=None)
def traceless_projector(dim: int) -> np.ndarray:
    """Projector onto the traceless hyperplane: diag(0, 1, ..., 1)."""
    pi = np.eye(dim ** 2)
    pi[0, 0] = 0.0
    pi.setflags(write=False)
    return pi


def traceless_block(mat: np.ndarray) -> np.ndarray:
    """The (d**2 - 1) x (d**2 - 1) submatrix acting on Bloch components."""
    return np.asarray(mat)[1:, 1:]


def block_fidelity(block: np.ndarray) -> float:
    """Traceless-hyperplane fidelity of a channel given its Bloch block."""
    block = np.asarray(block)
    n = block.shape[0]
    return float(np.trace(block)) / n


def traceless_fidelity(e: SuperOp, g: SuperOp) -> float:
    """Fidelity of e to g restricted to the traceless hyperplane."""
    if e.dim != g.dim:
        raise ValueError("dimension mismatch")
    n = e.dim ** 2 - 1
    return float(np.sum(g.mat[:, 1:] * e.mat[:, 1:])) / n


def avg_gate_fidelity(e: SuperOp, g: SuperOp) -> float:
    """Average fidelity of channel e to target g, in [0, 1]."""
    d = e.dim
    return 1.0 / d + (d - 1.0) / d * traceless_fidelity(e, g)


def infidelity(e: SuperOp, g: SuperOp | None = None) -> float:
    """1 - average fidelity; target defaults to the identity channel."""
    if g is None:
        g = identity_superop(e.dim)
    return 1.0 - avg_gate_fidelity(e, g)
