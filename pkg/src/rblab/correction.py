"""Finding the unitary that reconciles a noisy gate-set's frame with its targets.

The coherent part of the order-4 right error is what separates the decay
parameter from the gate-set circuit fidelity at a fixed target frame.  For a
single qubit the polar decomposition of the 3x3 Bloch block isolates that
rotation analytically; in general it is recovered by gradient ascent over the
special unitary group.  Composing the targets with the recovered unitary
restores the plain p^m decay law up to second order in the infidelity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import polar as _polar
from scipy.spatial.transform import Rotation

from .channels import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SuperOp,
    avg_gate_fidelity,
    identity_superop,
    pauli_basis,
    unitary_to_superop,
)
from .cliffords import CliffordGroup
from .noise import pulse
from .twirl import (
    TwirlSpectrum,
    build_twirl,
    dominant_spectrum,
    fidelity_curve_exact,
    order_m_error_blocks,
)


class ImproperRotationError(RuntimeError):
    """The orthogonal polar factor has determinant -1.

    An improper factor cannot come from a high-fidelity channel; it signals
    input far outside the regime where the correction is meaningful.
    """


def lift_rotation(r3: np.ndarray) -> np.ndarray:
    """SU(2) element whose Bloch action is the given 3x3 rotation matrix.

    The two lifts differ by a global sign, which the channel picture ignores.
    """
    r3 = np.asarray(r3, dtype=float)
    rotvec = Rotation.from_matrix(r3).as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    if angle == 0.0:
        return np.eye(2, dtype=complex)
    n = rotvec / angle
    h = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    u = pulse(h, -angle)
    if np.max(np.abs(unitary_to_superop(u).mat[1:, 1:] - r3)) > 1e-8:
        raise RuntimeError("lifted unitary does not reproduce the rotation block")
    return u


@dataclass(frozen=True)
class PolarFactors:
    """Left polar split of a Bloch block plus the lifted correction unitary.

    `incoherent_block @ rotation_block` reproduces the input; `correction` is
    the 2x2 unitary whose channel cancels the rotation factor, so composing the
    input block with the correction's Bloch action leaves the positive factor.
    """

    incoherent_block: np.ndarray
    rotation_block: np.ndarray
    correction: np.ndarray

    @property
    def rotation_angle(self) -> float:
        return float(np.linalg.norm(Rotation.from_matrix(self.rotation_block).as_rotvec()))

    @property
    def rotation_axis(self) -> np.ndarray:
        rotvec = Rotation.from_matrix(self.rotation_block).as_rotvec()
        norm = np.linalg.norm(rotvec)
        return rotvec / norm if norm > 0 else np.array([0.0, 0.0, 1.0])


def polar_correct(right_error_block: np.ndarray) -> PolarFactors:
    """Split a single-qubit Bloch block into incoherent and rotation factors.

    The returned correction unitary undoes the rotation factor, which is the
    fidelity-maximizing choice among all unitaries composed on the right.
    """
    block = np.asarray(right_error_block, dtype=float)
    if block.shape != (3, 3):
        raise ValueError(f"expected a 3x3 Bloch block, got shape {block.shape}")
    smin = np.linalg.svd(block, compute_uv=False).min()
    if smin <= 1e-6:
        raise ValueError(f"block is near-singular (smallest singular value {smin:.3e})")
    v_tr, d_tr = _polar(block, side="left")  # block = d_tr @ v_tr
    det = np.linalg.det(v_tr)
    if det < 1.0 - 1e-8:
        raise ImproperRotationError(f"rotation factor has determinant {det}")
    if np.linalg.eigvalsh(d_tr).min() < -1e-10:
        raise RuntimeError("positive polar factor has a negative eigenvalue")
    if np.max(np.abs(d_tr @ v_tr - block)) > 1e-10 * max(1.0, np.max(np.abs(block))):
        raise RuntimeError("polar factors do not reproduce the input block")
    correction = lift_rotation(v_tr.T)
    return PolarFactors(incoherent_block=d_tr, rotation_block=v_tr, correction=correction)


def su_generators(dim: int) -> np.ndarray:
    """Traceless Hermitian generators of SU(dim): the non-identity Paulis."""
    return pauli_basis(dim)[1:]


def _exp_i(generators: np.ndarray, theta: np.ndarray) -> np.ndarray:
    h = np.tensordot(theta, generators, axes=1)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


@dataclass(frozen=True)
class CorrectionResult:
    """Outcome of the fidelity maximization over unitary corrections."""

    unitary: np.ndarray
    fidelity: float
    converged: bool
    iterations: int
    start_index: int


def optimize_correct(
    right_error_block: np.ndarray,
    dim: int,
    seed: int = 0,
    random_starts: int = 8,
    step: float = 1e-5,
    learning_rate: float = 0.5,
    grad_tol: float = 1e-9,
    max_iterations: int = 500,
) -> CorrectionResult:
    """Unitary maximizing the average fidelity of (right error) o (correction).

    Ascends by central-difference gradients with backtracking line search over
    the d^2 - 1 rotation parameters, from the identity and `random_starts`
    seeded random starting points; the best value wins, ties broken by the
    earliest start.  Non-convergence is reported through the flag, not raised.
    """
    block = np.asarray(right_error_block, dtype=float)
    n = dim ** 2 - 1
    if block.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} Bloch block, got shape {block.shape}")
    gens = su_generators(dim)

    def fidelity(theta: np.ndarray) -> float:
        u_block = unitary_to_superop(_exp_i(gens, theta)).mat[1:, 1:]
        return 1.0 / dim + (dim - 1.0) / dim * float(np.sum(block * u_block.T)) / n

    def gradient(theta: np.ndarray) -> np.ndarray:
        grad = np.empty(n)
        for k in range(n):
            bump = np.zeros(n)
            bump[k] = step
            grad[k] = (fidelity(theta + bump) - fidelity(theta - bump)) / (2 * step)
        return grad

    starts = [np.zeros(n)]
    for k in range(random_starts):
        rng = np.random.default_rng([seed, k])
        starts.append(rng.normal(scale=0.5, size=n))

    best: CorrectionResult | None = None
    for start_index, theta in enumerate(starts):
        theta = theta.copy()
        value = fidelity(theta)
        converged = False
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            grad = gradient(theta)
            gnorm = np.linalg.norm(grad)
            if gnorm < grad_tol:
                converged = True
                break
            lr = learning_rate
            while lr > 1e-12:
                candidate = theta + lr * grad
                candidate_value = fidelity(candidate)
                if candidate_value > value:
                    theta, value = candidate, candidate_value
                    break
                lr *= 0.5
            else:
                converged = True  # no ascent direction left at float resolution
                break
        result = CorrectionResult(
            unitary=_exp_i(gens, theta),
            fidelity=value,
            converged=converged,
            iterations=iterations,
            start_index=start_index,
        )
        if best is None or result.fidelity > best.fidelity + 1e-14:
            best = result
    return best


def incoherence_defect(block: np.ndarray) -> float:
    """How far a Bloch block is from having no coherent (rotation) component.

    Zero for pure contractions; grows with any unitary factor.  Compares the
    normalized projector overlap against the normalized Frobenius norm.
    """
    block = np.asarray(block, dtype=float)
    n = block.shape[0]
    return abs(float(np.trace(block)) / n - float(np.linalg.norm(block)) / np.sqrt(n))


@dataclass(frozen=True)
class PerturbationReport:
    """Per-gate deviations from conjugated targets and their mean infidelity."""

    deltas: list[np.ndarray]
    mean_infidelity: float


def perturbation_report(
    group: CliffordGroup, noisy_set: list[SuperOp], basis_u: np.ndarray
) -> PerturbationReport:
    """Deviations noisy_gate o (U target U')^{-1} - identity for each gate."""
    us = unitary_to_superop(np.asarray(basis_u, dtype=complex))
    eye = np.eye(group.dim ** 2)
    deltas = []
    for e, noisy in zip(group.elements, noisy_set):
        target = us.mat @ e.op.mat @ us.mat.T
        deltas.append(noisy.mat @ target.T - eye)
    mean_delta = np.mean(deltas, axis=0)
    mean_infidelity = 1.0 - avg_gate_fidelity(
        SuperOp(group.dim, eye + mean_delta), identity_superop(group.dim)
    )
    return PerturbationReport(deltas=deltas, mean_infidelity=mean_infidelity)


@dataclass(frozen=True)
class DecayLawReport:
    """How well f_tr at a corrected basis follows the plain p^m decay."""

    p: float
    depths: np.ndarray
    max_residual: float  # max |f_tr(m) - p^m|
    envelope: float  # envelope_const * (1 - p)^2
    passed: bool
    match_residual: float | None  # fixed-error fidelity match, when channels given
    multiplicativity_residual: float


def verify_decay_law(
    group: CliffordGroup,
    noisy_set: list[SuperOp],
    basis_u: np.ndarray,
    depths,
    envelope_const: float = 10.0,
    floor: float = 1e-12,
    spectrum: TwirlSpectrum | None = None,
    left_error: SuperOp | None = None,
    right_error: SuperOp | None = None,
) -> DecayLawReport:
    """Check the corrected-basis decay law against its second-order envelope.

    The floor keeps the check meaningful for exactly solvable models where
    1 - p vanishes and the envelope falls below float resolution.  When the
    model is a fixed left/right sandwich and those channels are supplied, also
    compares the fidelity of their product to the depth-1 gate-set circuit
    fidelity at the corrected basis.
    """
    if spectrum is None:
        spectrum = dominant_spectrum(build_twirl(group, noisy_set))
    basis_u = np.asarray(basis_u, dtype=complex)
    curve = fidelity_curve_exact(spectrum, basis_u, depths)
    p = spectrum.p
    residual = np.max(
        np.abs(curve.traceless_fidelity - p ** curve.depths.astype(float))
    )
    envelope = max(envelope_const * (1.0 - p) ** 2, floor)

    match_residual = None
    if left_error is not None and right_error is not None:
        lhs = avg_gate_fidelity(right_error @ left_error, identity_superop(group.dim))
        rhs = fidelity_curve_exact(spectrum, basis_u, [1]).fidelity[0]
        match_residual = abs(lhs - rhs)

    # multiplicativity of projector overlaps once the right error is decohered
    right_blk, left_blk = order_m_error_blocks(group, noisy_set, 4)
    us = unitary_to_superop(basis_u)
    u_blk = us.mat[1:, 1:]
    n = group.dim ** 2 - 1
    d_blk = right_blk @ u_blk
    l_blk = u_blk.T @ left_blk
    mult_residual = abs(
        np.trace(d_blk @ l_blk) / n - (np.trace(d_blk) / n) * (np.trace(l_blk) / n)
    )

    return DecayLawReport(
        p=p,
        depths=curve.depths,
        max_residual=float(residual),
        envelope=float(envelope),
        passed=bool(residual <= envelope),
        match_residual=match_residual,
        multiplicativity_residual=float(mult_residual),
    )


def correct_from_noisy_set(
    group: CliffordGroup,
    noisy_set: list[SuperOp],
    spectrum: TwirlSpectrum | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Correction unitary from the order-4 right error of a noisy gate-set.

    Single qubits use the analytic polar route; two qubits use gradient ascent.
    """
    twirl = spectrum.twirl if spectrum is not None else None
    right_blk, _ = order_m_error_blocks(group, noisy_set, 4, twirl=twirl)
    if group.dim == 2:
        return polar_correct(right_blk).correction
    return optimize_correct(right_blk, group.dim, seed=seed).unitary
