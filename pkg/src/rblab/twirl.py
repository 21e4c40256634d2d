"""Twirling superoperator, its dominant eigenpair, and exact fidelity curves.

The central object is T = mean over the gate-set of kron(G Pi_tr, G_noisy).
Its dominant eigenvalue is the RB decay parameter p; the left/right dominant
eigenvectors, reshaped to matrices, are the asymptotic right/left error
operators; and m-fold application of T to the vectorized traceless projector
yields the exact traceless-hyperplane fidelity of depth-m circuits.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channels import (
    SuperOp,
    hs_inner,
    traceless_projector,
    unitary_to_superop,
    unvec,
    vec,
)
from .cliffords import CliffordGroup


class DegenerateSpectrumError(RuntimeError):
    """The dominant eigenvalue is complex or not isolated.

    The spectral analysis assumes the noisy set is a perturbation of the ideal
    one, leaving a single real dominant eigenvalue; violations are reported
    instead of silently continued.
    """


@dataclass(frozen=True)
class TwirlSuperop:
    """Group-averaged kron(G Pi_tr, G_noisy), a (d^2)^2 x (d^2)^2 real matrix."""

    dim: int
    mat: np.ndarray


def build_twirl(group: CliffordGroup, noisy_set: list[SuperOp]) -> TwirlSuperop:
    """Arithmetic mean of kron(G Pi_tr, G_noisy) over the index-aligned sets."""
    if len(noisy_set) != len(group):
        raise ValueError(
            f"noisy set has {len(noisy_set)} elements, group has {len(group)}"
        )
    n = group.dim ** 2
    pi = traceless_projector(group.dim)
    ideal = np.stack([e.op.mat @ pi for e in group.elements]).reshape(len(group), n * n)
    noisy = np.stack([s.mat for s in noisy_set]).reshape(len(group), n * n)
    # mean of kron(A_k, B_k) assembled from the (jk),(lm) moment matrix
    moments = ideal.T @ noisy / len(group)
    t = moments.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
    return TwirlSuperop(group.dim, t)


def power_iteration(
    mat: np.ndarray,
    start: np.ndarray | None = None,
    tol: float = 1e-12,
    maxiter: int = 100_000,
) -> tuple[float, np.ndarray]:
    """Dominant eigenpair by power iteration with Rayleigh-quotient convergence."""
    mat = np.asarray(mat)
    if start is None:
        v = np.ones(mat.shape[0])
    else:
        v = np.asarray(start, dtype=float).copy()
    v /= np.linalg.norm(v)
    lam = np.inf
    for _ in range(maxiter):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateSpectrumError("power iteration collapsed to the null space")
        v_new = w / norm
        lam_new = float(v_new @ (mat @ v_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            resid = np.linalg.norm(mat @ v_new - lam_new * v_new)
            if resid <= 1e-11 * max(1.0, abs(lam_new)):
                return lam_new, v_new
        lam, v = lam_new, v_new
    raise DegenerateSpectrumError(
        f"power iteration did not converge in {maxiter} iterations; "
        "dominant eigenvalue may be complex or degenerate"
    )


def _strip_phase(v: np.ndarray) -> np.ndarray:
    """Real part of an eigenvector after removing its arbitrary complex phase."""
    pivot = v[int(np.argmax(np.abs(v)))]
    return np.real(v * np.conj(pivot) / abs(pivot))


def _dense_dominant(mat: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Dominant eigenvalue with right and left eigenvectors via a full eigensolve.

    Gate-independent noise makes the twirl exactly rank one, where the dense
    solver returns eigenvectors for the dominant value with poor residuals;
    a few power-iteration steps from the dense output restore full accuracy.
    """
    evals, evecs = np.linalg.eig(mat)
    order = np.argsort(-np.abs(evals))
    lam = evals[order[0]]
    scale = max(1.0, abs(lam))
    if abs(lam.imag) > 1e-8 * scale:
        raise DegenerateSpectrumError(f"dominant eigenvalue is complex: {lam}")
    if len(order) > 1 and abs(lam) - abs(evals[order[1]]) < 1e-6 * scale:
        raise DegenerateSpectrumError(
            f"dominant eigenvalue is degenerate: |{lam}| vs |{evals[order[1]]}|"
        )
    right = _strip_phase(evecs[:, order[0]])
    evals_l, evecs_l = np.linalg.eig(mat.T)
    idx = int(np.argmin(np.abs(evals_l - lam)))
    left = _strip_phase(evecs_l[:, idx])
    p_r, right = power_iteration(mat, start=right)
    p_l, left = power_iteration(mat.T, start=left)
    if abs(p_r - p_l) > 1e-10 * scale or abs(p_r - lam.real) > 1e-8 * scale:
        raise DegenerateSpectrumError(
            f"left/right dominant eigenvalues disagree: {p_r} vs {p_l}"
        )
    return p_r, right, left


def _fix_eigenop(v: np.ndarray, pi: np.ndarray, transpose: bool) -> np.ndarray:
    """Unvec, orient by positive overlap with Pi_tr, normalize to unit Frobenius."""
    op = unvec(v)
    if transpose:
        op = op.T
    if hs_inner(pi, op) < 0:
        op = -op
    return op / np.linalg.norm(op)


@dataclass(frozen=True)
class TwirlSpectrum:
    """Dominant eigenpair of a twirl and the operators derived from it.

    `right_error_op` / `left_error_op` are the unit-Frobenius asymptotic error
    operators (left / right dominant eigenvectors of the twirl reshaped to
    matrices, oriented so their overlap with Pi_tr is positive).
    """

    dim: int
    p: float
    right_error_op: np.ndarray
    left_error_op: np.ndarray
    twirl: TwirlSuperop

    @cached_property
    def deflated(self) -> np.ndarray:
        """The twirl with its dominant rank-1 part removed."""
        t = self.twirl.mat
        vr = vec(self.left_error_op)
        vl = vec(self.right_error_op.T)
        return t - self.p * np.outer(vr, vl) / float(vl @ vr)

    def validate(self, tol: float = 1e-10) -> None:
        t = self.twirl.mat
        vr = vec(self.left_error_op)
        vl = vec(self.right_error_op.T)
        scale = max(1.0, abs(self.p))
        if np.linalg.norm(t @ vr - self.p * vr) > tol * scale:
            raise DegenerateSpectrumError("right eigenvector residual exceeds tolerance")
        if np.linalg.norm(t.T @ vl - self.p * vl) > tol * scale:
            raise DegenerateSpectrumError("left eigenvector residual exceeds tolerance")
        d = self.deflated
        if (
            np.linalg.norm(d @ vr) > tol * scale
            or np.linalg.norm(d.T @ vl) > tol * scale
        ):
            raise DegenerateSpectrumError("deflated remainder does not annihilate the eigenpair")

    # -- finite-depth error operators ---------------------------------------

    def right_error_op_at(self, m: int) -> np.ndarray:
        """Depth-m right-error operator (converges to right_error_op as m grows)."""
        pi = traceless_projector(self.dim)
        v = vec(pi)
        for _ in range(m):
            v = self.twirl.mat.T @ v
        return unvec(v).T / self.p ** m

    def left_error_op_at(self, m: int) -> np.ndarray:
        pi = traceless_projector(self.dim)
        v = vec(pi)
        for _ in range(m):
            v = self.twirl.mat @ v
        return unvec(v) / self.p ** m

    # -- basis expansion -----------------------------------------------------

    def _basis_superop(self, basis_u: np.ndarray | SuperOp) -> SuperOp:
        if isinstance(basis_u, SuperOp):
            return basis_u
        return unitary_to_superop(np.asarray(basis_u, dtype=complex))

    def overlaps(self, basis_u: np.ndarray | SuperOp) -> tuple[float, float]:
        """Overlap scalars of the basis direction with the dominant eigenpair."""
        us = self._basis_superop(basis_u).mat
        norm_pi = np.sqrt(self.dim ** 2 - 1)
        a = hs_inner(self.right_error_op.T, us) / norm_pi
        b = hs_inner(us, self.left_error_op) / norm_pi
        return a, b

    def residual_vectors(
        self, basis_u: np.ndarray | SuperOp
    ) -> tuple[float, np.ndarray, float, np.ndarray]:
        """(a, w, b, v): overlaps and the unit vectors orthogonal to the eigenpair."""
        us = self._basis_superop(basis_u).mat
        pi = traceless_projector(self.dim)
        u_vec = vec(us @ pi) / np.sqrt(self.dim ** 2 - 1)
        a, b = self.overlaps(SuperOp(self.dim, us))
        a = min(1.0, max(-1.0, a))
        b = min(1.0, max(-1.0, b))
        w = u_vec - a * vec(self.right_error_op.T)
        v = u_vec - b * vec(self.left_error_op)
        if np.sqrt(1 - a ** 2) > 1e-12:
            w = w / np.sqrt(1 - a ** 2)
        if np.sqrt(1 - b ** 2) > 1e-12:
            v = v / np.sqrt(1 - b ** 2)
        return a, w, b, v

    def decay_amplitude(self, basis_u: np.ndarray | SuperOp) -> float:
        """Coefficient of p^m in the exact fidelity curve for this target basis."""
        us = self._basis_superop(basis_u).mat
        norm_pi_sq = self.dim ** 2 - 1
        num = hs_inner(self.right_error_op.T, us) * hs_inner(us, self.left_error_op)
        den = norm_pi_sq * hs_inner(self.right_error_op.T, self.left_error_op)
        return num / den


def dominant_spectrum(t: TwirlSuperop) -> TwirlSpectrum:
    """Extract p and the asymptotic error operators from a twirl.

    Uses a dense nonsymmetric eigensolve for single qubits and power iteration
    (on the twirl and its transpose) for two qubits, where only the dominant
    pair is needed.
    """
    pi = traceless_projector(t.dim)
    if t.dim == 2:
        p, right, left = _dense_dominant(t.mat)
    else:
        start = vec(pi)
        p, right = power_iteration(t.mat, start=start)
        p_left, left = power_iteration(t.mat.T, start=start)
        scale = max(1.0, abs(p))
        if abs(p - p_left) > 1e-10 * scale:
            raise DegenerateSpectrumError(
                f"left/right dominant eigenvalues disagree: {p} vs {p_left}"
            )
    if p > 1.0 + 1e-10:
        raise DegenerateSpectrumError(f"dominant eigenvalue {p} exceeds 1")
    spectrum = TwirlSpectrum(
        dim=t.dim,
        p=p,
        right_error_op=_fix_eigenop(left, pi, transpose=True),
        left_error_op=_fix_eigenop(right, pi, transpose=False),
        twirl=t,
    )
    spectrum.validate()
    return spectrum


def order_m_error_blocks(
    group: CliffordGroup,
    noisy_set: list[SuperOp],
    m: int,
    twirl: TwirlSuperop | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bloch blocks of the depth-m right and left error operators.

    The right block is the traceless block of the projected average of
    (ideal sequence inverse) o (noisy sequence) over all depth-m sequences,
    obtained here by m-fold application of the twirl rather than enumeration.
    """
    if m < 1:
        raise ValueError("order must be at least 1")
    if twirl is None:
        twirl = build_twirl(group, noisy_set)
    v = vec(traceless_projector(group.dim))
    vr = v.copy()
    vl = v.copy()
    for _ in range(m):
        vr = twirl.mat.T @ vr
        vl = twirl.mat @ vl
    right = unvec(vr).T
    left = unvec(vl)
    return right[1:, 1:], left[1:, 1:]


# ---------------------------------------------------------------------------
# Fidelity curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FidelityCurve:
    """Exact gate-set circuit fidelity over a depth grid for one target basis."""

    basis: np.ndarray  # the d x d unitary fixing the target gate-set's frame
    depths: np.ndarray
    fidelity: np.ndarray  # F at each depth
    traceless_fidelity: np.ndarray  # f_tr at each depth
    amplitude: float  # coefficient C of p^m
    residual: np.ndarray  # f_tr - C p^m at each depth
    ratio_deviation: np.ndarray  # f_tr(m+1)/f_tr(m) - p at each depth
    p: float


def fidelity_curve_exact(
    spectrum_or_twirl: TwirlSpectrum | TwirlSuperop,
    basis_u: np.ndarray,
    depths,
) -> FidelityCurve:
    """Exact fidelity curve via repeated twirl-vector products."""
    if isinstance(spectrum_or_twirl, TwirlSuperop):
        spectrum = dominant_spectrum(spectrum_or_twirl)
    else:
        spectrum = spectrum_or_twirl
    t = spectrum.twirl.mat
    dim = spectrum.dim
    depths = np.asarray(list(depths), dtype=int)
    if depths.size and depths.min() < 0:
        raise ValueError("depths must be nonnegative")
    basis_u = np.asarray(basis_u, dtype=complex)
    us = unitary_to_superop(basis_u)
    pi = traceless_projector(dim)
    u_vec = vec(us.mat @ pi) / np.sqrt(dim ** 2 - 1)

    max_m = int(depths.max()) if depths.size else 0
    ftr_all = np.empty(max_m + 2)
    v = u_vec.copy()
    ftr_all[0] = u_vec @ v
    for m in range(1, max_m + 2):
        v = t @ v
        ftr_all[m] = u_vec @ v

    ftr = ftr_all[depths]
    c = spectrum.decay_amplitude(us)
    p = spectrum.p
    # the ratio is meaningless once f_tr sits at the numerical-zero floor
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(np.abs(ftr) > 1e-13, ftr_all[depths + 1] / ftr - p, np.nan)
    return FidelityCurve(
        basis=basis_u,
        depths=depths,
        fidelity=1.0 / dim + (dim - 1.0) / dim * ftr,
        traceless_fidelity=ftr,
        amplitude=c,
        residual=ftr - c * p ** depths.astype(float),
        ratio_deviation=delta,
        p=p,
    )


@dataclass(frozen=True)
class MonteCarloCurve:
    """Sampled gate-set circuit fidelity with per-depth standard errors."""

    basis: np.ndarray
    depths: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int


def fidelity_curve_mc(
    group: CliffordGroup,
    noisy_set: list[SuperOp],
    basis_u: np.ndarray,
    depths,
    samples: int,
    seed: int,
) -> MonteCarloCurve:
    """Monte-Carlo estimate of the fidelity curve from random gate sequences."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    depths = np.asarray(list(depths), dtype=int)
    basis_u = np.asarray(basis_u, dtype=complex)
    us = unitary_to_superop(basis_u).mat
    ideal_mats = [e.op.mat for e in group.elements]
    noisy_mats = [s.mat for s in noisy_set]
    dim = group.dim
    n = dim ** 2 - 1

    means = np.empty(depths.size)
    errs = np.empty(depths.size)
    for i, m in enumerate(depths):
        rng = np.random.default_rng([seed, int(m)])
        vals = np.empty(samples)
        for k in range(samples):
            idx = rng.integers(0, len(group), size=m)
            ideal = np.eye(dim ** 2)
            noisy = np.eye(dim ** 2)
            for j in idx:
                ideal = ideal_mats[j] @ ideal
                noisy = noisy_mats[j] @ noisy
            target = us @ ideal @ us.T
            f_tr = np.sum(target[:, 1:] * noisy[:, 1:]) / n
            vals[k] = 1.0 / dim + (dim - 1.0) / dim * f_tr
        means[i] = vals.mean()
        errs[i] = vals.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0
    return MonteCarloCurve(
        basis=basis_u, depths=depths, fidelity=means, stderr=errs,
        samples=samples, seed=seed,
    )


def nondominant_radius(t: TwirlSuperop) -> float:
    """Largest modulus among the non-dominant eigenvalues (diagnostic)."""
    evals = np.linalg.eigvals(t.mat)
    order = np.argsort(-np.abs(evals))
    return float(np.abs(evals[order[1]])) if evals.size > 1 else 0.0
