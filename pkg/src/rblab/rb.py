"""Motion-reversal benchmarking: sequence sampling, survival, and decay fitting.

Sequences are sampled uniformly from the group, inverted through the ideal
composition (key lookup, then implemented with the noisy counterpart), and the
survival probability <effect | noisy circuit | state> is recorded exactly; the
only randomness is the sequence draw.  Each (depth, sequence) pair derives its
own generator from the base seed, so results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .channels import SuperOp, pauli_basis
from .cliffords import CliffordGroup


def default_state(dim: int) -> np.ndarray:
    """Pauli coefficients of |0...0><0...0|."""
    one = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    if dim == 2:
        return one
    if dim == 4:
        return np.kron(one, one)
    raise ValueError(f"unsupported dimension {dim}")


def default_effect(dim: int) -> np.ndarray:
    return default_state(dim)


def _operator_eigs(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Eigenvalues of the operator with the given normalized-Pauli coefficients."""
    op = np.tensordot(coeffs, pauli_basis(dim), axes=1) / np.sqrt(dim)
    return np.linalg.eigvalsh(op)


@dataclass(frozen=True)
class RBConfig:
    """Depth grid, sequences per depth, SPAM vectors, and optional SPAM noise."""

    depths: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64, 128)
    sequences: int = 200
    seed: int = 0
    state: np.ndarray | None = None
    effect: np.ndarray | None = None
    prep_noise: SuperOp | None = None
    meas_noise: SuperOp | None = None

    def resolve(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        rho = self.state if self.state is not None else default_state(dim)
        mu = self.effect if self.effect is not None else default_effect(dim)
        rho = np.asarray(rho, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if rho.shape != (dim ** 2,) or mu.shape != (dim ** 2,):
            raise ValueError(f"state/effect must be length-{dim ** 2} Pauli vectors")
        if abs(rho[0] * np.sqrt(dim) - 1.0) > 1e-10:
            raise ValueError("state is not normalized to unit trace")
        if _operator_eigs(rho, dim).min() < -1e-10:
            raise ValueError("state is not positive semidefinite")
        mu_eigs = _operator_eigs(mu, dim)
        if mu_eigs.min() < -1e-10 or mu_eigs.max() > 1.0 + 1e-10:
            raise ValueError("effect eigenvalues lie outside [0, 1]")
        if self.prep_noise is not None:
            rho = self.prep_noise.mat @ rho
        if self.meas_noise is not None:
            mu = self.meas_noise.mat.T @ mu
        return rho, mu


@dataclass(frozen=True)
class SurvivalTable:
    """Survival probabilities, one row per sequence, one column per depth."""

    depths: np.ndarray
    survivals: np.ndarray  # shape (sequences, len(depths))
    seed: int

    @property
    def means(self) -> np.ndarray:
        return self.survivals.mean(axis=0)


def run_rb(group: CliffordGroup, noisy_set: list[SuperOp], config: RBConfig) -> SurvivalTable:
    """Sample motion-reversal circuits and record exact survival probabilities."""
    if len(noisy_set) != len(group):
        raise ValueError("noisy set is not index-aligned with the group")
    dim = group.dim
    rho, mu = config.resolve(dim)
    depths = np.asarray(config.depths, dtype=int)
    if depths.size < 1 or depths.min() < 1:
        raise ValueError("depths must be positive")
    noisy_mats = [s.mat for s in noisy_set]
    n_elems = len(group)

    table = np.empty((config.sequences, depths.size))
    for di, m in enumerate(depths):
        for k in range(config.sequences):
            rng = np.random.default_rng([config.seed, int(m), k])
            idx = rng.integers(0, n_elems, size=int(m))
            vec = rho
            ideal = np.eye(dim ** 2)
            for j in idx:
                vec = noisy_mats[j] @ vec
                ideal = group.elements[j].op.mat @ ideal
            inv = group.find(ideal.T)
            if inv is None:
                raise RuntimeError("inversion lookup failed for a closed group")
            vec = noisy_mats[inv] @ vec
            table[k, di] = mu @ vec
    return SurvivalTable(depths=depths, survivals=table, seed=config.seed)


@dataclass(frozen=True)
class DecayFit:
    """Estimates for survival = A p^m + B with a bootstrap interval on p."""

    a: float
    b: float
    p: float
    p_interval: tuple[float, float]
    mean_survival: np.ndarray
    residuals: np.ndarray
    flagged: bool = False
    message: str = ""
    bootstrap_samples: int = 0
    bootstrap_p: np.ndarray = field(default=None, repr=False)


def _fit_single(depths: np.ndarray, means: np.ndarray, dim_guess: float) -> tuple[float, float, float]:
    b0 = 1.0 / dim_guess
    shifted = means - b0
    mask = shifted > 1e-12
    if mask.sum() >= 2:
        slope, intercept = np.polyfit(depths[mask], np.log(shifted[mask]), 1)
        p0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
        a0 = float(np.exp(intercept))
    else:
        p0, a0 = 0.9, 1.0 - b0
    popt, _ = curve_fit(
        lambda m, a, b, p: a * p ** m + b,
        depths.astype(float),
        means,
        p0=(a0, b0, p0),
        maxfev=10_000,
    )
    return float(popt[0]), float(popt[1]), float(popt[2])


def fit_decay(
    table: SurvivalTable,
    dim: int = 2,
    bootstrap: int = 200,
    seed: int | None = None,
) -> DecayFit:
    """Nonlinear least squares on per-depth means plus a percentile bootstrap.

    Resamples sequences within each depth.  A diverging fit or p outside
    [0, 1.02] flags the result instead of raising.
    """
    depths = table.depths
    if np.unique(depths).size < 3:
        raise ValueError("need at least 3 distinct depths to fit three parameters")
    means = table.means
    flagged = False
    message = ""
    try:
        a, b, p = _fit_single(depths, means, dim)
    except RuntimeError as exc:
        return DecayFit(
            a=np.nan, b=np.nan, p=np.nan, p_interval=(np.nan, np.nan),
            mean_survival=means, residuals=np.full(depths.size, np.nan),
            flagged=True, message=f"fit diverged: {exc}",
        )
    if not 0.0 <= p <= 1.02:
        flagged = True
        message = f"fitted p={p} outside [0, 1.02]"

    rng = np.random.default_rng(table.seed + 0x5EED if seed is None else seed)
    n_seq = table.survivals.shape[0]
    boot = []
    for _ in range(bootstrap):
        resampled = np.empty(depths.size)
        for di in range(depths.size):
            pick = rng.integers(0, n_seq, size=n_seq)
            resampled[di] = table.survivals[pick, di].mean()
        try:
            boot.append(_fit_single(depths, resampled, dim)[2])
        except RuntimeError:
            continue
    boot = np.asarray(boot)
    if boot.size >= max(10, bootstrap // 2):
        lo, hi = np.percentile(boot, [2.5, 97.5])
    else:
        lo = hi = np.nan
        flagged = True
        message = (message + "; " if message else "") + "bootstrap mostly diverged"
    return DecayFit(
        a=a,
        b=b,
        p=p,
        p_interval=(float(lo), float(hi)),
        mean_survival=means,
        residuals=means - (a * p ** depths.astype(float) + b),
        flagged=flagged,
        message=message,
        bootstrap_samples=int(boot.size),
        bootstrap_p=boot,
    )
