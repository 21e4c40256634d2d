"""Pulse-level gate construction, elementary error channels, and noise models.

A noise model maps every element of an ideal Clifford gate-set to a noisy
transfer matrix, index-aligned with the group.  Generator-replacement kinds
(over-rotation, z-tilt) rebuild each element from noisy pulses via its stored
generator word; the remaining kinds compose fixed error channels around the
ideal element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .channels import (
    SIGMA_I,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SuperOp,
    identity_superop,
    pauli_basis,
    unitary_to_superop,
)

if TYPE_CHECKING:
    from .cliffords import CliffordGroup


class ConfigError(ValueError):
    """A noise-model or run configuration violates the documented schema."""


def pulse(h: np.ndarray, theta: float) -> np.ndarray:
    """Unitary exp(i theta H / 2) for Hermitian H, via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ValueError("pulse Hamiltonian must be Hermitian")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(0.5j * theta * w)) @ v.conj().T


@dataclass(frozen=True)
class PulseSpec:
    """A gate given as a Hamiltonian and a rotation angle in radians."""

    hamiltonian: np.ndarray
    angle: float

    def unitary(self, offset: float = 0.0) -> np.ndarray:
        return pulse(self.hamiltonian, self.angle + offset)


CZ_HAMILTONIAN = (
    np.kron(SIGMA_Z, SIGMA_Z) - np.kron(SIGMA_Z, SIGMA_I) - np.kron(SIGMA_I, SIGMA_Z)
)

# sigma_z acting on the qubit driven by each single-qubit generator label
_TILT_HAMILTONIANS = {
    2: {"x": SIGMA_Z, "y": SIGMA_Z},
    4: {
        "x1": np.kron(SIGMA_Z, SIGMA_I),
        "y1": np.kron(SIGMA_Z, SIGMA_I),
        "x2": np.kron(SIGMA_I, SIGMA_Z),
        "y2": np.kron(SIGMA_I, SIGMA_Z),
    },
}

# ---------------------------------------------------------------------------
# Elementary channel factories
# ---------------------------------------------------------------------------


def depolarizing(q: float, dim: int = 2) -> SuperOp:
    """Uniform Bloch contraction by q: rho -> q rho + (1 - q) I tr(rho)/d."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarizing parameter {q} outside [0, 1]")
    mat = np.eye(dim ** 2) * q
    mat[0, 0] = 1.0
    op = SuperOp(dim, mat)
    assert_completely_positive(op)
    return op


def dephasing(q: float, axis: str = "z") -> SuperOp:
    """Single-qubit phase damping that keeps the given axis and shrinks the rest."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"dephasing parameter {q} outside [0, 1]")
    axes = {"x": 1, "y": 2, "z": 3}
    if axis not in axes:
        raise ValueError(f"unknown dephasing axis {axis!r}")
    diag = np.array([1.0, q, q, q])
    diag[axes[axis]] = 1.0
    op = SuperOp(2, np.diag(diag))
    assert_completely_positive(op)
    return op


def amplitude_damping(gamma: float) -> SuperOp:
    """Single-qubit energy relaxation toward |0><0| with rate gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping parameter {gamma} outside [0, 1]")
    s = np.sqrt(1.0 - gamma)
    mat = np.diag([1.0, s, s, 1.0 - gamma])
    mat[3, 0] = gamma
    op = SuperOp(2, mat)
    assert_completely_positive(op)
    return op


def rotation(axis, angle: float, dim: int = 2) -> SuperOp:
    """Unitary Bloch rotation by `angle` about `axis` (right-hand rule)."""
    n = _axis_vector(axis)
    if dim != 2:
        raise ValueError("rotation channels are single-qubit; combine with kron")
    h = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return unitary_to_superop(pulse(h, -angle))


def _axis_vector(axis) -> np.ndarray:
    named = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}
    if isinstance(axis, str):
        if axis not in named:
            raise ValueError(f"unknown axis {axis!r}")
        return np.array(named[axis], dtype=float)
    n = np.asarray(axis, dtype=float).reshape(-1)
    if n.size != 3 or not np.linalg.norm(n) > 0:
        raise ValueError("axis must be a named axis or a nonzero 3-vector")
    return n / np.linalg.norm(n)


def kron_channel(a: SuperOp, b: SuperOp) -> SuperOp:
    """Two-qubit product channel; index order must match the Pauli basis."""
    if a.dim != 2 or b.dim != 2:
        raise ValueError("kron_channel combines two single-qubit channels")
    return SuperOp(4, np.kron(a.mat, b.mat))


def relabeling_channel() -> SuperOp:
    """Exact axis permutation X -> Y -> Z -> X as a transfer matrix."""
    mat = np.zeros((4, 4))
    mat[0, 0] = 1.0
    mat[2, 1] = 1.0  # X component feeds Y
    mat[3, 2] = 1.0  # Y component feeds Z
    mat[1, 3] = 1.0  # Z component feeds X
    return SuperOp(2, mat)


def choi_matrix(op: SuperOp) -> np.ndarray:
    """Choi form (1/d) sum_jk M_jk P_j (x) P_k^T; positive iff the map is CP."""
    paulis = pauli_basis(op.dim)
    d = op.dim
    n = d ** 2
    choi = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            if op.mat[j, k] != 0.0:
                choi += op.mat[j, k] * np.kron(paulis[j], paulis[k].T)
    return choi / d


def assert_completely_positive(op: SuperOp, tol: float = 1e-10) -> None:
    evals = np.linalg.eigvalsh(choi_matrix(op))
    if evals.min() < -tol:
        raise ValueError(f"channel is not completely positive (min Choi eigenvalue {evals.min():.3e})")


# ---------------------------------------------------------------------------
# Channel specs (the config mini-language)
# ---------------------------------------------------------------------------


def channel_from_spec(spec, dim: int) -> SuperOp:
    """Build a channel from a config dict, or a composition chain from a list.

    A list [s1, s2, ...] composes right to left: s1 acts first.
    """
    if isinstance(spec, (list, tuple)):
        if not spec:
            raise ConfigError("empty channel chain")
        op = identity_superop(dim)
        for item in spec:
            op = channel_from_spec(item, dim) @ op
        return op
    if not isinstance(spec, Mapping):
        raise ConfigError(f"channel spec must be a mapping or list, got {type(spec).__name__}")
    kind = spec.get("channel")
    try:
        if kind == "depolarizing":
            return depolarizing(float(spec["q"]), dim)
        if kind == "dephasing":
            _require_dim(dim, 2, kind)
            return dephasing(float(spec["q"]), spec.get("axis", "z"))
        if kind == "amplitude_damping":
            _require_dim(dim, 2, kind)
            return amplitude_damping(float(spec["gamma"]))
        if kind == "rotation":
            _require_dim(dim, 2, kind)
            return rotation(spec.get("axis", "z"), float(spec["angle"]))
        if kind == "kron":
            _require_dim(dim, 4, kind)
            return kron_channel(
                channel_from_spec(spec["first"], 2), channel_from_spec(spec["second"], 2)
            )
    except KeyError as exc:
        raise ConfigError(f"channel spec {kind!r} is missing key {exc.args[0]!r}") from None
    raise ConfigError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# Noise models
# ---------------------------------------------------------------------------

_KNOWN_KINDS = (
    "ideal",
    "over_rotation",
    "z_tilt",
    "left",
    "right",
    "sandwich",
    "conjugation",
    "relabeling",
    "composite",
)


@dataclass(frozen=True)
class NoiseModel:
    """A named recipe turning an ideal gate-set into a noisy one."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KNOWN_KINDS:
            raise ConfigError(f"unknown noise model kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def ideal() -> "NoiseModel":
        return NoiseModel("ideal")

    @staticmethod
    def over_rotation(epsilon: float, cz_epsilon: float | None = None) -> "NoiseModel":
        return NoiseModel(
            "over_rotation",
            {"epsilon": float(epsilon), "cz_epsilon": cz_epsilon if cz_epsilon is None else float(cz_epsilon)},
        )

    @staticmethod
    def z_tilt(theta_z: float, cz_epsilon: float = 0.0) -> "NoiseModel":
        return NoiseModel("z_tilt", {"theta_z": float(theta_z), "cz_epsilon": float(cz_epsilon)})

    @staticmethod
    def left(error) -> "NoiseModel":
        return NoiseModel("left", {"error": error})

    @staticmethod
    def right(error) -> "NoiseModel":
        return NoiseModel("right", {"error": error})

    @staticmethod
    def sandwich(left, right) -> "NoiseModel":
        return NoiseModel("sandwich", {"left": left, "right": right})

    @staticmethod
    def conjugation(u) -> "NoiseModel":
        return NoiseModel("conjugation", {"unitary": u})

    @staticmethod
    def relabeling() -> "NoiseModel":
        return NoiseModel("relabeling")

    @staticmethod
    def composite(factors, side: str = "right") -> "NoiseModel":
        if side not in ("left", "right"):
            raise ConfigError(f"composite side must be 'left' or 'right', got {side!r}")
        return NoiseModel("composite", {"factors": list(factors), "side": side})

    @staticmethod
    def from_config(cfg: Mapping, dim: int) -> "NoiseModel":
        if not isinstance(cfg, Mapping):
            raise ConfigError("model: expected a mapping with a 'kind' key")
        if "kind" not in cfg:
            raise ConfigError("model.kind: missing")
        kind = cfg["kind"]
        params = {k: v for k, v in cfg.items() if k != "kind"}
        model = NoiseModel(str(kind), params)
        # fail fast on malformed parameters
        _resolve_errors(model, dim)
        return model


def _require_dim(dim: int, wanted: int, what: str) -> None:
    if dim != wanted:
        raise ConfigError(f"{what} requires dimension {wanted}, got {dim}")


def _as_superop(value, dim: int) -> SuperOp:
    if isinstance(value, SuperOp):
        if value.dim != dim:
            raise ConfigError(f"channel has dimension {value.dim}, expected {dim}")
        return value
    return channel_from_spec(value, dim)


def _as_unitary_superop(value, dim: int) -> SuperOp:
    if isinstance(value, SuperOp):
        return _as_superop(value, dim)
    value = np.asarray(value)
    if value.ndim == 2 and value.shape == (dim, dim):
        return unitary_to_superop(value)
    raise ConfigError(f"expected a {dim}x{dim} unitary matrix")


def _resolve_errors(model: NoiseModel, dim: int) -> dict:
    """Materialize the fixed channels a non-generator model composes with."""
    p = model.params
    if model.kind == "ideal":
        return {}
    if model.kind == "over_rotation":
        if "epsilon" not in p:
            raise ConfigError("model.epsilon: missing for over_rotation")
        return {}
    if model.kind == "z_tilt":
        if "theta_z" not in p:
            raise ConfigError("model.theta_z: missing for z_tilt")
        return {}
    if model.kind == "left":
        return {"left": _as_superop(p["error"], dim)}
    if model.kind == "right":
        return {"right": _as_superop(p["error"], dim)}
    if model.kind == "sandwich":
        return {"left": _as_superop(p["left"], dim), "right": _as_superop(p["right"], dim)}
    if model.kind == "conjugation":
        if "unitary" in p:
            u = _as_unitary_superop(p["unitary"], dim)
        elif "axis" in p and "angle" in p:
            _require_dim(dim, 2, "conjugation by axis/angle")
            u = rotation(p["axis"], float(p["angle"]))
        else:
            raise ConfigError("model.unitary: missing for conjugation (or give axis+angle)")
        return {"u": u}
    if model.kind == "relabeling":
        _require_dim(dim, 2, "relabeling")
        return {"u": relabeling_channel()}
    if model.kind == "composite":
        if "factors" not in p or not p["factors"]:
            raise ConfigError("model.factors: missing for composite")
        side = p.get("side", "right")
        if side not in ("left", "right"):
            raise ConfigError(f"model.side: expected 'left' or 'right', got {side!r}")
        return {side: _as_superop(list(p["factors"]), dim)}
    raise ConfigError(f"unknown noise model kind {model.kind!r}")


def _noisy_generators(model: NoiseModel, group: "CliffordGroup") -> dict[str, SuperOp]:
    """Noisy replacements for each generator label of a generator-replacement model."""
    out: dict[str, SuperOp] = {}
    if model.kind == "over_rotation":
        eps = float(model.params["epsilon"])
        cz_eps = model.params.get("cz_epsilon")
        cz_eps = eps if cz_eps is None else float(cz_eps)
        for label, spec in group.generator_pulses.items():
            off = cz_eps if label == "cz" else eps
            out[label] = unitary_to_superop(spec.unitary(off))
        return out
    if model.kind == "z_tilt":
        theta = float(model.params["theta_z"])
        cz_eps = float(model.params.get("cz_epsilon", 0.0))
        tilts = _TILT_HAMILTONIANS.get(group.dim, {})
        for label, spec in group.generator_pulses.items():
            if label == "cz":
                out[label] = unitary_to_superop(spec.unitary(cz_eps))
            elif label in tilts:
                tilt = unitary_to_superop(pulse(tilts[label], theta))
                out[label] = tilt @ unitary_to_superop(spec.unitary())
            else:
                raise ConfigError(f"no tilt axis known for generator {label!r}")
        return out
    raise ConfigError(f"{model.kind} is not a generator-replacement model")


def build_noisy_gateset(model: NoiseModel, group: "CliffordGroup") -> list[SuperOp]:
    """Noisy transfer matrices, index-aligned with the ideal group."""
    if model.kind == "ideal":
        return [e.op for e in group.elements]

    if model.kind in ("over_rotation", "z_tilt"):
        gens = _noisy_generators(model, group)
        noisy: list[SuperOp] = [identity_superop(group.dim)] * len(group)
        for e in group.elements:
            if e.parent < 0:
                continue  # identity: empty word, no pulses applied
            if e.via is None:
                raise ConfigError(f"element {e.index} has no generator word")
            noisy[e.index] = gens[e.via] @ noisy[e.parent]
        return noisy

    fixed = _resolve_errors(model, group.dim)
    if model.kind in ("conjugation", "relabeling"):
        u = fixed["u"]
        u_inv = SuperOp(group.dim, u.mat.T)
        return [u @ e.op @ u_inv for e in group.elements]
    left = fixed.get("left")
    right = fixed.get("right")
    out = []
    for e in group.elements:
        op = e.op
        if right is not None:
            op = op @ right
        if left is not None:
            op = left @ op
        out.append(op)
    return out
