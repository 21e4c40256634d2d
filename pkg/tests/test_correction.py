import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from rblab.channels import (
    SuperOp,
    infidelity,
    random_unitary,
    traceless_fidelity,
    unitary_to_superop,
)
from rblab.correction import (
    CorrectionResult,
    ImproperRotationError,
    correct_from_noisy_set,
    incoherence_defect,
    lift_rotation,
    optimize_correct,
    perturbation_report,
    polar_correct,
    verify_decay_law,
)
from rblab.noise import (
    NoiseModel,
    amplitude_damping,
    build_noisy_gateset,
    dephasing,
    depolarizing,
    rotation,
)
from rblab.twirl import build_twirl, dominant_spectrum, order_m_error_blocks

# values computed once from the tilt model via the grid+refine oracle below
ZTILT_CORRECTION_ANGLE = 0.0864951677497197
ZTILT_POLAR_FIDELITY = 0.9987184191385898


def tilt_right_block(group24, ztilt_noisy, ztilt_spectrum):
    right, _ = order_m_error_blocks(
        group24, ztilt_noisy, 4, twirl=ztilt_spectrum.twirl
    )
    return right


def block_fidelity(block):
    return 0.5 + 0.5 * np.trace(block) / 3.0


class TestLift:
    @given(
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=-3.0, max_value=3.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_round_trip_over_rotation_vectors(self, vx, vy, vz):
        r3 = Rotation.from_rotvec([vx, vy, vz]).as_matrix()
        u = lift_rotation(r3)
        assert np.max(np.abs(unitary_to_superop(u).mat[1:, 1:] - r3)) < 1e-8

    def test_identity(self):
        assert np.array_equal(lift_rotation(np.eye(3)), np.eye(2))


class TestPolarCorrect:
    def test_pure_rotation_input_fully_corrected(self):
        r3 = Rotation.from_rotvec([0.1, -0.05, 0.2]).as_matrix()
        factors = polar_correct(r3)
        assert np.max(np.abs(factors.incoherent_block - np.eye(3))) < 1e-12
        corrected = r3 @ unitary_to_superop(factors.correction).mat[1:, 1:]
        assert block_fidelity(corrected) == pytest.approx(1.0, abs=1e-12)

    def test_depolarizing_input_needs_no_correction(self):
        factors = polar_correct(0.9 * np.eye(3))
        assert np.max(np.abs(factors.rotation_block - np.eye(3))) < 1e-12
        assert np.max(np.abs(factors.correction - np.eye(2))) < 1e-12

    def test_reconstruction_and_uniqueness(self, rng):
        for _ in range(20):
            d = rng.uniform(0.9, 1.0, size=3)
            rot = Rotation.from_rotvec(rng.normal(scale=0.3, size=3)).as_matrix()
            basis = Rotation.from_rotvec(rng.normal(scale=1.0, size=3)).as_matrix()
            block = basis @ np.diag(d) @ basis.T @ rot
            factors = polar_correct(block)
            assert np.max(np.abs(factors.incoherent_block @ factors.rotation_block - block)) < 1e-10
            assert np.max(np.abs(factors.rotation_block - rot)) < 1e-10

    def test_tilt_model_pinned_angle(self, group24, ztilt_noisy, ztilt_spectrum):
        factors = polar_correct(tilt_right_block(group24, ztilt_noisy, ztilt_spectrum))
        assert factors.rotation_angle == pytest.approx(ZTILT_CORRECTION_ANGLE, abs=1e-6)
        corrected = tilt_right_block(group24, ztilt_noisy, ztilt_spectrum) @ factors.rotation_block.T
        assert block_fidelity(corrected) == pytest.approx(ZTILT_POLAR_FIDELITY, abs=1e-9)

    def test_tilt_model_against_grid_refine_oracle(self, group24, ztilt_noisy, ztilt_spectrum):
        # independent oracle: search all Bloch rotations directly
        block = tilt_right_block(group24, ztilt_noisy, ztilt_spectrum)

        def fid(rotvec):
            return block_fidelity(block @ Rotation.from_rotvec(rotvec).as_matrix())

        grid = np.linspace(-0.15, 0.15, 7)
        best = max(
            ((vx, vy, vz) for vx in grid for vy in grid for vz in grid),
            key=lambda v: fid(np.array(v)),
        )
        refined = minimize(
            lambda v: -fid(v),
            np.array(best),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 5000},
        )
        factors = polar_correct(block)
        assert abs(-refined.fun - block_fidelity(block @ factors.rotation_block.T)) < 1e-6

    def test_near_singular_rejected(self):
        with pytest.raises(ValueError, match="near-singular"):
            polar_correct(np.diag([1.0, 1.0, 1e-8]))

    def test_improper_rotation_rejected(self):
        with pytest.raises(ImproperRotationError):
            polar_correct(0.9 * np.diag([1.0, 1.0, -1.0]))

    def test_shape_checked(self):
        with pytest.raises(ValueError, match="3x3"):
            polar_correct(np.eye(4))


class TestOptimizeCorrect:
    def test_matches_polar_fidelity(self, group24, ztilt_noisy, ztilt_spectrum):
        block = tilt_right_block(group24, ztilt_noisy, ztilt_spectrum)
        factors = polar_correct(block)
        result = optimize_correct(block, 2, seed=0)
        assert isinstance(result, CorrectionResult)
        assert abs(result.fidelity - block_fidelity(block @ factors.rotation_block.T)) < 1e-8

    def test_ideal_input_returns_identity(self):
        result = optimize_correct(np.eye(3), 2, seed=1)
        assert result.converged
        assert result.fidelity == pytest.approx(1.0, abs=1e-10)
        assert np.max(np.abs(unitary_to_superop(result.unitary).mat - np.eye(4))) < 1e-6

    def test_correction_never_hurts(self, group24, overrot_noisy, overrot_spectrum):
        block, _ = order_m_error_blocks(
            group24, overrot_noisy, 4, twirl=overrot_spectrum.twirl
        )
        result = optimize_correct(block, 2, seed=2)
        assert result.fidelity >= block_fidelity(block) - 1e-12

    def test_shape_checked(self):
        with pytest.raises(ValueError, match="Bloch block"):
            optimize_correct(np.eye(4), 2)


class TestIncoherenceDefect:
    def test_depolarizing_is_exactly_incoherent(self):
        assert incoherence_defect(0.8 * np.eye(3)) == 0.0

    def test_rotation_defect_grows_with_angle(self):
        defects = [
            incoherence_defect(Rotation.from_rotvec([0, 0, phi]).as_matrix())
            for phi in (0.05, 0.1, 0.2, 0.4)
        ]
        assert all(d > 0 for d in defects)
        assert all(b > a for a, b in zip(defects, defects[1:]))

    def test_amplitude_damping_within_second_order(self):
        op = amplitude_damping(0.01)
        defect = incoherence_defect(op.mat[1:, 1:])
        r = infidelity(op)
        assert defect <= 5 * r ** 2


class TestVerifyDecayLaw:
    def test_conjugation_with_exact_basis(self, group24, rng):
        basis = random_unitary(2, rng)
        noisy = build_noisy_gateset(NoiseModel.conjugation(basis), group24)
        report = verify_decay_law(group24, noisy, basis, range(1, 33))
        assert report.max_residual < 1e-10
        assert report.passed

    def test_tilt_model_envelope(self, group24, ztilt_noisy, ztilt_spectrum):
        basis = correct_from_noisy_set(group24, ztilt_noisy, spectrum=ztilt_spectrum)
        report = verify_decay_law(
            group24, ztilt_noisy, basis, range(1, 129), spectrum=ztilt_spectrum
        )
        assert report.passed
        report_i = verify_decay_law(
            group24, ztilt_noisy, np.eye(2), range(1, 129), spectrum=ztilt_spectrum
        )
        assert report_i.max_residual >= 10 * report.envelope

    def test_sandwich_fixed_error_match(self, group24):
        left = depolarizing(0.999)
        right = rotation("y", 0.05)
        noisy = [SuperOp(2, left.mat @ e.op.mat @ right.mat) for e in group24.elements]
        spectrum = dominant_spectrum(build_twirl(group24, noisy))
        basis = correct_from_noisy_set(group24, noisy, spectrum=spectrum)
        report = verify_decay_law(
            group24,
            noisy,
            basis,
            range(1, 65),
            spectrum=spectrum,
            left_error=left,
            right_error=right,
        )
        assert report.passed
        assert report.match_residual is not None
        assert report.match_residual <= 10 * (1 - spectrum.p) ** 2
        assert report.multiplicativity_residual <= 10 * (1 - spectrum.p) ** 2


class TestPerturbationReport:
    def test_corrected_basis_matches_decay_infidelity(
        self, group24, ztilt_noisy, ztilt_spectrum
    ):
        basis = correct_from_noisy_set(group24, ztilt_noisy, spectrum=ztilt_spectrum)
        report = perturbation_report(group24, ztilt_noisy, basis)
        target = (1 - ztilt_spectrum.p) / 2
        assert abs(report.mean_infidelity - target) <= 10 * (1 - ztilt_spectrum.p) ** 2

    def test_identity_basis_shows_the_mismatch(self, group24, ztilt_noisy, ztilt_spectrum):
        report = perturbation_report(group24, ztilt_noisy, np.eye(2))
        assert report.mean_infidelity > 100 * (1 - ztilt_spectrum.p) / 2


class TestCompositeConjecture:
    @pytest.mark.parametrize(
        "factors",
        [
            [
                {"channel": "dephasing", "axis": "z", "q": 0.999},
                {"channel": "rotation", "axis": "z", "angle": 0.02},
                {"channel": "amplitude_damping", "gamma": 0.001},
                {"channel": "rotation", "axis": "x", "angle": 0.01},
            ],
            [
                {"channel": "amplitude_damping", "gamma": 0.002},
                {"channel": "rotation", "axis": "y", "angle": 0.03},
                {"channel": "dephasing", "axis": "x", "q": 0.9985},
                {"channel": "rotation", "axis": [1, 1, 0], "angle": 0.015},
            ],
        ],
    )
    def test_corrected_right_error_is_incoherent(self, group24, factors):
        noisy = build_noisy_gateset(NoiseModel.composite(factors, side="right"), group24)
        right_blk, _ = order_m_error_blocks(group24, noisy, 4)
        factors_p = polar_correct(right_blk)
        corrected = right_blk @ factors_p.rotation_block.T
        r = 1.0 - block_fidelity(corrected)
        assert incoherence_defect(corrected) <= 5 * r ** 2


class TestIncoherenceAlgebra:
    """Closure properties that make chain noise polar-correctable."""

    def test_conjugated_incoherent_channel_stays_incoherent(self, rng):
        d_block = amplitude_damping(0.004).mat[1:, 1:]
        r = infidelity(amplitude_damping(0.004))
        for _ in range(10):
            u_block = unitary_to_superop(random_unitary(2, rng)).mat[1:, 1:]
            conjugated = u_block @ d_block @ u_block.T
            assert incoherence_defect(conjugated) <= 5 * r ** 2

    def test_composition_of_incoherent_channels_stays_incoherent(self):
        a = amplitude_damping(0.003)
        b = depolarizing(0.998)
        c = dephasing(0.999, "x")
        block = (a @ b @ c).mat[1:, 1:]
        r = 1.0 - block_fidelity(block)
        assert incoherence_defect(block) <= 5 * r ** 2


class TestHypothesisFailure:
    @pytest.mark.parametrize("axis,angle", [("y", 0.15), ("x", 0.25), ([1, 1, 1], 0.2)])
    def test_decay_straddles_identity_basis_fidelity(self, group24, axis, angle):
        rot = rotation(axis, angle)
        dep = depolarizing(0.99)
        conj_left = [
            SuperOp(2, rot.mat @ dep.mat @ e.op.mat @ rot.mat.T)
            for e in group24.elements
        ]
        double_daggered = [
            SuperOp(2, rot.mat.T @ dep.mat @ e.op.mat @ rot.mat.T)
            for e in group24.elements
        ]
        f1 = np.mean(
            [traceless_fidelity(nz, e.op) for nz, e in zip(conj_left, group24.elements)]
        )
        f2 = np.mean(
            [
                traceless_fidelity(nz, e.op)
                for nz, e in zip(double_daggered, group24.elements)
            ]
        )
        p1 = dominant_spectrum(build_twirl(group24, conj_left)).p
        p2 = dominant_spectrum(build_twirl(group24, double_daggered)).p
        assert p1 >= f1 - 1e-12
        assert p2 <= f2 + 1e-12
