import numpy as np
import pytest

from rblab.channels import SIGMA_X, SIGMA_Y, identity_superop, unitary_to_superop
from rblab.cliffords import (
    GroupClosureError,
    canonical_key,
    default_generators,
    generate_clifford_group,
    load_group,
    save_group,
)
from rblab.noise import CZ_HAMILTONIAN, PulseSpec, pulse


class TestGeneration:
    def test_single_qubit_order(self, group24):
        assert len(group24) == 24

    def test_identity_element_has_empty_word(self, group24):
        assert group24.elements[0].word == ()
        assert np.array_equal(group24.elements[0].op.mat, np.eye(4))

    def test_words_replay_to_ops(self, group24):
        for e in group24.elements:
            op = identity_superop(2)
            for label in e.word:
                op = group24.generator_ops[label] @ op
            assert np.max(np.abs(op.mat - e.op.mat)) < 1e-10

    def test_bfs_words_are_minimal_from_parents(self, group24):
        for e in group24.elements:
            if e.parent >= 0:
                assert len(e.word) == len(group24.elements[e.parent].word) + 1

    def test_closure_cap_fires_for_wrong_generators(self):
        bad = {"t": PulseSpec(SIGMA_X, np.pi / 4)}  # pi/8-type gate: not Clifford
        with pytest.raises(GroupClosureError):
            generate_clifford_group(2, generators=bad, cap=40)

    def test_composition_closure_random_pairs(self, group24, rng):
        for _ in range(100):
            g = group24.random_element(rng)
            h = group24.random_element(rng)
            product = group24.op(g).mat @ group24.op(h).mat
            assert group24.find(product) is not None

    def test_entries_are_signed_integers(self, group24):
        for e in group24.elements:
            assert np.max(np.abs(e.op.mat - np.round(e.op.mat))) < 1e-12


class TestInverse:
    def test_identity_inverse(self, group24):
        assert group24.inverse(0) == 0

    def test_generator_inverse_product(self, group24):
        idx = group24.find(group24.generator_ops["x"].mat)
        inv = group24.inverse(idx)
        product = group24.op(inv) @ group24.op(idx)
        assert np.max(np.abs(product.mat - np.eye(4))) < 1e-10

    def test_all_inverses(self, group24):
        for e in group24.elements:
            inv = group24.inverse(e.index)
            assert np.max(np.abs((group24.op(inv) @ e.op).mat - np.eye(4))) < 1e-10

    def test_involution(self, group24):
        for e in group24.elements:
            assert group24.inverse(group24.inverse(e.index)) == e.index


class TestRandomElement:
    def test_seeded_reproducibility(self, group24):
        draws1 = [group24.random_element(np.random.default_rng(3)) for _ in range(1)]
        draws2 = [group24.random_element(np.random.default_rng(3)) for _ in range(1)]
        rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
        seq_a = [group24.random_element(rng_a) for _ in range(50)]
        seq_b = [group24.random_element(rng_b) for _ in range(50)]
        assert draws1 == draws2
        assert seq_a == seq_b

    def test_different_seeds_differ(self, group24):
        seq_a = [group24.random_element(np.random.default_rng(1)) for _ in range(30)]
        seq_b = [group24.random_element(np.random.default_rng(2)) for _ in range(30)]
        assert seq_a != seq_b

    def test_uniformity_within_five_sigma(self, group24):
        n = 100_000
        rng = np.random.default_rng(123)
        counts = np.bincount(
            [group24.random_element(rng) for _ in range(n)], minlength=24
        )
        expected = n / 24
        sigma = np.sqrt(n * (1 / 24) * (1 - 1 / 24))
        assert np.max(np.abs(counts - expected)) < 5 * sigma


class TestCZGenerator:
    def test_cz_pulse_matches_diagonal_unitary(self):
        # oracle: the Hamiltonian is diagonal, so exponentiate entrywise
        diag = np.diag(CZ_HAMILTONIAN).real
        direct = np.diag(np.exp(0.5j * (np.pi / 2) * diag))
        cz = np.diag([1.0, 1.0, 1.0, -1.0])
        assert np.allclose(
            unitary_to_superop(direct).mat, unitary_to_superop(cz).mat, atol=1e-12
        )
        assert np.allclose(
            unitary_to_superop(pulse(CZ_HAMILTONIAN, np.pi / 2)).mat,
            unitary_to_superop(cz).mat,
            atol=1e-12,
        )


class TestCache:
    def test_save_and_load_round_trip(self, group24, tmp_path):
        path = tmp_path / "g2.npz"
        save_group(group24, path)
        loaded = load_group(path)
        assert len(loaded) == len(group24)
        for a, b in zip(loaded.elements, group24.elements):
            assert a.word == b.word
            assert np.array_equal(a.op.mat, b.op.mat)
        assert np.array_equal(loaded.inverse_table, group24.inverse_table)

    def test_load_rejects_mismatched_generators(self, group24, tmp_path):
        path = tmp_path / "g2.npz"
        save_group(group24, path)
        other = {
            "x": PulseSpec(SIGMA_X, np.pi / 2 + 0.05),
            "y": PulseSpec(SIGMA_Y, np.pi / 2),
        }
        with pytest.raises(ValueError, match="different generators"):
            load_group(path, generators=other)


class TestCanonicalKey:
    def test_negative_zero_insensitive(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        b = np.array([[-0.0, 1.0], [1.0, -0.0]])
        assert canonical_key(a) == canonical_key(b)

    def test_default_generators_unknown_dim(self):
        with pytest.raises(ValueError):
            default_generators(3)


@pytest.mark.extended
class TestTwoQubitGroup:
    def test_order_and_structure(self):
        group = generate_clifford_group(4)
        assert len(group) == 11520
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = group.random_element(rng)
            h = group.random_element(rng)
            assert group.find(group.op(g).mat @ group.op(h).mat) is not None
        for _ in range(50):
            g = group.random_element(rng)
            inv = group.inverse(g)
            assert np.max(np.abs((group.op(inv) @ group.op(g)).mat - np.eye(16))) < 1e-10
