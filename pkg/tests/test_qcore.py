import numpy as np
import pytest

from qtp import qcore
from qtp.errors import ConfigError, DomainError
from qtp.qcore import ChannelKind, SymbolPair

from oracles import all_messages, random_channel, sdc_distribution, weyl

BUILTINS = [
    ("bit_flip", 2),
    ("phase_flip", 2),
    ("depolarizing", 2),
    ("amplitude_damping", 2),
    ("qudit_bit_flip", 4),
]
LAMBDAS = [0.0, 0.01, 0.1, 0.5, 1.0]


class TestHeisenbergWeyl:
    def test_qubit_z(self):
        np.testing.assert_allclose(qcore.heisenberg_weyl(2, 1, 0), np.diag([1, -1]), atol=1e-15)

    def test_identity(self):
        np.testing.assert_array_equal(qcore.heisenberg_weyl(2, 0, 0), np.eye(2))

    def test_d4_matches_direct_evaluation(self):
        u = qcore.heisenberg_weyl(4, 1, 1)
        expected = np.zeros((4, 4), dtype=complex)
        for k in range(4):
            expected[(k + 1) % 4, k] = np.exp(2j * np.pi * ((k + 1) % 4) / 4)
        np.testing.assert_allclose(u, expected, atol=1e-14)
        np.testing.assert_allclose(u, weyl(4, 1, 1), atol=1e-14)

    @pytest.mark.parametrize("d", [2, 4])
    def test_unitary(self, d):
        for z, x in all_messages(d):
            u = qcore.heisenberg_weyl(d, z, x)
            assert np.abs(u.conj().T @ u - np.eye(d)).max() < 1e-10

    @pytest.mark.parametrize("z,x", [(2, 0), (0, -1), (0, 2)])
    def test_out_of_range(self, z, x):
        with pytest.raises(DomainError):
            qcore.heisenberg_weyl(2, z, x)


class TestBellState:
    def test_phi00(self):
        np.testing.assert_allclose(qcore.bell_state(2, 0, 0), np.array([1, 0, 0, 1]) / np.sqrt(2))

    def test_phi11(self):
        # (|01> - |10>)/sqrt2, index a*2 + b
        np.testing.assert_allclose(
            qcore.bell_state(2, 1, 1), np.array([0, 1, -1, 0]) / np.sqrt(2), atol=1e-15
        )

    def test_qubit_table(self):
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(qcore.bell_state(2, 0, 1), [0, s, s, 0], atol=1e-15)
        np.testing.assert_allclose(qcore.bell_state(2, 1, 0), [s, 0, 0, -s], atol=1e-15)

    def test_d4_orthogonal_to_phi00(self):
        v = qcore.bell_state(4, 2, 3)
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        assert abs(np.vdot(qcore.bell_state(4, 0, 0), v)) < 1e-12

    @pytest.mark.parametrize("d", [2, 4])
    def test_gram_identity(self, d):
        basis = np.array([qcore.bell_state(d, z, x) for z, x in all_messages(d)])
        gram = basis.conj() @ basis.T
        assert np.abs(gram - np.eye(d * d)).max() < 1e-10

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            qcore.bell_state(2, 0, 3)


class TestBuiltinChannels:
    def test_amplitude_damping_full(self):
        ch = qcore.builtin_channel("amplitude_damping", 1.0, 2)
        np.testing.assert_allclose(ch.kraus[0], np.diag([1, 0]))
        np.testing.assert_allclose(ch.kraus[1], [[0, 1], [0, 0]])

    def test_bit_flip_zero(self):
        ch = qcore.builtin_channel("bit_flip", 0.0, 2)
        np.testing.assert_array_equal(ch.kraus[0], np.eye(2))
        np.testing.assert_array_equal(ch.kraus[1], np.zeros((2, 2)))

    def test_qudit_bit_flip(self):
        ch = qcore.builtin_channel("qudit_bit_flip", 0.3, 4)
        np.testing.assert_allclose(ch.kraus[1], np.sqrt(0.1) * qcore.shift(4, 1), atol=1e-15)
        assert qcore.check_completeness(ch) < 1e-10

    @pytest.mark.parametrize("kind,d", BUILTINS)
    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_completeness(self, kind, d, lam):
        assert qcore.check_completeness(qcore.builtin_channel(kind, lam, d)) < 1e-10

    @pytest.mark.parametrize(
        "kind,d", [("bit_flip", 4), ("amplitude_damping", 4), ("qudit_bit_flip", 2), ("custom", 2)]
    )
    def test_unsupported_combination(self, kind, d):
        with pytest.raises(ConfigError):
            qcore.builtin_channel(kind, 0.1, d)

    def test_lambda_range(self):
        with pytest.raises(ConfigError):
            qcore.builtin_channel("bit_flip", 1.5)


class TestCompleteness:
    def test_identity_channel(self):
        assert qcore.check_completeness(qcore.custom_channel([np.eye(2)])) == 0.0

    def test_half_identity_residual(self):
        ch = qcore.builtin_channel("bit_flip", 0.0)
        # bypass the constructor guard to inspect the residual value itself
        assert qcore.completeness_residual([np.sqrt(0.5) * np.eye(4)], 4) == pytest.approx(np.sqrt(4) * 0.5)
        assert qcore.completeness_residual([np.sqrt(0.5) * np.eye(2)], 2) == pytest.approx(np.sqrt(2) * 0.5)
        assert ch.kind is ChannelKind.BIT_FLIP

    def test_custom_rejected_when_not_trace_preserving(self):
        with pytest.raises(ConfigError):
            qcore.custom_channel([np.sqrt(0.5) * np.eye(2)])

    def test_wrong_shape_rejected(self):
        with pytest.raises(ConfigError):
            qcore.custom_channel([np.eye(2), np.zeros((3, 3))])


class TestOutcomeDistribution:
    def test_noiseless(self):
        dist = qcore.sdc_outcome_distribution(qcore.builtin_channel("bit_flip", 0.0), (1, 0))
        expected = np.zeros((2, 2))
        expected[1, 0] = 1
        np.testing.assert_allclose(dist, expected, atol=1e-15)

    @pytest.mark.parametrize("z,x", all_messages(2))
    def test_bit_flip(self, z, x):
        dist = qcore.sdc_outcome_distribution(qcore.builtin_channel("bit_flip", 0.1), (z, x))
        expected = np.zeros((2, 2))
        expected[z, x] = 0.9
        expected[z, x ^ 1] = 0.1
        np.testing.assert_allclose(dist, expected, atol=1e-12)

    @pytest.mark.parametrize("z,x", all_messages(2))
    def test_depolarizing(self, z, x):
        dist = qcore.sdc_outcome_distribution(qcore.builtin_channel("depolarizing", 0.2), (z, x))
        expected = np.full((2, 2), 0.05)
        expected[z, x] = 0.85
        np.testing.assert_allclose(dist, expected, atol=1e-12)

    @pytest.mark.parametrize("kind,d", BUILTINS)
    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_matches_density_matrix_oracle(self, kind, d, lam):
        ch = qcore.builtin_channel(kind, lam, d)
        for z, x in all_messages(d):
            got = qcore.sdc_outcome_distribution(ch, (z, x))
            assert got.min() >= 0
            assert abs(got.sum() - 1) < 1e-9
            assert np.abs(got - sdc_distribution(ch.kraus, d, z, x)).max() < 1e-9

    @pytest.mark.parametrize("d", [2, 4])
    def test_random_channels_match_oracle(self, d):
        rng = np.random.default_rng(2024 + d)
        for _ in range(100):
            kraus = random_channel(d, int(rng.integers(1, 5)), rng)
            ch = qcore.custom_channel(kraus)
            for z, x in all_messages(d):
                got = qcore.sdc_outcome_distribution(ch, (z, x))
                assert np.abs(got - sdc_distribution(kraus, d, z, x)).max() < 1e-9

    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_support_properties(self, lam):
        bf = qcore.builtin_channel("bit_flip", lam)
        pf = qcore.builtin_channel("phase_flip", lam)
        for z, x in all_messages(2):
            # bit flip never changes z, phase flip never changes x
            assert np.all(qcore.sdc_outcome_distribution(bf, (z, x))[1 - z, :] == 0)
            assert np.all(qcore.sdc_outcome_distribution(pf, (z, x))[:, 1 - x] == 0)

    @pytest.mark.parametrize("kind,d", BUILTINS)
    def test_zero_noise_is_point_mass(self, kind, d):
        ch = qcore.builtin_channel(kind, 0.0, d)
        for z, x in all_messages(d):
            dist = qcore.sdc_outcome_distribution(ch, (z, x))
            assert dist[z, x] == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            qcore.sdc_outcome_distribution(qcore.builtin_channel("bit_flip", 0.1), (2, 0))


class TestSampling:
    def test_point_mass(self):
        dist = np.zeros((4, 4))
        dist[2, 3] = 1.0
        rng = np.random.default_rng(0)
        assert all(qcore.sample_outcome(dist, rng) == SymbolPair(2, 3) for _ in range(200))

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(1)
        dist = np.full((2, 2), 0.25)
        counts = np.zeros(4)
        for _ in range(100_000):
            z, x = qcore.sample_outcome(dist, rng)
            counts[2 * z + x] += 1
        assert np.all(np.abs(counts / 1e5 - 0.25) <= 0.01)

    def test_deterministic(self):
        dist = np.array([[0.1, 0.2], [0.3, 0.4]])
        a = [qcore.sample_outcome(dist, np.random.default_rng(5)) for _ in range(3)]
        r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
        assert [qcore.sample_outcome(dist, r1) for _ in range(50)] == [
            qcore.sample_outcome(dist, r2) for _ in range(50)
        ]
        assert len(set(a)) == 1

    def test_transmit_symbols_never_hits_zero_probability(self):
        ch = qcore.builtin_channel("bit_flip", 0.3)
        rng = np.random.default_rng(3)
        sent = [(1, 0)] * 5000
        got = qcore.transmit_symbols(ch, sent, rng)
        assert all(z == 1 for z, _ in got)
        flips = sum(x == 1 for _, x in got) / len(got)
        assert abs(flips - 0.3) < 0.03


class TestClassical:
    def test_no_flips(self):
        bits = [0, 1, 1, 0, 1]
        assert qcore.classical_transmit(bits, 0.0, np.random.default_rng(0)) == bits

    def test_all_flips(self):
        bits = [0, 1, 1, 0, 1]
        assert qcore.classical_transmit(bits, 1.0, np.random.default_rng(0)) == [1, 0, 0, 1, 0]

    def test_binomial_count(self):
        n, p = 1_000_000, 0.01
        out = qcore.classical_transmit(np.zeros(n, dtype=np.uint8), p, np.random.default_rng(11))
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(sum(out) - n * p) <= 3 * sigma

    def test_bad_probability(self):
        with pytest.raises(DomainError):
            qcore.classical_transmit([0], 1.2, np.random.default_rng(0))
