"""Fock-space operator and state tests.

Oracles: brute-force matrix exponential (scaling and squaring, padded
space) for the displacement matrix; direct Kraus sums and closed-form
loss models for channels; trapezoid integration for densities.
"""

import json
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from macrocat import fock
from macrocat.errors import DegenerateConditionError, TruncationWarning


def displacement_expm_oracle(alpha, dim, pad=192):
    """exp(alpha a^dag - conj(alpha) a) in a padded space, then truncated."""
    big = dim + pad
    n = np.arange(1, big)
    adag = np.diag(np.sqrt(n), -1).astype(complex)
    a = np.diag(np.sqrt(n), 1).astype(complex)
    return expm(alpha * adag - np.conj(alpha) * a)[:dim, :dim]


class TestDisplacementMatrix:
    def test_zero_alpha_is_identity(self):
        assert np.array_equal(fock.displacement_matrix(0.0, 8), np.eye(8))

    def test_vacuum_amplitude(self):
        # <0|D(1)|0> = exp(-1/2)
        D = fock.displacement_matrix(1.0, 32)
        assert D[0, 0].real == pytest.approx(np.exp(-0.5), abs=1e-12)
        assert D[0, 0].imag == 0.0

    @pytest.mark.parametrize("alpha", [1.3, 2.0, 0.5 + 0.7j, -1.1 + 0.2j])
    def test_matches_matrix_exponential(self, alpha):
        D = fock.displacement_matrix(alpha, 64)
        oracle = displacement_expm_oracle(alpha, 64)
        assert np.abs(D - oracle).max() < 1e-8

    def test_column_zero_is_coherent_state(self):
        from macrocat.counting import xi0

        alpha, dim = 1.7, 48
        D = fock.displacement_matrix(alpha, dim)
        expected = xi0(np.arange(dim), alpha)
        assert np.abs(D[:, 0].real - expected).max() < 1e-10
        assert np.abs(D[:, 0].imag).max() == 0.0

    def test_composition_with_inverse(self):
        # D(a) D(-a) = 1 on the low block while |a|^2 <= dim/8
        dim = 64
        alpha = np.sqrt(dim / 8.0)
        prod = fock.displacement_matrix(alpha, dim) @ fock.displacement_matrix(-alpha, dim)
        block = dim // 4
        dev = np.abs(prod - np.eye(dim))[:block, :block].max()
        assert dev < 1e-8

    def test_rejects_tiny_dim(self):
        with pytest.raises(ValueError):
            fock.displacement_matrix(1.0, 1)

    def test_warns_when_truncation_dominated(self):
        with pytest.warns(TruncationWarning):
            fock.displacement_matrix(3.0, 16)


class TestLossChannel:
    def test_eta_one_is_identity(self):
        rho = fock.build_macro_state(0.8, 0.3, 16)
        out = fock.apply_loss(rho, 1.0, 0)
        assert np.abs(out.data - rho.data).max() == 0.0

    def test_single_photon_bernoulli(self):
        rho = fock.DensityMatrix.from_pure(np.array([0.0, 1.0]), 2, 1)
        out = fock.apply_loss(rho, 0.49, 0)
        assert np.allclose(np.diag(out.data).real, [0.51, 0.49], atol=1e-14)

    @pytest.mark.parametrize("eta", [0.0, 0.3, 0.49, 0.85])
    def test_trace_preserved(self, eta):
        rho = fock.build_macro_state(1.2, 0.7, 24)
        out = fock.apply_loss(fock.apply_loss(rho, eta, 0), eta, 1)
        assert out.trace() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("eta", [0.25, 0.49, 0.9])
    def test_matches_closed_form_on_delocalized_photon(self, eta):
        # equal loss on both arms: eta |psi><psi| + (1-eta)|00><00|
        dim = 4
        psi = fock.delocalized_photon_state(0.4, dim)
        rho = fock.DensityMatrix.from_pure(psi, dim, 2)
        out = fock.apply_loss(fock.apply_loss(rho, eta, 0), eta, 1)
        expected = eta * np.outer(psi, psi.conj())
        expected[0, 0] += 1.0 - eta
        assert np.abs(out.data - expected).max() < 1e-10

    def test_kraus_family_is_complete(self):
        ops = fock.loss_kraus_operators(0.6, 12)
        total = sum(K.conj().T @ K for K in ops)
        assert np.abs(total - np.eye(12)).max() < 1e-12

    def test_rejects_bad_eta(self):
        rho = fock.DensityMatrix.vacuum(4)
        with pytest.raises(ValueError):
            fock.apply_loss(rho, 1.2, 0)


class TestMacroState:
    def test_alpha_zero_is_delocalized_photon(self):
        rho = fock.build_macro_state(0.0, 0.0, 4)
        psi = fock.delocalized_photon_state(0.0, 4)
        assert np.abs(rho.data - np.outer(psi, psi.conj())).max() < 1e-14

    @pytest.mark.parametrize("alpha,phi", [(0.0, 0.0), (1.0, 0.5), (1.5, np.pi / 2)])
    def test_unit_trace(self, alpha, phi):
        rho = fock.build_macro_state(alpha, phi, 32)
        assert rho.trace() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("phi", [0.0, 1.0, np.pi / 2])
    def test_reduced_state_at_zero_alpha(self, phi):
        rho = fock.build_macro_state(0.0, phi, 4)
        red = fock.partial_trace(rho, 0)
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[1, 1] = 0.5
        assert np.abs(red.data - expected).max() < 1e-12

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_reduced_mode_mean_photon_number(self, alpha):
        # each arm averages the displaced-vacuum and displaced-photon branch
        rho = fock.build_macro_state(alpha, 0.9, 32)
        for mode in (0, 1):
            mean, _ = fock.photon_moments(rho, mode)
            assert mean == pytest.approx(alpha**2 + 0.5, abs=1e-6)

    def test_undisplacement_recovers_delocalized_photon(self):
        alpha, dim = 1.5, 32
        rho = fock.build_macro_state(alpha, 0.3, dim)
        D = fock.displacement_matrix(-alpha, dim)
        DD = np.kron(D, D)
        back = DD @ rho.data @ DD.conj().T
        psi = fock.delocalized_photon_state(0.3, dim)
        fidelity = float((psi.conj() @ back @ psi).real)
        assert fidelity > 1.0 - 1e-6


class TestPhotonMoments:
    def test_vacuum(self):
        assert fock.photon_moments(fock.DensityMatrix.vacuum(16)) == (0.0, 0.0)

    @pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
    def test_displaced_vacuum(self, alpha):
        vec = fock.displaced_fock(alpha, 0, 64)
        mean, var = fock.photon_moments(fock.DensityMatrix.from_pure(vec, 64, 1))
        assert mean == pytest.approx(alpha**2, abs=1e-6)
        assert var == pytest.approx(alpha**2, abs=1e-6)

    @pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
    def test_displaced_single_photon(self, alpha):
        # mean alpha^2 + 1, variance three shot-noise units
        vec = fock.displaced_fock(alpha, 1, 64)
        mean, var = fock.photon_moments(fock.DensityMatrix.from_pure(vec, 64, 1))
        assert mean == pytest.approx(alpha**2 + 1.0, abs=1e-6)
        assert var == pytest.approx(3.0 * alpha**2, abs=1e-6)


class TestConditionalBobState:
    def test_on_mean_outcome_is_displaced_photon(self):
        # n = alpha^2 kills the displaced-vacuum branch
        vec = fock.conditional_bob_state(4, 2.0, 0.0, 32)
        d1 = fock.displaced_fock(2.0, 1, 32)
        assert abs(abs(np.vdot(d1, vec)) - 1.0) < 1e-12

    @pytest.mark.parametrize("delta,sign", [(2, 1.0), (-2, -1.0)])
    def test_offset_outcomes_give_balanced_superpositions(self, delta, sign):
        from macrocat.counting import xi0, xi1

        alpha, dim = 2.0, 32
        n_a = 4 + delta
        vec = fock.conditional_bob_state(n_a, alpha, 0.0, dim)
        # oracle: weights straight from the amplitude decomposition
        c0, c1 = xi1(n_a, alpha), xi0(n_a, alpha)
        assert np.sign(c0) == sign
        D = fock.displacement_matrix(alpha, dim)
        target = (sign * D[:, 0] + D[:, 1]) / np.sqrt(2.0)
        assert abs(abs(np.vdot(target, vec)) - 1.0) < 1e-10

    @pytest.mark.parametrize("n_a", [0, 3, 4, 9])
    def test_unit_norm(self, n_a):
        vec = fock.conditional_bob_state(n_a, 2.0, 1.1, 32)
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-10)

    def test_degenerate_outcome_rejected(self):
        with pytest.raises(DegenerateConditionError):
            fock.conditional_bob_state(10**6, 2.0, 0.0, 16)

    def test_negative_outcome_rejected(self):
        with pytest.raises(ValueError):
            fock.conditional_bob_state(-1, 2.0, 0.0, 16)


class TestQuadratureMarginal:
    def test_vacuum_is_gaussian_half_variance(self):
        grid = np.linspace(-8, 8, 1601)
        dens = fock.quadrature_marginal(fock.DensityMatrix.vacuum(8), 0.0, grid)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)
        var = np.trapezoid(dens * grid**2, grid)
        assert var == pytest.approx(0.5, abs=1e-6)

    def test_single_photon_node_at_origin(self):
        rho = fock.DensityMatrix.from_pure(np.array([0.0, 1.0, 0.0]), 3, 1)
        grid = np.linspace(-8, 8, 1601)
        dens = fock.quadrature_marginal(rho, 0.0, grid)
        assert dens[800] < 1e-12  # grid point exactly at x = 0

    def test_balanced_superposition_mean(self):
        rho = fock.DensityMatrix.from_pure(np.array([1.0, 1.0]) / np.sqrt(2), 2, 1)
        grid = np.linspace(-8, 8, 3201)
        dens = fock.quadrature_marginal(rho, 0.0, grid)
        mean = np.trapezoid(dens * grid, grid)
        # oracle: <0|X|1> = 1/sqrt(2) in this scaling
        assert mean == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-6)

    def test_narrow_grid_rejected(self):
        with pytest.raises(ValueError):
            fock.quadrature_marginal(
                fock.DensityMatrix.vacuum(4), 0.0, np.linspace(-3, 3, 100)
            )

    def test_non_hermitian_rejected(self):
        bad = np.zeros((4, 4), dtype=complex)
        bad[0, 1] = 1.0
        bad[0, 0] = 1.0
        rho = fock.DensityMatrix(4, 1, bad)
        with pytest.raises(ValueError):
            fock.quadrature_marginal(rho, 0.0, np.linspace(-8, 8, 100))


class TestWigner:
    def test_vacuum_at_origin(self):
        grid = np.array([0.0])
        w = fock.wigner(fock.DensityMatrix.vacuum(4), grid, grid)
        assert w[0, 0] == pytest.approx(1.0 / np.pi, abs=1e-12)

    def test_single_photon_negativity_at_origin(self):
        rho = fock.DensityMatrix.from_pure(np.array([0.0, 1.0]), 2, 1)
        w = fock.wigner(rho, np.array([0.0]), np.array([0.0]))
        assert w[0, 0] == pytest.approx(-1.0 / np.pi, abs=1e-12)

    def test_normalization(self):
        rho = fock.DensityMatrix.from_pure(np.array([1.0, 0.0, 1.0]) / np.sqrt(2), 3, 1)
        grid = np.linspace(-6, 6, 241)
        w = fock.wigner(rho, grid, grid)
        total = np.trapezoid(np.trapezoid(w, grid, axis=1), grid)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_marginal_matches_quadrature_marginal(self):
        alpha, dim = 1.0, 16
        D = fock.displacement_matrix(alpha, dim)
        vec = (D[:, 0] + D[:, 1]) / np.sqrt(2.0)
        rho = fock.DensityMatrix.from_pure(vec, dim, 1)
        xs = np.linspace(-7, 9, 161)
        ps = np.linspace(-8, 8, 641)
        w = fock.wigner(rho, xs, ps)
        marg = np.trapezoid(w, ps, axis=1)
        direct = fock.quadrature_marginal(rho, 0.0, xs)
        assert np.abs(marg - direct).max() < 1e-4

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError):
            fock.wigner(fock.DensityMatrix.vacuum(4), np.linspace(-6, 6, 10), np.array([0.0]))


class TestSerialization:
    def test_round_trip(self):
        rho = fock.build_macro_state(0.7, 1.2, 12)
        doc = json.loads(rho.dumps())
        back = fock.DensityMatrix.from_json_dict(doc)
        assert back.dim == rho.dim and back.modes == rho.modes
        assert np.abs(back.data - rho.data).max() < 1e-15

    def test_rejects_non_hermitian_payload(self):
        doc = {"dim": 2, "modes": 1, "re": [1.0, 0.5, 0.0, 0.0], "im": [0.0] * 4}
        with pytest.raises(ValueError):
            fock.DensityMatrix.from_json_dict(doc)

    def test_rejects_wrong_trace(self):
        doc = {"dim": 2, "modes": 1, "re": [0.7, 0.0, 0.0, 0.7], "im": [0.0] * 4}
        with pytest.raises(ValueError):
            fock.DensityMatrix.from_json_dict(doc)


class TestInvariantSweeps:
    """Randomized spot checks of the structural invariants."""

    @pytest.mark.parametrize("seed", range(4))
    def test_loss_preserves_state_validity(self, seed):
        rng = np.random.default_rng(seed)
        dim = 6
        raw = rng.normal(size=(dim * dim, dim * dim)) + 1j * rng.normal(size=(dim * dim, dim * dim))
        herm = raw @ raw.conj().T
        rho = fock.DensityMatrix(dim, 2, herm / np.trace(herm).real)
        out = fock.apply_loss(rho, rng.uniform(0.1, 0.9), int(rng.integers(2)))
        out.validate(check_psd=True)

    @pytest.mark.parametrize("seed", range(4))
    def test_marginal_nonnegative_and_normalized(self, seed):
        rng = np.random.default_rng(100 + seed)
        dim = 8
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        herm = raw @ raw.conj().T
        rho = fock.DensityMatrix(dim, 1, herm / np.trace(herm).real)
        grid = np.linspace(-10, 10, 2001)
        dens = fock.quadrature_marginal(rho, rng.uniform(0, 2 * np.pi), grid)
        assert dens.min() >= -1e-10
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_trailing_population_warning(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", TruncationWarning)
            with pytest.raises(TruncationWarning):
                fock.build_macro_state(1.4, 0.0, 6)
