import numpy as np
import pytest

from dmimo_stfbc.channel import (build_correlation, draw_coefficients, grid_points,
                                 load_deployment, noise_variance, pathloss_linear,
                                 place_on_grids, sample_realization, save_deployment)
from dmimo_stfbc.config import PathlossParams, SimConfig
from dmimo_stfbc.streams import substream

LOS = PathlossParams.inf_los()
NLOS = PathlossParams.inf_sl_nlos()


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

def test_placement_deterministic_per_seed():
    cfg = SimConfig(m_rus=16, k_ues=4)
    dep1 = place_on_grids(cfg, substream(7, 0))
    dep2 = place_on_grids(cfg, substream(7, 0))
    assert np.array_equal(dep1.ru_positions, dep2.ru_positions)
    assert np.array_equal(dep1.ue_positions, dep2.ue_positions)
    assert np.array_equal(dep1.beta, dep2.beta)


def test_placement_capacity_error():
    cfg = SimConfig(m_rus=16, k_ues=4)
    # bypass config validation to exercise the channel-level check
    object.__setattr__(cfg, "m_rus", 129)
    with pytest.raises(ValueError):
        place_on_grids(cfg, substream(1, 0))


def test_ru_positions_on_spaced_grid():
    cfg = SimConfig(m_rus=16, k_ues=4)
    dep = place_on_grids(cfg, substream(3, 0))
    assert np.all(dep.ru_positions % 7.5 == 0)
    assert np.all(dep.ru_positions[:, 0] <= 120.0)
    assert np.all(dep.ru_positions[:, 1] <= 60.0)
    # distinct grid points
    assert len({tuple(p) for p in dep.ru_positions}) == 16


def test_grid_point_count():
    assert grid_points(16, 8, 7.5).shape == (128, 2)
    assert grid_points(120, 60, 1.0).shape == (7200, 2)


# ---------------------------------------------------------------------------
# pathloss and noise
# ---------------------------------------------------------------------------

def test_pathloss_one_meter_reference():
    # deterministic trend: PL = offset + freq_coef * log10(28) at d = 1 m
    expected_db = 31.84 + 19.0 * np.log10(28.0)
    assert pathloss_linear(1.0, LOS) == pytest.approx(10 ** (-expected_db / 10), rel=1e-12)


def test_pathloss_distance_doubling_adds_fixed_db():
    b1 = pathloss_linear(10.0, LOS)
    b2 = pathloss_linear(20.0, LOS)
    added_db = 10 * np.log10(b1 / b2)
    assert added_db == pytest.approx(21.5 * np.log10(2.0), rel=1e-12)


def test_pathloss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        pathloss_linear(0.0, LOS)
    with pytest.raises(ValueError):
        pathloss_linear(np.array([1.0, -2.0]), LOS)


def test_shadowing_standard_deviation(rng):
    # Monte-Carlo moment check of the shadowing spread.
    d = np.full(100_000, 25.0)
    beta = pathloss_linear(d, LOS, rng)
    pl_db = -10 * np.log10(beta)
    assert np.std(pl_db) == pytest.approx(4.3, rel=0.02)


def test_nlos_branch_floored_at_los():
    # at short range the NLOS power law can dip below LOS; the floor keeps
    # NLOS pathloss >= LOS pathloss everywhere
    for d in (0.5, 1.0, 3.0, 30.0, 120.0):
        assert pathloss_linear(d, NLOS) <= pathloss_linear(d, LOS) + 1e-15


def test_mixture_needs_generator():
    with pytest.raises(ValueError):
        pathloss_linear(10.0, PathlossParams.inf_sl())


def test_mixture_between_branches(rng):
    # mixed-link mean pathloss lies between the pure branches
    d = np.full(50_000, 40.0)
    beta = pathloss_linear(d, PathlossParams.inf_sl(), rng, shadowing=False)
    assert pathloss_linear(40.0, NLOS) < np.mean(beta) < pathloss_linear(40.0, LOS)


def test_noise_variance_reference_values():
    # 200 MHz, 9 dB noise figure -> about -82 dBm
    sigma2 = noise_variance(200e6, 9.0)
    dbm = 10 * np.log10(sigma2) + 30
    assert dbm == pytest.approx(-174 + 10 * np.log10(200e6) + 9, abs=1e-9)
    assert sigma2 == pytest.approx(6.3e-12, rel=0.01)
    assert 10 * np.log10(noise_variance(1.0, 0.0)) + 30 == pytest.approx(-174.0)
    assert noise_variance(200e6, 12.0) / sigma2 == pytest.approx(10 ** 0.3)


def test_noise_variance_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        noise_variance(0.0, 9.0)


# ---------------------------------------------------------------------------
# correlation model
# ---------------------------------------------------------------------------

def test_correlation_identity_when_uncorrelated():
    assert np.allclose(build_correlation(2.5, 3, 2, 0.0, 0.0), 2.5 * np.eye(6))


def test_correlation_exponential_entries():
    block = build_correlation(1.0, 2, 1, 0.5, 0.0)
    assert np.allclose(block, [[1.0, 0.5], [0.5, 1.0]])


def test_correlation_block_psd(rng):
    for _ in range(25):
        beta = float(rng.uniform(0.1, 4.0))
        rho_t, rho_r = rng.uniform(0, 0.95, size=2)
        block = build_correlation(beta, 4, 2, rho_t, rho_r)
        eigs = np.linalg.eigvalsh(block)
        assert eigs.min() >= -1e-12
        assert np.allclose(np.diag(block).real, beta)


def test_correlation_rejects_unit_rho():
    with pytest.raises(ValueError):
        build_correlation(1.0, 2, 1, 1.0, 0.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_realization_deterministic():
    from tests.conftest import make_deployment
    dep = make_deployment(np.ones((2, 2)), rho_tx=0.3)
    r1 = sample_realization(dep, substream(5, 1))
    r2 = sample_realization(dep, substream(5, 1))
    assert np.array_equal(r1.h, r2.h)
    assert r1.h.shape == (2, 1, 2, 1)


def test_sample_variance_matches_beta(rng):
    from tests.conftest import make_deployment
    dep = make_deployment([[2.0, 0.5]], l_per_ru=1, n_per_ue=1)
    h = draw_coefficients(dep, rng, 100_000)
    var = np.mean(np.abs(h) ** 2, axis=0)[0, 0, :, 0]
    assert var[0] == pytest.approx(2.0, rel=0.02)
    assert var[1] == pytest.approx(0.5, rel=0.02)


def test_adjacent_antenna_correlation(rng):
    from tests.conftest import make_deployment
    dep = make_deployment([[1.0]], l_per_ru=2, rho_tx=0.9)
    h = draw_coefficients(dep, rng, 100_000)
    a, b = h[:, 0, 0, 0, 0], h[:, 0, 1, 0, 0]
    corr = np.mean(a * b.conj()).real / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
    assert corr == pytest.approx(0.9, abs=0.02)


def test_cross_link_independence(rng):
    from tests.conftest import make_deployment
    dep = make_deployment(np.ones((2, 2)), rho_tx=0.5)
    h = draw_coefficients(dep, rng, 100_000)
    pairs = [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 1))]
    for (m1, k1), (m2, k2) in pairs:
        a, b = h[:, m1, 0, k1, 0], h[:, m2, 0, k2, 0]
        corr = abs(np.mean(a * b.conj())) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
        assert corr < 0.01


def test_sample_covariance_converges(rng):
    from tests.conftest import make_deployment
    dep = make_deployment([[1.5]], l_per_ru=2, n_per_ue=2, rho_tx=0.6, rho_rx=0.4)
    h = draw_coefficients(dep, rng, 100_000)
    # stack back to the (l*n) vector per draw, order (l, n)
    x = h[:, 0, :, 0, :].reshape(-1, 4)
    emp = (x[:, :, None] * x.conj()[:, None, :]).mean(axis=0)
    target = dep.corr_blocks[0, 0]
    rel = np.linalg.norm(emp - target) / np.linalg.norm(target)
    assert rel < 0.03


def test_nonpsd_block_rejected():
    from tests.conftest import make_deployment
    dep = make_deployment([[1.0]], l_per_ru=2)
    dep.corr_blocks[0, 0] = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(ValueError):
        dep.corr_factors()


# ---------------------------------------------------------------------------
# import/export
# ---------------------------------------------------------------------------

def test_deployment_roundtrip(tmp_path):
    cfg = SimConfig(m_rus=6, k_ues=3, l_per_ru=2, n_per_ue=1)
    dep = place_on_grids(cfg, substream(11, 0))
    save_deployment(dep, tmp_path)
    back = load_deployment(tmp_path)
    assert np.array_equal(back.ru_positions, dep.ru_positions)
    assert np.array_equal(back.ue_positions, dep.ue_positions)
    assert np.allclose(back.beta, dep.beta, rtol=0, atol=0)
    assert np.allclose(back.corr_blocks, dep.corr_blocks)
    assert (back.l_per_ru, back.n_per_ue) == (2, 1)
