import numpy as np
import pytest

from dmimo_stfbc.channel import Deployment, build_correlation


def make_deployment(beta, l_per_ru=1, n_per_ue=1, rho_tx=0.0, rho_rx=0.0,
                    ru_positions=None, ue_positions=None) -> Deployment:
    """Deployment with prescribed long-term gains and Kronecker correlation."""
    beta = np.asarray(beta, dtype=float)
    m, k = beta.shape
    base = build_correlation(1.0, l_per_ru, n_per_ue, rho_tx, rho_rx)
    corr = beta[:, :, None, None] * base[None, None, :, :]
    if ru_positions is None:
        ru_positions = np.column_stack([np.arange(m, dtype=float), np.zeros(m)])
    if ue_positions is None:
        ue_positions = np.column_stack([np.arange(k, dtype=float), np.ones(k)])
    return Deployment(
        ru_positions=np.asarray(ru_positions, dtype=float),
        ue_positions=np.asarray(ue_positions, dtype=float),
        l_per_ru=l_per_ru, n_per_ue=n_per_ue, beta=beta, corr_blocks=corr,
        rho_tx=rho_tx, rho_rx=rho_rx,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0xD131)
