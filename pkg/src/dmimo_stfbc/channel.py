"""Deployment generation and correlated Rayleigh channel statistics.

A :class:`Deployment` fixes everything the long-term planner knows: RU/UE
positions drawn from the factory grids, per-link average power gains
``beta[m, k]`` (pathloss + shadowing), and one covariance block per (RU, UE)
pair for the ``L*N`` stacked antenna coefficients.  Blocks for different
pairs are independent, so the global covariance is block-diagonal.

Small-scale fading is zero-mean circularly-symmetric complex Gaussian with
``E[|h[m, l, k, n]|^2] = beta[m, k]``; antenna correlation follows a
Kronecker exponential model ``beta * (T ⊗ R)`` with ``T[i, j] = rho_tx^|i-j|``
on the RU side and likewise ``rho_rx`` on the UE side.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import PathlossParams, SimConfig

__all__ = [
    "Deployment",
    "ChannelRealization",
    "grid_points",
    "place_on_grids",
    "pathloss_linear",
    "noise_variance",
    "build_correlation",
    "sample_realization",
    "draw_coefficients",
    "save_deployment",
    "load_deployment",
]


@dataclass
class Deployment:
    """Positions plus long-term channel statistics for one network drop.

    Treated as immutable after construction; Cholesky factors of the
    correlation blocks are cached on first use.
    """

    ru_positions: np.ndarray          # (M, 2) meters
    ue_positions: np.ndarray          # (K, 2) meters
    l_per_ru: int
    n_per_ue: int
    beta: np.ndarray                  # (M, K) linear power gains
    corr_blocks: np.ndarray           # (M, K, L*N, L*N) complex covariance
    rho_tx: float = 0.0
    rho_rx: float = 0.0
    _factors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_rus(self) -> int:
        return self.ru_positions.shape[0]

    @property
    def n_ues(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.n_rus * self.l_per_ru

    def antenna_ru(self, antenna: int) -> int:
        """RU that owns a global antenna id (antennas of RU m are m*L .. m*L+L-1)."""
        return antenna // self.l_per_ru

    def corr_factors(self) -> np.ndarray:
        """Per-(m, k) Cholesky factors F with F @ F^H = corr_blocks[m, k]."""
        if self._factors is None:
            try:
                self._factors = np.linalg.cholesky(self.corr_blocks)
            except np.linalg.LinAlgError as exc:
                raise ValueError("correlation block is not positive definite") from exc
        return self._factors


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of every small-scale coefficient, indexed ``h[m, l, k, n]``."""

    h: np.ndarray  # (M, L, K, N) complex


def grid_points(nx: int, ny: int, spacing: float) -> np.ndarray:
    """Candidate positions ``(i*spacing, j*spacing)`` as an (nx*ny, 2) array."""
    xs = np.arange(nx) * spacing
    ys = np.arange(ny) * spacing
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def pathloss_linear(distance_3d, params: PathlossParams,
                    rng: np.random.Generator | None = None, *,
                    freq_ghz: float = 28.0, shadowing: bool = True):
    """Linear power gain ``beta = 10^(-PL_dB/10)`` including shadowing.

    ``distance_3d`` may be a scalar or an array of 3-D distances in meters.
    Each link is LOS with probability ``exp(-d / params.los_decay_m)``
    (overridable via ``params.los_probability``); the non-LOS branch is
    floored at the LOS pathloss.  ``rng`` drives the per-link LOS states and,
    when ``shadowing`` is set, the log-normal shadowing term; without a
    generator the LOS state must be forced (``los_probability`` 0 or 1) and
    only the deterministic trend is returned.
    """
    d = np.asarray(distance_3d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("3-D distance must be positive")
    pl_los = _branch_db(d, freq_ghz, params.los_offset_db,
                        params.los_dist_coef_db, params.los_freq_coef_db)
    pl_nlos = np.maximum(
        pl_los, _branch_db(d, freq_ghz, params.nlos_offset_db,
                           params.nlos_dist_coef_db, params.nlos_freq_coef_db))
    if params.los_probability is None:
        if rng is None:
            raise ValueError("the LOS/NLOS mixture needs a random generator; "
                             "force los_probability to 0 or 1 for a deterministic trend")
        p_los = np.exp(-d / params.los_decay_m)
        is_los = rng.random(size=d.shape) < p_los
    elif rng is None:
        if params.los_probability not in (0.0, 1.0):
            raise ValueError("deterministic evaluation needs los_probability 0 or 1")
        is_los = np.full(d.shape, bool(params.los_probability))
    else:
        is_los = rng.random(size=d.shape) < params.los_probability
    pl = np.where(is_los, pl_los, pl_nlos)
    if rng is not None and shadowing:
        sigma = np.where(is_los, params.los_shadow_sigma_db, params.nlos_shadow_sigma_db)
        pl = pl + sigma * rng.standard_normal(size=d.shape)
    beta = 10.0 ** (-pl / 10.0)
    return float(beta) if np.ndim(distance_3d) == 0 else beta


def _branch_db(d: np.ndarray, freq_ghz: float, offset: float,
               dist_coef: float, freq_coef: float) -> np.ndarray:
    return offset + dist_coef * np.log10(d) + freq_coef * np.log10(freq_ghz)


def noise_variance(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Receiver noise power in watts: thermal floor -174 dBm/Hz plus NF."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    dbm = -174.0 + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def build_correlation(beta: float, l: int, n: int, rho_tx: float, rho_rx: float) -> np.ndarray:
    """Covariance block ``beta * (T ⊗ R)`` for the L*N stacked coefficients.

    ``T`` and ``R`` are exponential correlation matrices on the RU and UE
    antenna indices; stacking order is ``(l, n) -> l*n_per_ue + n``.  The
    result is Hermitian PSD with every diagonal entry equal to ``beta``.
    """
    if abs(rho_tx) >= 1 or abs(rho_rx) >= 1:
        raise ValueError("antenna correlation coefficients must satisfy |rho| < 1")
    idx_l = np.arange(l)
    idx_n = np.arange(n)
    t_corr = rho_tx ** np.abs(np.subtract.outer(idx_l, idx_l))
    r_corr = rho_rx ** np.abs(np.subtract.outer(idx_n, idx_n))
    return beta * np.kron(t_corr, r_corr).astype(complex)


def place_on_grids(config: SimConfig, rng: np.random.Generator) -> Deployment:
    """Draw a full deployment: grid positions, beta matrix, correlation blocks.

    RU and UE positions are distinct points of their respective grids; the
    result is fully determined by the generator state.
    """
    ru_candidates = grid_points(*config.ru_grid)
    ue_candidates = grid_points(*config.ue_grid)
    m, k = config.m_rus, config.k_ues
    if m > len(ru_candidates):
        raise ValueError(f"requested {m} RUs but the grid has {len(ru_candidates)} points")
    if k > len(ue_candidates):
        raise ValueError(f"requested {k} UEs but the grid has {len(ue_candidates)} points")
    ru_pos = ru_candidates[rng.choice(len(ru_candidates), size=m, replace=False)]
    ue_pos = ue_candidates[rng.choice(len(ue_candidates), size=k, replace=False)]

    dz = config.ru_height_m - config.ue_height_m
    d2 = np.linalg.norm(ru_pos[:, None, :] - ue_pos[None, :, :], axis=-1)
    d3d = np.hypot(d2, dz)

    beta = pathloss_linear(d3d, config.pathloss, rng,
                           freq_ghz=config.carrier_ghz,
                           shadowing=config.shadowing)

    ln = config.l_per_ru * config.n_per_ue
    base = build_correlation(1.0, config.l_per_ru, config.n_per_ue,
                             config.rho_tx, config.rho_rx)
    corr = beta[:, :, None, None] * base[None, None, :, :]
    assert corr.shape == (m, k, ln, ln)
    return Deployment(
        ru_positions=ru_pos,
        ue_positions=ue_pos,
        l_per_ru=config.l_per_ru,
        n_per_ue=config.n_per_ue,
        beta=beta,
        corr_blocks=corr,
        rho_tx=config.rho_tx,
        rho_rx=config.rho_rx,
    )


def draw_coefficients(dep: Deployment, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent realizations, shape (size, M, L, K, N).

    Each (m, k) block is ``F @ z`` with ``z`` standard complex Gaussian and
    ``F`` the Cholesky factor of the block covariance; blocks are mutually
    independent.
    """
    factors = dep.corr_factors()
    m, k = dep.n_rus, dep.n_ues
    ln = dep.l_per_ru * dep.n_per_ue
    z = rng.standard_normal((size, m, k, ln, 2))
    z = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
    stacked = np.einsum("mkab,tmkb->tmka", factors, z)
    return stacked.reshape(size, m, k, dep.l_per_ru, dep.n_per_ue).transpose(0, 1, 3, 2, 4)


def sample_realization(dep: Deployment, rng: np.random.Generator) -> ChannelRealization:
    """Draw one correlated Rayleigh realization of all coefficients."""
    return ChannelRealization(h=draw_coefficients(dep, rng, 1)[0])


def save_deployment(dep: Deployment, directory: str | os.PathLike) -> None:
    """Persist a deployment as positions.csv + deployment.json for reuse."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "positions.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "x_m", "y_m"])
        for i, (x, y) in enumerate(dep.ru_positions):
            writer.writerow(["ru", i, repr(float(x)), repr(float(y))])
        for i, (x, y) in enumerate(dep.ue_positions):
            writer.writerow(["ue", i, repr(float(x)), repr(float(y))])
    meta = {
        "l_per_ru": dep.l_per_ru,
        "n_per_ue": dep.n_per_ue,
        "rho_tx": dep.rho_tx,
        "rho_rx": dep.rho_rx,
        "beta": [[repr(float(b)) for b in row] for row in dep.beta],
    }
    with open(os.path.join(directory, "deployment.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def load_deployment(directory: str | os.PathLike) -> Deployment:
    """Rebuild a deployment saved by :func:`save_deployment`.

    Correlation blocks are reconstructed from (beta, rho) with the Kronecker
    exponential model, which is the only structure this project generates.
    """
    ru_rows, ue_rows = [], []
    with open(os.path.join(directory, "positions.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            target = ru_rows if row["kind"] == "ru" else ue_rows
            target.append((int(row["index"]), float(row["x_m"]), float(row["y_m"])))
    ru_rows.sort()
    ue_rows.sort()
    ru_pos = np.array([[x, y] for _, x, y in ru_rows], dtype=float)
    ue_pos = np.array([[x, y] for _, x, y in ue_rows], dtype=float)
    with open(os.path.join(directory, "deployment.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    beta = np.array([[float(b) for b in row] for row in meta["beta"]], dtype=float)
    l, n = int(meta["l_per_ru"]), int(meta["n_per_ue"])
    base = build_correlation(1.0, l, n, float(meta["rho_tx"]), float(meta["rho_rx"]))
    corr = beta[:, :, None, None] * base[None, None, :, :]
    return Deployment(
        ru_positions=ru_pos, ue_positions=ue_pos, l_per_ru=l, n_per_ue=n,
        beta=beta, corr_blocks=corr,
        rho_tx=float(meta["rho_tx"]), rho_rx=float(meta["rho_rx"]),
    )
