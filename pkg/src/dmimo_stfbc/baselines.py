"""Baseline transmission schemes: small-cell, SFN, and MRT variants.

All baselines share one signal model: RU ``m`` transmits
``x_m = sum_k sqrt(P_t * eta[m, k]) W[m, k] q_k`` under a per-antenna power
limit ``P_t``.  Methods without transmitter CSI (small-cell, SFN) send a
single layer with an all-ones combining vector; MRT precodes with the
conjugated channel and sends one layer per UE antenna.

Serving sets and power control:

* small-cell: the strongest RU serves the user with ``eta = 1`` (verbatim
  rule; the per-RU sum constraint can be violated when one RU is best for
  several users -- audited, never silently renormalized),
* SFN: the smallest strongest-RU prefix covering 95% of the user's total
  long-term gain, each RU splitting power equally over its users,
* MRT: same serving rules (95% or single RU) with ``eta[m, k] =
  1 / sum_{l in V_m} N_l * beta[m, l]``, which meets the per-antenna
  constraint in expectation.

Effective channels fold ``sqrt(P_t)`` in, so spectral efficiencies divide
received desired power by (interference mean + noise) directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, Deployment, draw_coefficients
from .montecarlo import SinrSamples

__all__ = [
    "ServingMap",
    "EffectiveChannel",
    "BaselineRates",
    "select_rus_95",
    "smallcell_map",
    "sfn_map",
    "mrt_map",
    "effective_channels",
    "baseline_se",
    "power_constraint_values",
    "power_audit_mc",
]

_BLOCK = 8192


@dataclass(frozen=True)
class ServingMap:
    """Serving sets, power-control coefficients, and the layering mode."""

    label: str
    eta: np.ndarray          # (M, K) power-control coefficients
    multilayer: bool
    uses_precoding: bool

    @property
    def serving(self) -> np.ndarray:
        """Boolean (M, K): does RU m serve user k."""
        return self.eta > 0

    def u_set(self, k: int) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.serving[:, k]))

    def v_set(self, m: int) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.serving[m, :]))


@dataclass(frozen=True)
class EffectiveChannel:
    """Per (receiving user, transmitted user) effective channel matrices.

    ``d[k, l]`` has shape (N,) in single-layer mode and (N, N) in multi-layer
    mode; the transmit power factor sqrt(P_t) is included.
    """

    d: np.ndarray
    multilayer: bool


def select_rus_95(beta_col: np.ndarray) -> tuple[int, ...]:
    """Smallest descending-sorted RU prefix holding >= 95% of the total gain."""
    beta_col = np.asarray(beta_col, dtype=float)
    order = np.argsort(-beta_col, kind="stable")
    cum = np.cumsum(beta_col[order])
    count = int(np.searchsorted(cum, 0.95 * cum[-1])) + 1
    return tuple(int(m) for m in order[:count])


def smallcell_map(dep: Deployment) -> ServingMap:
    """Each user served by its strongest RU at full per-user power."""
    eta = np.zeros_like(dep.beta)
    for k in range(dep.n_ues):
        eta[int(np.argmax(dep.beta[:, k])), k] = 1.0
    return ServingMap("smallcell", eta, multilayer=False, uses_precoding=False)


def sfn_map(dep: Deployment) -> ServingMap:
    """95%-rule serving sets; each RU splits power equally over its users."""
    serving = np.zeros_like(dep.beta, dtype=bool)
    for k in range(dep.n_ues):
        serving[list(select_rus_95(dep.beta[:, k])), k] = True
    v_sizes = serving.sum(axis=1)
    eta = np.zeros_like(dep.beta)
    for m in range(dep.n_rus):
        if v_sizes[m]:
            eta[m, serving[m]] = 1.0 / v_sizes[m]
    return ServingMap("sfn", eta, multilayer=False, uses_precoding=False)


def mrt_map(dep: Deployment, mode: str = "p95") -> ServingMap:
    """Conjugate-channel precoding with statistically normalized power.

    ``mode`` selects the serving rule: ``"p95"`` uses the 95% prefix,
    ``"single_ru"`` the strongest RU only.
    """
    if mode not in ("p95", "single_ru"):
        raise ValueError(f"unknown MRT mode {mode!r}")
    serving = np.zeros_like(dep.beta, dtype=bool)
    for k in range(dep.n_ues):
        if mode == "p95":
            serving[list(select_rus_95(dep.beta[:, k])), k] = True
        else:
            serving[int(np.argmax(dep.beta[:, k])), k] = True
    eta = np.zeros_like(dep.beta)
    n = dep.n_per_ue
    for m in range(dep.n_rus):
        served = np.flatnonzero(serving[m])
        if served.size:
            load = float(n * dep.beta[m, served].sum())
            eta[m, served] = 1.0 / load
    label = "mrt95" if mode == "p95" else "mrt1ru"
    return ServingMap(label, eta, multilayer=True, uses_precoding=True)


def _effective_block(map_: ServingMap, h: np.ndarray, p_t: float) -> np.ndarray:
    """Effective channels for a block of draws h with shape (B, M, L, K, N).

    Returns (B, K, K, N) single-layer or (B, K, K, N, N) multi-layer.
    """
    w = np.sqrt(map_.eta)
    if map_.multilayer:
        d = np.einsum("mj,bmlkn,bmlju->bkjnu", w, h, h.conj(), optimize=True)
    else:
        d = np.einsum("ml,bmkn->bkln", w, h.sum(axis=2), optimize=True)
    return np.sqrt(p_t) * d


def effective_channels(map_: ServingMap, realization: ChannelRealization,
                       p_t: float) -> EffectiveChannel:
    """Effective channel matrices for one channel realization."""
    d = _effective_block(map_, realization.h[None, ...], p_t)[0]
    return EffectiveChannel(d=d, multilayer=map_.multilayer)


@dataclass(frozen=True)
class BaselineRates:
    """Per-user spectral efficiencies of one baseline run."""

    label: str
    rx_csi: str
    se: np.ndarray                      # (K,) bits/s/Hz
    stderr: np.ndarray                  # (K,) MC standard error (0 if exact)
    samples: SinrSamples | None         # single-layer SINR trials, else None


def baseline_se(map_: ServingMap, dep: Deployment, rx_csi: str, n_trial: int,
                rng: np.random.Generator, p_t: float, noise_w: float) -> BaselineRates:
    """Monte-Carlo spectral efficiency of a baseline scheme.

    Perfect receiver CSI averages the instantaneous rate over draws (log for
    a single layer, log-det across layers).  Statistical receiver CSI, defined
    for the precoded MRT schemes only, rates the mean effective channel
    against the total received fluctuation.
    """
    if rx_csi not in ("perfect", "statistical"):
        raise ValueError(f"unknown rx csi mode {rx_csi!r}")
    if rx_csi == "statistical" and not map_.uses_precoding:
        raise ValueError("statistical rx-csi is only defined for precoded (MRT) schemes")

    k_total, n = dep.n_ues, dep.n_per_ue
    if map_.multilayer:
        desired = np.empty((n_trial, k_total, n, n), dtype=complex)
    else:
        desired_power = np.empty((n_trial, k_total))
    cross_sum = np.zeros((k_total, k_total))  # sum over draws of ||D_{k,l}||_F^2
    cross_mat_sum = np.zeros((k_total, k_total, n, n), dtype=complex)

    pos = 0
    while pos < n_trial:
        count = min(_BLOCK, n_trial - pos)
        h = draw_coefficients(dep, rng, count)
        d = _effective_block(map_, h, p_t)
        if map_.multilayer:
            desired[pos:pos + count] = d[:, np.arange(k_total), np.arange(k_total)]
            cross_mat_sum += np.einsum("bkjnu,bkjvu->kjnv", d, d.conj(), optimize=True)
        else:
            power = np.einsum("bkln,bkln->bkl", d, d.conj(), optimize=True).real
            desired_power[pos:pos + count] = power[:, np.arange(k_total), np.arange(k_total)]
            cross_sum += power.sum(axis=0)
        pos += count

    off_diag = ~np.eye(k_total, dtype=bool)

    if not map_.multilayer:
        interf = np.where(off_diag, cross_sum / n_trial, 0.0).sum(axis=1)  # (K,)
        sinr = desired_power / (interf[None, :] + noise_w)
        logs = np.log2(1.0 + sinr)
        se = logs.mean(axis=0)
        stderr = logs.std(axis=0, ddof=1) / np.sqrt(n_trial)
        samples = SinrSamples(
            user_sinr=np.ascontiguousarray(sinr.T),
            symbol_ids=tuple((k,) for k in range(k_total)),
            t0=1,
        )
        return BaselineRates(map_.label, rx_csi, se, stderr, samples)

    cross_mean = cross_mat_sum / n_trial  # (K, K, N, N) E[D D^H]
    if rx_csi == "perfect":
        se = np.empty(k_total)
        stderr = np.empty(k_total)
        eye = np.eye(n)
        for k in range(k_total):
            psi = cross_mean[k, off_diag[k]].sum(axis=0) + noise_w * eye
            psi = (psi + psi.conj().T) / 2
            psi_inv = np.linalg.inv(psi)
            inner = eye + np.einsum("bnu,nv,bvw->buw",
                                    desired[:, k].conj(), psi_inv, desired[:, k],
                                    optimize=True)
            _, logdet = np.linalg.slogdet(inner)
            rates = logdet / np.log(2.0)
            se[k] = rates.mean()
            stderr[k] = rates.std(ddof=1) / np.sqrt(n_trial)
        return BaselineRates(map_.label, rx_csi, se, stderr, None)

    # Statistical receiver CSI: only the mean effective channel is known; the
    # fluctuation around it joins interference and noise in the denominator.
    se = np.empty(k_total)
    eye = np.eye(n)
    d_bar = desired.mean(axis=0)  # (K, N, N)
    for k in range(k_total):
        total = cross_mean[k].sum(axis=0)  # includes l = k
        psi = total - d_bar[k] @ d_bar[k].conj().T + noise_w * eye
        psi = (psi + psi.conj().T) / 2
        inner = eye + d_bar[k].conj().T @ np.linalg.inv(psi) @ d_bar[k]
        _, logdet = np.linalg.slogdet(inner)
        se[k] = logdet / np.log(2.0)
    return BaselineRates(map_.label, rx_csi, se, np.zeros(k_total), None)


def power_constraint_values(map_: ServingMap, dep: Deployment) -> np.ndarray:
    """Per-RU expected antenna load, normalized so values <= 1 comply.

    Single layer: ``sum_k eta[m, k]``.  Multi layer: ``sum_k eta[m, k] * N *
    beta[m, k]`` (the diagonal of E[W W^H] for conjugate precoding).
    """
    if map_.multilayer:
        return (map_.eta * dep.n_per_ue * dep.beta).sum(axis=1)
    return map_.eta.sum(axis=1)


def power_audit_mc(map_: ServingMap, dep: Deployment, rng: np.random.Generator,
                   n_trial: int) -> np.ndarray:
    """Monte-Carlo estimate of per-antenna load E[|x_m,i|^2] / P_t, shape (M, L)."""
    m, l = dep.n_rus, dep.l_per_ru
    acc = np.zeros((m, l))
    pos = 0
    while pos < n_trial:
        count = min(_BLOCK, n_trial - pos)
        h = draw_coefficients(dep, rng, count)
        if map_.multilayer:
            # x_m = sum_k sqrt(eta) H_{m,k}^H q_k with unit-power layers:
            # E|[x_m]_i|^2 = sum_k eta[m,k] * sum_n |h[m,i,k,n]|^2 per draw.
            load = np.einsum("mk,bmlkn,bmlkn->bml", map_.eta, h, h.conj(),
                             optimize=True).real
        else:
            # x_m = sum_k sqrt(eta) 1_L s_k: E|[x_m]_i|^2 = sum_k eta[m,k].
            load = np.broadcast_to(map_.eta.sum(axis=1)[None, :, None], (count, m, l))
        acc += load.sum(axis=0)
        pos += count
    return acc / n_trial
