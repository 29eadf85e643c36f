"""Trial-based evaluation: SINR draws, outage quantiles, MC rate means.

The desired power of every symbol of a user is the same quadratic form of
the user's stacked coefficient vector, so one array of trials per user
covers all of the user's symbols; interference enters the SINR only through
its long-term mean.  Outage spectral efficiency follows the four-step
procedure: draw trials, form SINRs, read the outage-probability quantile off
the empirical distribution, then rate the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Deployment
from .clustering import ClusterAssignment
from .rates import interference_profile, interference_scale, subcovariance

__all__ = ["SinrSamples", "OutageResult", "sinr_realizations", "outage_se", "mc_mean_log"]

_BLOCK = 200_000  # trials per generation block; keeps peak memory flat


@dataclass(frozen=True)
class SinrSamples:
    """Per-user SINR trials plus the symbol bookkeeping of the window.

    ``symbol_ids[k]`` lists the global indices (within one t0 window) of the
    symbols intended for user k; every one of them shares the same trial
    array ``user_sinr[k]`` because their desired statistics coincide.
    """

    user_sinr: np.ndarray                    # (K, n_trial) linear SINRs
    symbol_ids: tuple[tuple[int, ...], ...]  # per user
    t0: int

    @property
    def n_trial(self) -> int:
        return self.user_sinr.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_sinr.shape[0]

    def samples(self, k: int, symbol_id: int) -> np.ndarray:
        if symbol_id not in self.symbol_ids[k]:
            raise KeyError(f"symbol {symbol_id} is not intended for user {k}")
        return self.user_sinr[k]


def _window_symbol_ids(assignment: ClusterAssignment, n_ues: int) -> tuple[tuple[int, ...], ...]:
    # Global symbol ids: clusters in order, each repeating its period over
    # the t0 window; repeated periods carry independent symbols.
    per_user: list[list[int]] = [[] for _ in range(n_ues)]
    next_id = 0
    for c in assignment.clusters:
        reps = assignment.t0 // c.code.t_period
        mapping = c.symbol_map
        for _ in range(reps):
            for p in range(c.code.p_syms):
                per_user[mapping[p]].append(next_id)
                next_id += 1
    return tuple(tuple(ids) for ids in per_user)


def sinr_realizations(assignment: ClusterAssignment, dep: Deployment, n_trial: int,
                      rng: np.random.Generator, p_t: float, noise_w: float) -> SinrSamples:
    """Draw ``n_trial`` per-user SINR realizations for an assignment.

    Per trial the numerator is the combining gain ``sum_n x^H x * P_t`` of the
    user's stacked coefficients (drawn from its cluster covariance); the
    denominator is the interference mean times P_t plus receiver noise.
    Identical generator state yields bit-identical samples; per-user streams
    are split off ``rng`` so the draw order per user is fixed.
    """
    if n_trial < 1000:
        raise ValueError("need at least 1000 trials for meaningful statistics")
    profile = interference_profile(assignment, dep)
    k_total = dep.n_ues
    out = np.empty((k_total, n_trial))
    user_rngs = rng.spawn(k_total)
    for c in assignment.clusters:
        for k in c.ues:
            r_k = subcovariance(dep, c.ru_antennas, k)
            factor = np.linalg.cholesky(r_k)
            denom = interference_scale(profile, k, p_t, noise_w, assignment.t0)
            gen = user_rngs[k]
            d = r_k.shape[0]
            pos = 0
            while pos < n_trial:
                count = min(_BLOCK, n_trial - pos)
                z = gen.standard_normal((count, d, 2))
                x = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0) @ factor.T
                out[k, pos:pos + count] = np.einsum("td,td->t", x, x.conj()).real / denom
                pos += count
    return SinrSamples(
        user_sinr=out,
        symbol_ids=_window_symbol_ids(assignment, k_total),
        t0=assignment.t0,
    )


@dataclass(frozen=True)
class OutageResult:
    """Outage thresholds and rates at a fixed outage probability."""

    sinr_min: np.ndarray      # (K,) linear threshold per user (same for all its symbols)
    se_outage: np.ndarray     # (K,) bits/s/Hz
    p_out: float


def outage_se(samples: SinrSamples, p_out: float, t0: int | None = None) -> OutageResult:
    """Empirical outage spectral efficiency from SINR trials.

    The threshold is the k-th order statistic with ``k = max(1,
    floor(p_out * n_trial))``; the rate prices each of the user's window
    symbols at the threshold and scales by ``(1 - p_out) / t0``.
    """
    if not 0.0 < p_out < 1.0:
        raise ValueError("p_out must lie in (0, 1)")
    n = samples.n_trial
    if n * p_out < 10:
        raise ValueError(
            f"quantile unreliable: n_trial * p_out = {n * p_out:.1f} < 10")
    t0 = samples.t0 if t0 is None else t0
    k_idx = max(1, int(np.floor(p_out * n)))
    thresholds = np.partition(samples.user_sinr, k_idx - 1, axis=1)[:, k_idx - 1]
    n_syms = np.array([len(ids) for ids in samples.symbol_ids])
    se = (1.0 - p_out) * n_syms / t0 * np.log2(1.0 + thresholds)
    return OutageResult(sinr_min=thresholds, se_outage=se, p_out=p_out)


def mc_mean_log(samples: SinrSamples, t0: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo ergodic rates ``(se, standard_error)`` per user."""
    t0 = samples.t0 if t0 is None else t0
    logs = np.log2(1.0 + samples.user_sinr)
    n_syms = np.array([len(ids) for ids in samples.symbol_ids])
    weight = n_syms / t0
    se = weight * logs.mean(axis=1)
    stderr = weight * logs.std(axis=1, ddof=1) / np.sqrt(samples.n_trial)
    return se, stderr
