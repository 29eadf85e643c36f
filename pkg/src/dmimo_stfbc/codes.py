"""Alamouti-like orthogonal designs and their matched-filter transceiver.

Four designs are supported, identified by ``(M, P, T)`` = number of transmit
antennas, complex symbols per period, and code period:

    C111  (1, 1, 1)  rate 1     direct transmission, no diversity
    C222  (2, 2, 2)  rate 1     classic Alamouti
    C334  (3, 3, 4)  rate 3/4
    C468  (4, 6, 8)  rate 3/4

Each design is stored as a sparse per-symbol column table: for symbol ``p``
the table lists ``(time_slot, antenna, sign, conjugate)`` entries describing
where ``+/- s_p`` or ``+/- s_p*`` is placed on the T x M transmit grid.  The
same table, with the channel gain substituted for the symbol, yields the
effective per-symbol channel vector seen after the receiver conjugates the
"starred" time slots, e.g. for C222 and gains (h1, h2):

    v(s_0) = (h1, h2*)        v(s_1) = (h2, -h1*)

Columns of the transmit grid stay mutually orthogonal for every symbol
value, so matched filtering recovers each symbol with combining gain
``sum_m |h_m|^2`` and zero interference from the other in-period symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lcm

import numpy as np

__all__ = [
    "CodeSpec",
    "CODE_IDS",
    "T0_WINDOW",
    "get_code",
    "code_for_antennas",
    "symbol_channel_vector",
    "encode_block",
    "combine_block",
]

# One table entry: (time_slot, antenna, sign, conjugate).
Entry = tuple[int, int, int, bool]


@dataclass(frozen=True)
class CodeSpec:
    """An orthogonal design plus its sparse per-symbol column structure."""

    id: str
    m_tx: int
    p_syms: int
    t_period: int
    columns: tuple[tuple[Entry, ...], ...]

    @property
    def rate(self) -> float:
        return self.p_syms / self.t_period

    @property
    def conjugated_slots(self) -> tuple[bool, ...]:
        """Which received time slots the decoder conjugates.

        Every slot of these designs is homogeneous: it carries either only
        plain symbols or only conjugated ones (validated at import).
        """
        flags = [False] * self.t_period
        for col in self.columns:
            for t, _, _, conj in col:
                flags[t] = conj
        return tuple(flags)


# Column tables transcribed from the four design matrices (0-based symbols).
_C111 = CodeSpec(
    id="C111", m_tx=1, p_syms=1, t_period=1,
    columns=(((0, 0, +1, False),),),
)

_C222 = CodeSpec(
    id="C222", m_tx=2, p_syms=2, t_period=2,
    columns=(
        ((0, 0, +1, False), (1, 1, +1, True)),
        ((0, 1, +1, False), (1, 0, -1, True)),
    ),
)

_C334 = CodeSpec(
    id="C334", m_tx=3, p_syms=3, t_period=4,
    columns=(
        ((0, 0, +1, False), (1, 1, +1, True), (2, 2, +1, True)),
        ((0, 1, +1, False), (1, 0, -1, True), (3, 2, +1, True)),
        ((0, 2, +1, False), (2, 0, -1, True), (3, 1, -1, True)),
    ),
)

_C468 = CodeSpec(
    id="C468", m_tx=4, p_syms=6, t_period=8,
    columns=(
        ((0, 0, +1, False), (1, 1, +1, True), (2, 2, +1, True), (4, 3, +1, False)),
        ((0, 1, +1, False), (1, 0, -1, True), (3, 2, +1, True), (5, 3, +1, False)),
        ((0, 2, +1, False), (2, 0, -1, True), (3, 1, -1, True), (6, 3, +1, False)),
        ((1, 3, +1, True), (4, 1, -1, False), (5, 0, +1, False), (7, 2, -1, True)),
        ((2, 3, +1, True), (4, 2, -1, False), (6, 0, +1, False), (7, 1, +1, True)),
        ((3, 3, +1, True), (5, 2, -1, False), (6, 1, +1, False), (7, 0, -1, True)),
    ),
)

_CODES = {c.id: c for c in (_C111, _C222, _C334, _C468)}
_BY_ANTENNAS = {c.m_tx: c for c in _CODES.values()}

CODE_IDS = tuple(_CODES)

# Common interference-accounting window: lcm of all code periods in the set.
T0_WINDOW = lcm(*(c.t_period for c in _CODES.values()))


def get_code(code_id: str) -> CodeSpec:
    """Return the fixed design for ``code_id`` in {C111, C222, C334, C468}."""
    try:
        return _CODES[code_id]
    except KeyError:
        raise ValueError(f"unknown code id {code_id!r}; expected one of {CODE_IDS}") from None


def code_for_antennas(m_tx: int) -> CodeSpec:
    """Return the design used by a cluster with ``m_tx`` transmit antennas."""
    try:
        return _BY_ANTENNAS[m_tx]
    except KeyError:
        raise ValueError(f"no design with {m_tx} transmit antennas (1..4 supported)") from None


def symbol_channel_vector(code: CodeSpec, sym_index: int, link_gains) -> np.ndarray:
    """Effective length-T channel vector for one symbol.

    ``link_gains`` holds the M complex gains from the code's antennas to one
    receive antenna.  Slot ``t`` carries ``sign * h_m`` or ``sign * h_m*``
    following the design's transform for that symbol; untouched slots are 0.
    """
    if not 0 <= sym_index < code.p_syms:
        raise IndexError(f"symbol index {sym_index} out of range for {code.id} (P={code.p_syms})")
    h = np.asarray(link_gains, dtype=complex)
    if h.shape != (code.m_tx,):
        raise ValueError(f"expected {code.m_tx} link gains, got shape {h.shape}")
    v = np.zeros(code.t_period, dtype=complex)
    for t, m, sign, conj in code.columns[sym_index]:
        v[t] = sign * (h[m].conjugate() if conj else h[m])
    return v


def encode_block(code: CodeSpec, symbols) -> np.ndarray:
    """Map P complex symbols onto the T x M transmit grid of the design."""
    s = np.asarray(symbols, dtype=complex)
    if s.shape != (code.p_syms,):
        raise ValueError(f"expected {code.p_syms} symbols for {code.id}, got shape {s.shape}")
    grid = np.zeros((code.t_period, code.m_tx), dtype=complex)
    for p in range(code.p_syms):
        for t, m, sign, conj in code.columns[p]:
            grid[t, m] = sign * (s[p].conjugate() if conj else s[p])
    return grid


def combine_block(code: CodeSpec, sym_index: int, link_gains, received) -> tuple[complex, float]:
    """Matched-filter one symbol out of a received code block.

    ``received`` holds the T raw samples of one receive antenna.  Assumes the
    receiver knows ``link_gains`` exactly.  Returns ``(estimate, gain)`` with
    ``gain = sum_m |h_m|^2``; noiseless, ``estimate == gain * s_sym`` and the
    other in-period symbols contribute exactly zero.
    """
    r = np.asarray(received, dtype=complex)
    if r.shape != (code.t_period,):
        raise ValueError(f"expected {code.t_period} received samples, got shape {r.shape}")
    v = symbol_channel_vector(code, sym_index, link_gains)
    r_adj = np.where(code.conjugated_slots, r.conjugate(), r)
    estimate = complex(v.conjugate() @ r_adj)
    gain = float(np.sum(np.abs(np.asarray(link_gains, dtype=complex)) ** 2))
    return estimate, gain


def _validate_tables() -> None:
    # Structural invariants of the stored designs; orthogonality itself is
    # exercised by the test suite over random symbol draws.
    expected_rates = {"C111": (1, 1), "C222": (2, 2), "C334": (3, 4), "C468": (6, 8)}
    for code in _CODES.values():
        p, t = expected_rates[code.id]
        if (code.p_syms, code.t_period) != (p, t):
            raise AssertionError(f"{code.id}: stored (P, T) disagree with the design table")
        slot_conj: dict[int, bool] = {}
        used_slots = set()
        for col in code.columns:
            antennas = [m for _, m, _, _ in col]
            if sorted(antennas) != list(range(code.m_tx)):
                raise AssertionError(f"{code.id}: symbol column must touch every antenna once")
            for t_slot, m, sign, conj in col:
                if (t_slot, m) in used_slots:
                    raise AssertionError(f"{code.id}: grid slot ({t_slot}, {m}) used twice")
                used_slots.add((t_slot, m))
                if sign not in (-1, +1):
                    raise AssertionError(f"{code.id}: bad sign {sign}")
                if slot_conj.setdefault(t_slot, conj) != conj:
                    raise AssertionError(f"{code.id}: slot {t_slot} mixes plain and conjugated symbols")


_validate_tables()
