import numpy as np
import pytest

from dmimo_stfbc.codes import (CODE_IDS, T0_WINDOW, code_for_antennas,
                               combine_block, encode_block, get_code,
                               symbol_channel_vector)

RATE_TABLE = {"C111": (1, 1, 1), "C222": (2, 2, 2), "C334": (3, 3, 4), "C468": (4, 6, 8)}


def random_symbols(rng, p):
    return rng.standard_normal(p) + 1j * rng.standard_normal(p)


def test_get_code_table_entries():
    c222 = get_code("C222")
    assert (c222.m_tx, c222.p_syms, c222.t_period) == (2, 2, 2)
    assert c222.rate == 1.0
    c468 = get_code("C468")
    assert (c468.m_tx, c468.p_syms, c468.t_period) == (4, 6, 8)
    assert c468.rate == 0.75
    c111 = get_code("C111")
    assert (c111.m_tx, c111.p_syms, c111.t_period) == (1, 1, 1)


def test_rate_matches_table_for_all_codes():
    for cid, (m, p, t) in RATE_TABLE.items():
        code = get_code(cid)
        assert (code.m_tx, code.p_syms, code.t_period) == (m, p, t)
        assert code.rate == p / t


def test_get_code_rejects_unknown_id():
    with pytest.raises(ValueError):
        get_code("C999")


def test_code_for_antennas_roundtrip():
    for cid in CODE_IDS:
        code = get_code(cid)
        assert code_for_antennas(code.m_tx) is code
    with pytest.raises(ValueError):
        code_for_antennas(5)


def test_t0_window_is_lcm_of_periods():
    assert T0_WINDOW == 8


def test_symbol_channel_vector_alamouti_first_column():
    h1, h2 = 0.3 + 0.7j, -1.1 + 0.2j
    v = symbol_channel_vector(get_code("C222"), 0, [h1, h2])
    assert np.allclose(v, [h1, np.conj(h2)])
    v2 = symbol_channel_vector(get_code("C222"), 1, [h1, h2])
    assert np.allclose(v2, [h2, -np.conj(h1)])


def test_symbol_channel_vector_c468_second_symbol():
    h = np.array([1 + 1j, 2 - 1j, -0.5 + 2j, 0.25 - 0.75j])
    v = symbol_channel_vector(get_code("C468"), 1, h)
    expected = [h[1], -np.conj(h[0]), 0, np.conj(h[2]), 0, h[3], 0, 0]
    assert np.allclose(v, expected)


def test_symbol_channel_vector_trivial_code():
    assert symbol_channel_vector(get_code("C111"), 0, [2 - 3j]) == np.array([2 - 3j])


def test_symbol_channel_vector_index_out_of_range():
    with pytest.raises(IndexError):
        symbol_channel_vector(get_code("C222"), 2, [1.0, 1.0])


def test_encode_block_alamouti_matrix():
    s1, s2 = 1 + 2j, 3 - 1j
    grid = encode_block(get_code("C222"), [s1, s2])
    assert np.allclose(grid, [[s1, s2], [-np.conj(s2), np.conj(s1)]])


def test_encode_block_unit_symbol_gives_identity():
    assert np.allclose(encode_block(get_code("C222"), [1, 0]), np.eye(2))


def test_encode_block_length_mismatch():
    with pytest.raises(ValueError):
        encode_block(get_code("C334"), [1.0, 2.0])


def test_encode_block_gramian_oracle(rng):
    # Independent oracle: direct matrix multiplication of the encoded grid.
    code = get_code("C334")
    s = random_symbols(rng, code.p_syms)
    grid = encode_block(code, s)
    gram = grid.conj().T @ grid
    assert np.allclose(gram, np.eye(code.m_tx) * np.sum(np.abs(s) ** 2), atol=1e-12)


def test_orthogonality_property_all_codes_1000_draws(rng):
    for cid in CODE_IDS:
        code = get_code(cid)
        for _ in range(1000):
            s = random_symbols(rng, code.p_syms)
            grid = encode_block(code, s)
            gram = grid.conj().T @ grid
            target = np.eye(code.m_tx) * np.sum(np.abs(s) ** 2)
            assert np.max(np.abs(gram - target)) < 1e-12


def test_grid_entries_are_allowed_transforms(rng):
    # Every populated grid slot is one of +/-s_p or +/-conj(s_p).
    for cid in CODE_IDS:
        code = get_code(cid)
        s = random_symbols(rng, code.p_syms)
        grid = encode_block(code, s)
        allowed = set()
        for sym in s:
            allowed |= {sym, -sym, np.conj(sym), -np.conj(sym)}
        for value in grid.ravel():
            if value != 0:
                assert any(np.isclose(value, a) for a in allowed)


def test_column_antenna_coverage():
    for cid in CODE_IDS:
        code = get_code(cid)
        for col in code.columns:
            antennas = sorted(m for _, m, _, _ in col)
            assert antennas == list(range(code.m_tx))


def test_channel_vectors_mutually_orthogonal(rng):
    for cid in CODE_IDS:
        code = get_code(cid)
        h = rng.standard_normal(code.m_tx) + 1j * rng.standard_normal(code.m_tx)
        vs = [symbol_channel_vector(code, p, h) for p in range(code.p_syms)]
        for i in range(code.p_syms):
            for j in range(i + 1, code.p_syms):
                assert abs(np.vdot(vs[i], vs[j])) < 1e-12


def test_combine_block_selects_first_antenna_path():
    code = get_code("C222")
    s = np.array([0.5 - 0.25j, -1 + 2j])
    grid = encode_block(code, s)
    h = np.array([1.0, 0.0])
    received = grid @ h
    estimate, gain = combine_block(code, 0, h, received)
    assert gain == pytest.approx(1.0)
    assert estimate == pytest.approx(s[0])


def test_combine_block_equal_gains_doubles_symbol():
    code = get_code("C222")
    s = np.array([0.5 - 0.25j, -1 + 2j])
    received = encode_block(code, s) @ np.array([1.0, 1.0])
    estimate, gain = combine_block(code, 0, [1.0, 1.0], received)
    assert gain == pytest.approx(2.0)
    assert estimate == pytest.approx(2 * s[0])


def test_combine_block_end_to_end_transceiver(rng):
    # Oracle: noiseless encode -> channel -> combine recovers every symbol.
    for cid in CODE_IDS:
        code = get_code(cid)
        h = rng.standard_normal(code.m_tx) + 1j * rng.standard_normal(code.m_tx)
        s = random_symbols(rng, code.p_syms)
        received = encode_block(code, s) @ h
        for p in range(code.p_syms):
            estimate, gain = combine_block(code, p, h, received)
            assert gain == pytest.approx(np.sum(np.abs(h) ** 2))
            assert abs(estimate / gain - s[p]) < 1e-10


def test_combine_block_cancels_other_symbols(rng):
    # Transmit only symbol q; every other matched filter output is zero.
    code = get_code("C468")
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    for q in range(code.p_syms):
        s = np.zeros(code.p_syms, dtype=complex)
        s[q] = 1.3 - 0.4j
        received = encode_block(code, s) @ h
        for p in range(code.p_syms):
            estimate, _ = combine_block(code, p, h, received)
            if p != q:
                assert abs(estimate) < 1e-10


def test_combine_block_shape_check():
    with pytest.raises(ValueError):
        combine_block(get_code("C222"), 0, [1.0, 1.0], [1.0, 2.0, 3.0])
