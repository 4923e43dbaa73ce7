import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqdpd.constellation import AmplitudeAlphabet, amplitude_alphabet
from seqdpd.errors import EvenPatternLength, FrameMismatch, LevelQuantizationError
from seqdpd.predistort import (
    PatternLUT,
    PatternTable,
    SequenceLUT,
    align_lanes,
    apply_pattern_lut,
    apply_sequence_lut,
    clip_bounds,
    decode_key,
    encode_pattern,
    pattern_keys,
    predistorter_storage,
    train_pattern_lut,
    train_sequence_lut,
)
from seqdpd.sequence import generate_frame
from seqdpd.waveform import align, cyclic_filter


def de_bruijn(L, n):
    """Cyclic sequence over ``range(L)`` containing every length-``n`` word once."""
    a = [0] * L * n
    seq = []

    def db(t, p):
        if t > n:
            if n % p == 0:
                seq.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, L):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return np.array(seq)


@pytest.fixture(scope="module")
def frame(cross128):
    return generate_frame(1, 4096, cross128)


@pytest.fixture(scope="module")
def alphabet(cross128):
    return amplitude_alphabet(cross128)


def test_pattern_keys_cyclic():
    idx = np.array([0, 1, 2, 3])
    keys = pattern_keys(idx, 3, 4)
    assert decode_key(keys[0], 3, 4) == (3, 0, 1)
    assert decode_key(keys[3], 3, 4) == (2, 3, 0)
    assert encode_pattern((3, 0, 1), 4) == keys[0]
    with pytest.raises(EvenPatternLength):
        pattern_keys(idx, 2, 4)


def test_zero_error(frame, alphabet):
    tx = frame.lane_array()[0]
    table = train_pattern_lut(tx, tx, alphabet, 3)
    assert np.all(table.average() == 0)


def test_constant_offset(frame, alphabet):
    tx = frame.lane_array()[1]
    table = train_pattern_lut(tx, tx + 0.05, alphabet, 3)
    assert np.allclose(table.average(), 0.05, atol=1e-15)
    assert np.allclose(apply_pattern_lut(tx, table, 1.0), tx - 0.05, atol=1e-15)


def test_cubic_per_level(frame, alphabet):
    tx = frame.lane_array()[2]
    table = train_pattern_lut(tx, tx - 0.1 * tx**3, alphabet, 1)
    for k, a in enumerate(alphabet.levels):
        s, cnt = table.entry((k,))
        assert s / cnt == pytest.approx(-0.1 * a**3, abs=1e-12)


def test_cubic_apply_reduces_residual(frame, alphabet):
    tx = frame.lane_array()[0]

    def f(v):
        return v - 0.1 * v**3

    table = train_pattern_lut(tx, f(tx), alphabet, 1)
    before = np.sqrt(np.mean((f(tx) - tx) ** 2))
    after = np.sqrt(np.mean((f(apply_pattern_lut(tx, table)) - tx) ** 2))
    assert after < before


def test_empty_lut_is_identity(frame, alphabet):
    tx = frame.lane_array()
    out, clipped = PatternLUT.empty(3, alphabet).apply(tx)
    assert np.array_equal(out, tx) and clipped == 0


def test_unseen_pattern_uncorrected(alphabet):
    tx = np.full(8, alphabet.levels[3])
    table = train_pattern_lut(tx, tx + 0.1, alphabet, 3)
    probe = np.full(8, alphabet.levels[5])
    assert np.array_equal(apply_pattern_lut(probe, table), probe)


def test_off_level_amplitude(alphabet):
    tx = np.array([alphabet.levels[0], alphabet.levels[-1] + 0.6 * alphabet.min_gap])
    with pytest.raises(LevelQuantizationError):
        train_pattern_lut(tx, tx, alphabet, 1)


def test_clipping_counts(alphabet):
    tx = np.array([alphabet.levels[-1]] * 4 + [alphabet.levels[0]] * 4)
    lut = PatternLUT.empty(1, alphabet, lanes=1)
    lut.train(tx[None], (tx - 10.0)[None])  # correction pushes far above the top level
    out, clipped = lut.apply(tx[None])
    lo, hi = clip_bounds(alphabet)
    assert clipped == 8
    assert out.max() == hi
    raw, none = lut.apply(tx[None], clip=False)
    assert none == 0 and raw.max() > hi


def identity(x):
    return np.array(x, dtype=float)


def test_sw_identity_channel(frame):
    tx = frame.lane_array()
    lut = SequenceLUT.zeros(tx)
    for _ in range(4):
        train_sequence_lut(tx, lut, identity)
    assert lut.iterations == 4
    assert np.all(lut.errors == 0)


def test_sw_gain_channel(frame):
    tx = frame.lane_array()
    lut = SequenceLUT.zeros(tx)
    for _ in range(3):
        train_sequence_lut(tx, lut, lambda x: 0.9 * x)
    assert np.max(np.abs(lut.errors)) < 1e-12


def test_sw_tanh_fixed_point(frame):
    tx = frame.lane_array()
    vsat = np.max(np.abs(tx)) / 0.8

    def channel(x):
        return vsat * np.tanh(x / vsat)

    lut = SequenceLUT.zeros(tx)
    for _ in range(5):
        train_sequence_lut(tx, lut, channel)
    pd, _ = lut.apply(tx)
    rx = align_lanes(tx, channel(pd))
    assert np.max(np.abs(rx - tx)) < 1e-3 * np.max(np.abs(tx))
    assert all(b <= a for a, b in zip(lut.residuals, lut.residuals[1:]))


def test_sw_matches_scalar_oracle(frame):
    # per position the update is x <- x - (f(x) / gain - t)
    tx = frame.lane_array()[:, :256]
    vsat = np.max(np.abs(tx)) / 0.8

    def f(x):
        return vsat * np.tanh(x / vsat)

    lut = SequenceLUT.zeros(tx)
    x = tx.copy()
    for _ in range(5):
        gain = np.array([align(t, r)[1] for t, r in zip(tx, f(x))])[:, None]
        train_sequence_lut(tx, lut, f)
        x = x - (f(x) / gain - tx)
    assert np.allclose(tx - lut.errors, x, atol=1e-12)


def test_sw_apply_examples(frame):
    tx = frame.lane_array()
    lut = SequenceLUT.zeros(tx)
    out, _ = lut.apply(tx)
    assert np.array_equal(out, tx)
    assert np.allclose(apply_sequence_lut(tx[0], tx[0] / 2), tx[0] / 2)


def test_frame_mismatch(frame, cross128):
    tx = frame.lane_array()
    other = generate_frame(2, 4096, cross128).lane_array()
    lut = SequenceLUT.zeros(tx)
    with pytest.raises(FrameMismatch):
        lut.apply(other)
    with pytest.raises(FrameMismatch):
        train_sequence_lut(other, lut, identity)


def test_storage(cross128, alphabet):
    tx = generate_frame(1, 1 << 16, cross128).lane_array()
    assert predistorter_storage(SequenceLUT.zeros(tx)) == [65536] * 4
    lut1 = PatternLUT.empty(1, alphabet).train(tx, tx)
    assert predistorter_storage(lut1) == [12] * 4
    const = np.full((4, 100), alphabet.levels[4])
    assert predistorter_storage(PatternLUT.empty(3, alphabet).train(const, const)) == [1] * 4


def test_storage_36_levels():
    alpha = AmplitudeAlphabet(np.arange(36, dtype=float))
    tx = np.tile(np.arange(36.0), 5)[None]
    assert predistorter_storage(PatternLUT.empty(1, alpha, lanes=1).train(tx, tx)) == [36]


def test_storage_bounded(frame, alphabet):
    tx = frame.lane_array()
    for n in (3, 5):
        lut = PatternLUT.empty(n, alphabet).train(tx, tx)
        assert all(s <= min(tx.shape[1], alphabet.L**n) for s in lut.storage())


def test_pattern_lut_file_round_trip(tmp_path, frame, alphabet, rng):
    tx = frame.lane_array()
    lut = PatternLUT.empty(3, alphabet, mu=0.5).train(tx, tx + 0.01 * rng.normal(size=tx.shape))
    lut.save(tmp_path / "p.lut")
    back = PatternLUT.load(tmp_path / "p.lut")
    assert back.n == 3 and back.mu == 0.5
    for a, b in zip(lut.tables, back.tables):
        assert np.array_equal(a.keys, b.keys)
        assert np.array_equal(a.error_sum, b.error_sum)
        assert np.array_equal(a.count, b.count)
    assert np.array_equal(lut.apply(tx)[0], back.apply(tx)[0])


def test_sequence_lut_file_round_trip(tmp_path, frame):
    tx = frame.lane_array()
    lut = SequenceLUT.zeros(tx, mu=0.7)
    train_sequence_lut(tx, lut, lambda x: np.tanh(x))
    lut.save(tmp_path / "s.bin")
    back = SequenceLUT.load(tmp_path / "s.bin")
    assert np.array_equal(back.errors, lut.errors)
    assert (back.frame_id, back.iterations, back.mu) == (lut.frame_id, 1, 0.7)
    assert (tmp_path / "s.bin").stat().st_size == 8 * tx.size


def memory_channel(x, vsat):
    return vsat * np.tanh(cyclic_filter(x, (0.7, 0.2, 0.1)) / vsat)


def test_pattern_lut_matches_sw_when_covering_memory(frame, alphabet):
    tx = frame.lane_array()
    vsat = np.max(np.abs(tx)) / 0.8
    lut = PatternLUT.empty(5, alphabet).train(tx, align_lanes(tx, memory_channel(tx, vsat)))
    sw = SequenceLUT.zeros(tx)
    train_sequence_lut(tx, sw, lambda x: memory_channel(x, vsat))

    def residual(pd):
        return np.sqrt(np.mean((align_lanes(tx, memory_channel(pd, vsat)) - tx) ** 2))

    assert residual(lut.apply(tx, clip=False)[0]) <= 2 * residual(sw.apply(tx)[0])


def test_retraining_improves(frame, alphabet):
    tx = frame.lane_array()
    vsat = np.max(np.abs(tx)) / 0.8
    first = align_lanes(tx, memory_channel(tx, vsat)) - tx
    lut = PatternLUT.empty(5, alphabet).train(tx, tx + first)
    pd, _ = lut.apply(tx, clip=False)
    second = align_lanes(tx, memory_channel(pd, vsat)) - tx
    assert np.sqrt(np.mean(second**2)) < np.sqrt(np.mean(first**2))


def test_de_bruijn_helper():
    seq = de_bruijn(3, 3)
    assert len(seq) == 27
    keys = pattern_keys(seq, 3, 3)
    assert len(set(keys.tolist())) == 27


@pytest.mark.parametrize("j", [1, 4, 16])
def test_averaging_scales_with_count(j):
    L, n, sigma = 3, 3, 0.1
    alpha = AmplitudeAlphabet(np.array([-1.0, 0.0, 1.0]))
    tx = alpha.levels[np.tile(de_bruijn(L, n), j)]
    entries = []
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(0.0, sigma, tx.size)
        table = train_pattern_lut(tx, tx + noise, alpha, n)
        assert np.all(table.count == j)
        entries.append(table.average())
    entries = np.asarray(entries)
    dof = entries.size
    measured = np.sqrt(np.mean(entries**2))
    expected = sigma / np.sqrt(j)
    assert abs(measured / expected - 1) < 3 / np.sqrt(2 * dof)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_stored_average_is_group_mean(seed, h):
    n = 2 * h + 1
    rng = np.random.default_rng(seed)
    alpha = AmplitudeAlphabet(np.array([-3.0, -1.0, 1.0, 3.0]))
    tx = alpha.levels[rng.integers(0, 4, 64)]
    rx = tx + rng.normal(size=64)
    table = train_pattern_lut(tx, rx, alpha, n)
    idx = alpha.index_of(tx)[0]
    keys = pattern_keys(idx, n, 4)
    assert table.count.sum() == 64
    assert np.all(table.count >= 1)
    for key in np.unique(keys):
        sel = keys == key
        got = table.lookup(np.array([key]))[0]
        assert got == pytest.approx(np.mean(rx[sel] - tx[sel]), abs=1e-12)
        assert all(0 <= d < 4 for d in decode_key(key, n, 4))


def test_accumulate_twice_adds_counts(alphabet, frame):
    tx = frame.lane_array()[0]
    table = PatternTable(3, alphabet).accumulate(tx, tx + 0.02).accumulate(tx, tx + 0.04)
    assert np.allclose(table.average(), 0.03)
    assert table.count.sum() == 2 * tx.size
