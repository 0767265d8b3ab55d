import datetime as dt
import tracemalloc
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tecforecast.data import (GEOGRAPHIC, HELIOCENTRIC, DatasetFormatError, FrameSpaceError, IonexError,
                              RawTecMap, SynthConfig, TecDataset, TecMap, build_sequences, contiguous_starts,
                              denormalize, from_heliocentric, helio_shift, latitudes, load_dataset, normalize,
                              parse_ionex, prepare, resize_to_72, save_dataset, serialize_ionex, split, split_epoch,
                              synth_arrays, synth_generate, to_heliocentric)
from tecforecast.data.dataset import dataset_bytes, dataset_from_bytes

FIXTURE = Path(__file__).parent / "fixtures" / "two_epochs.ionex"


def raw_map(value=1.0, epoch=dt.datetime(2016, 1, 1)):
    return RawTecMap(np.full((71, 73), value), epoch)


# -- IONEX -----------------------------------------------------------------

def test_fixture_parses_two_epochs():
    maps = parse_ionex(FIXTURE.read_text())
    assert [m.epoch for m in maps] == [dt.datetime(2016, 3, 1, 0, tzinfo=dt.timezone.utc),
                                      dt.datetime(2016, 3, 1, 2, tzinfo=dt.timezone.utc)]
    assert maps[0].grid[0, 1] == 0.7 and maps[0].grid[1, 0] == 0.3


def test_fixture_round_trips_bit_identically():
    text = FIXTURE.read_text()
    maps = parse_ionex(text)
    assert serialize_ionex(maps) == text
    again = parse_ionex(serialize_ionex(maps))
    for a, b in zip(maps, again):
        assert a.grid.tobytes() == b.grid.tobytes() and a.epoch == b.epoch


def test_exponent_scaling():
    text = serialize_ionex([raw_map(32.5)])
    assert "  325" in text
    assert parse_ionex(text)[0].grid[5, 5] == 32.5


def test_missing_value_rejected_with_line():
    text = serialize_ionex([raw_map(1.0)]).replace("   10", " 9999", 1)
    with pytest.raises(IonexError) as e:
        parse_ionex(text, source="x.ionex")
    assert e.value.line is not None and "x.ionex" in str(e.value)


def test_seventy_latitude_rows_rejected():
    lines = serialize_ionex([raw_map(1.0)]).splitlines()
    first = next(i for i, ln in enumerate(lines) if ln.endswith("LAT/LON1/LON2/DLON/H"))
    # drop one latitude record and its five value lines
    del lines[first:first + 6]
    with pytest.raises(IonexError, match="latitude|rows"):
        parse_ionex("\n".join(lines))


def test_garbage_value_reports_line():
    lines = serialize_ionex([raw_map(1.0)]).splitlines()
    first = next(i for i, ln in enumerate(lines) if ln.endswith("LAT/LON1/LON2/DLON/H"))
    lines[first + 1] = lines[first + 1][:10] + "  abc" + lines[first + 1][15:]
    with pytest.raises(IonexError) as e:
        parse_ionex("\n".join(lines))
    assert e.value.line == first + 2


def test_header_must_open_file():
    with pytest.raises(IonexError):
        parse_ionex("nothing here\n")


# -- resize ------------------------------------------------------------------

def test_resize_constant():
    m = resize_to_72(raw_map(7.25))
    assert m.grid.shape == (72, 72) and np.all(m.grid == 7.25)


def test_resize_ignores_duplicate_meridian():
    g = np.random.default_rng(0).random((71, 73))
    h = g.copy()
    h[:, 72] = 1e6
    e = dt.datetime(2016, 1, 1)
    assert np.array_equal(resize_to_72(RawTecMap(g, e)).grid, resize_to_72(RawTecMap(h, e)).grid)


def test_resize_latitude_ramp():
    g = np.repeat(np.arange(71.0)[:, None], 73, axis=1)
    out = resize_to_72(RawTecMap(g, dt.datetime(2016, 1, 1))).grid
    np.testing.assert_allclose(out[:, 0], np.arange(72) * 70 / 71, rtol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_resize_stays_within_source_range(seed):
    g = np.random.default_rng(seed).random((71, 73)) * 100
    out = resize_to_72(RawTecMap(g, dt.datetime(2016, 1, 1))).grid
    src = g[:, :72]
    assert out.min() >= np.float32(src.min()) and out.max() <= np.float32(src.max())


def test_resize_rejects_extent():
    with pytest.raises(IonexError):
        RawTecMap(np.zeros((70, 73)), dt.datetime(2016, 1, 1))


def test_latitude_grid():
    lats = latitudes()
    assert lats[0] == 87.5 and lats[-1] == -87.5 and len(lats) == 72


# -- heliocentric --------------------------------------------------------------

def test_shift_per_frame_is_six_columns():
    assert helio_shift(0) == 0
    assert helio_shift(7200) == 6
    assert helio_shift(7200 * 5) - helio_shift(7200 * 4) == 6


def test_full_day_shift_is_identity():
    g = np.random.default_rng(0).random((72, 72)).astype(np.float32)
    a = to_heliocentric(TecMap(g, 3 * 7200))
    b = to_heliocentric(TecMap(g, 3 * 7200 + 86400))
    assert np.array_equal(a.grid, b.grid)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_helio_round_trip_and_permutation(epoch):
    g = np.random.default_rng(epoch % 1000).random((72, 72)).astype(np.float32)
    h = to_heliocentric(TecMap(g, epoch))
    assert h.space == HELIOCENTRIC
    assert np.array_equal(np.sort(h.grid, axis=None), np.sort(g, axis=None))
    back = from_heliocentric(h)
    assert back.space == GEOGRAPHIC and np.array_equal(back.grid, g)


def test_sun_is_stationary_in_heliocentric_frames():
    cfg = SynthConfig(frames=13, anomalies=0, noise=0.0)
    frames, epochs = synth_arrays(cfg, 0)
    helio = [to_heliocentric(TecMap(f, int(e))).grid for f, e in zip(frames, epochs)]
    for h in helio[1:]:
        np.testing.assert_allclose(h, helio[0], atol=1e-5)


def test_double_transform_rejected():
    m = to_heliocentric(TecMap(np.zeros((72, 72), np.float32), 0))
    with pytest.raises(FrameSpaceError):
        to_heliocentric(m)
    with pytest.raises(FrameSpaceError):
        from_heliocentric(TecMap(np.zeros((72, 72), np.float32), 0))


# -- normalization ---------------------------------------------------------------

def test_normalize_no_clamp_and_round_trip():
    x = np.array([0.0, 10.0, 12.0], dtype=np.float32)
    n = normalize(x, 10.0)
    assert n[1] == 1.0 and abs(n[2] - 1.2) < 1e-7
    back = denormalize(n, 10.0)
    assert np.all(np.abs(back - x) <= np.spacing(np.abs(x)))
    with pytest.raises(ValueError):
        normalize(x, 0.0)
    with pytest.raises(ValueError):
        denormalize(x, -1.0)


def test_prepare_uses_training_frames_only():
    frames, epochs = synth_arrays(SynthConfig(frames=100), 1)
    frames[90] += 500  # a spike in the test period
    ds = TecDataset(frames, epochs)
    cut = int(epochs[59])
    p = prepare(ds, cut)
    assert p.space == HELIOCENTRIC and p.normalized
    assert p.max_train == float(frames[:60].max())
    assert p.frames[:60].max() == 1.0 and p.frames.max() > 1.0


# -- sequences and split -------------------------------------------------------

def test_sequence_counts():
    assert len(build_sequences(np.zeros((100, 4, 4)))) == 41
    assert len(build_sequences(np.zeros((60, 4, 4)))) == 1
    with pytest.raises(ValueError):
        build_sequences(np.zeros((59, 4, 4)))


def test_windows_are_views():
    ds = build_sequences(np.random.default_rng(0).random((100, 8, 8)))
    assert np.shares_memory(ds.window(5), ds.frames)
    assert np.array_equal(ds.window(5)[0], ds.frames[5])


def test_building_sequences_does_not_copy_per_window():
    frames = np.random.default_rng(0).random((400, 72, 72)).astype(np.float32)
    tracemalloc.start()
    ds = build_sequences(frames)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert len(ds) == 341
    # one frame-store copy at most; 341 windows of 60 frames would be ~60x that
    assert peak < 2.5 * frames.nbytes


def test_gaps_break_windows():
    epochs = 7200 * np.arange(130)
    epochs[70:] += 7200  # one missing frame
    starts = contiguous_starts(epochs)
    assert len(starts) == 11 + 1  # starts 0..10 before the gap, 70 after
    assert 11 not in starts and 70 in starts


def test_batch_layout():
    ds = build_sequences(np.arange(70 * 4.0).reshape(70, 2, 2))
    x, y = ds.batch([0, 3], 12)
    assert x.shape == (2, 36, 1, 2, 2) and y.shape == (2, 12, 1, 2, 2)
    assert x[1, 0, 0, 0, 0] == ds.frames[3, 0, 0] and y[0, 0, 0, 0, 0] == ds.frames[36, 0, 0]


def test_split_never_leaks():
    frames, epochs = synth_arrays(SynthConfig(frames=300), 0)
    ds = build_sequences(frames, epochs)
    cut = split_epoch(ds, train_fraction=0.75)
    tr, te = split(ds, cut)
    assert len(tr) and len(te)
    last_train = max(ds.epochs[s + 59] for s in tr.starts)
    assert last_train <= cut
    assert min(ds.epochs[s] for s in te.starts) > cut
    with pytest.raises(ValueError):
        split(ds, cut, test_from=cut)


# -- synthetic generator -----------------------------------------------------

def test_synth_periodic_without_anomalies_and_noise():
    frames, _ = synth_arrays(SynthConfig(frames=40, anomalies=0, noise=0.0), 3)
    assert np.array_equal(frames[:-12], frames[12:])


def test_synth_deterministic_and_bounded():
    cfg = SynthConfig(frames=50, max_value=30.0, diurnal=60.0)
    a, ea = synth_arrays(cfg, 5)
    b, eb = synth_arrays(cfg, 5)
    assert a.tobytes() == b.tobytes() and np.array_equal(ea, eb)
    assert a.min() >= 0 and a.max() <= 30.0
    assert not np.array_equal(a, synth_arrays(cfg, 6)[0])


def test_synth_rejects_bad_config():
    with pytest.raises(ValueError):
        SynthConfig(frames=0)
    with pytest.raises(ValueError):
        SynthConfig(noise=-1)


def test_synth_generate_maps():
    maps = synth_generate(SynthConfig(frames=3), 0)
    assert len(maps) == 3 and maps[1].epoch - maps[0].epoch == 7200 and maps[0].space == GEOGRAPHIC


# -- TECSEQ1 files --------------------------------------------------------------

def test_dataset_file_round_trip(tmp_path):
    frames, epochs = synth_arrays(SynthConfig(frames=10), 2)
    ds = TecDataset(frames, epochs, HELIOCENTRIC, True, 42.5)
    save_dataset(ds, tmp_path / "a.tecseq")
    back = load_dataset(tmp_path / "a.tecseq")
    assert np.max(np.abs(back.frames - ds.frames)) == 0
    assert np.array_equal(back.epochs, ds.epochs)
    assert (back.space, back.normalized, back.max_train) == (HELIOCENTRIC, True, 42.5)
    save_dataset(back, tmp_path / "b.tecseq")
    assert (tmp_path / "a.tecseq").read_bytes() == (tmp_path / "b.tecseq").read_bytes()


def test_dataset_file_header_layout():
    ds = TecDataset(np.zeros((2, 72, 72), np.float32), np.array([0, 7200]))
    raw = dataset_bytes(ds)
    assert raw[:8] == b"TECSEQ1\0"
    assert len(raw) == 30 + 2 * (8 + 72 * 72 * 4)


def test_dataset_file_rejects_corruption():
    raw = dataset_bytes(TecDataset(np.zeros((2, 72, 72), np.float32), np.array([0, 7200])))
    with pytest.raises(DatasetFormatError):
        dataset_from_bytes(b"X" + raw[1:])
    with pytest.raises(DatasetFormatError):
        dataset_from_bytes(raw[:-1])
    bad_version = raw[:8] + (2).to_bytes(4, "little") + raw[12:]
    with pytest.raises(DatasetFormatError):
        dataset_from_bytes(bad_version)


def test_dataset_frames_are_read_only():
    ds = TecDataset(np.zeros((2, 4, 4), np.float32), np.array([0, 7200]))
    with pytest.raises(ValueError):
        ds.frames[0, 0, 0] = 1
