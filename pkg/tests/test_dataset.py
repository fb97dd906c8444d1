import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ev_discharge.dataset import (
    CSV_COLUMNS,
    CorpusError,
    CorpusSettings,
    NoiseConfig,
    VELOCITY_CHOICES,
    apply_noise,
    build_corpus,
    read_corpus,
    read_sidecar,
    sample_session,
    split_counts,
    structured_shapes,
    write_corpus,
)
from ev_discharge.domain import MODES, DischargeSession

N_DRAWS = 10_000


@pytest.fixture(scope="module")
def sessions():
    rng = np.random.default_rng(2024)
    return [sample_session(rng) for _ in range(N_DRAWS)]


def test_sampled_supports(sessions):
    d = np.array([s.distance for s in sessions])
    assert d.min() >= 20.0 and d.max() <= 200.0
    assert {s.mean_velocity for s in sessions} == set(VELOCITY_CHOICES)
    assert {s.ambient_temp for s in sessions} == {20.0, -5.0, 32.0}
    soc = np.array([s.initial_soc for s in sessions])
    assert soc.min() >= 0.3 and soc.max() <= 1.0
    tod = np.array([s.time_of_day for s in sessions])
    assert tod.min() >= 0.0 and tod.max() <= 24.0


def test_mode_frequencies(sessions):
    sigma = math.sqrt(N_DRAWS * (1 / 3) * (2 / 3))
    for mode in MODES:
        count = sum(s.mode is mode for s in sessions)
        assert abs(count - N_DRAWS / 3) < 3 * sigma


def test_structured_shapes_have_unit_scale(sessions):
    shapes = np.array([[v for v in structured_shapes(s).values()] for s in sessions])
    assert np.all(np.abs(shapes.mean(axis=0)) < 0.05)
    assert np.allclose(shapes.std(axis=0), 1.0, atol=0.05)


SESSION = DischargeSession(0.8, 100.0, 90.0, "normal", 20.0, time_of_day=9.0)


def test_zero_noise_is_identity():
    cfg = NoiseConfig(0.0, 0.0, 0.0, 0.0, 0.0)
    true, eps = apply_noise(12.5, SESSION, cfg, np.random.default_rng(0))
    assert true == 12.5
    assert all(v == 0.0 for v in eps.values())


def test_iid_noise_std_and_unbiasedness():
    cfg = NoiseConfig(structured_fraction=0.0)
    rng = np.random.default_rng(77)
    n = 100_000
    total = np.array([sum(apply_noise(10.0, SESSION, cfg, rng)[1].values()) for _ in range(n)])
    expected = math.sqrt(0.05**2 + 0.08**2 + 0.06**2 + 0.03**2)
    assert expected == pytest.approx(0.1158, abs=1e-4)
    assert total.std() == pytest.approx(expected, rel=0.02)
    assert abs(total.mean()) < 3 * expected / math.sqrt(n)


def test_fully_structured_noise_depends_only_on_features():
    cfg = NoiseConfig(structured_fraction=1.0)
    a = apply_noise(10.0, SESSION, cfg, np.random.default_rng(1))
    b = apply_noise(10.0, SESSION, cfg, np.random.default_rng(999))
    assert a == b


def test_noise_composition():
    true, eps = apply_noise(8.0, SESSION, NoiseConfig(), np.random.default_rng(3))
    assert true == pytest.approx(8.0 * (1 + sum(eps.values())), rel=1e-12)


def test_noise_rejects_non_positive_energy():
    with pytest.raises(ValueError):
        apply_noise(0.0, SESSION, NoiseConfig(), np.random.default_rng(0))


@pytest.mark.parametrize("kwargs", [{"sigma_traffic": -0.1}, {"structured_fraction": 1.5}])
def test_noise_config_validation(kwargs):
    with pytest.raises(ValueError):
        NoiseConfig(**kwargs)


@pytest.mark.parametrize("n, expected", [(1500, (1050, 225, 225)), (10, (8, 1, 1)), (100, (70, 15, 15))])
def test_split_counts(n, expected):
    c = split_counts(n)
    assert (c["train"], c["val"], c["test"]) == expected


@settings(max_examples=200)
@given(st.integers(10, 100_000))
def test_split_counts_partition(n):
    c = split_counts(n)
    assert sum(c.values()) == n
    assert c["val"] == c["test"] == math.floor(0.15 * n)


def test_corpus_splits_partition(small_corpus):
    ids = [r.trip_id for r in small_corpus]
    assert sorted(ids) == list(range(300))
    counts = {s: sum(r.split == s for r in small_corpus) for s in ("train", "val", "test")}
    assert counts == split_counts(300)
    assert all(r.physics_energy > 0 for r in small_corpus)


def test_corpus_1500_split_sizes():
    recs = build_corpus(settings=CorpusSettings(n_trips=1500, seed=3, n_steps=50))
    assert [sum(r.split == s for r in recs) for s in ("train", "val", "test")] == [1050, 225, 225]


def test_corpus_rejects_tiny():
    with pytest.raises(ValueError):
        build_corpus(9, seed=0)


def test_corpus_independent_of_jobs():
    cfg = CorpusSettings(n_trips=40, seed=5, n_steps=100)
    serial = build_corpus(settings=cfg)
    parallel = build_corpus(settings=cfg, jobs=4)
    assert [r.to_row() for r in serial] == [r.to_row() for r in parallel]


def test_corpus_fails_when_many_trips_break(monkeypatch):
    import ev_discharge.dataset as ds

    def broken(*args, **kwargs):
        raise ValueError("boom")

    monkeypatch.setattr(ds, "simulate", broken)
    with pytest.raises(CorpusError, match="20 of 20"):
        build_corpus(settings=CorpusSettings(n_trips=20, seed=0, n_steps=50))


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_corpus_files_are_byte_identical(tmp_path):
    cfg = CorpusSettings(n_trips=30, seed=21, n_steps=100)
    a = write_corpus(build_corpus(settings=cfg), tmp_path / "a.csv", cfg)
    b = write_corpus(build_corpus(settings=cfg), tmp_path / "b.csv", cfg)
    assert _digest(a) == _digest(b)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    other = write_corpus(build_corpus(settings=CorpusSettings(n_trips=30, seed=22, n_steps=100)), tmp_path / "c.csv")
    assert _digest(other) != _digest(a)


def test_csv_round_trip(tmp_path, small_corpus):
    path = write_corpus(small_corpus, tmp_path / "corpus.csv", CorpusSettings(n_trips=300, seed=11, n_steps=200))
    header = path.read_text().splitlines()[0].split(",")
    assert header == CSV_COLUMNS
    back = read_corpus(path)
    assert [r.to_row() for r in back] == [r.to_row() for r in small_corpus]
    meta = read_sidecar(path)
    assert meta["seed"] == 11 and meta["noise"]["structured_fraction"] == 0.7
    assert meta["vehicle"]["battery_capacity"] == 75.0


def test_read_corpus_rejects_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("trip_id,distance_km\n0,10\n")
    with pytest.raises(ValueError, match="missing"):
        read_corpus(p)


def test_residual_matches_noise(small_corpus):
    for r in small_corpus[:50]:
        assert r.residual == pytest.approx(r.physics_energy * sum(r.noise.values()), rel=1e-9, abs=1e-12)
