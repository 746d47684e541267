import io
import json

import numpy as np
import pytest

from htif import (
    DomainError,
    InsufficientDataError,
    ModelExclusionError,
    RngHandle,
    TailModel,
)
from htif.dynamics import (
    ReceiverConfig,
    SpikeTrain,
    abstract_walk_first_passage,
    output_independence_diagnostic,
    paired_isis,
    run_receiver,
    run_two_receivers,
    write_spike_train_csv,
)
from htif.engine import EventStream, NetworkTopology, build_event_stream
from htif.inputs import InputGeneratorSpec

from oracles import ruin_crossing_prob, ruin_mean_steps


def hand_stream(times, marks, sources=None, n_neurons=1, scale=1.0):
    times = np.asarray(times, dtype=np.float64)
    marks = np.asarray(marks, dtype=np.int8)
    if sources is None:
        sources = np.zeros(times.size, dtype=np.int64)
    return EventStream(
        raw_times=times,
        sources=np.asarray(sources, dtype=np.int64),
        marks=marks,
        raw_taus=np.diff(times, prepend=0.0),
        time_scale=scale,
        n_neurons=n_neurons,
    )


def brute_receiver(times, marks, b):
    y = 0
    fire, bnd = [], []
    for i, (t, m) in enumerate(zip(times, marks)):
        y += int(m)
        if y == b:
            fire.append(t)
            bnd.append(i + 1)
            y = 0
    return np.array(fire), np.array(bnd, dtype=np.int64)


class TestReceiverConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            ReceiverConfig(threshold=0)
        with pytest.raises(DomainError):
            ReceiverConfig(threshold=-3)
        with pytest.raises(DomainError):
            ReceiverConfig(threshold=2, pool=(1, 1))


class TestRunReceiver:
    def test_excitatory_burst_hand_example(self):
        stream = hand_stream([1, 2, 3, 4, 5], [1, 1, 1, 1, 1])
        train = run_receiver(stream, ReceiverConfig(threshold=3))
        assert list(train.firing_times) == [3.0]
        assert list(train.boundaries) == [3]
        assert list(train.isis) == [3.0]
        assert train.silent_tail
        assert train.n_pool_events == 5

    def test_mixed_marks_hand_example(self):
        stream = hand_stream([1, 2, 3, 4, 5], [1, -1, 1, 1, 1])
        train = run_receiver(stream, ReceiverConfig(threshold=2))
        assert list(train.firing_times) == [4.0]
        assert list(train.boundaries) == [4]
        assert train.silent_tail

    def test_unit_threshold_spikes_on_every_excitatory_event(self):
        stream = hand_stream([0.5, 1.25, 4.0], [1, 1, 1])
        train = run_receiver(stream, ReceiverConfig(threshold=1))
        assert np.array_equal(train.firing_times, stream.times)
        assert list(train.boundaries) == [1, 2, 3]
        assert np.array_equal(train.isis, stream.taus)
        assert not train.silent_tail

    def test_inhibitory_only_pool_never_fires(self):
        stream = hand_stream([1, 2, 3], [-1, -1, -1])
        train = run_receiver(stream, ReceiverConfig(threshold=1))
        assert len(train) == 0
        assert train.silent_tail

    def test_empty_stream_gives_empty_train(self):
        stream = hand_stream([], [])
        train = run_receiver(stream, ReceiverConfig(threshold=2))
        assert len(train) == 0
        assert not train.silent_tail

    def test_simultaneous_events_can_give_zero_isis(self):
        stream = hand_stream([1.0, 1.0, 1.0, 1.0], [1, 1, 1, 1])
        train = run_receiver(stream, ReceiverConfig(threshold=2))
        assert list(train.firing_times) == [1.0, 1.0]
        assert list(train.isis) == [1.0, 0.0]
        assert list(train.boundaries) == [2, 4]

    def test_pool_restriction_counts_only_pool_events(self):
        stream = hand_stream(
            [1, 2, 3, 4], [1, 1, 1, 1], sources=[0, 1, 0, 1], n_neurons=2
        )
        train = run_receiver(stream, ReceiverConfig(threshold=2, pool=(0,)))
        assert list(train.firing_times) == [3.0]
        # boundary indexes into the pool-local stream
        assert list(train.boundaries) == [2]
        assert train.n_pool_events == 2

    def test_matches_brute_force_walk_exactly(self):
        gen = np.random.default_rng(100)
        times = np.cumsum(gen.exponential(1.0, size=3000))
        marks = np.where(gen.random(3000) < 0.7, 1, -1).astype(np.int8)
        stream = hand_stream(times, marks)
        for b in (1, 2, 5):
            train = run_receiver(stream, ReceiverConfig(threshold=b))
            ref_fire, ref_bnd = brute_receiver(times, marks, b)
            assert np.array_equal(train.raw_firing_times, ref_fire)
            assert np.array_equal(train.boundaries, ref_bnd)

    def test_scale_homogeneity_through_the_receiver(self):
        top = NetworkTopology(n=2, excitatory=(True, True))
        rng = RngHandle(55, 3)
        streams = {}
        for s in (1.0, 3.0):
            spec = InputGeneratorSpec(
                n=2,
                tail=TailModel(alpha=0.6, scale=s),
                multiplier_lo=0.5,
                multiplier_hi=2.0,
            )
            streams[s] = build_event_stream(top, spec, rounds=2000, rng=rng)
        cfg = ReceiverConfig(threshold=3)
        base = run_receiver(streams[1.0], cfg)
        big = run_receiver(streams[3.0], cfg)
        assert np.array_equal(big.isis, 3.0 * base.isis)
        assert np.array_equal(big.firing_times, 3.0 * base.firing_times)
        assert np.array_equal(big.boundaries, base.boundaries)


class TestTwoReceivers:
    def test_identical_receivers_pair_on_the_diagonal(self):
        top = NetworkTopology(n=3, excitatory=(True, True, True))
        spec = InputGeneratorSpec(
            n=3, tail=TailModel(alpha=0.6), multiplier_lo=0.5, multiplier_hi=2.0
        )
        stream = build_event_stream(top, spec, rounds=500, rng=RngHandle(81))
        cfg = ReceiverConfig(threshold=2)
        a, b, index = run_two_receivers(stream, cfg, cfg)
        assert np.array_equal(a.raw_firing_times, b.raw_firing_times)
        assert len(index) == len(a)
        assert np.array_equal(index.left, index.right)
        assert np.array_equal(np.sort(index.left), np.arange(len(a)))

    def test_disjoint_pools_share_nothing(self):
        top = NetworkTopology(n=4, excitatory=(True,) * 4)
        spec = InputGeneratorSpec(
            n=4, tail=TailModel(alpha=0.6), multiplier_lo=0.5, multiplier_hi=2.0
        )
        stream = build_event_stream(top, spec, rounds=400, rng=RngHandle(82))
        a, b, index = run_two_receivers(
            stream,
            ReceiverConfig(threshold=2, pool=(0, 1)),
            ReceiverConfig(threshold=2, pool=(2, 3)),
        )
        assert len(index) == 0

    def test_index_matches_brute_force_window_assignment(self):
        top = NetworkTopology(n=3, excitatory=(True, True, True))
        spec = InputGeneratorSpec(
            n=3, tail=TailModel(alpha=0.6), multiplier_lo=0.5, multiplier_hi=2.0
        )
        stream = build_event_stream(top, spec, rounds=300, rng=RngHandle(83))
        cfg_a = ReceiverConfig(threshold=2, pool=(0, 1))
        cfg_b = ReceiverConfig(threshold=3, pool=(1, 2))
        a, b, index = run_two_receivers(stream, cfg_a, cfg_b)
        expected = set()
        fa = a.raw_firing_times
        fb = b.raw_firing_times
        for t, src in zip(stream.raw_times, stream.sources):
            if src != 1:  # the only shared source
                continue
            j = int(np.searchsorted(fa, t, side="left"))
            k = int(np.searchsorted(fb, t, side="left"))
            if j < len(fa) and k < len(fb):
                expected.add((j, k))
        assert set(index.as_tuples()) == expected
        assert len(index) > 0

    def test_paired_isis_selects_window_values(self):
        a = SpikeTrain(
            label="a",
            raw_firing_times=np.array([1.0, 3.0, 7.0]),
            boundaries=np.array([1, 2, 3], dtype=np.int64),
        )
        b = SpikeTrain(
            label="b",
            raw_firing_times=np.array([2.0, 6.0]),
            boundaries=np.array([1, 2], dtype=np.int64),
        )
        from htif.dynamics import SuperpositionIndex

        idx = SuperpositionIndex(pairs=np.array([[0, 0], [2, 1]], dtype=np.int64))
        xa, xb = paired_isis(a, b, idx)
        assert list(xa) == [1.0, 4.0]
        assert list(xb) == [2.0, 4.0]


class TestAbstractWalk:
    def test_validation_and_model_exclusion(self):
        with pytest.raises(ModelExclusionError):
            abstract_walk_first_passage(0.5, 2, reps=10, rng=RngHandle(1))
        with pytest.raises(DomainError):
            abstract_walk_first_passage(-0.1, 2, reps=10, rng=RngHandle(1))
        with pytest.raises(DomainError):
            abstract_walk_first_passage(1.2, 2, reps=10, rng=RngHandle(1))
        with pytest.raises(DomainError):
            abstract_walk_first_passage(0.7, 0, reps=10, rng=RngHandle(1))
        with pytest.raises(DomainError):
            abstract_walk_first_passage(0.7, 2, reps=0, rng=RngHandle(1))

    def test_sure_down_steps_never_cross(self):
        stats = abstract_walk_first_passage(0.0, 2, reps=50, rng=RngHandle(1))
        assert stats.finite_fraction == 0.0
        assert stats.unsettled == 0
        assert stats.p_hat == 0.0

    def test_sure_steps_cross_exactly_at_threshold(self):
        stats = abstract_walk_first_passage(1.0, 4, reps=64, rng=RngHandle(2))
        assert stats.finite_fraction == 1.0
        assert np.all(stats.m_samples == 4)
        assert stats.p_hat == 1.0

    def test_supercritical_mean_matches_gambler_ruin(self):
        stats = abstract_walk_first_passage(0.8, 2, reps=200_000, rng=RngHandle(3))
        assert stats.finite_fraction == 1.0
        expected = ruin_mean_steps(0.8, 2)
        assert stats.mean_m == pytest.approx(expected, rel=0.02)
        assert stats.p_hat == pytest.approx(0.8, abs=0.002)

    def test_subcritical_crossing_probability(self):
        stats = abstract_walk_first_passage(0.4, 3, reps=200_000, rng=RngHandle(4))
        expected = ruin_crossing_prob(0.4, 3)
        assert stats.finite_fraction == pytest.approx(expected, abs=0.005)
        assert stats.unsettled == 0
        # every crossing consumed at least threshold steps of matching parity
        assert np.all(stats.m_samples >= 3)
        assert np.all((stats.m_samples - 3) % 2 == 0)

    def test_determinism(self):
        a = abstract_walk_first_passage(0.6, 3, reps=5000, rng=RngHandle(9, 2))
        b = abstract_walk_first_passage(0.6, 3, reps=5000, rng=RngHandle(9, 2))
        assert np.array_equal(a.m_samples, b.m_samples)
        assert a.p_hat == b.p_hat

    def test_summary_dict_is_json_ready(self):
        stats = abstract_walk_first_passage(0.9, 2, reps=500, rng=RngHandle(11))
        d = stats.to_dict()
        assert d["crossed"] == stats.m_samples.size
        assert d["mean_m"] == stats.mean_m
        assert d["steps_consumed"] == stats.steps_consumed > 0
        json.dumps(d)

    def test_no_crossings_makes_mean_unavailable(self):
        stats = abstract_walk_first_passage(0.01, 50, reps=10, rng=RngHandle(5))
        assert stats.finite_fraction == 0.0
        with pytest.raises(InsufficientDataError):
            stats.mean_m


class TestOutputDiagnostic:
    def test_iid_like_outputs_have_vanishing_ratios(self):
        top = NetworkTopology(n=1, excitatory=(True,))
        spec = InputGeneratorSpec(n=1, tail=TailModel(alpha=0.6))
        stream = build_event_stream(top, spec, rounds=40_000, rng=RngHandle(6))
        train = run_receiver(stream, ReceiverConfig(threshold=2))
        dep = output_independence_diagnostic(train, quantiles=(0.99, 0.999))
        assert dep.max_ratio() <= 0.05

    def test_short_trains_are_rejected(self):
        with pytest.raises(InsufficientDataError):
            output_independence_diagnostic(np.ones(100))


class TestSpikeTrainCsv:
    def test_round_trip_exact(self, tmp_path):
        top = NetworkTopology(n=2, excitatory=(True, True))
        spec = InputGeneratorSpec(n=2, tail=TailModel(alpha=0.6, scale=2.0))
        stream = build_event_stream(top, spec, rounds=50, rng=RngHandle(12))
        train = run_receiver(stream, ReceiverConfig(threshold=3, label="t"))
        path = tmp_path / "train.csv"
        write_spike_train_csv(train, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "i,isi,pool_events"
        assert len(rows) == len(train) + 1
        first = rows[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == train.isis[0]
        assert int(first[2]) == train.boundaries[0]

    def test_accepts_open_file_objects(self):
        train = SpikeTrain(
            label="t",
            raw_firing_times=np.array([1.0, 3.0]),
            boundaries=np.array([2, 5], dtype=np.int64),
            n_pool_events=6,
            silent_tail=True,
        )
        buf = io.StringIO()
        write_spike_train_csv(train, buf)
        assert buf.getvalue().startswith("i,isi,pool_events")
        assert buf.getvalue().count("\n") == 3
