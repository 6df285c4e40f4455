import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membank.errors import CapacityError, ConfigError, EmptyMemoryError, SinkAlreadySetError
from membank.frames import FrameSink, bank_append, bank_new, bank_retain
from oracles import random_frames


def test_bank_new_capacities():
    assert bank_new(3).capacity == 3 and len(bank_new(3)) == 0
    assert bank_new(9).capacity == 9


def test_bank_new_zero_capacity():
    with pytest.raises(ConfigError):
        bank_new(0)


class TestRetain:
    def test_retain_all_is_identity(self, rng):
        bank = bank_new(5)
        for f in random_frames(rng, 3):
            bank = bank_append(bank, f)
        kept = bank_retain(bank, [0, 1, 2])
        assert kept.frames == bank.frames

    def test_retain_empty(self, rng):
        bank = bank_new(5)
        for f in random_frames(rng, 3):
            bank = bank_append(bank, f)
        assert len(bank_retain(bank, [])) == 0

    def test_retain_subset_keeps_order(self, rng):
        bank = bank_new(5)
        frames = random_frames(rng, 3)
        for f in frames:
            bank = bank_append(bank, f)
        kept = bank_retain(bank, [0, 2])
        assert [f.frame_id for f in kept.frames] == [frames[0].frame_id, frames[2].frame_id]

    def test_retain_out_of_range(self, rng):
        bank = bank_append(bank_new(2), random_frames(rng, 1)[0])
        with pytest.raises(IndexError):
            bank_retain(bank, [1])

    def test_retain_composes(self, rng):
        bank = bank_new(8)
        for f in random_frames(rng, 5):
            bank = bank_append(bank, f)
        once = bank_retain(bank_retain(bank, [0, 2, 4]), [1, 2])
        direct = bank_retain(bank, [2, 4])
        assert once.frames == direct.frames


class TestAppend:
    def test_append_to_empty(self, rng):
        bank = bank_append(bank_new(2), random_frames(rng, 1)[0])
        assert len(bank) == 1

    def test_append_at_capacity_errors(self, rng):
        bank = bank_new(1)
        f1, f2 = random_frames(rng, 2)
        bank = bank_append(bank, f1)
        with pytest.raises(CapacityError):
            bank_append(bank, f2)

    def test_frame_id_order_enforced(self, rng):
        f1, f2 = random_frames(rng, 2)
        bank = bank_append(bank_new(3), f2)
        with pytest.raises(Exception):
            bank_append(bank, f1)

    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 4)), max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_capacity_never_exceeded(self, ops):
        # random interleavings of retain-prefix and append stay <= capacity
        rng = np.random.default_rng(1)
        cap = 3
        bank = bank_new(cap)
        next_id = 0
        for do_append, arg in ops:
            if do_append:
                if len(bank) >= cap:
                    bank = bank_retain(bank, list(range(len(bank) - 1)))
                bank = bank_append(bank, random_frames(rng, 1, start_id=next_id)[0])
                next_id += 1
            else:
                keep = min(arg, len(bank))
                bank = bank_retain(bank, list(range(keep)))
            assert len(bank) <= cap
            ids = [f.frame_id for f in bank.frames]
            assert ids == sorted(ids) and len(set(ids)) == len(ids)


class TestSink:
    def test_set_once(self, rng):
        frames = random_frames(rng, 3)
        sink = FrameSink().set(frames)
        assert len(sink.frames) == 3

    def test_second_set_errors(self, rng):
        sink = FrameSink().set(random_frames(rng, 2))
        with pytest.raises(SinkAlreadySetError):
            sink.set(random_frames(rng, 2))

    def test_empty_set_errors(self):
        with pytest.raises(EmptyMemoryError):
            FrameSink().set([])

    def test_contents_stable_after_set(self, rng):
        frames = random_frames(rng, 2)
        sink = FrameSink().set(frames)
        before = [f.frame_id for f in sink.frames]
        with pytest.raises(SinkAlreadySetError):
            sink.set(random_frames(rng, 1, start_id=99))
        assert [f.frame_id for f in sink.frames] == before


def test_frame_arrays_read_only(rng):
    f = random_frames(rng, 1)[0]
    with pytest.raises(ValueError):
        f.k[0, 0, 0, 0] = 1.0
