import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dralbsim.workload import WorkloadRanges, generate_tasks

W = WorkloadRanges()


def draw(n=2000, seed=0, **kw):
    return generate_tasks(n, np.random.default_rng(seed), W, kw.pop("rate", 5.0),
                          kw.pop("service_time", 0.5), **kw)


def test_seed_determinism():
    assert draw(seed=4) == draw(seed=4)


def test_different_seeds_differ():
    assert draw(seed=1)[0].length != draw(seed=2)[0].length


def test_ranges_hold():
    for t in draw():
        assert 250 <= t.length <= 1000
        assert 100 <= t.file_size <= 2000
        assert 20 <= t.output_size <= 40
        assert 0 < t.demand.bw <= 100
        assert t.demand.mem == t.file_size
        assert t.demand.cpu == pytest.approx(t.length / 0.5)


def test_energy_proportional_to_cpu():
    for t in draw(200):
        ratio = t.demand.energy / t.demand.cpu
        assert W.energy_per_mips[0] <= ratio <= W.energy_per_mips[1]


def test_poisson_arrivals():
    tasks = draw(20000, rate=4.0)
    arr = np.array([t.arrival_time for t in tasks])
    assert arr[0] == 0.0 and np.all(np.diff(arr) >= 0)
    assert np.mean(np.diff(arr)) == pytest.approx(0.25, rel=0.03)


def test_batch_arrivals():
    assert all(t.arrival_time == 0.0 for t in draw(50, batch=True))


def test_zero_tasks():
    assert draw(0) == []


def test_bad_rate():
    with pytest.raises(ValueError):
        draw(3, rate=0.0)


def test_bad_ranges():
    with pytest.raises(ValueError):
        WorkloadRanges(length=(10.0, 5.0)).validate()


@given(st.integers(0, 2**32), st.integers(1, 50))
def test_ids_sequential(seed, n):
    assert [t.id for t in draw(n, seed=seed)] == list(range(n))
