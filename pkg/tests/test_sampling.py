import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedmask.sampling import SamplingSchedule, clients_at, rate_at, round_half_up, select_clients


def test_static_rate_is_constant():
    s = SamplingSchedule("static", 0.3)
    assert {rate_at(s, t) for t in range(50)} == {0.3}


def test_zero_decay_equals_static():
    s = SamplingSchedule("dynamic", 0.4, beta=0.0)
    assert all(rate_at(s, t) == 0.4 for t in range(100))


def test_decay_value():
    s = SamplingSchedule("dynamic", 1.0, beta=0.1)
    assert rate_at(s, 10) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert rate_at(s, 10) == pytest.approx(0.367879, abs=5e-7)
    shifted = SamplingSchedule("dynamic", 1.0, beta=0.1, t0=1)
    assert rate_at(shifted, 0) == pytest.approx(math.exp(-0.1))


def test_thirty_one_rounds_cost_ten():
    s = SamplingSchedule("dynamic", 1.0, beta=0.1)
    total = math.fsum(rate_at(s, t) for t in range(31))
    # geometric series oracle
    closed = (1 - math.exp(-3.1)) / (1 - math.exp(-0.1))
    assert total == pytest.approx(closed, rel=1e-13)
    assert total == pytest.approx(10.03, abs=0.01)


def test_clients_at():
    assert clients_at(SamplingSchedule("static", 0.1), 0, 100) == 10
    assert clients_at(SamplingSchedule("static", 1.0), 5, 100) == 100
    tiny = SamplingSchedule("dynamic", 1.0, beta=math.log(1000))  # rate 0.001 at round 1
    assert rate_at(tiny, 1) == pytest.approx(0.001)
    assert clients_at(tiny, 1, 100) == 2
    one = SamplingSchedule("static", 0.001, min_clients=1)
    assert clients_at(one, 0, 100) == 1


def test_half_up_rounding():
    assert round_half_up(2.5) == 3 and round_half_up(2.4999) == 2 and round_half_up(0.5) == 1
    assert clients_at(SamplingSchedule("static", 0.25), 0, 10) == 3


def test_too_few_clients():
    with pytest.raises(ValueError):
        clients_at(SamplingSchedule("static", 1.0, min_clients=3), 0, 2)


@pytest.mark.parametrize("kw", [dict(C=0.0), dict(C=1.5), dict(beta=-1.0), dict(min_clients=0),
                                dict(t0=2), dict(kind="cyclic")])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        SamplingSchedule(**kw)


@given(C=st.floats(0.01, 1.0), beta=st.floats(0.0, 2.0), M=st.integers(2, 500),
       mc=st.integers(1, 2), t0=st.sampled_from([0, 1]))
def test_schedule_properties(C, beta, M, mc, t0):
    dyn = SamplingSchedule("dynamic", C, beta, mc, t0)
    rates = [rate_at(dyn, t) for t in range(40)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert all(0 < r <= C for r in rates)
    ms = [clients_at(dyn, t, M) for t in range(40)]
    assert all(mc <= m <= M for m in ms)
    flat = SamplingSchedule("dynamic", C, 0.0, mc, t0)
    static = SamplingSchedule("static", C, 0.0, mc, t0)
    assert [clients_at(flat, t, M) for t in range(10)] == [clients_at(static, t, M) for t in range(10)]


def test_select_clients_basic():
    assert select_clients(7, 7, seed=1) == list(range(7))
    a = select_clients(10, 100, seed=5)
    assert a == select_clients(10, 100, seed=5)
    assert len(set(a)) == 10 and all(0 <= i < 100 for i in a)
    with pytest.raises(ValueError):
        select_clients(0, 5, seed=0)


def test_selection_frequency():
    draws = 10_000
    counts = np.zeros(100)
    for seed in range(draws):
        counts[select_clients(10, 100, seed)] += 1
    freq = counts / draws
    sigma = math.sqrt(0.1 * 0.9 / draws)
    assert np.all(np.abs(freq - 0.1) <= 3 * sigma)
