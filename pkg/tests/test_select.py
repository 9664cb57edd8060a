import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from math import comb

from smokerisk.errors import ConfigError, DataError
from smokerisk.learners import FitConfig
from smokerisk.select import BorutaConfig, BorutaResult, _two_sided_p, boruta, select_apply


def _data(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 5))
    y = ((X[:, 0] + 0.8 * X[:, 1] + 0.3 * rng.normal(size=n)) > 0).astype(float)
    return X, y


FAST = BorutaConfig(max_iterations=20, forest=FitConfig(n_trees=30, max_depth=5), seed=4)


def test_confirms_signal_rejects_noise():
    X, y = _data()
    res = boruta(X, y, FAST, feature_names=["a", "b", "n1", "n2", "n3"])
    assert {"a", "b"} <= set(res.confirmed)
    assert not set(res.confirmed) & {"n1", "n2", "n3"}
    assert sorted(res.confirmed + res.rejected + res.tentative) == sorted(res.feature_names)
    assert len(res.history) == res.n_iterations
    for f, it in res.decided_at.items():
        assert 1 <= it <= res.n_iterations


def test_deterministic_and_thread_independent():
    X, y = _data(200, 1)
    a = boruta(X, y, FAST)
    b = boruta(X, y, BorutaConfig(max_iterations=20, forest=FitConfig(n_trees=30, max_depth=5), seed=4, n_jobs=2))
    assert a.to_dict() == b.to_dict()


def _binom_two_sided(k, n):
    tail_up = sum(comb(n, i) for i in range(k, n + 1)) / 2**n
    tail_down = sum(comb(n, i) for i in range(0, k + 1)) / 2**n
    return min(1.0, 2 * min(tail_up, tail_down))


@given(st.integers(1, 60).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_two_sided_p_matches_exact_sum(nk):
    n, k = nk
    p, direction = _two_sided_p(k, n)
    assert p == pytest.approx(_binom_two_sided(k, n), rel=1e-9, abs=1e-15)
    if 2 * k > n:
        assert direction == "up"
    elif 2 * k < n:
        assert direction == "down"


def test_all_hits_p_value():
    for n in (1, 5, 12):
        assert _two_sided_p(n, n)[0] == pytest.approx(min(1.0, 2 * 0.5**n))


def test_config_validation():
    with pytest.raises(ConfigError):
        BorutaConfig(alpha=0)
    with pytest.raises(ConfigError):
        BorutaConfig(max_iterations=0)
    with pytest.raises(DataError):
        boruta(np.zeros((10, 0)), np.zeros(10))


def test_result_round_trip():
    X, y = _data(150, 2)
    res = boruta(X, y, BorutaConfig(max_iterations=5, forest=FitConfig(n_trees=10, max_depth=3)))
    assert BorutaResult.from_dict(res.to_dict()).to_dict() == res.to_dict()


def test_select_apply_keeps_label_and_id(screening_table):
    names = screening_table.schema.feature_names()
    res = BorutaResult(list(names), [names[3], names[0]], list(names[4:]), [names[1], names[2]], {}, 1, [], {})
    out = select_apply(screening_table, res)
    assert screening_table.schema.label in out.names
    assert "ID" in out.names
    assert out.schema.feature_names() == [names[0], names[3]]
    wide = select_apply(screening_table, res, keep_tentative=True)
    assert wide.schema.feature_names() == list(names[:4])
