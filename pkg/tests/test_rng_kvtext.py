import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zerochain import kvtext, rng


def test_stream_is_addressable():
    a = rng.stream(7, rng.ORACLE, 123).random(4)
    b = rng.stream(7, rng.ORACLE, 123).random(4)
    assert a.tobytes() == b.tobytes()
    assert rng.stream(7, rng.ORACLE, 124).random() != a[0]
    assert rng.stream(7, rng.ALGORITHM, 123).random() != a[0]
    assert rng.stream(8, rng.ORACLE, 123).random() != a[0]


def test_stream_uniformity():
    u = np.array([rng.stream(1, rng.ORACLE, t).random() for t in range(4000)])
    assert abs(u.mean() - 0.5) < 0.03
    assert abs(np.mean(u < 0.1) - 0.1) < 0.02


def test_seed_validation():
    with pytest.raises(ValueError):
        rng.check_seed(-1)
    with pytest.raises(ValueError):
        rng.check_seed(2**64)
    assert rng.check_seed(2**64 - 1) == 2**64 - 1


def test_derive_seed():
    assert rng.derive_seed(5, 1, 2) == rng.derive_seed(5, 1, 2)
    assert len({rng.derive_seed(5, i, j) for i in range(10) for j in range(10)}) == 100
    assert 0 <= rng.derive_seed(5) <= rng.MASK64


scalars = st.one_of(
    st.integers(-(10**12), 10**12),
    st.floats(allow_nan=False, allow_infinity=False),
    st.booleans(),
    st.none(),
    st.sampled_from(["sgd", "ZR_BV", "results/out"]),
)


@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9_.]{0,8}", fullmatch=True), st.one_of(scalars, st.lists(scalars, max_size=4))))
def test_kvtext_roundtrip(d):
    assert kvtext.loads(kvtext.dumps(d)) == d


def test_kvtext_floats_exact():
    v = [0.1, 1 / 3, 1e-300, 2.0**-1074, math.pi * 1e200]
    assert kvtext.loads(kvtext.dumps({"v": v}))["v"] == v


def test_kvtext_comments_and_errors():
    assert kvtext.loads("# header\na = 1  # note\n\nb = x\n") == {"a": 1, "b": "x"}
    with pytest.raises(ValueError):
        kvtext.loads("a = 1\na = 2\n")
    with pytest.raises(ValueError):
        kvtext.loads("no equals sign\n")
    with pytest.raises(ValueError):
        kvtext.dumps({"bad key": 1})
    with pytest.raises(ValueError):
        kvtext.dumps({"a": "12"})
