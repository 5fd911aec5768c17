import math

import pytest

from ftsim.stats import intervals_overlap, wilson_interval


def test_wilson_reference_values():
    # closed form evaluated by hand at p = 0.5, n = 100
    lo, hi = wilson_interval(50, 100)
    z = 1.959963984540054
    half = z * math.sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100)
    assert lo == pytest.approx(0.5 - half, abs=1e-15)
    assert hi == pytest.approx(0.5 + half, abs=1e-15)


def test_wilson_edges():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and 0 < hi < 0.1
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and lo > 0.9
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_overlap():
    assert intervals_overlap((0, 0.2), (0.1, 0.3))
    assert not intervals_overlap((0, 0.1), (0.2, 0.3))
