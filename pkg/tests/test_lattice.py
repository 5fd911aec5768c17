import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftsim.lattice import (InvalidSizeError, OpenChainError, PauliChain, build_lattice)


@pytest.mark.parametrize("k,ne,nv", [(2, 8, 4), (3, 18, 9), (4, 32, 16)])
def test_sizes(k, ne, nv):
    lat = build_lattice(k)
    assert (lat.n_edges, lat.n_vertices, lat.n_faces) == (ne, nv, nv)


@pytest.mark.parametrize("k", [1, 0, -3, 2.5])
def test_invalid_size(k):
    with pytest.raises(InvalidSizeError):
        build_lattice(k)


def test_star_example_k2():
    lat = build_lattice(2)
    want = {lat.edge(0, 0, "h"), lat.edge(1, 0, "h"), lat.edge(0, 0, "v"), lat.edge(0, 1, "v")}
    assert lat.star((0, 0)) == want == lat.star(0)


def test_star_matches_incidence_enumeration():
    # independent oracle: edges whose endpoint list contains the vertex
    for k in (2, 3, 5):
        lat = build_lattice(k)
        for s in range(lat.n_vertices):
            inc = {e for e in range(lat.n_edges) if s in lat.edge_vertices[e]}
            assert lat.star(s) == inc


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_incidence_invariants(k):
    lat = build_lattice(k)
    assert all(len(lat.star(s)) == 4 for s in range(lat.n_vertices))
    assert all(len(lat.bound(p)) == 4 for p in range(lat.n_faces))
    star_count = np.bincount(lat.stars.ravel(), minlength=lat.n_edges)
    bound_count = np.bincount(lat.bounds.ravel(), minlength=lat.n_edges)
    assert (star_count == 2).all() and (bound_count == 2).all()
    xs = np.zeros(lat.n_edges, bool)
    for s in range(lat.n_vertices):
        xs ^= lat.indicator(lat.star(s))
    assert not xs.any()
    xb = np.zeros(lat.n_edges, bool)
    for p in range(lat.n_faces):
        xb ^= lat.indicator(lat.bound(p))
    assert not xb.any()
    # commutation certificate, exhaustive
    for s, p in itertools.product(range(lat.n_vertices), range(lat.n_faces)):
        assert len(lat.star(s) & lat.bound(p)) % 2 == 0


def test_invalid_site():
    lat = build_lattice(3)
    for bad in (9, -1, (3, 0), (0, -1)):
        with pytest.raises(IndexError):
            lat.star(bad)
        with pytest.raises(IndexError):
            lat.bound(bad)


def test_syndrome_examples():
    lat = build_lattice(4)
    assert lat.syndrome(PauliChain.zeros(lat.n_edges)).is_empty()
    for e in range(lat.n_edges):
        d = lat.syndrome(PauliChain.from_edges(lat.n_edges, z_edges=[e]))
        assert d.vertex_defects == frozenset(int(v) for v in lat.edge_vertices[e])
        assert not d.face_defects
        d = lat.syndrome(PauliChain.from_edges(lat.n_edges, x_edges=[e]))
        assert d.face_defects == frozenset(int(f) for f in lat.edge_faces[e])
    # stabilizer-shaped chains: X on a star, Z on a plaquette boundary
    for s in range(lat.n_vertices):
        assert lat.syndrome(PauliChain.from_edges(lat.n_edges, x_edges=lat.star(s))).is_empty()
    for p in range(lat.n_faces):
        assert lat.syndrome(PauliChain.from_edges(lat.n_edges, z_edges=lat.bound(p))).is_empty()
    # Z on a star is not a cycle: it flags the four neighbouring vertices
    d = lat.syndrome(PauliChain.from_edges(lat.n_edges, z_edges=lat.star((1, 1))))
    assert d.vertex_defects == {lat.site(0, 1), lat.site(2, 1), lat.site(1, 0), lat.site(1, 2)}


def test_homology_examples():
    k = 4
    lat = build_lattice(k)
    n = lat.n_edges
    assert lat.homology_class(PauliChain.zeros(n)) == (0, 0, 0, 0)
    hloop = [lat.edge(x, 1, "h") for x in range(k)]
    assert lat.homology_class(PauliChain.from_edges(n, z_edges=hloop)) == (1, 0, 0, 0)
    vloop = [lat.edge(2, y, "v") for y in range(k)]
    assert lat.homology_class(PauliChain.from_edges(n, z_edges=vloop)) == (0, 1, 0, 0)
    # dual loops: X on the vertical edges crossed by a horizontal dual path, and vice versa
    dual_h = [lat.edge(x, 2, "v") for x in range(k)]
    assert lat.homology_class(PauliChain.from_edges(n, x_edges=dual_h)) == (0, 0, 1, 0)
    dual_v = [lat.edge(1, y, "h") for y in range(k)]
    assert lat.homology_class(PauliChain.from_edges(n, x_edges=dual_v)) == (0, 0, 0, 1)
    for p in range(lat.n_faces):
        assert lat.homology_class(PauliChain.from_edges(n, z_edges=lat.bound(p))) == (0, 0, 0, 0)
    for s in range(lat.n_vertices):
        assert lat.homology_class(PauliChain.from_edges(n, x_edges=lat.star(s))) == (0, 0, 0, 0)


def test_open_chain_rejected():
    lat = build_lattice(3)
    with pytest.raises(OpenChainError):
        lat.homology_class(PauliChain.from_edges(lat.n_edges, z_edges=[0]))


def test_chain_group():
    a = PauliChain.from_edges(8, x_edges=[1, 2], z_edges=[3])
    b = PauliChain.from_edges(8, x_edges=[2], z_edges=[3, 4])
    c = a ^ b
    assert c == PauliChain.from_edges(8, x_edges=[1], z_edges=[4])
    assert (a ^ a).is_identity()
    assert not a.is_identity()


def _closed_chain(lat, draw):
    """Random closed chain: sum of stabilizer-type cycles and noncontractible loops."""
    k, n = lat.k, lat.n_edges
    z = np.zeros(n, bool)
    x = np.zeros(n, bool)
    for p in draw(st.lists(st.integers(0, lat.n_faces - 1), max_size=6)):
        z ^= lat.indicator(lat.bound(p))
    for s in draw(st.lists(st.integers(0, lat.n_vertices - 1), max_size=6)):
        x ^= lat.indicator(lat.star(s))
    wz = draw(st.tuples(st.booleans(), st.booleans()))
    wx = draw(st.tuples(st.booleans(), st.booleans()))
    y0, x0 = draw(st.integers(0, k - 1)), draw(st.integers(0, k - 1))
    if wz[0]:
        z ^= lat.indicator(lat.edge(x, y0, "h") for x in range(k))
    if wz[1]:
        z ^= lat.indicator(lat.edge(x0, y, "v") for y in range(k))
    if wx[0]:
        x ^= lat.indicator(lat.edge(x, y0, "v") for x in range(k))
    if wx[1]:
        x ^= lat.indicator(lat.edge(x0, y, "h") for y in range(k))
    return PauliChain(x, z), (int(wz[0]), int(wz[1]), int(wx[0]), int(wx[1]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.data())
def test_gauge_invariance(k, data):
    lat = build_lattice(k)
    chain, want = _closed_chain(lat, data.draw)
    assert lat.syndrome(chain).is_empty()
    assert tuple(lat.homology_class(chain)) == want
    s = data.draw(st.integers(0, lat.n_vertices - 1))
    p = data.draw(st.integers(0, lat.n_faces - 1))
    n = lat.n_edges
    assert lat.homology_class(chain ^ PauliChain.from_edges(n, x_edges=lat.star(s))) == tuple(want)
    assert lat.homology_class(chain ^ PauliChain.from_edges(n, z_edges=lat.bound(p))) == tuple(want)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.data())
def test_syndrome_linearity_and_parity(k, data):
    lat = build_lattice(k)
    n = lat.n_edges
    edges = st.lists(st.integers(0, n - 1), max_size=12)
    a = PauliChain.from_edges(n, data.draw(edges), data.draw(edges))
    b = PauliChain.from_edges(n, data.draw(edges), data.draw(edges))
    sa, sb, sab = lat.syndrome(a), lat.syndrome(b), lat.syndrome(a ^ b)
    assert sab.vertex_defects == sa.vertex_defects ^ sb.vertex_defects
    assert sab.face_defects == sa.face_defects ^ sb.face_defects
    assert len(sab.vertex_defects) % 2 == 0 and len(sab.face_defects) % 2 == 0
