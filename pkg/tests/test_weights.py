import json
import math

import numpy as np
import pytest
from scipy import integrate

from poisson_sigma.graphs import BoundaryObservable, FeynmanGraph, GraphClass, LVertex, enumerate_boundary_graphs
from poisson_sigma.weights import (AngleFormError, HalfPlanePoint, WeightCache, WeightResult, angle, angle_form,
                                   graph_weight_mc, sample_integrand)

WEDGE = enumerate_boundary_graphs(1)[0]


def _quadrature_wedge():
    """Wedge weight by adaptive quadrature, derivatives by central differences of the angle."""
    def phi(z, w):
        return np.angle((w - z) / (w - np.conj(z)))

    def density(r, t):
        z = complex(0.5 + r * np.cos(t), r * np.sin(t))
        h = 1e-6
        a = [(phi(z + dz, 0) - phi(z - dz, 0)) / (2 * h) for dz in (h, 1j * h)]
        b = [(phi(z + dz, 1) - phi(z - dz, 1)) / (2 * h) for dz in (h, 1j * h)]
        return (a[0] * b[1] - a[1] * b[0]) / (4 * np.pi ** 2) * r

    val, _ = integrate.dblquad(density, 0, np.pi, 0, np.inf, epsabs=1e-7)
    return val


def test_full_winding_along_the_axis():
    def dphi(t):
        (_, _), (dre, _) = angle_form(1j, complex(t, 0))
        return dre

    val, _ = integrate.quad(dphi, -np.inf, np.inf)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_conjugation_behaviour():
    z, w = 0.3 + 0.7j, -1.1 + 0.4j
    assert angle(np.conj(z), w) == pytest.approx(-angle(z, w))
    assert angle(z, np.conj(w)) == pytest.approx(angle(z, w))


@pytest.mark.parametrize("eps", [1e-3, 1e-4])
@pytest.mark.parametrize("theta", [0.3, 1.7, 4.0])
def test_small_separation_limit(eps, theta):
    z = 0.2 + 0.9j
    w = z + eps * np.exp(1j * theta)
    (_, _), (gx, gy) = angle_form(z, w)
    # d(theta)/2pi has gradient (-sin, cos)/(2 pi eps)
    assert eps * gx == pytest.approx(-np.sin(theta) / (2 * np.pi), abs=5 * eps)
    assert eps * gy == pytest.approx(np.cos(theta) / (2 * np.pi), abs=5 * eps)


def test_angle_form_errors():
    with pytest.raises(AngleFormError):
        angle_form(0.5j, 0.5j)
    with pytest.raises(AngleFormError):
        angle_form(0.0, 1.0)
    with pytest.raises(ValueError):
        HalfPlanePoint(0.0, -1.0)


def test_angle_vanishes_for_a_source_on_the_axis():
    for w in (0.3 + 0.2j, -2 + 5j, 4.0 + 0j):
        assert angle(1.5 + 0j, w) == 0.0


def test_wedge_matches_quadrature_and_half():
    q = _quadrature_wedge()
    assert q == pytest.approx(0.5, abs=1e-6)
    r = graph_weight_mc(WEDGE, samples=200_000, seed=11)
    assert abs(r.estimate - q) < 3 * r.std_error
    assert r.converged and r.rejected_fraction < 1e-6


def test_structural_zero_on_degree_mismatch():
    g = FeynmanGraph((LVertex(1), BoundaryObservable("f"), BoundaryObservable("g")), ((0, 1),), ())
    r = graph_weight_mc(GraphClass.of(g))
    assert r.estimate == 0.0 and r.reason == "degree-mismatch"
    bare = enumerate_boundary_graphs(0)[0]
    assert graph_weight_mc(bare).estimate == 1.0


def test_seed_determinism_and_threads():
    a = graph_weight_mc(WEDGE, samples=150_000, seed=5)
    b = graph_weight_mc(WEDGE, samples=150_000, seed=5)
    c = graph_weight_mc(WEDGE, samples=150_000, seed=5, threads=3)
    assert a == b == c
    assert graph_weight_mc(WEDGE, samples=150_000, seed=6).estimate != a.estimate


def test_error_scales_like_inverse_root_samples():
    small = graph_weight_mc(WEDGE, samples=50_000, seed=1)
    big = graph_weight_mc(WEDGE, samples=800_000, seed=2)
    assert small.std_error / big.std_error == pytest.approx(4.0, rel=0.2)


def test_dirichlet_near_the_axis():
    vals = [abs(sample_integrand(WEDGE, [[0.37 + 1j * y]])[0]) for y in (1e-2, 1e-3, 1e-4, 1e-5)]
    # linear vanishing in the height of the source vertex
    for a, b in zip(vals, vals[1:]):
        assert b / a == pytest.approx(0.1, rel=0.05)


def test_boundary_placement_and_swap():
    base = graph_weight_mc(WEDGE, (0.0, 1.0), 200_000, seed=21)
    moved = graph_weight_mc(WEDGE, (0.0, 2.0), 200_000, seed=22)
    assert abs(base.estimate - moved.estimate) < 3 * math.hypot(base.std_error, moved.std_error)
    swapped = graph_weight_mc(WEDGE, (1.0, 0.0), 200_000, seed=23)
    assert abs(swapped.estimate + base.estimate) < 3 * math.hypot(base.std_error, swapped.std_error)


def test_product_of_two_wedges_factorises():
    (two,) = [gc for gc in enumerate_boundary_graphs(2, 1)]
    r = graph_weight_mc(two, samples=200_000, seed=3)
    assert abs(r.estimate - 0.25) < 4 * r.std_error


def test_cache_round_trip(tmp_path):
    cache = WeightCache(tmp_path / "w.jsonl")
    assert cache.get(WEDGE.hash) is None
    r = graph_weight_mc(WEDGE, samples=10_000, seed=1)
    cache.put(r)
    assert cache.get(WEDGE.hash) == r
    cache.put(r)
    assert len(cache.all()) == 1
    assert cache.get(WEDGE.hash, (0.0, 2.0)) is None
    with open(tmp_path / "w.jsonl", "a") as fh:
        fh.write("{not json\n")
    assert WeightCache(tmp_path / "w.jsonl").get(WEDGE.hash) == r
    c2 = WeightCache(tmp_path / "w.jsonl")
    c2.all()
    assert c2.corrupt and c2.corrupt[0][0] == 3


def test_result_json_round_trip():
    r = graph_weight_mc(WEDGE, samples=5_000, seed=9)
    assert WeightResult.from_json(json.loads(json.dumps(r.to_json()))) == r
