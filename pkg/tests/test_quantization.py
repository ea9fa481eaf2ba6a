import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qampnc.constellation import effective_min_distance, qam
from qampnc.gaussian import GaussianRational
from qampnc.quantization import (
    CIRegion,
    adjacent_pairs,
    boundary_polylines,
    build_region_map,
    ci_ext_centers,
    ci_flags,
    classify,
    classify_many,
    count_sector,
    grid_labels,
    in_ci_region,
    region_neighbors,
    transition_curve,
    weighted_distances,
)


def state(num, den=1):
    return GaussianRational(num, den)


class TestClassification:
    def test_example(self, fades16):
        assert classify(2 + 0.9j, fades16) == state(2 + 1j)

    def test_state_maps_to_itself(self, fades16):
        idx = classify_many(fades16.values, fades16)
        assert idx.tolist() == list(range(len(fades16)))

    def test_weighted_distance_is_min_over_representations(self, fades16):
        # |d_k + z d_l| minimized over difference pairs with -d_k/d_l = h
        C = qam(16)
        deltas = np.unique(np.round((C.lattice_array[:, None] - C.lattice_array[None, :]).ravel(), 9))
        deltas = deltas[deltas != 0]
        z = 1.7 + 0.45j
        w = weighted_distances(z, fades16)
        for i in (0, 5, 100, 387):
            h = complex(fades16.values[i])
            best = min(abs(dk + z * dl) for dk in deltas for dl in deltas if abs(-dk / dl - h) < 1e-9)
            assert w[i] == pytest.approx(best)

    def test_choice_maximizes_removed_distance(self, fades16):
        # the chosen state is where the relay sum comes closest to colliding
        C = qam(16)
        rng = np.random.default_rng(5)
        for z in rng.uniform(-3, 3, 20) + 1j * rng.uniform(-3, 3, 20):
            i = int(classify_many(np.array([z]), fades16)[0])
            assert weighted_distances(z, fades16)[i] == pytest.approx(effective_min_distance(C, z), abs=1e-9)


class TestCurves:
    @pytest.mark.parametrize(
        "other, kind",
        [
            (state(3 + 3j, 2), "circle"),
            (state(3 + 2j, 2), "circle"),
            (state(7 + 4j, 5), "circle"),
            (state(9 + 3j, 5), "circle"),
            (state(5 + 1j, 2), "circle"),
            (state(2 + 2j), "line"),
            (state(3 + 1j), "line"),
            (state(2), "line"),
        ],
        ids=str,
    )
    def test_boundaries_of_two_plus_j(self, fades16, other, kind):
        cv = transition_curve(state(2 + 1j), other, fades16)
        assert cv.kind == kind
        assert np.max(np.abs(cv.residual(cv.sample(64)))) < 1e-9

    def test_circle_parameters(self, fades16):
        cv = transition_curve(state(2 + 1j), state(3 + 3j, 2), fades16)
        assert cv.center == pytest.approx(1 + 2j)
        assert cv.radius == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 387), st.integers(0, 387))
    def test_residual_zero_on_curve(self, fades16, i, j):
        if i == j:
            return
        cv = transition_curve(fades16.states[i], fades16.states[j], fades16)
        pts = cv.sample(50)
        scale = 1 + np.abs(pts).max()
        assert np.max(np.abs(cv.residual(pts))) < 1e-9 * scale
        assert np.max(cv.distance(pts)) < 1e-9 * scale

    def test_explicit_pairs(self, fades16):
        cv = transition_curve(2 + 1j, 2 + 2j, fades16, rep_pairs=((-4 - 2j, 2), (-4 - 4j, 2)))
        assert cv.kind == "line"
        with pytest.raises(ValueError):
            transition_curve(2 + 1j, 2 + 2j, fades16, rep_pairs=((-4, 2), (-4 - 4j, 2)))
        with pytest.raises(ValueError):
            transition_curve(2 + 1j, 2 + 1j, fades16)


class TestCIRegion:
    def test_centers(self):
        c16 = ci_ext_centers(16)
        assert len(c16) == 24 and len(set(c16)) == 24
        assert len(ci_ext_centers(4)) == 8
        assert all(max(abs(c.real), abs(c.imag)) == 3 for c in c16)

    @pytest.mark.parametrize("z, want", [(5, CIRegion.EXTERIOR), (0.1, CIRegion.INTERIOR), (1, CIRegion.NO),
                                         (2 + 1j, CIRegion.NO), (4 + 4j, CIRegion.EXTERIOR)])
    def test_examples(self, z, want):
        assert in_ci_region(z, 16) is want

    def test_interior_is_inverted_exterior(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=2000) * 3 + 1j * rng.normal(size=2000) * 3
        z = z[np.abs(z) > 1]
        assert np.array_equal(ci_flags(z, 16) == 1, ci_flags(1 / z, 16) == -1)

    def test_no_singular_state_inside(self, fades16):
        assert not np.any(ci_flags(fades16.values, 16))

    def test_every_map_equal_inside(self):
        # inside the region the effective distance reaches the bound
        C = qam(16)
        rng = np.random.default_rng(4)
        z = rng.uniform(-6, 6, 3000) + 1j * rng.uniform(-6, 6, 3000)
        for w in z[ci_flags(z, 16) != 0][:200]:
            assert effective_min_distance(C, w) >= min(2, 2 * abs(w)) - 1e-12


class TestRegions:
    def test_sector_count(self, fades16):
        assert count_sector(fades16) == 27

    def test_grid_and_adjacency(self, fades16):
        pts, labels = grid_labels(fades16, 20, (1.5, 2.5, 0.5, 1.5))
        assert pts.shape == labels.shape == (20, 20)
        assert labels[10, 10] == fades16.index_of(2 + 1j)
        pairs = adjacent_pairs(np.array([[0, 0, 1], [2, 2, 1]]))
        assert pairs == {(0, 1), (0, 2), (1, 2)}

    def test_neighbors_of_two_plus_j(self, fades16):
        got = region_neighbors(state(2 + 1j), fades16, grid_resolution=400, extent=(0, 4, 0, 4))
        must = {state(3 + 3j, 2), state(3 + 2j, 2), state(9 + 3j, 5), state(2 + 2j), state(3 + 1j),
                state(5 + 1j, 2), state(2)}
        assert must <= got
        assert len(got) == 8

    def test_region_map_symmetric_under_inversion(self, fades16):
        rmap = build_region_map(fades16, grid_resolution=300, extent=4.0)
        pairs = {(min(i, j), max(i, j)) for i, cs in rmap.boundaries.items() for j, _ in cs}
        for p, q in list(pairs)[:200]:
            ip = fades16.index_of(fades16.states[p].inverse())
            iq = fades16.index_of(fades16.states[q].inverse())
            assert (min(ip, iq), max(ip, iq)) in pairs
        lines = boundary_polylines(rmap, (0, 3, 0, 3))
        assert lines
        for line in lines[:50]:
            w = np.stack([weighted_distances(p, fades16) for p in line[::10]])
            srt = np.sort(w, axis=1)
            # two states tie for the minimum along every drawn boundary
            assert np.all(srt[:, 1] - srt[:, 0] <= 1e-7 * (1 + srt[:, 0]))
