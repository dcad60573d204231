import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rissim.scene import (CBAND, MMWAVE, BaseStation, BuildingPrism, Point3, SceneError, SceneMap,
                          SceneValidationError, generate_manhattan, load_scene, los_trace,
                          ris_candidates, save_scene, scene_from_dict, ue_grid)

from conftest import box, make_scene, outdoor_band


def slab_crossings(a, b, lo, hi):
    """Exact open-segment / open-box test by the slab method.

    Returns (blocked, boundary crossings strictly inside the segment).
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = b - a
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if d[k] == 0:
            if not lo[k] < a[k] < hi[k]:
                return False, 0
            continue
        u, v = (lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]
        t0, t1 = max(t0, min(u, v)), min(t1, max(u, v))
    if t1 <= t0:
        return False, 0
    return True, int(0 < t0 < 1) + int(0 < t1 < 1)


def box_oracle(boxes, a, b):
    blocked, walls = False, 0
    for x0, y0, x1, y1, h in boxes:
        bl, w = slab_crossings(a, b, (x0, y0, 0.0), (x1, y1, h))
        blocked |= bl
        walls += w
    return blocked, walls


class TestBuildingPrism:
    def test_negative_height_names_invariant(self):
        with pytest.raises(SceneValidationError, match="height > 0"):
            box(0, 0, 10, 10, -5)

    def test_clockwise_rejected(self):
        with pytest.raises(SceneValidationError, match="counter-clockwise"):
            BuildingPrism(((0, 0), (0, 10), (10, 10), (10, 0)), 5, 20)

    def test_self_intersecting_rejected(self):
        # a notch folded back across the bottom edge; net area stays positive
        fp = ((0, 0), (20, 0), (20, 10), (12, 10), (12, -5), (8, -5), (8, 10), (0, 10))
        with pytest.raises(SceneValidationError, match="non-self-intersecting"):
            BuildingPrism(fp, 5, 20)

    def test_concave_accepted(self):
        p = BuildingPrism(((0, 0), (20, 0), (20, 20), (10, 10), (0, 20)), 9, 20)
        assert p.n_floors == 3

    def test_too_few_vertices(self):
        with pytest.raises(SceneValidationError):
            BuildingPrism(((0, 0), (1, 0)), 5, 20)


class TestSceneMap:
    def test_requires_bs(self):
        with pytest.raises(SceneValidationError, match="at least one BS"):
            SceneMap((100, 100), (), (), CBAND)

    def test_building_outside_extent(self):
        with pytest.raises(SceneValidationError, match="inside extent"):
            make_scene([box(90, 90, 110, 110, 10)])

    def test_duplicate_bs_ids(self):
        bs = BaseStation("a", Point3(1.0, 1.0, 10.0))
        with pytest.raises(SceneValidationError, match="unique"):
            SceneMap((100, 100), (), (bs, bs), CBAND)

    def test_immutable(self):
        sc = make_scene()
        with pytest.raises(Exception):
            sc.extent = (1, 1)


class TestLoadScene:
    def test_minimal_scene(self, tmp_path):
        sc = make_scene()
        p = tmp_path / "s.json"
        save_scene(sc, p)
        back = load_scene(p)
        assert back.buildings == () and back == sc

    def test_bundled_demo_bs_height(self, bundled_scene_path):
        sc = load_scene(bundled_scene_path)
        assert sc.bs_sites[0].position.z == 30.0
        assert sc.extent == (800.0, 800.0)

    def test_unknown_key_rejected(self):
        d = make_scene().to_dict()
        d["colour"] = "red"
        with pytest.raises(SceneError, match="unknown keys"):
            scene_from_dict(d)

    def test_unknown_building_key_rejected(self):
        d = make_scene([box(10, 10, 20, 20, 5)]).to_dict()
        d["buildings"][0]["roof"] = "flat"
        with pytest.raises(SceneError, match="buildings\\[0\\]"):
            scene_from_dict(d)

    def test_negative_height_in_file(self, tmp_path):
        d = make_scene([box(10, 10, 20, 20, 5)]).to_dict()
        d["buildings"][0]["height"] = -5
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(d))
        with pytest.raises(SceneValidationError) as err:
            load_scene(p)
        assert "height > 0" in str(err.value) and "buildings[0]" in str(err.value)

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        with pytest.raises(SceneError, match="malformed"):
            load_scene(p)

    def test_wall_loss_defaults_to_band(self):
        d = make_scene([box(10, 10, 20, 20, 5)], band=MMWAVE).to_dict()
        del d["buildings"][0]["wall_loss_db"]
        assert scene_from_dict(d).buildings[0].wall_loss_db == MMWAVE.default_wall_loss_db


class TestGenerateManhattan:
    def test_prism_count(self):
        sc = generate_manhattan(800, 80, 20, 15, seed=3)
        assert len(sc.buildings) == 64

    def test_extent_too_small(self):
        with pytest.raises(ValueError):
            generate_manhattan(50, 80, 20, 15)

    def test_deterministic(self):
        a = generate_manhattan(400, 60, 40, 12, seed=7)
        b = generate_manhattan(400, 60, 40, 12, seed=7)
        assert a.dumps() == b.dumps()

    def test_seed_changes_heights(self):
        a = generate_manhattan(400, 60, 40, 12, seed=1)
        b = generate_manhattan(400, 60, 40, 12, seed=2)
        assert a.dumps() != b.dumps()

    def test_streets_are_clear(self):
        sc = generate_manhattan(400, 60, 40, 12, seed=1)
        # along the street centre line y = 100 at ground level
        assert los_trace(sc, (1, 100, 1.5), (399, 100, 1.5)).clear


class TestUEGrid:
    def test_empty_scene_outdoor(self):
        sc = make_scene(band=outdoor_band())
        samples = ue_grid(sc)
        assert len(samples) == 100
        assert all(s.position.z == 1.5 and not s.indoor for s in samples)

    def test_fully_covered_raises(self):
        sc = make_scene([box(0, 0, 100, 100, 10)], bs=((0, 0, 30),), band=outdoor_band())
        with pytest.raises(ValueError, match="empty"):
            ue_grid(sc)

    def test_two_floor_building(self):
        sc = make_scene([box(40, 40, 60, 60, 6)])
        samples = ue_grid(sc)
        indoor = [s for s in samples if s.indoor]
        outdoor = [s for s in samples if not s.indoor]
        assert len(outdoor) == 96 and len(indoor) == 8
        assert sorted({s.floor_index for s in indoor}) == [0, 1]
        assert sorted({s.position.z for s in indoor}) == [1.5, 4.5]

    def test_brute_force_point_in_polygon(self):
        fp = ((10, 10), (60, 10), (60, 40), (40, 40), (40, 70), (10, 70))
        sc = make_scene([BuildingPrism(fp, 6, 20)])
        samples = ue_grid(sc)

        def inside(x, y):
            n, c = len(fp), False
            for i in range(n):
                (x1, y1), (x2, y2) = fp[i], fp[(i + 1) % n]
                if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
                    c = not c
            return c

        cells = [(x, y) for x in np.arange(5, 100, 10) for y in np.arange(5, 100, 10)]
        n_in = sum(inside(x, y) for x, y in cells)
        assert sum(s.indoor for s in samples) == 2 * n_in
        assert sum(not s.indoor for s in samples) == 100 - n_in

    @given(st.integers(1, 30), st.integers(1, 30))
    @settings(max_examples=30, deadline=None)
    def test_density_rectangular(self, nx, ny):
        sc = make_scene(bs=((0, 0, 10),), extent=(nx * 10.0, ny * 10.0), band=outdoor_band())
        assert len(ue_grid(sc)) == nx * ny


class TestLOSTrace:
    def test_above_roofs(self):
        sc = make_scene([box(40, 40, 60, 60, 10)])
        assert los_trace(sc, (0, 50, 20), (100, 50, 20)) == (True, 0)

    def test_through_one_box(self):
        sc = make_scene([box(40, 40, 60, 60, 10)])
        r = los_trace(sc, (0, 50, 2), (100, 50, 2))
        assert not r.clear and r.exterior_walls_crossed == 2

    def test_grazing_edge_is_clear(self):
        sc = make_scene([box(40, 40, 60, 60, 10)])
        assert los_trace(sc, (0, 40, 2), (100, 40, 2)).clear
        assert los_trace(sc, (0, 50, 10), (100, 50, 10)).clear
        # touches the (40, 40) corner only
        assert los_trace(sc, (30, 50, 2), (50, 30, 2)).clear

    def test_ending_inside_counts_one_wall(self):
        sc = make_scene([box(40, 40, 60, 60, 10)])
        assert los_trace(sc, (0, 50, 2), (50, 50, 2)) == (False, 1)

    def test_roof_entry_counts(self):
        sc = make_scene([box(40, 40, 60, 60, 10)])
        # enters through the roof, exits through a wall
        assert los_trace(sc, (45, 50, 20), (70, 50, 2)) == (False, 2)

    def test_coincident_endpoints(self):
        with pytest.raises(ValueError):
            los_trace(make_scene(), (1, 1, 1), (1, 1, 1))

    def test_random_against_slab_oracle(self):
        rng = np.random.default_rng(11)
        boxes = [(10, 10, 30, 25, 12), (45, 50, 70, 80, 25), (60, 5, 90, 30, 8)]
        sc = make_scene([box(*b) for b in boxes])
        for _ in range(2000):
            a = rng.uniform([0, 0, 0], [100, 100, 30])
            b = rng.uniform([0, 0, 0], [100, 100, 30])
            r = los_trace(sc, a, b)
            blocked, walls = box_oracle(boxes, a, b)
            assert r.clear == (not blocked)
            assert r.exterior_walls_crossed == walls

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=6, max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, c):
        sc = make_scene([box(20, 20, 50, 40, 15),
                         BuildingPrism(((60, 60), (90, 60), (75, 95)), 25, 20)])
        a, b = (c[0], c[1], c[2] * 0.3), (c[3], c[4], c[5] * 0.3)
        if a == b:
            return
        assert los_trace(sc, a, b) == los_trace(sc, b, a)


class TestCandidates:
    def test_empty_scene(self):
        assert ris_candidates(make_scene(), 10) == []

    def test_single_building_faces(self):
        # BS south-west of the box sees the south and west faces only
        sc = make_scene([box(40, 40, 60, 60, 10)], bs=((10, 10, 5),))
        sites = ris_candidates(sc, 10)
        assert sites
        for s in sites:
            n = np.asarray(s.normal)
            assert math.isclose(np.linalg.norm(n), 1.0, abs_tol=1e-12)
            if s.mount == "wall":
                assert n[2] == 0 and (n[0] < 0 or n[1] < 0) and n[0] <= 0 and n[1] <= 0
            if s.mount == "roof":
                assert n[2] > 0
        walls = {tuple(np.round(s.normal, 6)) for s in sites if s.mount == "wall"}
        assert walls == {(-1.0, 0.0, 0.0), (0.0, -1.0, 0.0)}
        # independent brute-force LOS check of each wall sample
        for s in sites:
            assert los_trace(sc, s.position, sc.bs_sites[0].position).clear

    def test_every_site_sees_feeding_bs(self, micro_scene):
        sites = ris_candidates(micro_scene, 5)
        for s in sites:
            bs = micro_scene.bs_sites[micro_scene.bs_index(s.feeding_bs)].position
            assert los_trace(micro_scene, s.position, bs).clear
            assert np.dot(np.subtract(bs, s.position), s.normal) > 0

    def test_nearest_feeding_bs(self):
        sc = make_scene([box(40, 40, 60, 60, 10)], bs=((10, 10, 5), (5, 5, 5)))
        for s in ris_candidates(sc, 10):
            d = [math.dist(s.position, b.position) for b in sc.bs_sites]
            assert s.feeding_bs == sc.bs_sites[int(np.argmin(d))].id

    def test_demo_count_scale(self, cband_demo):
        n = len(ris_candidates(cband_demo, 6))
        assert 2000 <= n <= 8000
