import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rissim.propagation import (RISUnit, UNREACHABLE, db_to_lin, direct_link_dbm, fresnel_ratio,
                                fspl_db, lin_to_db, noise_floor_dbm, ris_link_dbm,
                                ris_path_gain_db, ris_power_mw, scene_noise_dbm, snr_map, ue_snr)
from rissim.scene import CBAND, MMWAVE, SPEED_OF_LIGHT, CandidateSite, Point3, ris_candidates

from conftest import box, make_scene, outdoor_band

C = 299_792_458.0


def site(pos, normal, bs="bs0", mount="wall"):
    return CandidateSite(Point3(*map(float, pos)), tuple(map(float, normal)), mount, bs, 0.0)


class TestNoiseFloor:
    def test_table_values(self):
        assert noise_floor_dbm(200e6, 0) == pytest.approx(-91.0, abs=0.05)
        assert noise_floor_dbm(400e6, 0) == pytest.approx(-88.0, abs=0.05)

    def test_one_hertz(self):
        assert noise_floor_dbm(1.0, 0.0) == -174.0

    def test_noise_figure_adds(self):
        assert noise_floor_dbm(200e6, 7) == pytest.approx(-174 + 83.0103 + 7, abs=1e-4)

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            noise_floor_dbm(0, 7)


class TestFSPL:
    def test_unit_argument(self):
        f = C / (4 * math.pi)
        assert fspl_db(1.0, f) == pytest.approx(0.0, abs=1e-12)

    def test_hundred_metres_cband(self):
        # 32.45 + 20 log10(d_km) + 20 log10(f_MHz)
        hand = 32.45 + 20 * math.log10(0.1) + 20 * math.log10(3500)
        assert fspl_db(100, 3.5e9) == pytest.approx(83.3, abs=0.1)
        assert fspl_db(100, 3.5e9) == pytest.approx(hand, abs=0.01)

    def test_doubling(self):
        assert fspl_db(200, 3.5e9) - fspl_db(100, 3.5e9) == pytest.approx(20 * math.log10(2), abs=1e-12)

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            fspl_db(0, 3.5e9)

    @given(st.floats(1, 1e4), st.floats(1.01, 10))
    def test_monotone(self, d, k):
        assert fspl_db(d * k, 28e9) > fspl_db(d, 28e9)


class TestDirectLink:
    def test_los_budget(self):
        sc = make_scene(bs=((0, 50, 10),), extent=(200, 100))
        lb = direct_link_dbm(sc, 0, (100, 50, 10))
        assert lb.path_kind == "direct_los" and lb.walls_crossed == 0
        assert lb.rx_power_dbm == pytest.approx(-7.3, abs=0.2)
        assert lb.rx_power_dbm == pytest.approx(76 - fspl_db(100, 3.5e9), abs=1e-9)

    def test_nlos_two_walls(self):
        free = make_scene(bs=((0, 50, 10),), extent=(200, 100))
        walled = make_scene([box(40, 40, 60, 60, 20, loss=20)], bs=((0, 50, 10),), extent=(200, 100))
        los = direct_link_dbm(free, "bs0", (100, 50, 10))
        nlos = direct_link_dbm(walled, "bs0", (100, 50, 10))
        assert nlos.path_kind == "direct_nlos" and nlos.walls_crossed == 2
        assert los.rx_power_dbm - nlos.rx_power_dbm == pytest.approx(55.0, abs=1e-9)

    def test_distance_clamp(self):
        sc = make_scene(bs=((50, 50, 10),))
        near = direct_link_dbm(sc, 0, (50, 50, 9.7))
        at1 = direct_link_dbm(sc, 0, (50, 50, 9.0))
        assert near.rx_power_dbm == at1.rx_power_dbm

    @given(st.floats(2, 90), st.floats(1.05, 2))
    @settings(deadline=None)
    def test_decreasing_in_distance(self, d, k):
        sc = make_scene(bs=((0, 50, 10),), extent=(200, 100))
        p1 = direct_link_dbm(sc, 0, (d, 50, 10)).rx_power_dbm
        p2 = direct_link_dbm(sc, 0, (d * k, 50, 10)).rx_power_dbm
        assert p2 < p1


class TestRISGain:
    def test_unit_argument(self):
        assert ris_path_gain_db(3.0, 5.0, 4 * math.pi * 15.0, 1.0, 3.5e9) == pytest.approx(0.0, abs=1e-12)

    def test_width_doubling(self):
        g1 = ris_path_gain_db(50, 80, 1.0, 0.7, 28e9)
        g2 = ris_path_gain_db(50, 80, 4.0, 0.7, 28e9)
        assert g2 - g1 == pytest.approx(20 * math.log10(4), abs=1e-12)

    def test_cband_size3(self):
        g = ris_path_gain_db(100, 100, 5.3 ** 2, 1.0, 3.5e9)
        assert g == pytest.approx(-73.0, abs=0.2)
        assert g == pytest.approx(20 * math.log10(28.09 / (4 * math.pi * 1e4)), abs=1e-9)

    def test_radar_equation_equivalence(self):
        # bistatic radar equation with the flat-plate cross-section
        lam = SPEED_OF_LIGHT / 3.5e9
        a, c, d1, d2 = 14.44, 0.8, 120.0, 70.0
        sigma = 4 * math.pi * (a * c) ** 2 / lam ** 2
        pr = lam ** 2 * sigma / ((4 * math.pi) ** 3 * d1 ** 2 * d2 ** 2)
        assert ris_path_gain_db(d1, d2, a, c, 3.5e9) == pytest.approx(10 * math.log10(pr), abs=1e-9)

    def test_reflection_loss(self):
        assert (ris_path_gain_db(10, 10, 1, 1, 3.5e9) - ris_path_gain_db(10, 10, 1, 1, 3.5e9, 3.0)
                == pytest.approx(3.0))

    def test_behind_surface(self):
        with pytest.raises(ValueError):
            ris_path_gain_db(10, 10, 1, 0.0, 3.5e9)

    @given(st.floats(1, 1e3), st.floats(1, 1e3), st.floats(0.01, 1))
    def test_reciprocity(self, d1, d2, c):
        assert ris_path_gain_db(d1, d2, 2.0, c, 28e9) == pytest.approx(
            ris_path_gain_db(d2, d1, 2.0, c, 28e9), abs=1e-9)


class TestFresnel:
    def test_cband_size3(self):
        assert fresnel_ratio(100, 100, 3.5e9, 5.3) == pytest.approx(0.78, abs=0.01)

    def test_mmwave_size3(self):
        assert fresnel_ratio(100, 100, 28e9, 0.67) == pytest.approx(2.19, abs=0.01)

    def test_limit(self):
        assert fresnel_ratio(1e-9, 100, 3.5e9, 1.0) < 1e-3

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            fresnel_ratio(10, 10, 3.5e9, 0)

    @given(st.floats(1, 1e3), st.floats(1, 1e3), st.floats(0.1, 10), st.floats(1.1, 5))
    def test_scaling(self, d1, d2, w, k):
        r = fresnel_ratio(d1, d2, 3.5e9, w)
        assert fresnel_ratio(d1, d2, 3.5e9, w * k) == pytest.approx(r / k, rel=1e-12)
        # quartering the frequency doubles the ratio (sqrt of wavelength)
        assert fresnel_ratio(d1, d2, 3.5e9 / 4, w) == pytest.approx(2 * r, rel=1e-12)


class TestDecibels:
    @given(st.floats(-200, 100))
    def test_round_trip(self, x):
        assert abs(float(lin_to_db(db_to_lin(x))) - x) <= 1e-9

    def test_zero_power(self):
        assert lin_to_db(0.0) == -np.inf


def _open_scene(band=CBAND):
    # BS at the west edge, a tall slab hides the east street from it
    return make_scene([box(40, 0, 60, 70, 40)], bs=((10, 50, 20),), extent=(100, 100),
                      band=outdoor_band(band))


class TestUESnr:
    def test_empty_deployment_is_direct(self):
        sc = _open_scene()
        rec = ue_snr(sc, (80, 50, 1.5))
        lb = direct_link_dbm(sc, 0, (80, 50, 1.5))
        assert rec.snr_db == pytest.approx(lb.rx_power_dbm - scene_noise_dbm(sc))
        assert len(rec.paths) == 1

    def test_blocked_ris_hop_ignored(self):
        sc = _open_scene()
        # north-facing surface above the slab cannot see a UE south of it
        r = RISUnit(site((50, 70.01, 30), (0, 1, 0)), 1.0)
        assert ris_link_dbm(sc, r, (50, 10, 1.5)) is None
        assert ue_snr(sc, (50, 10, 1.5), [r]).snr_db == ue_snr(sc, (50, 10, 1.5)).snr_db

    def test_two_identical_paths(self):
        sc = make_scene([box(40, 20, 60, 80, 40)], bs=((10, 95, 20),), extent=(100, 100),
                        band=dataclasses.replace(outdoor_band(), nlos_excess_db=1e6))
        # the UE is shadowed so the direct path is negligible
        s = site((70, 90, 10), (-1 / math.sqrt(2), -1 / math.sqrt(2), 0))
        ue = (90, 50, 1.5)
        r = RISUnit(s, 2.0)
        one = ue_snr(sc, ue, [r]).snr_db
        two = ue_snr(sc, ue, [r, RISUnit(s, 2.0, id="b")]).snr_db
        assert two - one == pytest.approx(10 * math.log10(2), abs=1e-6)

    def test_ris_power_matches_gain_formula(self):
        sc = make_scene(bs=((0, 0, 10),), band=outdoor_band())
        s = site((50, 50, 10), (-1 / math.sqrt(2), -1 / math.sqrt(2), 0))
        ue = np.array([[20.0, 60.0, 1.5]])
        p = float(lin_to_db(ris_power_mw(sc, [s], 3.8, ue)[0, 0]))
        d1 = math.dist((0, 0, 10), s.position)
        d2 = math.dist(ue[0], s.position)
        cos = np.dot(np.subtract((0, 0, 10), s.position) / d1, s.normal)
        assert p == pytest.approx(76 + ris_path_gain_db(d1, d2, 3.8 ** 2, cos, 3.5e9), abs=1e-9)

    def test_ue_behind_surface(self):
        sc = make_scene(bs=((0, 0, 10),), band=outdoor_band())
        s = site((50, 50, 10), (-1, 0, 0))
        assert ris_power_mw(sc, [s], 1.0, np.array([[80.0, 50.0, 1.5]]))[0, 0] == 0.0

    def test_unreachable_marker(self):
        sc = make_scene(bs=((0, 0, 10),), band=dataclasses.replace(outdoor_band(), nlos_excess_db=1e308))
        sc2 = make_scene([box(40, 40, 60, 60, 40)], bs=((0, 0, 10),), band=sc.band)
        assert ue_snr(sc2, (90, 90, 1.5)).snr_db == UNREACHABLE

    def test_snr_map_matches_scalar(self, micro_scene):
        sites = ris_candidates(micro_scene, 10)[:4]
        dep = [RISUnit(s, 0.67, id=str(i)) for i, s in enumerate(sites)]
        pts = np.array([[5, 5, 1.5], [50, 5, 1.5], [95, 55, 1.5], [45, 30, 1.5]])
        m = snr_map(micro_scene, pts, dep)
        for p, v in zip(pts, m):
            assert ue_snr(micro_scene, p, dep).snr_db == pytest.approx(v, abs=1e-9)

    def test_superposition_and_area(self, micro_scene):
        sites = ris_candidates(micro_scene, 10)
        pts = np.array([[x, y, 1.5] for x in range(5, 100, 10) for y in (5, 55)], dtype=float)
        base = snr_map(micro_scene, pts)
        prev = base
        for w in (0.33, 0.48, 0.67):
            cur = snr_map(micro_scene, pts, [RISUnit(s, w) for s in sites[:6]])
            assert np.all(cur >= base) and np.all(cur >= prev)
            prev = cur


class TestWallPenetration:
    def test_indoor_ue_pays_wall_loss(self):
        band = dataclasses.replace(CBAND, ris_wall_penetration=True)
        sc = make_scene([box(60, 40, 80, 60, 10, loss=20)], bs=((10, 10, 20),), band=band)
        off = sc.with_band(dataclasses.replace(band, ris_wall_penetration=False))
        # the hop enters through the west wall once
        s = site((50, 60, 5), (0, -1, 0))
        ue = np.array([[70.0, 50.0, 1.5]])
        assert ris_power_mw(off, [s], 2.0, ue)[0, 0] == 0.0
        on = ris_power_mw(sc, [s], 2.0, ue)[0, 0]
        free = ris_power_mw(make_scene(bs=((10, 10, 20),), band=band), [s], 2.0, ue)[0, 0]
        assert float(lin_to_db(free) - lin_to_db(on)) == pytest.approx(20.0, abs=1e-9)
