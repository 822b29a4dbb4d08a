"""Tests for the subframe resource grid and 16-QAM mapping."""

import numpy as np
import pytest

from pnlink import lte_grid
from pnlink.config import SimConfig
from pnlink.lte_grid import ReKind


@pytest.fixture(scope="module")
def grid():
    cfg = SimConfig()
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, lte_grid.payload_size(cfg), dtype=np.int8)
    return lte_grid.build_subframe(cfg, bits)


class TestQam16:
    def test_all_zero_bits(self):
        assert lte_grid.qam16_map([0, 0, 0, 0]) == pytest.approx(
            (-3 - 3j) / np.sqrt(10)
        )

    def test_unit_average_energy(self):
        points, _ = lte_grid.qam16_constellation()
        assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_min_distance(self):
        points, _ = lte_grid.qam16_constellation()
        dists = [
            abs(a - b) for i, a in enumerate(points) for b in points[i + 1:]
        ]
        assert min(dists) == pytest.approx(2 / np.sqrt(10), abs=1e-12)

    def test_gray_labels_adjacent_differ_one_bit(self):
        points, labels = lte_grid.qam16_constellation()
        for i in range(16):
            for j in range(16):
                if abs(points[i] - points[j]) <= 2 / np.sqrt(10) + 1e-9 and i != j:
                    assert np.sum(labels[i] != labels[j]) == 1

    def test_map_slice_round_trip(self):
        for idx in range(16):
            bits = [(idx >> s) & 1 for s in (3, 2, 1, 0)]
            point = lte_grid.qam16_map(bits)
            sliced, back = lte_grid.qam16_slice(point)
            assert sliced == pytest.approx(point)
            assert back.tolist() == bits

    def test_slice_within_half_min_distance(self):
        rng = np.random.default_rng(1)
        points, _ = lte_grid.qam16_constellation()
        for p in points:
            sliced, _ = lte_grid.qam16_slice(0.99 * p)
            assert sliced == pytest.approx(p)

    def test_slice_origin_tie_break(self):
        sliced, bits = lte_grid.qam16_slice(0.0 + 0.0j)
        assert sliced == pytest.approx((-1 - 1j) / np.sqrt(10))

    def test_wrong_bit_count_rejected(self):
        with pytest.raises(ValueError):
            lte_grid.qam16_map([0, 1])


class TestLayout:
    def test_used_tone_count(self, grid):
        assert grid.used_tones.size == 180
        assert 0 not in grid.used_tones
        # symmetric around DC: 90 tones per side
        assert int(np.sum(grid.used_tones > 128)) == 90
        assert int(np.sum(grid.used_tones <= 90)) == 90

    def test_kind_partition_counts(self, grid):
        for port in range(2):
            kinds, counts = np.unique(grid.kinds[port], return_counts=True)
            by_kind = dict(zip(kinds.tolist(), counts.tolist()))
            assert by_kind[int(ReKind.DC)] == 14
            assert by_kind[int(ReKind.GUARD)] == (256 - 180 - 1) * 14
            assert by_kind[int(ReKind.PILOT)] == 120
            assert by_kind[int(ReKind.MUTED)] == 120
            assert by_kind[int(ReKind.DATA)] == 2280

    def test_eight_pilots_per_prb(self, grid):
        # one PRB = 12 consecutive used tones; count port-0 pilots inside
        prb_tones = grid.used_tones[:12]
        count = int(np.sum(grid.kinds[0][:, prb_tones] == ReKind.PILOT))
        assert count == 8

    def test_pilot_values_are_corners(self, grid):
        mask = grid.kinds == ReKind.PILOT
        vals = grid.values[mask]
        assert np.abs(np.abs(vals) ** 2 - 1.8).max() < 1e-12
        corner_set = lte_grid.QAM16_CORNERS
        for v in vals[:50]:
            assert np.min(np.abs(corner_set - v)) < 1e-12

    def test_ports_orthogonal(self, grid):
        p0 = grid.kinds[0] == ReKind.PILOT
        p1 = grid.kinds[1] == ReKind.PILOT
        assert not np.any(p0 & p1)
        # pilot on one port implies muted on the other
        assert np.all(grid.kinds[1][p0] == ReKind.MUTED)
        assert np.all(grid.kinds[0][p1] == ReKind.MUTED)

    def test_pilot_symbol_offsets(self, grid):
        inband0 = lte_grid.pilot_inband_indices(180, 0, 0)
        inband4 = lte_grid.pilot_inband_indices(180, 4, 0)
        assert np.all(inband0 % 6 == 0)
        assert np.all(inband4 % 6 == 3)
        assert lte_grid.pilot_inband_indices(180, 0, 1)[0] == 3

    def test_guard_and_dc_are_zero(self, grid):
        silent = (grid.kinds == ReKind.GUARD) | (grid.kinds == ReKind.DC)
        assert np.abs(grid.values[silent]).max() == 0.0

    def test_bit_round_trip(self, grid):
        assert np.array_equal(grid.data_truth_bits(), grid.payload_bits)
        assert np.array_equal(grid.demap_data(grid.values), grid.payload_bits)

    def test_insufficient_bits_rejected(self):
        cfg = SimConfig()
        with pytest.raises(ValueError):
            lte_grid.build_subframe(cfg, np.zeros(100, dtype=np.int8))

    def test_pilot_sequence_deterministic(self, grid):
        cfg = SimConfig()
        rng = np.random.default_rng(99)
        bits = rng.integers(0, 2, lte_grid.payload_size(cfg), dtype=np.int8)
        other = lte_grid.build_subframe(cfg, bits)
        mask = grid.kinds == ReKind.PILOT
        assert np.array_equal(other.kinds, grid.kinds)
        assert np.allclose(other.values[mask], grid.values[mask])


class TestDump:
    def test_csv_dump(self, grid, tmp_path):
        path = tmp_path / "grid.csv"
        grid.dump_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "tone,symbol,port,kind,re,im"
        assert len(lines) == 1 + 2 * 14 * 256
        first = lines[1].split(",")
        assert first[:4] == ["0", "0", "0", "dc"]
