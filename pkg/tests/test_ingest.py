import io
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from sewerclust.errors import ConfigError, DataError
from sewerclust.ingest import (AttributeTable, FlowPair, LevelSeries, load_manifest,
                               mean_filling_degree, parse_attribute_table,
                               parse_flow_pair, parse_level_series,
                               write_attribute_table, write_level_series)

UTC = timezone.utc


def level_csv(n, start=datetime(2014, 1, 1, tzinfo=UTC), step_h=1.0, values=None,
              skip=(), blank=()):
    lines = ["timestamp,level"]
    for i in range(n):
        if i in skip:
            continue
        ts = start + timedelta(hours=i * step_h)
        v = "" if i in blank else f"{values[i] if values is not None else 0.3 + 0.01 * (i % 7):.6f}"
        lines.append(f"{ts.isoformat()},{v}")
    return io.StringIO("\n".join(lines) + "\n")


ATTR_HEADER = "id,name,SA,SG,SP,CA,CG,CP,STA,STG,STP,ELE,TVO,ADD,INF,OVL,IMP,SAN"


def attr_row(cid, comps=(10, 30, 25, 15, 20)):
    add, inf, ovl, imp, san = comps
    return (f"{cid},Catchment {cid},40,30,1200,30,20,1500,8,15,0,150,3e5,"
            f"{add},{inf},{ovl},{imp},{san}")


def attr_csv(n=17, header=ATTR_HEADER, rows=None):
    lines = [header]
    lines += rows if rows is not None else [attr_row(i + 1) for i in range(n)]
    return io.StringIO("\n".join(lines) + "\n")


class TestParseLevelSeries:
    def test_well_formed_year_roundtrips(self):
        series = parse_level_series(level_csv(8760), diameter=0.6, catchment_id="1")
        assert series.n_samples == 8760
        assert series.step == 1.0
        assert not series.missing_mask.any()

    def test_three_hour_gap_masks_three_samples(self):
        series = parse_level_series(level_csv(100, skip={40, 41, 42}), diameter=0.6)
        assert series.n_samples == 100
        assert int(series.missing_mask.sum()) == 3
        assert series.missing_mask[40:43].all()

    def test_blank_cells_mask(self):
        series = parse_level_series(level_csv(50, blank={7, 8}), diameter=0.6)
        assert int(series.missing_mask.sum()) == 2

    def test_out_of_order_rows_rejected(self):
        text = level_csv(5).getvalue().splitlines()
        text[2], text[3] = text[3], text[2]
        with pytest.raises(DataError, match="non-monotone"):
            parse_level_series(io.StringIO("\n".join(text)), diameter=0.6)

    def test_gap_above_max_rejected(self):
        src = level_csv(100, skip=set(range(30, 37)))  # 7 missing > default 6
        with pytest.raises(DataError, match="gap"):
            parse_level_series(src, diameter=0.6)
        src = level_csv(100, skip=set(range(30, 37)))
        series = parse_level_series(src, diameter=0.6, max_gap=7)
        assert int(series.missing_mask.sum()) == 7

    def test_irregular_step_rejected(self):
        lines = ["timestamp,level",
                 "2014-01-01T00:00:00+00:00,0.3",
                 "2014-01-01T01:30:00+00:00,0.3"]
        with pytest.raises(DataError, match="irregular step"):
            parse_level_series(io.StringIO("\n".join(lines)), diameter=0.6)

    def test_empty_file_rejected(self):
        with pytest.raises(DataError, match="empty"):
            parse_level_series(io.StringIO(""), diameter=0.6)
        with pytest.raises(DataError, match="no data rows"):
            parse_level_series(io.StringIO("timestamp,level\n"), diameter=0.6)

    def test_negative_level_rejected(self):
        values = [0.3] * 10
        values[4] = -0.01
        with pytest.raises(DataError, match="non-negative"):
            parse_level_series(level_csv(10, values=values), diameter=0.6)

    def test_surcharge_allowed(self):
        values = [0.9] * 10  # above the 0.6 m diameter
        series = parse_level_series(level_csv(10, values=values), diameter=0.6)
        assert series.levels.max() == pytest.approx(0.9)

    def test_deterministic(self):
        a = parse_level_series(level_csv(200, skip={50}), diameter=0.6)
        b = parse_level_series(level_csv(200, skip={50}), diameter=0.6)
        assert np.array_equal(a.levels, b.levels)
        assert np.array_equal(a.missing_mask, b.missing_mask)
        assert a.start_time == b.start_time

    def test_roundtrip_12_significant_digits(self, tmp_path):
        rng = np.random.default_rng(3)
        values = list(rng.uniform(0.01, 1.2, 300))
        series = parse_level_series(level_csv(300, values=values), diameter=0.6,
                                    catchment_id="7")
        path = tmp_path / "7.csv"
        write_level_series(series, path)
        back = parse_level_series(path, diameter=0.6, catchment_id="7")
        np.testing.assert_allclose(back.levels, series.levels, rtol=1e-12)
        assert np.array_equal(back.missing_mask, series.missing_mask)


class TestAttributeTable:
    def test_17_row_fixture(self):
        table = parse_attribute_table(attr_csv(17))
        assert table.n_rows == 17
        assert table.needs_wavelet_features  # WAVE/MFD columns absent

    def test_composition_sum_out_of_tolerance(self):
        rows = [attr_row(1), attr_row(2, comps=(10, 30, 25, 15, 17))]  # 97 %
        with pytest.raises(DataError, match="composition sum out of tolerance"):
            parse_attribute_table(attr_csv(rows=rows))
        # a looser tolerance admits the same row
        table = parse_attribute_table(attr_csv(rows=rows), composition_tolerance=3.5)
        assert table.n_rows == 2

    def test_unknown_column_rejected(self):
        with pytest.raises(DataError, match="unknown column"):
            parse_attribute_table(attr_csv(header=ATTR_HEADER + ",BOGUS",
                                           rows=[attr_row(1) + ",3"]))

    def test_duplicate_id_rejected(self):
        with pytest.raises(DataError, match="duplicate id"):
            parse_attribute_table(attr_csv(rows=[attr_row(1), attr_row(1)]))

    def test_percentage_out_of_range(self):
        bad = attr_row(1).replace(",30,1200,", ",130,1200,")  # SG = 130
        with pytest.raises(DataError, match="percentage out of range"):
            parse_attribute_table(attr_csv(rows=[bad]))

    def test_header_case_insensitive(self):
        table = parse_attribute_table(attr_csv(header=ATTR_HEADER.lower(), rows=[attr_row(1)]))
        assert table.ids == ("1",)

    def test_water_level_columns_parse_and_flag(self):
        header = ATTR_HEADER + ",WAVE1,WAVE2,WAVE3,MFD"
        rows = [attr_row(1) + ",450,120,900,42.5", attr_row(2) + ",380,95,,"]
        table = parse_attribute_table(attr_csv(header=header, rows=rows))
        assert table.values["WAVE1"][0] == 450
        assert np.isnan(table.values["WAVE3"][1])
        assert table.needs_wavelet_features
        assert table.missing_water_level_features() == [("2", "MFD"), ("2", "WAVE3")]

    def test_mfd_over_100_allowed(self):
        # surcharge pushes the mean filling degree above 100 %
        header = ATTR_HEADER + ",WAVE1,WAVE2,WAVE3,MFD"
        rows = [attr_row(1) + ",450,120,900,108.0"]
        table = parse_attribute_table(attr_csv(header=header, rows=rows))
        assert table.values["MFD"][0] == pytest.approx(108.0)

    def test_roundtrip(self, tmp_path):
        header = ATTR_HEADER + ",WAVE1,WAVE2,WAVE3,MFD"
        rows = [attr_row(1) + ",450.123456789,120,900,42.5", attr_row(2) + ",380,95,,"]
        table = parse_attribute_table(attr_csv(header=header, rows=rows))
        path = tmp_path / "attributes.csv"
        write_attribute_table(table, path)
        back = parse_attribute_table(path)
        for col, arr in table.values.items():
            np.testing.assert_allclose(back.values[col], arr, rtol=1e-12, equal_nan=True)


class TestMeanFillingDegree:
    def test_constant_half_diameter(self):
        series = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0,
                             np.full(24, 0.3), 0.6)
        assert mean_filling_degree(series) == pytest.approx(50.0)

    def test_hand_case(self):
        series = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0,
                             np.array([0.1, 0.2, 0.3]), 1.0)
        assert mean_filling_degree(series) == pytest.approx(20.0)

    def test_year_fixture_matches_direct_summation(self):
        rng = np.random.default_rng(11)
        levels = rng.uniform(0.0, 0.9, 8760)
        mask = np.zeros(8760, dtype=bool)
        mask[100:103] = True
        series = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0,
                             levels, 0.75, missing_mask=mask)
        # spreadsheet-style oracle: plain running sum over valid cells
        total = 0.0
        count = 0
        for i in range(8760):
            if not mask[i]:
                total += levels[i] / 0.75
                count += 1
        assert mean_filling_degree(series) == pytest.approx(100.0 * total / count, rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        levels = rng.uniform(0.05, 0.5, 100)
        base = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0, levels, 0.6)
        for factor in (0.5, 2.0, 7.3):
            scaled = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0,
                                 levels * factor, 0.6 * factor)
            assert mean_filling_degree(scaled) == pytest.approx(
                mean_filling_degree(base), rel=1e-12)

    def test_all_missing_rejected(self):
        series = LevelSeries("x", datetime(2014, 1, 1, tzinfo=UTC), 1.0,
                             np.zeros(5), 0.6, missing_mask=np.ones(5, dtype=bool))
        with pytest.raises(DataError, match="missing"):
            mean_filling_degree(series)


class TestFlowPair:
    def test_parse(self):
        lines = ["timestamp,observed,simulated"]
        for i in range(5):
            lines.append(f"2014-01-01T{i:02d}:00:00+00:00,{1.0 + i},{1.1 + i}")
        pair = parse_flow_pair(io.StringIO("\n".join(lines)), catchment_id="3")
        assert pair.observed.size == 5

    def test_constant_observed_rejected(self):
        with pytest.raises(DataError, match="constant observed"):
            FlowPair("x", np.ones(5), np.arange(5.0))

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError, match="lengths differ"):
            FlowPair("x", np.ones(5), np.ones(4))


class TestManifest:
    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError, match="manifest not found"):
            load_manifest(tmp_path / "nope.json")

    def test_loads_synthetic(self, synthetic_dataset):
        root, _ = synthetic_dataset
        manifest = load_manifest(root / "dataset.json")
        assert len(manifest.catchments) == 17
        assert manifest.entry("1").diameter_m > 0
        assert manifest.attributes_path.is_file()

    def test_missing_level_file(self, tmp_path):
        (tmp_path / "attributes.csv").write_text("id,name\n", encoding="utf-8")
        (tmp_path / "dataset.json").write_text(
            '{"attributes": "attributes.csv", "catchments": '
            '[{"id": "1", "levels": "levels/1.csv", "diameter_m": 0.6}]}',
            encoding="utf-8")
        with pytest.raises(ConfigError, match="level file not found"):
            load_manifest(tmp_path / "dataset.json")
