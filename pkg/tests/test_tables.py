# tests/test_tables.py

import pytest

from src.core.errors import DataError, ParseError, RangeError, SchemaError
from src.modules.geometry.models import SphereDirection
from src.modules.media.tables import (
    load_gmm_params,
    load_manifest,
    load_scores,
    load_sequence_values,
    load_traces,
    save_traces,
    write_rows,
)
from src.modules.weights.gmm import DEFAULT_GMM, gmm_density

HEADER = "subject_id,sequence_id,sample_index,longitude_deg,latitude_deg\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_trace_rows_parse_including_boundaries(tmp_path):
    path = write(tmp_path / "t.csv", "# sample_rate=30\n" + HEADER + "s1,seq1,0,0.0,0.0\ns1,seq1,1,180.0,-90.0\n")
    traces = load_traces(path)
    assert traces.sample_rate == 30.0
    first, second = traces.samples("s1", "seq1")
    assert first.direction == SphereDirection.front()
    assert second.direction.as_tuple() == (180.0, -90.0)


def test_out_of_range_longitude(tmp_path):
    path = write(tmp_path / "t.csv", "# sample_rate=30\n" + HEADER + "s1,seq1,2,200.0,0.0\n")
    with pytest.raises(RangeError):
        load_traces(path)


def test_latitude_91_is_a_range_error(tmp_path):
    path = write(tmp_path / "t.csv", HEADER + "s1,seq1,0,0.0,91\n")
    with pytest.raises(RangeError):
        load_traces(path, sample_rate=10)


def test_malformed_row_reports_its_line(tmp_path):
    path = write(tmp_path / "t.csv", "# sample_rate=30\n" + HEADER + "s1,seq1,0,0,0\ns1,seq1,1,abc,0\n")
    with pytest.raises(ParseError) as err:
        load_traces(path)
    assert err.value.line == 4


def test_missing_sample_rate(tmp_path):
    path = write(tmp_path / "t.csv", HEADER + "s1,seq1,0,0,0\n")
    with pytest.raises(SchemaError):
        load_traces(path)


def test_duplicate_sample_is_a_schema_error(tmp_path):
    path = write(tmp_path / "t.csv", HEADER + "s1,seq1,0,0,0\ns1,seq1,0,1,1\n")
    with pytest.raises(SchemaError):
        load_traces(path, sample_rate=10)


def test_trace_round_trip(tmp_path, make_traces):
    traces = make_traces([("a", "x", i, 1.25 * i, -0.5 * i) for i in range(5)] + [("b", "x", 0, -179.5, 89.0)], 12.5)
    save_traces(traces, tmp_path / "out.csv")
    back = load_traces(tmp_path / "out.csv")
    assert back.sample_rate == traces.sample_rate
    assert back.records == traces.records


def test_scores_and_references(toy_score_files):
    table = load_scores(*toy_score_files)
    assert table.impaired == ["A", "B", "C"]
    assert len(table.entries) == 12


def test_score_above_100_is_a_range_error(tmp_path, toy_score_files):
    _, refs = toy_score_files
    scores = write(tmp_path / "bad.csv", "subject_id,sequence_id,raw_score\ns1,R,101\n")
    with pytest.raises(RangeError):
        load_scores(scores, refs)


def test_sequence_values_reject_duplicates(tmp_path):
    good = write(tmp_path / "obj.csv", "sequence_id,score\nA,1.5\nB,2\n")
    assert load_sequence_values(good, "score") == {"A": 1.5, "B": 2.0}
    bad = write(tmp_path / "dup.csv", "sequence_id,score\nA,1\nA,2\n")
    with pytest.raises(SchemaError):
        load_sequence_values(bad, "score")


def test_missing_column_is_a_parse_error(tmp_path):
    path = write(tmp_path / "obj.csv", "sequence_id,value\nA,1\n")
    with pytest.raises(ParseError):
        load_sequence_values(path, "score")


def test_manifest_resolves_paths_and_checks_pairs(tmp_path):
    (tmp_path / "ref.yuv").write_bytes(b"")
    (tmp_path / "dist.yuv").write_bytes(b"")
    header = "sequence_id,path,width,height,frame_count,role,reference_id\n"
    path = write(tmp_path / "m.csv", header + "R,ref.yuv,8,4,1,reference,\nD,dist.yuv,8,4,1,impaired,R\n")
    manifest = load_manifest(path)
    assert manifest.get("D").path == tmp_path / "dist.yuv"
    assert manifest.get("R").reference_id is None

    mismatch = write(tmp_path / "m2.csv", header + "R,ref.yuv,8,4,1,reference,\nD,dist.yuv,16,4,1,impaired,R\n")
    with pytest.raises(SchemaError):
        load_manifest(mismatch)


def test_manifest_missing_video(tmp_path):
    header = "sequence_id,path,width,height,frame_count,role,reference_id\n"
    path = write(tmp_path / "m.csv", header + "R,nowhere.yuv,8,4,1,reference,\n")
    with pytest.raises(DataError):
        load_manifest(path)


def test_write_rows(tmp_path):
    write_rows(tmp_path / "r.csv", ["a", "b"], [(1, "x"), (2, "y")])
    assert (tmp_path / "r.csv").read_text(encoding="utf-8") == "a,b\n1,x\n2,y\n"


GMM_HEADER = "axis,k,a,b,c\n"


def gmm_rows(lon=(1, 2, 3), lat=(1, 2, 3), amplitude=0.5):
    rows = [f"longitude,{k},{amplitude},0,{10 * k}" for k in lon] + [f"latitude,{k},0.25,0,{5 * k}" for k in lat]
    return "\n".join(rows) + "\n"


def test_gmm_override_orders_terms_by_k(tmp_path):
    params = load_gmm_params(write(tmp_path / "gmm.csv", GMM_HEADER + gmm_rows(lat=(3, 1, 2))))
    assert [t.c for t in params.longitude_terms] == [10.0, 20.0, 30.0]
    assert [t.c for t in params.latitude_terms] == [5.0, 10.0, 15.0]
    assert params.param_id != DEFAULT_GMM.param_id
    assert gmm_density(SphereDirection.front(), params) == pytest.approx((0.5 * 3) * (0.25 * 3))


@pytest.mark.parametrize("lat", [(1, 2), (1, 2, 2), (1, 2, 4)])
def test_gmm_override_needs_each_term_once(tmp_path, lat):
    with pytest.raises(SchemaError):
        load_gmm_params(write(tmp_path / "gmm.csv", GMM_HEADER + gmm_rows(lat=lat)))


def test_gmm_override_negative_amplitude(tmp_path):
    with pytest.raises(SchemaError):
        load_gmm_params(write(tmp_path / "gmm.csv", GMM_HEADER + gmm_rows(amplitude=-0.5)))


def test_gmm_override_reports_the_bad_line(tmp_path):
    with pytest.raises(ParseError):
        load_gmm_params(write(tmp_path / "a.csv", "axis,a,b,c\n"))
    with pytest.raises(ParseError) as err:
        load_gmm_params(write(tmp_path / "b.csv", GMM_HEADER + "longitude,1,0.5,0,10\nlongitude,2,x,0,1\n"))
    assert err.value.line == 3
    with pytest.raises(ParseError) as err:
        load_gmm_params(write(tmp_path / "c.csv", GMM_HEADER + "azimuth,1,0.5,0,10\n"))
    assert err.value.line == 2
