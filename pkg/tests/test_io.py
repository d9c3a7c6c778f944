import json
import struct

import numpy as np
import pytest

from topoloc import compute_persistence, make_annotation, make_field, make_mask
from topoloc.io import (
    MAGIC,
    diagram_records,
    read_dots,
    read_field,
    read_mask,
    write_diagram,
    write_dots,
    write_field,
    write_json,
    write_mask,
)


def test_field_roundtrip_exact_for_float32_values(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.random((5, 7)).astype(np.float32).astype(np.float64)
    f = make_field(5, 7, values)
    p = tmp_path / "f.tcf"
    write_field(f, p)
    back = read_field(p)
    assert back.height == 5 and back.width == 7
    np.testing.assert_array_equal(back.values, values)


def test_field_file_layout(tmp_path):
    f = make_field(1, 2, [0.5, 1.0])
    p = tmp_path / "f.tcf"
    write_field(f, p)
    raw = p.read_bytes()
    assert raw[:4] == b"TCF1"
    assert struct.unpack("<II", raw[4:12]) == (1, 2)
    assert np.frombuffer(raw, dtype="<f4", offset=12).tolist() == [0.5, 1.0]
    assert len(raw) == 12 + 8


def test_read_field_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.tcf"
    p.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\x00" * 4)
    with pytest.raises(ValueError, match="magic"):
        read_field(p)


def test_read_field_rejects_truncated_payload(tmp_path):
    p = tmp_path / "short.tcf"
    p.write_bytes(MAGIC + struct.pack("<II", 2, 2) + b"\x00" * 8)
    with pytest.raises(ValueError, match="truncated"):
        read_field(p)


def test_read_field_rejects_trailing_bytes(tmp_path):
    p = tmp_path / "long.tcf"
    p.write_bytes(MAGIC + struct.pack("<II", 1, 1) + b"\x00" * 4 + b"xx")
    with pytest.raises(ValueError, match="trailing"):
        read_field(p)


def test_read_field_rejects_dimension_overflow(tmp_path):
    p = tmp_path / "huge.tcf"
    p.write_bytes(MAGIC + struct.pack("<II", 2**20, 2**20))
    with pytest.raises(ValueError, match="overflow"):
        read_field(p)


def test_read_field_rejects_zero_dims(tmp_path):
    p = tmp_path / "zero.tcf"
    p.write_bytes(MAGIC + struct.pack("<II", 0, 5))
    with pytest.raises(ValueError, match="non-positive"):
        read_field(p)


def test_read_field_rejects_nan_payload(tmp_path):
    p = tmp_path / "nan.tcf"
    payload = np.array([0.0, np.nan], dtype="<f4").tobytes()
    p.write_bytes(MAGIC + struct.pack("<II", 1, 2) + payload)
    with pytest.raises(ValueError, match="non-finite"):
        read_field(p)


def test_mask_roundtrip_and_validation(tmp_path):
    m = make_mask(2, 3, [1, 0, 1, 0, 0, 1])
    p = tmp_path / "m.tcf"
    write_mask(m, p)
    assert read_mask(p) == m
    f = make_field(1, 2, [0.5, 1.0])
    q = tmp_path / "notmask.tcf"
    write_field(f, q)
    with pytest.raises(ValueError, match="0 or 1"):
        read_mask(q)


def test_dots_roundtrip_points_only(tmp_path):
    ann = make_annotation([(0.1, 2.0), (3.25, 4.75)])
    p = tmp_path / "d.csv"
    write_dots(ann, p)
    assert p.read_text() == "x,y\n0.1,2.0\n3.25,4.75\n"
    assert read_dots(p) == ann


def test_dots_roundtrip_with_boxes(tmp_path):
    ann = make_annotation([(1.0, 2.0)], boxes=[(6.0, 8.0)])
    p = tmp_path / "d.csv"
    write_dots(ann, p)
    assert p.read_text() == "x,y,w,h\n1.0,2.0,6.0,8.0\n"
    back = read_dots(p)
    assert back == ann


def test_dots_empty_roundtrip(tmp_path):
    p = tmp_path / "d.csv"
    write_dots(make_annotation([]), p)
    assert p.read_text() == "x,y\n"
    assert len(read_dots(p)) == 0


def test_read_dots_rejects_bad_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("col_a,col_b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_dots(p)


def test_read_dots_rejects_ragged_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1.0,2.0,3.0\n")
    with pytest.raises(ValueError, match=":2"):
        read_dots(p)


def test_read_dots_rejects_non_numeric(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\nfoo,2.0\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_dots(p)


def test_read_dots_rejects_empty_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("")
    with pytest.raises(ValueError, match="header"):
        read_dots(p)


def test_read_dots_applies_annotation_validation(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y,w,h\n1.0,1.0,0.0,5.0\n")
    with pytest.raises(ValueError, match="non-positive"):
        read_dots(p)


def test_dots_shortest_repr_roundtrip(tmp_path):
    # 0.1 must come back as the same double, written as "0.1"
    ann = make_annotation([(0.1, 1e-17)])
    p = tmp_path / "d.csv"
    write_dots(ann, p)
    assert "0.1,1e-17" in p.read_text()
    back = read_dots(p)
    assert back.points[0, 0] == 0.1 and back.points[0, 1] == 1e-17


def test_diagram_records_and_file(tmp_path):
    d = compute_persistence(make_field(1, 5, [0.9, 0.1, 0.8, 0.2, 0.7]))
    recs = diagram_records(d)
    assert recs[0] == {
        "mode": [0, 0],
        "saddle": [0, 1],
        "birth": 0.9,
        "death": 0.1,
        "essential": True,
    }
    assert [r["essential"] for r in recs] == [True, False, False]
    p = tmp_path / "diagram.json"
    write_diagram(d, p)
    assert json.loads(p.read_text()) == recs
    assert p.read_text().endswith("\n")


def test_write_json_stable_key_order(tmp_path):
    p = tmp_path / "r.json"
    write_json({"b": 1, "a": 2}, p)
    text = p.read_text()
    assert text.index('"b"') < text.index('"a"')
    p2 = tmp_path / "r2.json"
    write_json({"b": 1, "a": 2}, p2)
    assert text == p2.read_text()


def test_write_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_json({"x": float("nan")}, tmp_path / "bad.json")
