import io

import numpy as np
import pytest

from relpose.datafiles import (DatasetPoseRecord, KeypointRecord, PairRecord,
                               PredictionRecord, fmt, parse_external_fundamental,
                               parse_landmark_poses, read_features_csv,
                               read_keypoints_csv, read_pairs_csv, read_pose_csv,
                               read_predictions_csv, write_features_csv,
                               write_keypoints_csv, write_landmark_poses,
                               write_pairs_csv, write_pose_csv,
                               write_predictions_csv)
from relpose.errors import DegenerateTranslation, NonFiniteValue, ParseError
from relpose.rotations import random_unit_quaternion

HEADER = "collection\n\nImageFile X Y Z W P Q R\n"


def random_pose_records(rng, n):
    return [DatasetPoseRecord(f"seq{i % 3}/frame{i:04d}.png",
                              random_unit_quaternion(rng),
                              rng.uniform(-50, 50, size=3))
            for i in range(n)]


def random_pair_records(rng, n):
    records = []
    for i in range(n):
        t = rng.uniform(-5, 5, size=3)
        while np.linalg.norm(t) < 1e-3:
            t = rng.uniform(-5, 5, size=3)
        records.append(PairRecord(
            image_a=f"seq0/a{i}.png", image_b=f"seq0/b{i}.png",
            sequence_id="seq0", rotation=random_unit_quaternion(rng),
            translation_metric=t,
            translation_normalized=t / np.linalg.norm(t)))
    return records


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = float(rng.normal() * 10.0 ** float(rng.integers(-12, 12)))
        assert float(fmt(x)) == x


def test_landmark_identity_row():
    records = parse_landmark_poses(HEADER + "seq1/frame001.png 0 0 0 1 0 0 0\n")
    assert len(records) == 1
    rec = records[0]
    assert rec.image_path == "seq1/frame001.png"
    np.testing.assert_allclose(rec.rotation, [1, 0, 0, 0])
    np.testing.assert_allclose(rec.translation, [0, 0, 0])


def test_landmark_header_only():
    assert parse_landmark_poses(HEADER) == []


def test_landmark_column_order():
    rec = parse_landmark_poses(HEADER + "a.png 1 2 3 4 5 6 7\n")[0]
    np.testing.assert_allclose(rec.translation, [1, 2, 3])
    np.testing.assert_allclose(rec.rotation, [4, 5, 6, 7])


def test_landmark_errors():
    with pytest.raises(ParseError) as err:
        parse_landmark_poses(HEADER + "a.png 1 2 3 4 5 6\n", name="p.txt")
    assert "p.txt:4" in str(err.value)
    with pytest.raises(NonFiniteValue):
        parse_landmark_poses(HEADER + "a.png 1 2 nan 4 5 6 7\n")


def test_landmark_round_trip_100_records():
    rng = np.random.default_rng(1)
    records = random_pose_records(rng, 100)
    buf = io.StringIO()
    write_landmark_poses(records, buf)
    back = parse_landmark_poses(buf.getvalue())
    assert len(back) == len(records)
    for a, b in zip(records, back):
        assert a.image_path == b.image_path
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)


def test_pose_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    records = random_pose_records(rng, 64)
    path = tmp_path / "poses.csv"
    write_pose_csv(records, path)
    back = read_pose_csv(path)
    for a, b in zip(records, back):
        assert a.image_path == b.image_path
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)


def test_pose_csv_header_check(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("image,qw\nfoo,1\n")
    with pytest.raises(ParseError):
        read_pose_csv(path)


def test_pairs_round_trip_bitwise():
    rng = np.random.default_rng(3)
    records = random_pair_records(rng, 200)
    buf = io.StringIO()
    write_pairs_csv(records, buf)
    back = read_pairs_csv(io.StringIO(buf.getvalue()))
    assert len(back) == len(records)
    for a, b in zip(records, back):
        assert (a.image_a, a.image_b, a.sequence_id) == (b.image_a, b.image_b, b.sequence_id)
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation_metric, b.translation_metric)
        np.testing.assert_array_equal(a.translation_normalized, b.translation_normalized)


def test_pairs_empty_list_gives_header_only():
    buf = io.StringIO()
    write_pairs_csv([], buf)
    text = buf.getvalue()
    assert text.splitlines() == [
        "image_a,image_b,sequence_id,qw,qx,qy,qz,tx,ty,tz,tnx,tny,tnz"]
    assert read_pairs_csv(io.StringIO(text)) == []


def test_pairs_rejects_non_unit_normalized_translation():
    row = ("a.png,b.png,s,1,0,0,0,1,0,0,0.9,0,0")
    text = "image_a,image_b,sequence_id,qw,qx,qy,qz,tx,ty,tz,tnx,tny,tnz\n" + row + "\n"
    with pytest.raises(DegenerateTranslation):
        read_pairs_csv(io.StringIO(text))


def test_pairs_parse_errors():
    head = "image_a,image_b,sequence_id,qw,qx,qy,qz,tx,ty,tz,tnx,tny,tnz\n"
    with pytest.raises(ParseError):
        read_pairs_csv(io.StringIO(head + "a,b,s,1,0,0\n"))
    with pytest.raises(NonFiniteValue):
        read_pairs_csv(io.StringIO(head + "a,b,s,nan,0,0,0,1,0,0,1,0,0\n"))
    with pytest.raises(ParseError):
        read_pairs_csv(io.StringIO("wrong,header\n"))


def test_predictions_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    records = [PredictionRecord(f"a{i}", f"b{i}", random_unit_quaternion(rng),
                                rng.normal(size=3))
               for i in range(50)]
    path = tmp_path / "pred.csv"
    write_predictions_csv(records, path)
    back = read_predictions_csv(path)
    for a, b in zip(records, back):
        assert (a.image_a, a.image_b) == (b.image_a, b.image_b)
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)


def test_keypoints_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    records = [KeypointRecord(f"img{i % 4}.png", float(rng.uniform(0, 1920)),
                              float(rng.uniform(0, 1080)), f"kp{i}")
               for i in range(30)]
    path = tmp_path / "kp.csv"
    write_keypoints_csv(records, path)
    back = read_keypoints_csv(path)
    assert back == records


def test_features_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    keys = [(f"a{i}", f"b{i}") for i in range(20)]
    features = rng.normal(size=(20, 7))
    path = tmp_path / "features.csv"
    write_features_csv(keys, features, path)
    back_keys, back_features = read_features_csv(path)
    assert back_keys == keys
    np.testing.assert_array_equal(back_features, features)


def test_features_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("image_a,image_b,g0\na,b,1\n")
    with pytest.raises(ParseError):
        read_features_csv(path)


def test_external_fundamental():
    f = parse_external_fundamental("1 2 3\n4 5 6\n7 8 9\n")
    np.testing.assert_array_equal(f, [[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    f = parse_external_fundamental("1,2,3,4,5,6,7,8,9")
    assert f[2, 2] == 9.0
    with pytest.raises(ParseError):
        parse_external_fundamental("1 2 3 4")
    with pytest.raises(NonFiniteValue):
        parse_external_fundamental("1 2 3 4 inf 6 7 8 9")
