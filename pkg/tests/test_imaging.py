import colorsys
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from photomarkers.imaging import (
    CascadeFormatError, DetectionParams, ImageDecodeError, ImageFeatures, RgbImage,
    UnsupportedImageFormat, decode_image, default_cascade, detect_faces, detector_accuracy_report,
    extract_batch, extract_features, integral_image, load_image, mean_hsv, parse_cascade, rgb_to_hsv,
    rgb_to_hsv_array,
)
from photomarkers.imaging.detect import group_boxes, iou_matrix, merge_passes
from photomarkers.imaging.integral import padded_integral, rect_sum

from conftest import FACES

channel = st.integers(0, 255)


def hsv_to_rgb(h, s, v):
    """Textbook hexcone inverse, used only to check the round trip."""
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


# ---- HSV -----------------------------------------------------------------

@pytest.mark.parametrize("rgb, expected", [
    ((255, 0, 0), (0.0, 1.0, 1.0)),
    ((128, 128, 128), (0.0, 0.0, 128 / 255)),
    ((0, 0, 255), (2 / 3, 1.0, 1.0)),
    ((0, 0, 0), (0.0, 0.0, 0.0)),
])
def test_rgb_to_hsv_examples(rgb, expected):
    out = rgb_to_hsv(*rgb)
    assert (out.hue, out.saturation, out.value) == pytest.approx(expected, abs=1e-12)


def test_rgb_to_hsv_matches_colorsys(rng):
    px = rng.integers(0, 256, size=(10_000, 3))
    ours = rgb_to_hsv_array(px)
    ref = np.array([colorsys.rgb_to_hsv(*(c / 255.0)) for c in px])
    np.testing.assert_allclose(ours, ref, rtol=0, atol=1e-12)


@given(channel, channel, channel)
def test_hsv_ranges_and_round_trip(r, g, b):
    t = rgb_to_hsv(r, g, b)
    assert 0.0 <= t.hue < 1.0 and 0.0 <= t.saturation <= 1.0 and 0.0 <= t.value <= 1.0
    if t.saturation == 0.0:
        assert t.hue == 0.0
    back = np.array(hsv_to_rgb(t.hue, t.saturation, t.value)) * 255
    assert np.all(np.abs(back - (r, g, b)) <= 1.0)


def test_mean_hsv_examples():
    assert mean_hsv(RgbImage.uniform(5, 4, (255, 0, 0))) == (0.0, 1.0, 1.0)
    assert mean_hsv(RgbImage.uniform(3, 3, (0, 0, 0))) == (0.0, 0.0, 0.0)
    two = RgbImage(np.array([[[255, 0, 0], [0, 0, 255]]], dtype=np.uint8))
    assert mean_hsv(two)[0] == pytest.approx(1 / 3, abs=1e-12)


@given(channel, channel, channel, st.integers(1, 17), st.integers(1, 17))
def test_constant_image_mean_is_exact(r, g, b, w, h):
    t = rgb_to_hsv(r, g, b)
    assert mean_hsv(RgbImage.uniform(w, h, (r, g, b))) == (t.hue, t.saturation, t.value)


def test_rgb_image_validation():
    with pytest.raises(ValueError):
        RgbImage(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        RgbImage(np.zeros((0, 4, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), 300))


# ---- integral image ------------------------------------------------------

def test_integral_trivial():
    assert integral_image(np.ones((3, 3), dtype=np.int64))[-1, -1] == 9
    assert integral_image(np.array([[7]])).tolist() == [[7]]


def test_integral_all_subrectangles(rng):
    plane = rng.integers(0, 256, size=(4, 4))
    table = integral_image(plane)
    padded = padded_integral(plane)
    n = 0
    for y in range(4):
        for x in range(4):
            for h in range(1, 5 - y):
                for w in range(1, 5 - x):
                    direct = plane[y:y + h, x:x + w].sum()
                    assert rect_sum(table, x, y, w, h) == direct
                    assert padded[y + h, x + w] - padded[y, x + w] - padded[y + h, x] + padded[y, x] == direct
                    n += 1
    assert n == 100


@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31))
def test_integral_random_planes(h, w, seed):
    plane = np.random.default_rng(seed).integers(0, 256, size=(h, w))
    t = integral_image(plane)
    assert t.dtype == np.int64
    assert np.array_equal(t, np.array([[plane[:i + 1, :j + 1].sum() for j in range(w)] for i in range(h)]))


# ---- cascade loading -----------------------------------------------------

MINI = """{"window": [4, 4],
"stages": [
{"threshold": 0.0, "weak": [{"rects": [[0, 0, 4, 2, -1], [0, 2, 4, 2, 1]], "threshold": 0.0, "left": -1, "right": 1}]},
{"threshold": 0.5, "weak": [{"rects": [[0, 0, 2, 4, -1], [2, 0, 3, 4, 1]], "threshold": 0.0, "left": 0, "right": 1}]}
]}"""


def test_cascade_rect_outside_window_names_line_and_field():
    with pytest.raises(CascadeFormatError) as e:
        parse_cascade(MINI, source="mini.json")
    msg = str(e.value)
    assert "mini.json:4:" in msg and "stages[1].weak[0].rects[1]" in msg


@pytest.mark.parametrize("text, fragment", [
    ("{not json", "invalid JSON"),
    ('{"window": [24], "stages": []}', "window"),
    ('{"window": [4, 4], "stages": []}', "stages"),
    ('{"window": [4, 4], "stages": [{"threshold": 1, "weak": []}]}', "weak"),
    ('{"window": [4, 4], "stages": [{"threshold": "x", "weak": [{"rects": [[0,0,1,1,1]], '
     '"threshold": 0, "left": 0, "right": 1}]}]}', "threshold"),
])
def test_cascade_malformed(text, fragment):
    with pytest.raises(CascadeFormatError, match=fragment):
        parse_cascade(text)


def test_bundled_cascade_shape():
    c = default_cascade()
    assert (c.window_width, c.window_height) == (24, 24)
    assert len(c.stages) == 25
    rects, *_ , bounds = c.flat()
    assert bounds[-1] == c.n_weak == rects.shape[0]
    assert not rects.flags.writeable


# ---- grouping ------------------------------------------------------------

def test_iou_matrix_basic():
    a = [[0, 0, 10, 10]]
    b = [[0, 0, 10, 10], [5, 0, 10, 10], [20, 20, 5, 5]]
    np.testing.assert_allclose(iou_matrix(a, b), [[1.0, 50 / 150, 0.0]])


def test_group_boxes_threshold_and_min_members():
    boxes = [[0, 0, 10, 10], [1, 0, 10, 10], [0, 1, 10, 10], [50, 50, 10, 10]]
    assert group_boxes(boxes, 3) == [((0, 0, 10, 10), 3)]
    assert len(group_boxes(boxes, 1)) == 2
    assert group_boxes(boxes, 4) == []


def test_cross_pass_duplicates_collapse():
    # two passes firing on the same face with slightly different boxes
    p1 = [(40, 30, 60, 60)]
    p2 = [(43, 33, 58, 58), (150, 20, 40, 40)]
    assert merge_passes([p1, p2]) == [(42, 32, 59, 59), (150, 20, 40, 40)]
    assert merge_passes([p1, p1]) == [(40, 30, 60, 60)]


@given(st.lists(st.tuples(st.integers(0, 60), st.integers(0, 60), st.integers(5, 30)), max_size=25),
       st.integers(0, 6))
def test_group_min_members_monotone(raw, k):
    boxes = [(x, y, s, s) for x, y, s in raw]
    assert len(group_boxes(boxes, k + 1)) <= len(group_boxes(boxes, k))


# ---- detection -----------------------------------------------------------

def test_detection_params_defaults_and_validation():
    p = DetectionParams()
    assert p.scale_factors == (1.05, 1.4) and p.min_neighbors == 4 and p.min_size == (20, 20)
    with pytest.raises(ValueError):
        DetectionParams(scale_factors=(1.0,))
    with pytest.raises(ValueError):
        DetectionParams(min_neighbors=-1)


def test_uniform_gray_has_no_faces():
    assert detect_faces(RgbImage.uniform(96, 96, (128, 128, 128)), default_cascade()) == []


def test_image_smaller_than_min_size():
    assert detect_faces(RgbImage.uniform(10, 10, (1, 2, 3)), default_cascade()) == []


@pytest.fixture(scope="module")
def fixture_detections(face_annotations):
    c = default_cascade()
    return {r["file"]: detect_faces(load_image(FACES / r["file"]), c) for r in face_annotations}


def test_portrait_fixture_one_box_covering_face(face_annotations, fixture_detections):
    rec = next(r for r in face_annotations if r["file"].startswith("astronaut_00"))
    boxes = fixture_detections[rec["file"]]
    assert len(boxes) == 1
    assert iou_matrix(boxes, rec["faces"])[0, 0] >= 0.5


def test_both_passes_fire_once_counted(face_annotations):
    from photomarkers.imaging.detect import detect_pass
    from photomarkers.imaging.integral import luminance
    img = load_image(FACES / "astronaut_00.png")
    gray = luminance(img)
    p = [detect_pass(gray, default_cascade(), sf, DetectionParams()) for sf in (1.05, 1.4)]
    assert len(p[0]) == 1 and len(p[1]) == 1
    assert iou_matrix(p[0], p[1])[0, 0] >= 0.3
    assert len(detect_faces(img, default_cascade())) == 1


def test_annotated_faces_found(face_annotations, fixture_detections):
    for r in face_annotations:
        if not r["faces"]:
            continue
        boxes = fixture_detections[r["file"]]
        assert len(boxes) == len(r["faces"]), r["file"]
        iou = iou_matrix(r["faces"], boxes)
        assert np.all(iou.max(axis=1) >= 0.4), r["file"]


def test_min_neighbors_monotone_on_fixture():
    img = load_image(FACES / "twofaces_01.png")
    counts = [len(detect_faces(img, default_cascade(), DetectionParams(min_neighbors=k))) for k in range(0, 12, 2)]
    assert counts == sorted(counts, reverse=True)


# ---- decoding, features, batch ------------------------------------------

def _encode(arr, fmt):
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format=fmt)
    return buf.getvalue()


def test_decode_png_and_jpeg_and_reject_others():
    arr = np.zeros((8, 8, 3), dtype=np.uint8)
    arr[..., 0] = 200
    assert np.array_equal(decode_image(_encode(arr, "PNG")).pixels, arr)
    jpg = decode_image(_encode(arr, "JPEG"))
    assert jpg.pixels.shape == (8, 8, 3) and abs(int(jpg.pixels[..., 0].mean()) - 200) <= 3
    with pytest.raises(UnsupportedImageFormat):
        decode_image(_encode(arr, "BMP"))
    with pytest.raises(ImageDecodeError):
        decode_image(b"\x89PNG\r\n\x1a\n garbage")


def test_features_uniform_red():
    f = extract_features(RgbImage.uniform(64, 64, (255, 0, 0)), default_cascade())
    assert f == ImageFeatures(0.0, 1.0, 1.0, 0, False)


def test_features_portrait():
    f = extract_features(load_image(FACES / "astronaut_00.png"), default_cascade())
    assert f.has_face and f.face_count == 1


def test_image_features_invariant():
    with pytest.raises(ValueError):
        ImageFeatures(0.1, 0.1, 0.1, 2, False)
    d = ImageFeatures(0.1, 0.2, 0.3, 2, True).to_dict()
    assert ImageFeatures.from_dict(d).face_count == 2


def test_batch_isolates_corrupt_file(tmp_path):
    good = tmp_path / "good.png"
    Image.fromarray(np.full((32, 32, 3), 90, dtype=np.uint8)).save(good)
    bad = tmp_path / "bad.jpg"
    bad.write_bytes(b"\xff\xd8\xff\xe0 not really a jpeg")
    feats, errors = extract_batch([("a", good), ("b", bad), ("c", tmp_path / "missing.png")], default_cascade())
    assert list(feats) == ["a"]
    assert [e.key for e in errors] == ["b", "c"]


# ---- accuracy harness ----------------------------------------------------

def test_accuracy_perfect():
    ann = {"a": ("depressed", 0), "b": ("depressed", 2), "c": ("healthy", 1), "d": ("healthy", 0)}
    rep = detector_accuracy_report({k: v[1] for k, v in ann.items()}, ann)
    assert all(c.accuracy == 1.0 for c in rep.cells)
    assert rep.count_diff_mean == {"depressed": 0.0, "healthy": 0.0}


def test_accuracy_undercount_by_one():
    ann = {f"p{i}": ("healthy", 2) for i in range(7)}
    rep = detector_accuracy_report({k: 1 for k in ann}, ann)
    assert rep.count_diff_mean["healthy"] == -1.0
    assert rep.count_diff_sd["healthy"] == 0.0


def test_accuracy_exclusions_and_format():
    ann = {"a": ("depressed", 0), "b": ("depressed", 1), "c": ("depressed", 0), "d": ("depressed", 0)}
    det = {"a": 0, "b": 0, "c": 0, "d": 0, "x": 3}
    rep = detector_accuracy_report(det, ann)
    assert rep.exclusions == 1 and rep.excluded_keys == ("x",)
    assert "Depressed, No face detected: 75% accurate" in rep.lines()
    assert "Healthy, 1+ faces detected: n/a accurate" in rep.lines()
    json.dumps(rep.to_dict())
