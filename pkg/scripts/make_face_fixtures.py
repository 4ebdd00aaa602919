"""Build the annotated face-detection fixture corpus under tests/fixtures/faces/.

Sources are the sample images shipped with scikit-image. Face boxes come
from a hand annotation of the astronaut portrait (in original 512x512
coordinates) pushed through each crop/resize/flip, or from the paste
location for composited faces. Output is deterministic.

    python scripts/make_face_fixtures.py [--out tests/fixtures/faces]
"""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

# hand-annotated face in skimage.data.astronaut(): forehead to chin, cheek to cheek
ASTRONAUT_FACE = (177, 74, 86, 90)

NON_FACE_SOURCES = [
    "coffee", "chelsea", "rocket", "coins", "horse", "brick", "grass", "gravel",
    "page", "text", "hubble_deep_field", "retina", "moon", "clock", "logo", "colorwheel",
    "cell", "immunohistochemistry",
]


def _rgb(a):
    a = np.asarray(a)
    if a.dtype != np.uint8:
        a = (np.clip(a, 0, 1) * 255).round().astype(np.uint8) if a.max() <= 1.0 else a.astype(np.uint8)
    if a.ndim == 2:
        a = np.stack([a] * 3, axis=-1)
    return a[..., :3]


def _transform_box(box, crop, out_size, flip=False):
    cx, cy, cw, ch = crop
    kx, ky = out_size[0] / cw, out_size[1] / ch
    x, y, w, h = box
    nx, ny, nw, nh = (x - cx) * kx, (y - cy) * ky, w * kx, h * ky
    if flip:
        nx = out_size[0] - nx - nw
    return [int(round(nx)), int(round(ny)), int(round(nw)), int(round(nh))]


def astronaut_variants():
    src = Image.fromarray(data.astronaut())
    # (crop x, crop y, crop size, output size, flip, gamma)
    plans = [
        (110, 10, 230, 144, False, 1.0),
        (100, 0, 260, 150, False, 1.0),
        (130, 30, 200, 128, False, 1.0),
        (90, 10, 280, 160, False, 1.0),
        (120, 20, 220, 140, True, 1.0),
        (100, 0, 260, 150, True, 1.0),
        (110, 10, 230, 144, False, 0.7),
        (110, 10, 230, 144, False, 1.4),
        (60, 0, 330, 160, False, 1.0),
        (140, 40, 180, 120, False, 1.0),
        (125, 25, 210, 136, True, 0.85),
        (95, 5, 250, 152, False, 1.2),
        (80, 0, 300, 156, True, 1.0),
        (115, 15, 225, 130, False, 1.0),
    ]
    for i, (cx, cy, size, out, flip, gamma) in enumerate(plans):
        im = src.crop((cx, cy, cx + size, cy + size)).resize((out, out), Image.BILINEAR)
        if flip:
            im = im.transpose(Image.FLIP_LEFT_RIGHT)
        a = np.asarray(im).astype(np.float64) / 255.0
        a = (a ** gamma * 255).round().astype(np.uint8)
        box = _transform_box(ASTRONAUT_FACE, (cx, cy, size, size), (out, out), flip)
        yield f"astronaut_{i:02d}", a, [box]


def two_face_composites():
    src = Image.fromarray(data.astronaut())
    plans = [(110, 10, 230, 110), (100, 0, 260, 120), (120, 20, 220, 100)]
    for i, (cx, cy, size, out) in enumerate(plans):
        tile = np.asarray(src.crop((cx, cy, cx + size, cy + size)).resize((out, out), Image.BILINEAR))
        canvas = np.concatenate([tile, tile[:, ::-1]], axis=1)
        b1 = _transform_box(ASTRONAUT_FACE, (cx, cy, size, size), (out, out))
        b2 = _transform_box(ASTRONAUT_FACE, (cx, cy, size, size), (out, out), flip=True)
        b2[0] += out
        yield f"twofaces_{i:02d}", canvas, [b1, b2]


def lfw_composites(n=8):
    faces = data.lfw_subset()[:100]
    rng = np.random.default_rng(2016)
    for i in range(n):
        face = Image.fromarray((faces[i * 7] * 255).round().astype(np.uint8)).resize((72, 72), Image.BILINEAR)
        base = rng.integers(60, 200)
        bg = np.clip(base + rng.normal(0, 12, size=(144, 144)), 0, 255)
        x0, y0 = int(rng.integers(8, 64)), int(rng.integers(8, 64))
        bg[y0:y0 + 72, x0:x0 + 72] = np.asarray(face)
        tint = np.array([1.0, 0.9 + 0.05 * (i % 3), 0.8 + 0.05 * (i % 4)])
        rgb = np.clip(bg[..., None] * tint, 0, 255).round().astype(np.uint8)
        yield f"lfw_{i:02d}", rgb, [[x0, y0, 72, 72]]


def non_face_images():
    for i, name in enumerate(NON_FACE_SOURCES):
        a = _rgb(getattr(data, name)())
        h, w = a.shape[:2]
        side = min(h, w)
        oy, ox = (h - side) // 2, (w - side) // 2
        im = Image.fromarray(a[oy:oy + side, ox:ox + side]).resize((128, 128), Image.BILINEAR)
        yield f"scene_{name}", np.asarray(im), []
    yield "uniform_gray", np.full((96, 96, 3), 128, dtype=np.uint8), []


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="tests/fixtures/faces")
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    records = []
    sources = [astronaut_variants(), two_face_composites(), lfw_composites(), non_face_images()]
    index = 0
    for gen in sources:
        for stem, pixels, faces in gen:
            # every fifth image is stored as baseline JPEG to exercise both decoders
            ext = "jpg" if index % 5 == 4 else "png"
            fname = f"{stem}.{ext}"
            im = Image.fromarray(np.ascontiguousarray(pixels))
            if ext == "jpg":
                im.save(out / fname, format="JPEG", quality=92, progressive=False)
            else:
                im.save(out / fname, format="PNG", optimize=False)
            records.append({
                "file": fname,
                "group": "depressed" if index % 2 == 0 else "healthy",
                "faces": faces,
            })
            index += 1
    (out / "annotations.json").write_text(json.dumps({"images": records}, indent=1) + "\n")
    print(f"wrote {len(records)} images to {out}")


if __name__ == "__main__":
    main()
