"""Convert a stump-based OpenCV Haar cascade (XML) into the JSON cascade format.

Usage:
    python scripts/convert_opencv_cascade.py haarcascade_frontalface_default.xml \
        src/photomarkers/data/frontalface_default.json

Only the "new" OpenCV cascade layout (``<cascade>`` with ``<features>``) and
depth-1 weak classifiers (stumps) without tilted features are supported.
"""

import argparse
import json
import re
import sys
import xml.etree.ElementTree as ET

LICENSE_NOTE = (
    "Converted from OpenCV haarcascade_frontalface_default.xml "
    "(Copyright (C) 2000, Intel Corporation; Intel License Agreement for "
    "Open Source Computer Vision Library, redistributed with this notice)."
)


def _floats(text):
    return [float(t) for t in text.split()]


def convert(xml_path):
    root = ET.parse(xml_path).getroot()
    cascade = root.find("cascade")
    if cascade is None:
        raise ValueError("no <cascade> element (old-style cascades are not supported)")
    if cascade.findtext("featureType").strip() != "HAAR":
        raise ValueError("only HAAR cascades are supported")
    width = int(cascade.findtext("width"))
    height = int(cascade.findtext("height"))

    features = []
    for feat in cascade.find("features"):
        if feat.findtext("tilted", "0").strip() not in ("0", ""):
            raise ValueError("tilted features are not supported")
        rects = []
        for r in feat.find("rects"):
            x, y, w, h, weight = _floats(r.text)
            rects.append([int(x), int(y), int(w), int(h), weight])
        features.append(rects)

    stages = []
    for stage in cascade.find("stages"):
        weak = []
        for wc in stage.find("weakClassifiers"):
            nodes = _floats(wc.findtext("internalNodes"))
            leaves = _floats(wc.findtext("leafValues"))
            if len(nodes) != 4 or len(leaves) != 2:
                raise ValueError("only stump weak classifiers are supported")
            _, _, feat_idx, threshold = nodes
            weak.append({
                "rects": features[int(feat_idx)],
                "threshold": threshold,
                "left": leaves[0],
                "right": leaves[1],
            })
        stages.append({
            "threshold": float(stage.findtext("stageThreshold")),
            "weak": weak,
        })
    return {"window": [width, height], "source": LICENSE_NOTE, "stages": stages}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("xml")
    parser.add_argument("out")
    args = parser.parse_args(argv)
    doc = convert(args.xml)
    text = json.dumps(doc, separators=(",", ":"))
    # one stage per line keeps loader line numbers useful
    text = re.sub(r'(\{"threshold")', r"\n\1", text)
    with open(args.out, "w") as fh:
        fh.write(text + "\n")
    n_weak = sum(len(s["weak"]) for s in doc["stages"])
    print(f"{len(doc['stages'])} stages, {n_weak} weak classifiers -> {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
