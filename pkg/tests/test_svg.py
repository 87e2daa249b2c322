from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from gfrag.svg import Series, loglog

NS = "{http://www.w3.org/2000/svg}"


def test_well_formed_with_legend():
    x = np.geomspace(1e-2, 1e2, 50)
    text = loglog([Series(x, x ** -2, "tail"), Series(x, x, "line", dashed=True)], title="t")
    root = ET.fromstring(text)
    lines = root.findall(f"{NS}polyline")
    assert len(lines) == 2
    assert lines[1].get("stroke-dasharray")
    labels = [t.text for t in root.findall(f"{NS}text")]
    assert "tail" in labels and "line" in labels and "1e-2" in labels


def test_gaps_split_polylines():
    x = np.geomspace(1, 100, 10)
    y = x.copy()
    y[4] = 0.0
    root = ET.fromstring(loglog([Series(x, y, "gappy")]))
    assert len(root.findall(f"{NS}polyline")) == 2


def test_points_inside_plot_area():
    x = np.geomspace(1e-3, 1e3, 30)
    root = ET.fromstring(loglog([Series(x, np.exp(-x), "decay")]))
    pts = root.find(f"{NS}polyline").get("points").split()
    xy = np.array([[float(v) for v in p.split(",")] for p in pts])
    frame = root.find(f"{NS}rect")
    x0, y0 = float(frame.get("x")), float(frame.get("y"))
    assert np.all(xy[:, 0] >= x0 - 1e-9) and np.all(xy[:, 1] >= y0 - 1e-9)
    assert np.all(xy[:, 0] <= x0 + float(frame.get("width")) + 1e-9)
    assert np.all(xy[:, 1] <= y0 + float(frame.get("height")) + 1e-9)
