"""Figure renderers produce non-empty PNGs for each report path."""

import numpy as np

from iterlib import figures, verify


def test_render_cloud_and_boxes(tmp_path):
    pts = np.random.default_rng(0).uniform(2, 8, (500, 2))
    p1 = figures.render_cloud(pts, str(tmp_path / "cloud.png"))
    p2 = figures.render_boxes(pts, 0.05, str(tmp_path / "boxes.png"))
    assert (tmp_path / "cloud.png").stat().st_size > 1000
    assert (tmp_path / "boxes.png").stat().st_size > 1000
    assert p1.endswith(".png") and p2.endswith(".png")


def test_render_one_dim_variants(tmp_path):
    pts = np.random.default_rng(0).uniform(2, 8, (200, 1))
    figures.render_cloud(pts, str(tmp_path / "c1.png"))
    figures.render_boxes(pts, 0.1, str(tmp_path / "b1.png"))
    assert (tmp_path / "c1.png").exists() and (tmp_path / "b1.png").exists()


def test_render_histogram(tmp_path):
    edges = np.linspace(-3, 3, 31)
    density = np.exp(-np.abs(0.5 * (edges[:-1] + edges[1:])))
    figures.render_histogram(edges, density, str(tmp_path / "h.png"))
    assert (tmp_path / "h.png").stat().st_size > 1000


def test_render_report(tmp_path):
    reports = [
        verify.TestReport("alpha", 0.005, 0.01, {}, 0),
        verify.TestReport("beta", 0.03, 0.02, {}, 0),
    ]
    figures.render_report(reports, str(tmp_path / "r.png"))
    assert (tmp_path / "r.png").stat().st_size > 1000
