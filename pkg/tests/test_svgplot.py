import csv
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spinmarket.errors import InvalidParameterError
from spinmarket.pipeline import stack_plot_data
from spinmarket.renorm import read_stack_csvs
from spinmarket.svgplot import PlotData, Trace, emit_plot, render_svg, sibling_csv_path

NS = "{http://www.w3.org/2000/svg}"


def parse(svg_text):
    return ET.fromstring(svg_text.encode())


def test_scatter_one_marker_per_point():
    z = np.exp(1j * np.linspace(0, 6, 37))
    root = parse(render_svg(PlotData.from_points(z), "scatter"))
    assert len(root.findall(f".//{NS}circle[@class='marker']")) == 37


def test_scatter_skips_non_finite():
    data = PlotData([Trace("a", [0.0, 1.0, 2.0], [1.0, np.nan, 3.0])])
    root = parse(render_svg(data, "scatter"))
    assert len(root.findall(f".//{NS}circle")) == 2


def test_stack_has_polyline_per_level(fixtures_dir):
    stack = read_stack_csvs(os.path.join(fixtures_dir, "planted_stack"))
    root = parse(render_svg(stack_plot_data(stack), "stack"))
    assert len(root.findall(f".//{NS}polyline")) == 3


def test_stack_golden(tmp_path, fixtures_dir, golden_dir):
    stack = read_stack_csvs(os.path.join(fixtures_dir, "planted_stack"))
    svg, _ = emit_plot(stack_plot_data(stack), "stack", tmp_path / "planted_stack.svg")
    with open(os.path.join(golden_dir, "planted_stack.svg"), "rb") as fh:
        assert open(svg, "rb").read() == fh.read()


def test_series_plot_is_valid_xml():
    data = PlotData([Trace("x<y", [0, 1, 2], [3, 1, 2]), Trace("b", [0, 1], [0, 0])], title="a & b")
    root = parse(render_svg(data, "series"))
    assert len(root.findall(f".//{NS}polyline")) == 2


def test_sibling_csv(tmp_path):
    data = PlotData([Trace("m", [0.0, 1.0], [0.5, -0.5])])
    svg, csv_path = emit_plot(data, "series", tmp_path / "plot.svg")
    assert csv_path == sibling_csv_path(svg) == str(tmp_path / "plot.csv")
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows == [["series", "x", "y"], ["m", "0", "0.5"], ["m", "1", "-0.5"]]


def test_empty_data_rejected():
    with pytest.raises(InvalidParameterError):
        render_svg(PlotData([]), "series")
    with pytest.raises(InvalidParameterError):
        render_svg(PlotData([Trace("e", [], [])]), "scatter")
    with pytest.raises(InvalidParameterError):
        render_svg(PlotData([Trace("a", [1], [1])]), "pie")


def test_mismatched_trace_rejected():
    with pytest.raises(InvalidParameterError):
        Trace("a", [1, 2], [1])


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_plot(PlotData([Trace("a", [1], [1])]), "series", tmp_path / "missing" / "p.svg")


def test_deterministic_bytes():
    data = PlotData([Trace("a", np.arange(50.0), np.sin(np.arange(50.0)))])
    assert render_svg(data, "series") == render_svg(data, "series")
