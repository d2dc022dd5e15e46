import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from credregion.exceptions import ShapeError
from credregion.plotting import capacity_svg, size_credibility_svg, write_svg


def table():
    lam = np.geomspace(1e-4, 0.99, 30)
    L = -np.log(lam)
    s = (L / L[0]) ** 1.5
    return {"lambda": lam, "s_rel": s, "C": 1 - lam, "S_HS": L / 5}


def test_size_credibility_svg_is_valid_xml_with_data():
    text = size_credibility_svg(table())
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert text.count("<polyline") == 2
    comment = re.search(r"<!--(.*?)-->", text, re.S).group(1)
    first = comment.strip().splitlines()[0]
    assert first.startswith("lambda: ")
    np.testing.assert_array_equal(np.array(first.split(": ")[1].split(","), dtype=float), table()["lambda"])


def test_capacity_svg_with_analytic_curve(tmp_path):
    t = table()
    ana = {"C_analytic": t["C"], "s2_analytic": t["S_HS"] * 1.01}
    text = capacity_svg(t, ana)
    ET.fromstring(text)
    assert "analytic" in text and "stroke-dasharray" in text
    path = write_svg(tmp_path / "x" / "cap.svg", text)
    assert path.read_text() == text


def test_missing_or_empty_columns_raise():
    with pytest.raises(ShapeError):
        size_credibility_svg({"lambda": np.ones(3)})
    with pytest.raises(ShapeError):
        capacity_svg({"C": np.array([]), "S_HS": np.array([])})
    with pytest.raises(ShapeError):
        capacity_svg(table(), {"C_analytic": np.ones(2)})
