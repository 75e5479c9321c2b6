import csv
import io
import json
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discrete_maa.report import (
    ALWAYS,
    NEVER,
    OPTIONAL,
    ReportError,
    frequency,
    histogram_csv,
    necessity_flags,
    render,
    render_svg,
)


def test_two_designs_split_evenly():
    dist = frequency([[0.0], [500.0]], ["chp"])
    h = dist["chp"]
    assert dict(zip(h.capacities.tolist(), h.frequencies.tolist())) == {0.0: 0.5, 500.0: 0.5}


def test_identical_and_zero_components():
    designs = np.array([[2000.0, 0.0], [2000.0, 0.0], [2000.0, 0.0]])
    dist = frequency(designs, ["wind", "orc"])
    assert dist["wind"].capacities.tolist() == [2000.0] and dist["wind"].frequencies.tolist() == [1.0]
    assert dist["orc"].capacities.tolist() == [0.0] and dist["orc"].frequencies.tolist() == [1.0]


def test_flags():
    designs = np.array([[2000.0, 0.0, 500.0], [4000.0, 0.0, 0.0]])
    flags = necessity_flags(frequency(designs, ["wind", "orc", "boiler"]))
    assert flags == {"wind": ALWAYS, "orc": NEVER, "boiler": OPTIONAL}


def test_empty_set_is_an_error():
    with pytest.raises(ReportError):
        frequency(np.zeros((0, 2)), ["a", "b"])


def test_reference_line_defaults_to_nan():
    dist = frequency([[1.0, 2.0]], ["a", "b"])
    assert all(math.isnan(h.reference) for h in dist.components)
    dist = frequency([[1.0, 2.0]], ["a", "b"], reference=[0.5, 2.5])
    assert dist["b"].reference == 2.5


lattice_designs = st.integers(1, 4).flatmap(
    lambda d: st.lists(st.lists(st.integers(0, 5), min_size=d, max_size=d), min_size=1, max_size=30))


@settings(max_examples=60, deadline=None)
@given(lattice_designs, st.randoms(use_true_random=False))
def test_mass_and_relabel_invariance(rows, rnd):
    designs = np.array(rows, dtype=float) * 250.0
    names = [f"c{i}" for i in range(designs.shape[1])]
    dist = frequency(designs, names)
    for h in dist.components:
        assert h.total == len(designs)
        assert h.frequencies.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(h.capacities) > 0)
    order = list(range(len(designs)))
    rnd.shuffle(order)
    assert necessity_flags(frequency(designs[order], names)) == necessity_flags(dist)


def test_csv_schema_and_order():
    dist = frequency([[500.0], [0.0], [500.0], [1000.0]], ["hp"])
    rows = list(csv.reader(io.StringIO(histogram_csv(dist["hp"]))))
    assert rows[0] == ["capacity", "count", "relative_frequency"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 500.0, 1000.0]
    assert [int(r[1]) for r in rows[1:]] == [1, 2, 1]
    assert sum(float(r[2]) for r in rows[1:]) == pytest.approx(1.0)


def test_render_files_and_determinism(tmp_path):
    designs = np.array([[1.0, 0.0, 2.0], [2.0, 0.0, 2.0], [2.0, 1.0, 2.0]])
    dist = frequency(designs, ["a", "b/c", "d"], reference=[1.5, 0.2, 2.0])
    first = render(dist, tmp_path / "one")
    second = render(dist, tmp_path / "two")
    names = sorted(p.name for p in first)
    assert names == ["a.csv", "b_c.csv", "d.csv", "frequency.svg"]
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()


def test_svg_has_panels_and_reference_lines():
    dist = frequency([[1.0, 3.0], [2.0, 3.0]], ["x", "y"], reference=[1.5, float("nan")])
    svg = render_svg(dist)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert len(re.findall(r'<g id="panel-\d+">', svg)) == 2
    assert svg.count('class="reference"') == 1


def test_render_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        render(frequency([[1.0]], ["a"]), blocker / "sub")


def test_to_dict_is_strict_json():
    dist = frequency([[1.0, 2.0]], ["a", "b"], reference=[0.5, float("nan")])
    doc = json.loads(json.dumps(dist.to_dict(), allow_nan=False))
    assert [c["reference"] for c in doc["components"]] == [0.5, None]
