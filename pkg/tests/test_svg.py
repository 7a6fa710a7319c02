import numpy as np

from cfadv.svg import bar_chart_svg, box_stats, boxplot_svg


def test_box_stats_examples():
    st = box_stats([1, 2, 3, 4, 100])
    assert st["median"] == 3 and st["q1"] == 2 and st["q3"] == 4
    assert st["outliers"] == [100.0] and st["whisker_hi"] == 4.0
    assert box_stats([]) is None


def test_single_value_collapses_to_a_line():
    st = box_stats([0.7])
    assert st["q1"] == st["median"] == st["q3"] == st["whisker_lo"] == st["whisker_hi"] == 0.7
    assert st["outliers"] == []


def test_svgs_are_deterministic_and_well_formed():
    rng = np.random.default_rng(0)
    groups = [("scfe_vs_cw", {"empirical": rng.random(30).tolist(), "bound": (rng.random(30) + 1).tolist()})]
    a, b = boxplot_svg(groups, "t & u"), boxplot_svg(groups, "t & u")
    assert a == b and a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert "t &amp; u" in a


def test_zero_and_missing_bars_are_omitted():
    full = bar_chart_svg([("p", {"0.02": 0.5, "0.05": 0.7})])
    partial = bar_chart_svg([("p", {"0.02": 0.0, "0.05": None})])
    # two bars plus two legend swatches in the first, only the swatches in the second
    assert full.count('<rect x=') == 4
    assert partial.count('<rect x=') == 2
