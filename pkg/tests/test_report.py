import json
import random

import pytest

from tripleagent.controller import Assessment, Campaign, CampaignState, SimulatorTarget
from tripleagent.errors import IntegrityError, UsageError
from tripleagent.model import (
    BindingStatus,
    CandidateBinding,
    PerturbationPoint,
    PointCategory,
    binding_status,
)
from tripleagent.report import (
    Format,
    build_report,
    candidate_stats,
    overhead_compare,
    parse_structured,
    render,
)
from tripleagent.simprog import load_program

from .test_controller import FIXTURES, zoo_oracle

F, S, I, U = PointCategory.FRAGILE, PointCategory.SENSITIVE, PointCategory.IMMUNIZED, PointCategory.UNREACHED


def synthetic_state(n_f: int, n_s: int, n_i: int, seed: int = 0) -> CampaignState:
    """A finished campaign with random candidates and monotone binding outcomes."""
    rng = random.Random(seed)
    st = CampaignState()
    for i, cat in enumerate([F] * n_f + [S] * n_s + [I] * n_i):
        p = PerturbationPoint(f"m{i}", 0, "IOException")
        st.points.append(p)
        st.reach[p] = 1
        st.classification.add(p, cat)
        handlers = [f"h{j}" for j in range(rng.randint(0, 4))]
        st.candidates[p] = handlers
        for h in handlers:
            achieved = rng.choice([c for c in (F, S, I) if c.rank >= cat.rank] + [F])
            st.assessments.append(Assessment(CandidateBinding(p, h), achieved, binding_status(cat, achieved)))
    return st


def test_matrix_rows_sum_to_category_counts():
    report = build_report(synthetic_state(642, 296, 108))
    m = report.matrix
    assert m["a"] + m["b"] + m["c"] == 642
    assert m["d"] + m["e"] == 296
    assert m["f"] == 108
    assert report.total_points == 1046


def test_empty_report():
    report = build_report(CampaignState())
    assert report.total_points == 0
    assert set(report.matrix.values()) == {0}
    assert report.candidate_stats == (0, 0, 0)
    for fmt in Format:
        assert render(report, fmt)


def test_cell_a_zero_when_every_fragile_point_improves():
    st = CampaignState()
    p = PerturbationPoint("m", 0, "E")
    st.points, st.reach, st.candidates = [p], {p: 1}, {p: ["m"]}
    st.classification.add(p, F)
    st.assessments.append(Assessment(CandidateBinding(p, "m"), I, BindingStatus.VALIDATED_IMPROVEMENT))
    assert build_report(st).matrix == {"a": 0, "b": 0, "c": 1, "d": 0, "e": 0, "f": 0}


@pytest.mark.parametrize("counts, expected", [([0, 2, 10], (0, 2, 10)), ([1, 3], (1, 1, 3)), ([], (0, 0, 0)), ([5], (5, 5, 5))])
def test_candidate_stats(counts, expected):
    assert candidate_stats(counts) == expected


def test_overhead():
    assert abs(overhead_compare(20.4, 21.1) - 3.5) <= 0.1
    assert overhead_compare(10, 11) == pytest.approx(10.0)
    assert overhead_compare([10, 10], [11, 11]) == pytest.approx(10.0)
    with pytest.raises(UsageError):
        overhead_compare(0, 1)


def test_inconsistent_state_is_refused():
    st = synthetic_state(1, 0, 1)
    p = st.points[1]
    st.assessments.append(Assessment(CandidateBinding(p, "x"), S, BindingStatus.VALIDATED_IMPROVEMENT))
    with pytest.raises(IntegrityError) as err:
        build_report(st)
    assert any("downgrades" in r for r in err.value.records)


def test_structured_roundtrip():
    report = build_report(synthetic_state(20, 10, 5, seed=3))
    text = render(report, Format.STRUCTURED)
    assert parse_structured(text) == report
    assert json.loads(text)["report_version"] == 1


def test_csv_matrix():
    report = build_report(synthetic_state(5, 3, 2, seed=1))
    lines = render(report, "csv").splitlines()
    assert lines[0] == "origin,achieved,count"
    assert [tuple(x.split(",")[:2]) for x in lines[1:]] == [
        ("fragile", "fragile"), ("fragile", "sensitive"), ("fragile", "immunized"),
        ("sensitive", "sensitive"), ("sensitive", "immunized"), ("immunized", "immunized"),
    ]
    assert sum(int(x.split(",")[2]) for x in lines[1:]) == 10


def test_human_report_on_zoo():
    c = Campaign(SimulatorTarget(load_program(FIXTURES / "zoo" / "program.json"), step_budget=1000), zoo_oracle())
    text = render(build_report(c.run()))
    assert "fragile - immunized" in text
    assert "sensitive - immunized" in text
    assert "alternative resilient method" in text
    assert "Default Handling Method" in text
    row = next(line for line in text.splitlines() if line.startswith("b@0"))
    assert row.split() == ["b@0", "TimeoutException", "-", "b", "fragile", "-", "immunized"]
    assert "1 fragile, 1 sensitive, 1 immunized, 1 unreached" in text


def test_rows_ordered_by_category():
    report = build_report(synthetic_state(3, 3, 3, seed=7))
    ranks = [r.category.rank for r in report.rows]
    assert ranks == sorted(ranks)

