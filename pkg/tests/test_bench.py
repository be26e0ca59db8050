import pytest
from hypothesis import given
from hypothesis import strategies as st

from leofuzz.bench import a12, load_fixture, run_bench
from leofuzz.config import CampaignConfig


def test_a12_definition():
    assert a12([1, 2, 3], [1, 2, 3]) == 0.5
    assert a12([1, 1], [5, 6]) == 1.0
    assert a12([5, 6], [1, 1]) == 0.0
    assert a12([1, 5], [3]) == 0.5
    with pytest.raises(ValueError):
        a12([], [1])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=12), st.lists(st.integers(0, 50), min_size=1, max_size=12))
def test_a12_range_and_complement(a, b):
    v = a12(a, b)
    assert 0.0 <= v <= 1.0
    assert v + a12(b, a) == pytest.approx(1.0)


def test_bench_bookkeeping():
    base = CampaignConfig(deterministic=True, exec_budget=30000, budget=1e9)
    report = run_bench(["p0"], runs=3, base_config=base, rng_seed=5)
    assert len(report.cells) == 3
    for cell in report.cells:
        assert [r.rng_seed for r in cell.runs] == [5, 6, 7]
        assert len(cell.scores) == 3
    mes = report.cell("p0", "mes")
    assert a12(mes.scores, mes.scores) == 0.5


def test_dnf_counted_at_budget():
    base = CampaignConfig(deterministic=True, exec_budget=5, budget=1e9)
    cell = run_bench(["fig1"], ["mes"], runs=2, base_config=base).cells[0]
    assert cell.completed == 0 and cell.scores == [5, 5] and cell.median == 5


def test_fixture_by_path(fixtures_path):
    fx = load_fixture(fixtures_path / "multi10.json")
    assert fx.name == "multi10" and len(fx.sequences) == 10 and fx.seeds


def test_unknown_fixture():
    with pytest.raises(FileNotFoundError):
        load_fixture("no_such_fixture")
