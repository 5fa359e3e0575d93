"""
Selectivity study over the desk dataset with the offline provider
"""
import pytest

from workloads.services.metrics_service import CELL_COLUMNS, STRATEGY_ROWS, metrics_service
from workloads.utils.generation import PredicateFamily, SelectivityLevel, StatsStrategy

from .factories import ProviderProfileFactory, desk_dataset

SELECTIVE = SelectivityLevel.SELECTIVE
NON_SELECTIVE = SelectivityLevel.NON_SELECTIVE


@pytest.fixture(scope='module')
def matrix():
    desk = desk_dataset()
    return metrics_service.selectivity_study(
        desk.catalog, desk.data, desk.stats, ProviderProfileFactory(seed=42), queries_per_cell=20, seed=42)


class TestSelectivityStudy:

    def test_every_cell_is_filled(self, matrix):
        assert len(matrix.cells) == len(STRATEGY_ROWS) * len(CELL_COLUMNS)
        for cell in matrix.cells.values():
            assert cell.error is None
            assert cell.average is not None
            assert 0 <= cell.average <= 1

    @pytest.mark.parametrize('strategy', STRATEGY_ROWS)
    @pytest.mark.parametrize('family', [PredicateFamily.EQUALITY_ONLY, PredicateFamily.INEQUALITY_ONLY])
    def test_selective_below_non_selective(self, matrix, strategy, family):
        assert matrix.cell(strategy, family, SELECTIVE).average < matrix.cell(strategy, family, NON_SELECTIVE).average

    def test_histogram_no_worse_than_boundaries_for_rare_points(self, matrix):
        family = PredicateFamily.EQUALITY_ONLY
        histogram = matrix.cell(StatsStrategy.HISTOGRAM_ONLY, family, SELECTIVE).average
        boundaries = matrix.cell(StatsStrategy.BOUNDARIES_ONLY, family, SELECTIVE).average
        assert histogram <= boundaries

    def test_report_layout(self, matrix):
        document = matrix.to_dict()
        assert document['queries_per_cell'] == 20
        assert len(document['cells']) == 12
        assert {'strategy', 'predicate_kind', 'level', 'average_selectivity', 'labeled_queries',
                'sparse', 'error'} == set(document['cells'][0])

    def test_cell_count_must_be_positive(self):
        desk = desk_dataset()
        with pytest.raises(ValueError):
            metrics_service.selectivity_study(desk.catalog, desk.data, desk.stats, ProviderProfileFactory(),
                                              queries_per_cell=0, seed=1)
