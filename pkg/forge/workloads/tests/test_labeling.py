from fractions import Fraction
from unittest import mock

import numpy as np
import pytest

from workloads.exceptions import LabelingError, MissingArtifactError
from workloads.services.labeling_service import (
    EXACT, LabeledQuery, LabelingMode, check_label, labeling_service,
)
from workloads.utils.artifacts import output_paths, read_csv, read_seed
from workloads.utils.executor import QueryExecutor
from workloads.utils.sql_parser import parse_sql

from .factories import movie_desk, tiny_tables

CATALOG, DATA = movie_desk()


class TestExactLabels:

    def test_full_table_has_selectivity_one(self):
        label = labeling_service.label_exact(parse_sql('SELECT * FROM title'), DATA, CATALOG)
        assert label.cardinality == 8
        assert label.selectivity == 1
        assert label.label_mode == EXACT

    def test_contradiction_has_selectivity_zero(self):
        label = labeling_service.label_exact(
            parse_sql('SELECT * FROM movies WHERE rating > 7 AND rating < 5'), DATA, CATALOG)
        assert label.cardinality == 0
        assert label.selectivity == 0

    def test_selectivity_is_an_exact_fraction_of_the_universe(self):
        label = labeling_service.label_exact(
            parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id'), DATA, CATALOG)
        assert label.universe_size == 48
        assert label.cardinality == 7
        assert label.selectivity == Fraction(7, 48)
        assert label.selectivity * label.universe_size == label.cardinality

    def test_aggregation_counts_groups(self):
        label = labeling_service.label_exact(
            parse_sql('SELECT genre, COUNT(*) FROM movies GROUP BY genre'), DATA, CATALOG)
        assert label.cardinality == 3
        assert label.selectivity == Fraction(3, 6)

    def test_check_label_rejects_broken_identity(self):
        broken = LabeledQuery(parse_sql('SELECT * FROM movies'), 5, 6, Fraction(1, 2), query_id='q1')
        with pytest.raises(LabelingError, match='does not reproduce'):
            check_label(broken)


class TestSampledLabels:

    def test_estimator_is_unbiased_on_a_uniform_column(self):
        catalog, data = tiny_tables({'u': {'id': np.arange(10000), 'v': np.arange(10000) % 100}})
        q = parse_sql('SELECT * FROM u WHERE v < 50')
        estimates = [
            labeling_service.label_sampled(q, data, 0.1, seed, catalog).selectivity
            for seed in range(30)
        ]
        mean = float(sum(estimates, Fraction(0)) / len(estimates))
        assert abs(mean - 0.5) <= 0.05 * 0.5

    def test_sampled_mode_is_recorded(self):
        label = labeling_service.label_sampled(parse_sql('SELECT * FROM title'), DATA, 0.5, 3, CATALOG)
        assert label.label_mode == 'Sampled(0.5)'
        assert label.low_confidence

    def test_same_seed_same_label(self):
        q = parse_sql('SELECT * FROM title WHERE start_year >= 2004')
        first = labeling_service.label_sampled(q, DATA, 0.5, 9, CATALOG)
        again = labeling_service.label_sampled(q, DATA, 0.5, 9, CATALOG)
        assert first.cardinality == again.cardinality

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            LabelingMode('sampled', fraction=0)

    def test_sparse_samples_are_flagged_for_aggregations_too(self):
        catalog, data = tiny_tables({'u': {'id': np.arange(5), 'v': np.arange(5)}})
        aggregate = labeling_service.label_sampled(
            parse_sql('SELECT COUNT(*) FROM u WHERE v > 100'), data, 0.01, 1, catalog)
        plain = labeling_service.label_sampled(parse_sql('SELECT * FROM u WHERE v > 100'), data, 0.01, 1, catalog)
        assert aggregate.low_confidence
        assert plain.low_confidence
        assert plain.cardinality == 0

    def test_full_fraction_is_never_flagged(self):
        catalog, data = tiny_tables({'u': {'id': np.arange(5), 'v': np.arange(5)}})
        label = labeling_service.label_sampled(parse_sql('SELECT COUNT(*) FROM u WHERE v > 100'), data, 1.0, 1, catalog)
        assert label.cardinality == 1
        assert not label.low_confidence


class TestWorkloadLabeling:

    def test_failures_are_isolated(self):
        queries = [
            parse_sql('SELECT * FROM movies'),
            parse_sql('SELECT * FROM persons'),
            parse_sql("SELECT * FROM movies WHERE genre = 'drama'"),
        ]
        result = labeling_service.label_workload(queries, DATA, catalog=CATALOG, query_ids=['a', 'b', 'c'], jobs=2)
        assert [label.query_id for label in result.labels] == ['a', 'c']
        assert [failure.query_id for failure in result.failures] == ['b']
        assert 'not loaded' in result.failures[0].reason

    def test_unexpected_errors_stay_with_their_query(self):
        queries = [
            parse_sql('SELECT * FROM movies'),
            parse_sql('SELECT * FROM title'),
            parse_sql("SELECT * FROM movies WHERE genre = 'drama'"),
        ]
        result_count = QueryExecutor.result_count

        def exhausted_on_title(executor):
            if 'title' in executor.tables.values():
                raise MemoryError()
            return result_count(executor)

        with mock.patch.object(QueryExecutor, 'result_count', autospec=True, side_effect=exhausted_on_title):
            result = labeling_service.label_workload(
                queries, DATA, catalog=CATALOG, query_ids=['a', 'b', 'c'], jobs=2)

        assert [label.query_id for label in result.labels] == ['a', 'c']
        assert [failure.query_id for failure in result.failures] == ['b']
        assert result.failures[0].reason == 'MemoryError'

    def test_export_and_read_back(self, tmp_path):
        queries = [parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND t.start_year = 2004')]
        result = labeling_service.label_workload(queries, DATA, catalog=CATALOG)
        paths = output_paths(tmp_path)
        labeling_service.export_labels(result, paths, seed=42)

        assert read_seed(paths['labels_csv']) == 42
        frame = read_csv(paths['labels_csv'])
        assert list(frame['cardinality']) == ['3']

        back = labeling_service.read_labels(paths['labels_json'])
        assert back[0].query == result.labels[0].query
        assert back[0].selectivity == result.labels[0].selectivity

    def test_reading_missing_labels(self, tmp_path):
        with pytest.raises(MissingArtifactError, match='label stage'):
            labeling_service.read_labels(tmp_path / 'labels.json')
