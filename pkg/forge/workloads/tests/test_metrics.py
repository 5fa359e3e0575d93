import json

import pytest

from workloads.services.metrics_service import metrics_service
from workloads.utils.reports import write_report
from workloads.utils.sql_parser import parse_sql

from .factories import ProviderProfileFactory, desk_dataset

REFERENCE = [parse_sql(sql) for sql in (
    'SELECT * FROM movies WHERE rating > 7.5',
    "SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND t.kind = 'episode'",
    'SELECT c.role, COUNT(*) FROM cast_info c, persons p WHERE c.person_id = p.id GROUP BY c.role',
    'SELECT title FROM movies WHERE id IN (SELECT movie_id FROM movie_keyword WHERE keyword_id = 3)',
)]


class TestDiversity:

    def test_distributions_add_up(self):
        report = metrics_service.diversity(REFERENCE, desk_dataset().catalog)
        assert report.size == 4
        assert sum(report.category_counts.values()) == 4
        assert sum(report.predicate_kinds.values()) == 4
        assert sum(report.join_counts.values()) == 4
        assert report.category_counts == {'SimpleSelection': 2, 'ComplexJoin': 1, 'Aggregation': 1}
        assert report.table_coverage == pytest.approx(5 / 8)
        assert 0 < report.column_coverage < 1
        assert report.dedup_rate == 0

    def test_duplicates_are_counted(self):
        q = REFERENCE[0]
        assert metrics_service.diversity([q, q], desk_dataset().catalog).dedup_rate == 0.5

    def test_empty_corpus(self):
        report = metrics_service.diversity([], desk_dataset().catalog)
        assert report.empty
        assert report.table_coverage == 0
        assert set(report.category_counts.values()) == {0}


class TestFidelity:

    def test_reference_against_itself(self):
        report = metrics_service.fidelity(REFERENCE, REFERENCE)
        assert report.template_overlap == 1
        assert report.join_edge_jaccard == 1
        assert report.predicate_kind_distance == 0
        assert report.unmatched == []

    def test_constants_do_not_matter(self):
        corpus = [parse_sql('SELECT * FROM movies WHERE rating > 3.0')]
        assert metrics_service.fidelity(corpus, REFERENCE).template_overlap == 1

    def test_missing_constructs_are_listed(self):
        corpus = [parse_sql('SELECT * FROM movies WHERE rating > 3.0')]
        report = metrics_service.fidelity(corpus, REFERENCE)
        assert report.join_edge_jaccard == 0
        assert 'group_by' in report.unmatched
        assert 'in_subquery' in report.unmatched
        assert 'join:movies.id=title.movie_id' in report.unmatched

    @pytest.mark.parametrize('corpus, reference', [(REFERENCE, []), ([], REFERENCE)])
    def test_empty_inputs(self, corpus, reference):
        with pytest.raises(ValueError):
            metrics_service.fidelity(corpus, reference)


class TestTiming:

    def test_mock_generation_is_fast(self):
        desk = desk_dataset()
        report = metrics_service.timing_study(ProviderProfileFactory(), desk.catalog, [10, 50], desk.stats)
        assert [row.n for row in report.rows] == [10, 50]
        assert [row.accepted for row in report.rows] == [10, 50]
        assert all(row.avg_ms_per_query < 50 for row in report.rows)

    def test_sizes_required(self):
        with pytest.raises(ValueError):
            metrics_service.timing_study(ProviderProfileFactory(), desk_dataset().catalog, [])


class TestReports:

    def test_json_and_text_are_written(self, tmp_path):
        report = metrics_service.diversity(REFERENCE, desk_dataset().catalog).to_dict()
        json_path = write_report(tmp_path / 'reports', 'diversity', report, seed=3)
        document = json.loads(json_path.read_text())
        assert document['seed'] == 3
        assert document['size'] == 4
        text = (tmp_path / 'reports' / 'diversity.txt').read_text()
        assert text.startswith('Workload diversity')
        assert 'Queries: 4' in text

    def test_timing_text_marks_incomplete_sizes(self, tmp_path):
        report = {'rows': [
            {'n': 10, 'total_ms': 12.0, 'accepted': 10, 'avg_ms_per_query': 1.2, 'calls_made': 1, 'incomplete': False},
            {'n': 20, 'total_ms': 30.0, 'accepted': 15, 'avg_ms_per_query': 2.0, 'calls_made': 4, 'incomplete': True},
        ]}
        write_report(tmp_path, 'timing', report, seed=1)
        text = (tmp_path / 'timing.txt').read_text()
        assert '20*' in text
        assert text.rstrip().endswith('* generation incomplete')
