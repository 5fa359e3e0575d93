"""
Report rendering
JSON documents plus aligned plain-text tables for the metrics reports
"""
import logging
from pathlib import Path
from typing import Dict

import pandas as pd

from .artifacts import write_json, write_text

logger = logging.getLogger(__name__)

STRATEGY_LABELS = {
    'BoundariesOnly': 'Boundaries',
    'SampleOnly': 'Sample',
    'HistogramOnly': 'Histogram',
}
FAMILY_LABELS = {
    'EqualityOnly': 'Equality',
    'InequalityOnly': 'Inequality',
}
SPARSE_MARK = '*'


def _fmt(value, digits=5) -> str:
    if value is None:
        return '-'
    return f'{value:.{digits}f}'


def _table(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, justify='left')


def diversity_text(report: dict) -> str:
    lines = [
        'Workload diversity',
        f'Queries: {report["size"]}{" (empty)" if report["empty"] else ""}',
        f'Table coverage: {_fmt(report["table_coverage"], 3)}',
        f'Column coverage: {_fmt(report["column_coverage"], 3)}',
        f'Duplicate rate: {_fmt(report["dedup_rate"], 3)}',
        '',
        _table(pd.DataFrame(list(report['category_counts'].items()), columns=['Category', 'Queries'])),
        '',
        _table(pd.DataFrame(list(report['predicate_kinds'].items()), columns=['Predicate kind', 'Queries'])),
    ]
    if report['join_counts']:
        lines += ['', _table(pd.DataFrame(list(report['join_counts'].items()), columns=['Joins', 'Queries']))]
    return '\n'.join(lines) + '\n'


def fidelity_text(report: dict) -> str:
    lines = [
        'Workload fidelity',
        f'Template overlap: {_fmt(report["template_overlap"], 3)}',
        f'Join-edge Jaccard: {_fmt(report["join_edge_jaccard"], 3)}',
        f'Predicate-kind distance (TV): {_fmt(report["predicate_kind_distance"], 3)}',
        'Unmatched reference constructs: ' + (', '.join(report['unmatched']) or 'none'),
    ]
    return '\n'.join(lines) + '\n'


def selectivity_text(report: dict) -> str:
    """Rows are strategies; columns are predicate kind x level"""
    rows: Dict[str, dict] = {}
    for cell in report['cells']:
        row = rows.setdefault(cell['strategy'], {'Strategy': STRATEGY_LABELS.get(cell['strategy'], cell['strategy'])})
        header = f'{FAMILY_LABELS.get(cell["predicate_kind"], cell["predicate_kind"])} {cell["level"]}'
        value = _fmt(cell['average_selectivity'])
        row[header] = f'{value}{SPARSE_MARK}' if cell['sparse'] else value

    lines = [
        'Average selectivity per prompting strategy',
        f'Columns: {", ".join(report["columns"])}; {report["queries_per_cell"]} queries requested per cell',
        '',
        _table(pd.DataFrame(list(rows.values()))),
        '',
        f'{SPARSE_MARK} fewer than {report["min_bucket_size"]} labeled queries',
    ]
    return '\n'.join(lines) + '\n'


def timing_text(report: dict) -> str:
    """One column per batch size"""
    columns = {'': ['Total time (ms)', 'Avg. time/query (ms)', 'Queries accepted', 'Provider calls']}
    for row in report['rows']:
        marker = SPARSE_MARK if row['incomplete'] else ''
        columns[f'{row["n"]}{marker}'] = [
            _fmt(row['total_ms'], 1),
            _fmt(row['avg_ms_per_query'], 2),
            str(row['accepted']),
            str(row['calls_made']),
        ]
    lines = [
        'Generation time for different numbers of queries',
        '',
        _table(pd.DataFrame(columns)),
    ]
    if any(row['incomplete'] for row in report['rows']):
        lines += ['', f'{SPARSE_MARK} generation incomplete']
    return '\n'.join(lines) + '\n'


RENDERERS = {
    'diversity': diversity_text,
    'fidelity': fidelity_text,
    'selectivity': selectivity_text,
    'timing': timing_text,
}


def write_report(reports_dir, name: str, report: dict, seed: int) -> Path:
    """
    Write reports/<name>.json and reports/<name>.txt

    Returns:
        Path of the JSON document
    """
    reports_dir = Path(reports_dir)
    json_path = write_json(reports_dir / f'{name}.json', report, seed)
    write_text(reports_dir / f'{name}.txt', RENDERERS[name](report))
    logger.info(f'Wrote {name} report to {reports_dir}')
    return json_path
