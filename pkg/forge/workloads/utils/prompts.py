"""
Prompt builders for workload generation
One prompt family per intent; selectivity-targeted prompts carry exactly one statistics slice
"""
import logging
from typing import List, Optional

from ..exceptions import MissingStatisticsError
from .catalog import SchemaCatalog
from .generation import (
    GenerationRequest, Intent, PredicateFamily, SelectivityLevel, StatsStrategy,
)
from .sql_ast import PredicateKind, QueryCategory
from .sql_printer import print_sql
from .statistics import ColumnStatistics, StatisticsMap

logger = logging.getLogger(__name__)

# Sample values embedded in a prompt (the sample itself may be larger)
PROMPT_SAMPLE_LIMIT = 200

CATEGORY_PHRASES = {
    QueryCategory.SIMPLE_SELECTION: 'simple selection queries over a single table without aggregation',
    QueryCategory.COMPLEX_JOIN: 'join queries over two or more tables without aggregation',
    QueryCategory.AGGREGATION: 'aggregation queries using COUNT, SUM or AVG, optionally with GROUP BY',
}

PREDICATE_PHRASES = {
    PredicateKind.NONE: 'no WHERE clause',
    PredicateKind.EQUALITY: 'only equality predicates (column = constant)',
    PredicateKind.RANGE: 'only range predicates (<, <=, >, >=)',
    PredicateKind.BETWEEN: 'only BETWEEN predicates',
    PredicateKind.IN_LIST: 'only IN lists of constants',
    PredicateKind.SUBQUERY: 'an IN (SELECT ...) subquery predicate',
    PredicateKind.MIXED: 'a combination of different predicate types',
}

OUTPUT_RULES = (
    'Return only SQL statements separated by semicolons, with no commentary.\n'
    'Use only SELECT ... FROM ... WHERE ... GROUP BY with inner equi-joins written in the WHERE clause, '
    'comparisons against constants (=, <>, <, <=, >, >=), BETWEEN, IN lists, AND/OR, '
    'and at most one level of IN (SELECT ...) subqueries.\n'
    'Do not use ORDER BY, LIMIT, HAVING, DISTINCT, LIKE, NULL tests, outer joins or set operations.'
)


def render_schema(catalog: SchemaCatalog) -> str:
    lines = ['Database schema:']
    for table in catalog.tables:
        columns = ', '.join(
            f'{c.name} {c.value_type}{" PRIMARY KEY" if c.name == table.primary_key else ""}'
            for c in table.columns
        )
        lines.append(f'  {table.name}({columns})')
    if catalog.foreign_keys:
        lines.append('Foreign keys:')
        lines.extend(f'  {fk}' for fk in catalog.foreign_keys)
    return '\n'.join(lines)


def target_statistics(column: str, stats: StatisticsMap) -> ColumnStatistics:
    table, _, name = column.partition('.')
    column_stats = stats.get((table, name))
    if column_stats is None:
        raise MissingStatisticsError(column)
    return column_stats


def render_statistics(column: str, stats: StatisticsMap, strategy: StatsStrategy) -> str:
    """
    The statistics slice for one column under one strategy

    Raises:
        MissingStatisticsError: the column lacks what the strategy needs
    """
    column_stats = target_statistics(column, stats)

    if strategy == StatsStrategy.BOUNDARIES_ONLY:
        if column_stats.min is None or column_stats.max is None:
            raise MissingStatisticsError(column, 'boundaries')
        return f'Column {column}: minimum value {column_stats.min}, maximum value {column_stats.max}.'

    if strategy == StatsStrategy.SAMPLE_ONLY:
        if not column_stats.sample:
            raise MissingStatisticsError(column, 'sample')
        shown = column_stats.sample[:PROMPT_SAMPLE_LIMIT]
        return (
            f'Sample values of {column} ({len(shown)} values drawn from the data):\n'
            + ', '.join(str(value) for value in shown)
        )

    if not column_stats.histogram:
        raise MissingStatisticsError(column, 'histogram')
    lines = [
        f'Histogram of {column} ({len(column_stats.histogram)} equi-width buckets):',
        'bucket_low | bucket_high | frequency',
    ]
    lines.extend(f'{b.lo:g} | {b.hi:g} | {b.frequency}' for b in column_stats.histogram)
    return '\n'.join(lines)


def _mix_lines(req: GenerationRequest) -> List[str]:
    lines = []
    for category, count in (req.category_mix or {}).items():
        if count:
            lines.append(f'- exactly {count} {CATEGORY_PHRASES[QueryCategory(category)]}')
    for kind, count in (req.predicate_mix or {}).items():
        if count:
            lines.append(f'- exactly {count} queries using {PREDICATE_PHRASES[PredicateKind(kind)]}')
    return lines


def _selectivity_task(req: GenerationRequest, stats: StatisticsMap) -> List[str]:
    target = req.selectivity_target
    selective = target.level == SelectivityLevel.SELECTIVE
    family = 'equality' if target.predicate_kind == PredicateFamily.EQUALITY_ONLY else 'inequality'
    columns = ', '.join(req.target_columns)
    lines = [
        f'Create {req.n} query predicates with {"high" if selective else "low"} selectivity on {columns} '
        f'using only {family} predicates.',
        'A selective predicate matches few rows; a non-selective predicate matches many rows.'
        if selective else
        'A non-selective predicate matches many rows; prefer wide conditions.',
        'Write each as SELECT * FROM <table> WHERE <predicate> on the table of the column.',
    ]
    for column in req.target_columns:
        lines.append(render_statistics(column, stats, req.stats_strategy))
    return lines


def build_prompt(req: GenerationRequest, catalog: SchemaCatalog, stats: Optional[StatisticsMap] = None) -> str:
    """
    Prompt text for a generation request

    Args:
        req: Validated request
        catalog: Schema catalog, always rendered
        stats: Column statistics (needed for SelectivityTargeted)

    Returns:
        Prompt string
    """
    stats = stats or {}
    sections = [render_schema(catalog)]

    if req.intent == Intent.SCHEMA_AWARE:
        task = [f'Generate a workload of {req.n} SQL queries over this schema.']
    elif req.intent == Intent.CONTEXT_AWARE:
        task = [
            f'Generate a workload of {req.n} SQL queries over this schema.',
            f'The workload is that of: {req.context_text}',
            'Choose tables, columns and conditions such a user would query.',
        ]
    elif req.intent == Intent.WORKLOAD_EXPANSION:
        task = ['Here is an existing workload:']
        task.extend(f'{print_sql(q)};' for q in req.seed_workload)
        task.append(
            f'Refine and expand it with {req.n} new SQL queries that follow the same patterns: '
            'reuse its tables and columns, vary the numeric ranges and combine conditions.'
        )
    else:
        task = _selectivity_task(req, stats)

    mix = _mix_lines(req)
    if mix:
        task.append('The workload must contain:')
        task.extend(mix)

    sections.append('\n'.join(task))
    sections.append(OUTPUT_RULES)
    prompt = '\n\n'.join(sections)
    logger.debug(f'Built {Intent(req.intent).value} prompt for {req.n} queries ({len(prompt)} chars)')
    return prompt
