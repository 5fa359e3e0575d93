"""
Schema validation of parsed queries
Reports findings instead of raising; join edges outside the FK graph are warnings
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .catalog import NUMERIC_TYPES, SchemaCatalog
from .sql_ast import (
    AggregateCall, And, Between, ColumnRef, Comparison, InList, InSubquery,
    JoinPredicate, Or, QueryAst, Star, map_atoms,
)

logger = logging.getLogger(__name__)

ERROR = 'error'
WARNING = 'warning'


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = ERROR

    def __str__(self):
        return f'{self.severity}: {self.code}: {self.message}'


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == ERROR]

    @property
    def warnings(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == WARNING]

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def add(self, code: str, message: str, severity: str = ERROR):
        self.violations.append(Violation(code, message, severity))

    def summary(self) -> str:
        return '; '.join(str(v) for v in self.errors or self.violations)


@dataclass(frozen=True)
class ResolvedColumn:
    qualifier: str
    table: str
    column: str
    value_type: str

    @property
    def key(self) -> str:
        return f'{self.qualifier}.{self.column}'

    @property
    def is_numeric(self) -> bool:
        return self.value_type in NUMERIC_TYPES


class ScopeError(LookupError):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class QueryScope:
    """Name resolution over one query level (subqueries get their own scope)"""

    def __init__(self, q: QueryAst, catalog: SchemaCatalog):
        self.query = q
        self.catalog = catalog
        self.tables: Dict[str, str] = {}
        for ref in q.from_tables:
            self.tables.setdefault(ref.qualifier, ref.name)

    def resolve(self, ref: ColumnRef) -> ResolvedColumn:
        if ref.qualifier is not None:
            table_name = self.tables.get(ref.qualifier)
            if table_name is None:
                raise ScopeError('unknown_table', f'unknown table or alias {ref.qualifier!r}')
            table = self.catalog.table(table_name)
            column = table.column(ref.name) if table else None
            if column is None:
                raise ScopeError('unknown_column', f'unknown column {ref}')
            return ResolvedColumn(ref.qualifier, table.name, column.name, column.value_type)

        matches = []
        for qualifier, table_name in self.tables.items():
            table = self.catalog.table(table_name)
            column = table.column(ref.name) if table else None
            if column is not None:
                matches.append(ResolvedColumn(qualifier, table.name, column.name, column.value_type))
        if not matches:
            raise ScopeError('unknown_column', f'unknown column {ref.name}')
        if len(matches) > 1:
            raise ScopeError(
                'ambiguous_column',
                f'column {ref.name} is ambiguous ({", ".join(m.qualifier for m in matches)})'
            )
        return matches[0]


def _literal_matches(value, resolved: ResolvedColumn) -> bool:
    if resolved.is_numeric:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, str)


def validate(q: QueryAst, catalog: SchemaCatalog) -> ValidationReport:
    """
    Check a query against the catalog

    Args:
        q: Parsed query
        catalog: Schema catalog

    Returns:
        ValidationReport; join predicates off the FK graph are warnings
    """
    report = ValidationReport()
    _validate_level(q, catalog, report, is_subquery=False)
    return report


def _validate_level(q: QueryAst, catalog: SchemaCatalog, report: ValidationReport, is_subquery: bool):
    seen = set()
    for ref in q.from_tables:
        if catalog.table(ref.name) is None:
            report.add('unknown_table', f'unknown table {ref.name!r}')
        if ref.qualifier in seen:
            report.add('duplicate_qualifier', f'table name or alias {ref.qualifier!r} used twice')
        seen.add(ref.qualifier)

    scope = QueryScope(q, catalog)

    def resolve(ref: ColumnRef) -> Optional[ResolvedColumn]:
        try:
            return scope.resolve(ref)
        except ScopeError as e:
            report.add(e.code, str(e))
            return None

    # projections
    plain_columns = []
    for projection in q.projections:
        expr = projection.expr
        if isinstance(expr, ColumnRef):
            resolved = resolve(expr)
            if resolved:
                plain_columns.append(resolved)
        elif isinstance(expr, AggregateCall) and expr.argument is not None:
            resolved = resolve(expr.argument)
            if resolved and expr.function in ('SUM', 'AVG') and not resolved.is_numeric:
                report.add('type_mismatch', f'{expr.function} over text column {resolved.key}')
        elif isinstance(expr, Star) and (q.group_by or q.has_aggregate):
            report.add('group_by', 'SELECT * cannot be combined with aggregation')

    # group by
    grouped = {r.key for r in (resolve(c) for c in q.group_by) if r}
    if q.is_aggregation:
        for resolved in plain_columns:
            if resolved.key not in grouped:
                report.add('group_by', f'column {resolved.key} must appear in GROUP BY')

    # joins
    _validate_joins(q, catalog, report, resolve)

    # filters
    if q.where is not None:
        def check(atom):
            resolved = resolve(atom.column)
            if resolved is None:
                return atom
            if isinstance(atom, Comparison):
                if not _literal_matches(atom.value, resolved):
                    report.add('type_mismatch', f'{resolved.key} ({resolved.value_type}) {atom.op} {atom.value!r}')
            elif isinstance(atom, Between):
                if not (_literal_matches(atom.low, resolved) and _literal_matches(atom.high, resolved)):
                    report.add('type_mismatch', f'{resolved.key} ({resolved.value_type}) BETWEEN {atom.low!r} AND {atom.high!r}')
                elif atom.low > atom.high:
                    report.add('between_order', f'{resolved.key} BETWEEN {atom.low!r} AND {atom.high!r} has low > high')
            elif isinstance(atom, InList):
                bad = [v for v in atom.values if not _literal_matches(v, resolved)]
                if bad:
                    report.add('type_mismatch', f'{resolved.key} ({resolved.value_type}) IN list holds {bad[0]!r}')
            elif isinstance(atom, InSubquery):
                _validate_subquery(atom, resolved, catalog, report, is_subquery)
            return atom

        map_atoms(q.where, check)


def _validate_joins(q, catalog, report, resolve):
    qualifiers = [ref.qualifier for ref in q.from_tables]
    parent = {qualifier: qualifier for qualifier in qualifiers}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for join in q.join_predicates:
        left, right = resolve(join.left), resolve(join.right)
        if left is None or right is None:
            continue
        if left.qualifier == right.qualifier:
            report.add('join_within_table', f'join predicate {left.key} = {right.key} compares one table with itself')
            continue
        if left.is_numeric != right.is_numeric:
            report.add('type_mismatch', f'join {left.key} ({left.value_type}) = {right.key} ({right.value_type})')
        if not catalog.is_fk_edge(left.table, left.column, right.table, right.column):
            report.add(
                'non_fk_join',
                f'join {left.key} = {right.key} does not follow a foreign key',
                WARNING
            )
        if left.qualifier in parent and right.qualifier in parent:
            parent[find(left.qualifier)] = find(right.qualifier)

    if len(qualifiers) > 1 and all(q_ in parent for q_ in qualifiers):
        roots = {find(qualifier) for qualifier in qualifiers}
        if len(roots) > 1:
            report.add('disconnected_join', f'join graph over {", ".join(qualifiers)} is not connected')


def _validate_subquery(atom: InSubquery, resolved, catalog, report, is_subquery):
    if is_subquery:
        report.add('subquery_depth', 'IN-subquery nested deeper than one level')
        return
    sub = atom.query
    if len(sub.projections) != 1 or not isinstance(sub.projections[0].expr, ColumnRef):
        report.add('subquery_projection', 'IN-subquery must project exactly one column')
    else:
        sub_scope = QueryScope(sub, catalog)
        try:
            inner = sub_scope.resolve(sub.projections[0].expr)
            if inner.is_numeric != resolved.is_numeric:
                report.add('type_mismatch', f'{resolved.key} ({resolved.value_type}) IN subquery over {inner.key} ({inner.value_type})')
        except ScopeError:
            pass  # reported by the subquery pass below
    _validate_level(sub, catalog, report, is_subquery=True)


# ==================== QUALIFICATION ====================

def qualify_query(q: QueryAst, catalog: SchemaCatalog) -> QueryAst:
    """
    Copy of a valid query with every column reference qualified

    Raises:
        ScopeError: a column does not resolve
    """
    scope = QueryScope(q, catalog)

    def qualify(ref: Optional[ColumnRef]) -> Optional[ColumnRef]:
        if ref is None:
            return None
        resolved = scope.resolve(ref)
        return ColumnRef(resolved.column, resolved.qualifier)

    def qualify_atom(atom):
        if isinstance(atom, InSubquery):
            return InSubquery(qualify(atom.column), qualify_query(atom.query, catalog))
        return type(atom)(qualify(atom.column), *_atom_payload(atom))

    projections = []
    for projection in q.projections:
        expr = projection.expr
        if isinstance(expr, ColumnRef):
            expr = qualify(expr)
        elif isinstance(expr, AggregateCall):
            expr = AggregateCall(expr.function, qualify(expr.argument))
        projections.append(type(projection)(expr, projection.alias))

    return q.replace(
        projections=tuple(projections),
        join_predicates=tuple(JoinPredicate(qualify(j.left), qualify(j.right)) for j in q.join_predicates),
        where=map_atoms(q.where, qualify_atom),
        group_by=tuple(qualify(c) for c in q.group_by),
    )


def _atom_payload(atom) -> tuple:
    if isinstance(atom, Comparison):
        return (atom.op, atom.value)
    if isinstance(atom, Between):
        return (atom.low, atom.high)
    if isinstance(atom, InList):
        return (atom.values,)
    raise TypeError(f'unexpected atom {atom!r}')


def resolved_columns(q: QueryAst, catalog: SchemaCatalog) -> List[ResolvedColumn]:
    """Every resolvable column reference of q and its subqueries"""
    scope = QueryScope(q, catalog)
    found = []

    def add(ref):
        try:
            found.append(scope.resolve(ref))
        except ScopeError:
            pass

    for projection in q.projections:
        if isinstance(projection.expr, ColumnRef):
            add(projection.expr)
        elif isinstance(projection.expr, AggregateCall) and projection.expr.argument is not None:
            add(projection.expr.argument)
    for join in q.join_predicates:
        add(join.left)
        add(join.right)
    stack = [q.where] if q.where is not None else []
    while stack:
        node = stack.pop()
        if isinstance(node, (And, Or)):
            stack.extend(node.children)
            continue
        add(node.column)
        if isinstance(node, InSubquery):
            found.extend(resolved_columns(node.query, catalog))
    for ref in q.group_by:
        add(ref)
    return found
