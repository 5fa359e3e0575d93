"""
SQL printer, canonical keys and skeletons
print_sql(parse_sql(s)) re-parses to an equal AST for every dialect
"""
from enum import Enum

import numpy as np

from .sql_ast import (
    AggregateCall, And, Between, ColumnRef, Comparison, InList, InSubquery,
    JoinPredicate, Or, Projection, QueryAst, Star, TableRef, conjuncts,
)


class Dialect(str, Enum):
    GENERIC = 'Generic'
    POSTGRES_LIKE = 'PostgresLike'


def format_literal(value) -> str:
    """SQL text of a constant; floats keep a decimal point and round-trip exactly"""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return np.format_float_positional(float(value), unique=True, trim='0')
    return "'" + str(value).replace("'", "''") + "'"


class _Printer:

    def __init__(self, dialect: Dialect):
        self.dialect = Dialect(dialect)

    def ident(self, name: str) -> str:
        if self.dialect == Dialect.POSTGRES_LIKE:
            return '"' + name.replace('"', '""') + '"'
        return name

    def column(self, ref: ColumnRef) -> str:
        if ref.qualifier:
            return f'{self.ident(ref.qualifier)}.{self.ident(ref.name)}'
        return self.ident(ref.name)

    def projection(self, projection: Projection) -> str:
        expr = projection.expr
        if isinstance(expr, Star):
            text = '*'
        elif isinstance(expr, AggregateCall):
            argument = '*' if expr.argument is None else self.column(expr.argument)
            text = f'{expr.function}({argument})'
        else:
            text = self.column(expr)
        if projection.alias:
            text += f' AS {self.ident(projection.alias)}'
        return text

    def table(self, ref: TableRef) -> str:
        if ref.alias:
            return f'{self.ident(ref.name)} {self.ident(ref.alias)}'
        return self.ident(ref.name)

    def join(self, predicate: JoinPredicate) -> str:
        return f'{self.column(predicate.left)} = {self.column(predicate.right)}'

    def predicate(self, node, nested: bool = False) -> str:
        if isinstance(node, And):
            text = ' AND '.join(self.predicate(child, nested=True) for child in node.children)
            return f'({text})' if nested else text
        if isinstance(node, Or):
            text = ' OR '.join(self.predicate(child, nested=True) for child in node.children)
            return f'({text})' if nested else text
        if isinstance(node, Comparison):
            return f'{self.column(node.column)} {node.op} {format_literal(node.value)}'
        if isinstance(node, Between):
            return (f'{self.column(node.column)} BETWEEN '
                    f'{format_literal(node.low)} AND {format_literal(node.high)}')
        if isinstance(node, InList):
            values = ', '.join(format_literal(v) for v in node.values)
            return f'{self.column(node.column)} IN ({values})'
        if isinstance(node, InSubquery):
            return f'{self.column(node.column)} IN ({self.query(node.query)})'
        raise TypeError(f'not a predicate node: {node!r}')

    def query(self, q: QueryAst) -> str:
        parts = [
            'SELECT ' + ', '.join(self.projection(p) for p in q.projections),
            'FROM ' + ', '.join(self.table(t) for t in q.from_tables),
        ]
        terms = [self.join(j) for j in q.join_predicates]
        filters = conjuncts(q.where)
        if terms or len(filters) > 1:
            terms.extend(self.predicate(f, nested=True) for f in filters)
        elif filters:
            terms.append(self.predicate(filters[0]))
        if terms:
            parts.append('WHERE ' + ' AND '.join(terms))
        if q.group_by:
            parts.append('GROUP BY ' + ', '.join(self.column(c) for c in q.group_by))
        return ' '.join(parts)


def print_sql(q: QueryAst, dialect: Dialect = Dialect.GENERIC) -> str:
    """Render q as SQL text in the given dialect"""
    return _Printer(dialect).query(q)


# ==================== NORMAL FORM ====================

def _sort_key(value) -> tuple:
    if isinstance(value, str):
        return (1, 0.0, value)
    return (0, float(value), '')


def _normalize_predicate(node, dedupe: bool):
    if isinstance(node, (And, Or)):
        children = [_normalize_predicate(child, dedupe) for child in node.children]
        children.sort(key=print_sql_fragment)
        return type(node)(tuple(children))
    if isinstance(node, InList):
        values = set(node.values) if dedupe else node.values
        return InList(node.column, tuple(sorted(values, key=_sort_key)))
    if isinstance(node, InSubquery):
        return InSubquery(node.column, normalize(node.query, dedupe))
    return node


def _normalize_join(predicate: JoinPredicate) -> JoinPredicate:
    left, right = predicate.left, predicate.right
    if str(right) < str(left):
        left, right = right, left
    return JoinPredicate(left, right)


def normalize(q: QueryAst, dedupe: bool = True) -> QueryAst:
    """
    Order-insensitive normal form: sorted FROM list, join predicates,
    AND/OR operands, IN-list values and GROUP BY columns
    """
    joins = sorted({_normalize_join(j) for j in q.join_predicates}, key=lambda j: (str(j.left), str(j.right)))
    return q.replace(
        from_tables=tuple(sorted(q.from_tables, key=lambda t: (t.name, t.qualifier))),
        join_predicates=tuple(joins),
        where=_normalize_predicate(q.where, dedupe) if q.where is not None else None,
        group_by=tuple(sorted(q.group_by, key=str)),
    )


def print_sql_fragment(node) -> str:
    return _Printer(Dialect.GENERIC).predicate(node, nested=True)


def canonical_key(q: QueryAst) -> str:
    """Equal for queries that differ only in the order of commutative parts"""
    return print_sql(normalize(q))


# ==================== SKELETON ====================

_PLACEHOLDER = '?'


def _strip_constants(node):
    if isinstance(node, (And, Or)):
        return type(node)(tuple(_strip_constants(child) for child in node.children))
    if isinstance(node, Comparison):
        return Comparison(node.column, node.op, _PLACEHOLDER)
    if isinstance(node, Between):
        return Between(node.column, _PLACEHOLDER, _PLACEHOLDER)
    if isinstance(node, InList):
        return InList(node.column, (_PLACEHOLDER,))
    if isinstance(node, InSubquery):
        return InSubquery(node.column, _skeleton_ast(node.query))
    return node


def _skeleton_ast(q: QueryAst) -> QueryAst:
    return q.replace(where=_strip_constants(q.where) if q.where is not None else None)


def skeleton(q: QueryAst) -> str:
    """Canonical text with every constant replaced by '?'"""
    text = print_sql(normalize(_skeleton_ast(q), dedupe=False))
    return text.replace("'?'", '?')
