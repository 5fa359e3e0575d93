"""
SQL-subset abstract syntax tree
SELECT-FROM-WHERE-GROUP BY with inner equi-joins and one level of IN-subquery
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple, Union

Literal = Union[int, float, str]

AGGREGATE_FUNCTIONS = ('COUNT', 'SUM', 'AVG')
COMPARISON_OPS = ('=', '<>', '<', '<=', '>', '>=')
RANGE_OPS = ('<', '<=', '>', '>=')


class QueryCategory(str, Enum):
    SIMPLE_SELECTION = 'SimpleSelection'
    COMPLEX_JOIN = 'ComplexJoin'
    AGGREGATION = 'Aggregation'


class PredicateKind(str, Enum):
    NONE = 'none'
    EQUALITY = 'equality'
    RANGE = 'range'
    BETWEEN = 'between'
    IN_LIST = 'in_list'
    SUBQUERY = 'subquery'
    MIXED = 'mixed'


@dataclass(frozen=True)
class ColumnRef:
    name: str
    qualifier: Optional[str] = None

    def __str__(self):
        return f'{self.qualifier}.{self.name}' if self.qualifier else self.name


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class AggregateCall:
    function: str
    argument: Optional[ColumnRef] = None  # None means COUNT(*)


@dataclass(frozen=True)
class Projection:
    expr: Union[ColumnRef, AggregateCall, Star]
    alias: Optional[str] = None


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: Optional[str] = None

    @property
    def qualifier(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class JoinPredicate:
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class Comparison:
    column: ColumnRef
    op: str
    value: Literal


@dataclass(frozen=True)
class Between:
    column: ColumnRef
    low: Literal
    high: Literal


@dataclass(frozen=True)
class InList:
    column: ColumnRef
    values: Tuple[Literal, ...]


@dataclass(frozen=True)
class InSubquery:
    column: ColumnRef
    query: 'QueryAst'


@dataclass(frozen=True)
class And:
    children: Tuple['Predicate', ...]


@dataclass(frozen=True)
class Or:
    children: Tuple['Predicate', ...]


Atom = Union[Comparison, Between, InList, InSubquery]
Predicate = Union[Atom, And, Or]


@dataclass(frozen=True)
class QueryAst:
    projections: Tuple[Projection, ...]
    from_tables: Tuple[TableRef, ...]
    join_predicates: Tuple[JoinPredicate, ...] = ()
    where: Optional[Predicate] = None
    group_by: Tuple[ColumnRef, ...] = ()

    @property
    def qualifiers(self) -> List[str]:
        return [ref.qualifier for ref in self.from_tables]

    def ref(self, qualifier: str) -> Optional[TableRef]:
        for ref in self.from_tables:
            if ref.qualifier == qualifier:
                return ref
        return None

    @property
    def has_aggregate(self) -> bool:
        return any(isinstance(p.expr, AggregateCall) for p in self.projections)

    @property
    def is_aggregation(self) -> bool:
        return bool(self.group_by) or self.has_aggregate

    def replace(self, **changes) -> 'QueryAst':
        fields = {
            'projections': self.projections,
            'from_tables': self.from_tables,
            'join_predicates': self.join_predicates,
            'where': self.where,
            'group_by': self.group_by,
        }
        fields.update(changes)
        return QueryAst(**fields)


# ==================== PREDICATE HELPERS ====================

def conjoin(*predicates) -> Optional[Predicate]:
    """AND of the given predicates, flattened; None when empty"""
    children = []
    for predicate in predicates:
        if predicate is None:
            continue
        if isinstance(predicate, And):
            children.extend(predicate.children)
        else:
            children.append(predicate)
    if not children:
        return None
    if len(children) == 1:
        return children[0]
    return And(tuple(children))


def disjoin(*predicates) -> Optional[Predicate]:
    """OR of the given predicates, flattened; None when empty"""
    children = []
    for predicate in predicates:
        if predicate is None:
            continue
        if isinstance(predicate, Or):
            children.extend(predicate.children)
        else:
            children.append(predicate)
    if not children:
        return None
    if len(children) == 1:
        return children[0]
    return Or(tuple(children))


def conjuncts(predicate: Optional[Predicate]) -> List[Predicate]:
    if predicate is None:
        return []
    if isinstance(predicate, And):
        return list(predicate.children)
    return [predicate]


def atoms(predicate: Optional[Predicate]) -> Iterator[Atom]:
    """Atoms of a predicate tree, left to right (subquery bodies not entered)"""
    if predicate is None:
        return
    if isinstance(predicate, (And, Or)):
        for child in predicate.children:
            yield from atoms(child)
    else:
        yield predicate


def atom_columns(predicate: Optional[Predicate]) -> List[ColumnRef]:
    return [atom.column for atom in atoms(predicate)]


def subqueries(q: QueryAst) -> List[QueryAst]:
    return [atom.query for atom in atoms(q.where) if isinstance(atom, InSubquery)]


def referenced_tables(q: QueryAst) -> List[str]:
    """Base table names of q and its subqueries"""
    names = [ref.name for ref in q.from_tables]
    for sub in subqueries(q):
        names.extend(referenced_tables(sub))
    return names


def atom_kind(atom: Atom) -> PredicateKind:
    if isinstance(atom, InSubquery):
        return PredicateKind.SUBQUERY
    if isinstance(atom, InList):
        return PredicateKind.IN_LIST
    if isinstance(atom, Between):
        return PredicateKind.BETWEEN
    if atom.op == '=':
        return PredicateKind.EQUALITY
    return PredicateKind.RANGE


def predicate_kind(q: QueryAst) -> PredicateKind:
    kinds = {atom_kind(atom) for atom in atoms(q.where)}
    if not kinds:
        return PredicateKind.NONE
    if PredicateKind.SUBQUERY in kinds:
        return PredicateKind.SUBQUERY
    if len(kinds) == 1:
        return kinds.pop()
    return PredicateKind.MIXED


def classify(q: QueryAst) -> QueryCategory:
    """Aggregation wins over ComplexJoin when both apply"""
    if q.is_aggregation:
        return QueryCategory.AGGREGATION
    if len(q.from_tables) >= 2:
        return QueryCategory.COMPLEX_JOIN
    return QueryCategory.SIMPLE_SELECTION


def map_atoms(predicate: Optional[Predicate], fn) -> Optional[Predicate]:
    """Rebuild a predicate tree with fn applied to every atom"""
    if predicate is None:
        return None
    if isinstance(predicate, And):
        return conjoin(*(map_atoms(child, fn) for child in predicate.children))
    if isinstance(predicate, Or):
        return disjoin(*(map_atoms(child, fn) for child in predicate.children))
    return fn(predicate)


# ==================== JSON FORM ====================

def _column_to_dict(ref: Optional[ColumnRef]):
    if ref is None:
        return None
    return {'name': ref.name, 'qualifier': ref.qualifier}


def _column_from_dict(data) -> Optional[ColumnRef]:
    if data is None:
        return None
    return ColumnRef(data['name'], data.get('qualifier'))


def _predicate_to_dict(node) -> dict:
    if isinstance(node, (And, Or)):
        return {'type': type(node).__name__.lower(), 'children': [_predicate_to_dict(c) for c in node.children]}
    if isinstance(node, Comparison):
        return {'type': 'comparison', 'column': _column_to_dict(node.column), 'op': node.op, 'value': node.value}
    if isinstance(node, Between):
        return {'type': 'between', 'column': _column_to_dict(node.column), 'low': node.low, 'high': node.high}
    if isinstance(node, InList):
        return {'type': 'in_list', 'column': _column_to_dict(node.column), 'values': list(node.values)}
    return {'type': 'in_subquery', 'column': _column_to_dict(node.column), 'query': query_to_dict(node.query)}


def _predicate_from_dict(data):
    kind = data['type']
    if kind == 'and':
        return And(tuple(_predicate_from_dict(c) for c in data['children']))
    if kind == 'or':
        return Or(tuple(_predicate_from_dict(c) for c in data['children']))
    column = _column_from_dict(data['column'])
    if kind == 'comparison':
        return Comparison(column, data['op'], data['value'])
    if kind == 'between':
        return Between(column, data['low'], data['high'])
    if kind == 'in_list':
        return InList(column, tuple(data['values']))
    if kind == 'in_subquery':
        return InSubquery(column, query_from_dict(data['query']))
    raise ValueError(f'unknown predicate type {kind!r}')


def _projection_to_dict(projection: Projection) -> dict:
    expr = projection.expr
    if isinstance(expr, Star):
        out = {'type': 'star'}
    elif isinstance(expr, AggregateCall):
        out = {'type': 'aggregate', 'function': expr.function, 'argument': _column_to_dict(expr.argument)}
    else:
        out = {'type': 'column', 'column': _column_to_dict(expr)}
    out['alias'] = projection.alias
    return out


def _projection_from_dict(data) -> Projection:
    if data['type'] == 'star':
        expr = Star()
    elif data['type'] == 'aggregate':
        expr = AggregateCall(data['function'], _column_from_dict(data.get('argument')))
    else:
        expr = _column_from_dict(data['column'])
    return Projection(expr, data.get('alias'))


def query_to_dict(q: QueryAst) -> dict:
    """JSON-ready form of the AST"""
    return {
        'projections': [_projection_to_dict(p) for p in q.projections],
        'from_tables': [{'name': t.name, 'alias': t.alias} for t in q.from_tables],
        'join_predicates': [
            {'left': _column_to_dict(j.left), 'right': _column_to_dict(j.right)} for j in q.join_predicates
        ],
        'where': _predicate_to_dict(q.where) if q.where is not None else None,
        'group_by': [_column_to_dict(c) for c in q.group_by],
    }


def query_from_dict(data: dict) -> QueryAst:
    return QueryAst(
        projections=tuple(_projection_from_dict(p) for p in data['projections']),
        from_tables=tuple(TableRef(t['name'], t.get('alias')) for t in data['from_tables']),
        join_predicates=tuple(
            JoinPredicate(_column_from_dict(j['left']), _column_from_dict(j['right']))
            for j in data.get('join_predicates', [])
        ),
        where=_predicate_from_dict(data['where']) if data.get('where') is not None else None,
        group_by=tuple(_column_from_dict(c) for c in data.get('group_by', [])),
    )
