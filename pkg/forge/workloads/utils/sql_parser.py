"""
SQL parser for the supported subset
sqlparse lexes the text; a recursive-descent pass builds the QueryAst.
Constructs outside the subset are rejected by name, never dropped.
"""
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

import sqlparse
from sqlparse import tokens as T
from sqlparse.lexer import tokenize

from ..exceptions import SqlSyntaxError, UnsupportedConstructError
from .sql_ast import (
    AGGREGATE_FUNCTIONS, AggregateCall, And, Between, ColumnRef, Comparison,
    InList, InSubquery, JoinPredicate, Or, Projection, QueryAst, Star, TableRef,
    atoms, conjoin, conjuncts, disjoin,
)

MAX_SUBQUERY_DEPTH = 1

# Words that end an identifier position (never taken as an alias)
RESERVED = {
    'SELECT', 'FROM', 'WHERE', 'GROUP BY', 'ORDER BY', 'HAVING', 'LIMIT', 'OFFSET',
    'AND', 'OR', 'NOT', 'AS', 'ON', 'IN', 'BETWEEN', 'IS', 'NULL', 'LIKE', 'ILIKE',
    'UNION', 'UNION ALL', 'INTERSECT', 'EXCEPT', 'DISTINCT', 'EXISTS', 'USING',
    'WINDOW', 'FETCH', 'RETURNING',
}

# Clause keywords that are recognised but outside the subset
UNSUPPORTED_CLAUSES = {
    'ORDER BY': 'ORDER BY',
    'LIMIT': 'LIMIT',
    'OFFSET': 'OFFSET',
    'HAVING': 'HAVING',
    'UNION': 'UNION',
    'UNION ALL': 'UNION',
    'INTERSECT': 'INTERSECT',
    'EXCEPT': 'EXCEPT',
    'WINDOW': 'WINDOW',
    'FETCH': 'FETCH',
}

_FLIPPED = {'=': '=', '<>': '<>', '<': '>', '<=': '>=', '>': '<', '>=': '<='}


@dataclass(frozen=True)
class Token:
    kind: str      # word, quoted, int, float, string, punct, cmp, op, star
    value: str
    offset: int    # byte offset in the source text

    @property
    def upper(self) -> str:
        return ' '.join(self.value.upper().split())


@dataclass(frozen=True)
class _ColumnComparison:
    """column op column; only top-level '=' survives as a join predicate"""
    left: ColumnRef
    op: str
    right: ColumnRef
    offset: int


def lex(text: str) -> List[Token]:
    """Significant tokens with byte offsets"""
    result = []
    offset = 0
    for ttype, value in tokenize(text):
        start = offset
        offset += len(value.encode('utf-8'))
        if ttype in T.Whitespace or ttype in T.Newline or ttype in T.Comment:
            continue
        if ttype in T.Keyword or ttype in T.Name:
            kind = 'word'
        elif ttype in T.Literal.String.Symbol:
            kind = 'quoted'
        elif ttype in T.Literal.String:
            kind = 'string'
        elif ttype in T.Literal.Number.Integer:
            kind = 'int'
        elif ttype in T.Literal.Number.Float:
            kind = 'float'
        elif ttype in T.Wildcard:
            kind = 'star'
        elif ttype in T.Operator.Comparison:
            kind = 'cmp'
        elif ttype in T.Operator:
            kind = 'op'
        elif ttype in T.Punctuation:
            kind = 'punct'
        else:
            raise SqlSyntaxError(f'unexpected character {value!r}', start)
        result.append(Token(kind, value, start))
    return result


def split_statements(text: str) -> List[str]:
    """Split provider output into individual statements"""
    return [s.strip().rstrip(';').strip() for s in sqlparse.split(text) if s.strip().rstrip(';').strip()]


def parse_sql(text: str) -> QueryAst:
    """
    Parse one SELECT statement of the supported subset

    Args:
        text: SQL text, optionally terminated by ';'

    Returns:
        QueryAst
    """
    parser = _Parser(text)
    query = parser.parse_statement()
    return query


class _Parser:

    def __init__(self, text: str):
        self.text = text
        self.tokens = lex(text)
        self.pos = 0
        self.end_offset = len(text.encode('utf-8'))

    # ---------- token helpers ----------

    def peek(self, ahead: int = 0) -> Optional[Token]:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def offset(self) -> int:
        token = self.peek()
        return token.offset if token else self.end_offset

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise SqlSyntaxError('unexpected end of input', self.end_offset)
        self.pos += 1
        return token

    def at_word(self, *words) -> bool:
        token = self.peek()
        return token is not None and token.kind == 'word' and token.upper in words

    def at_punct(self, value: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == 'punct' and token.value == value

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise SqlSyntaxError(f'expected {word}', self.offset())
        return self.advance()

    def expect_punct(self, value: str) -> Token:
        if not self.at_punct(value):
            raise SqlSyntaxError(f'expected {value!r}', self.offset())
        return self.advance()

    def check_unsupported_word(self):
        token = self.peek()
        if token is None or token.kind != 'word':
            return
        word = token.upper
        if word in UNSUPPORTED_CLAUSES:
            raise UnsupportedConstructError(UNSUPPORTED_CLAUSES[word], token.offset)
        if word.endswith('JOIN') and word not in ('JOIN', 'INNER JOIN'):
            raise UnsupportedConstructError(word, token.offset)

    # ---------- statement ----------

    def parse_statement(self) -> QueryAst:
        if not self.tokens:
            raise SqlSyntaxError('empty statement', 0)
        query = self.parse_query(depth=0)
        if self.at_punct(';'):
            self.advance()
        if self.peek() is not None:
            self.check_unsupported_word()
            raise SqlSyntaxError(f'unexpected {self.peek().value!r}', self.offset())
        return query

    def parse_query(self, depth: int) -> QueryAst:
        self.expect_word('SELECT')
        if self.at_word('DISTINCT', 'ALL'):
            raise UnsupportedConstructError(self.peek().upper, self.offset())

        projections = [self.parse_projection()]
        while self.at_punct(','):
            self.advance()
            projections.append(self.parse_projection())

        self.check_unsupported_word()
        self.expect_word('FROM')
        from_tables, on_predicates = self.parse_from()

        where = None
        if self.at_word('WHERE'):
            self.advance()
            where = self.parse_predicate(depth)

        group_by = []
        self.check_unsupported_word()
        if self.at_word('GROUP BY'):
            self.advance()
            group_by.append(self.parse_column())
            while self.at_punct(','):
                self.advance()
                group_by.append(self.parse_column())
        self.check_unsupported_word()

        join_predicates, filters = self.split_join_predicates(conjoin(*on_predicates, where))
        return QueryAst(
            projections=tuple(projections),
            from_tables=tuple(from_tables),
            join_predicates=tuple(join_predicates),
            where=filters,
            group_by=tuple(group_by),
        )

    def split_join_predicates(self, predicate):
        joins = []
        filters = []
        for conjunct in conjuncts(predicate):
            if isinstance(conjunct, _ColumnComparison):
                if conjunct.op != '=':
                    raise UnsupportedConstructError('non-equality join predicate', conjunct.offset)
                joins.append(JoinPredicate(conjunct.left, conjunct.right))
            else:
                for atom in atoms(conjunct):
                    if isinstance(atom, _ColumnComparison):
                        raise UnsupportedConstructError('join predicate under OR', atom.offset)
                filters.append(conjunct)
        return joins, conjoin(*filters)

    # ---------- SELECT list ----------

    def parse_projection(self) -> Projection:
        token = self.peek()
        if token is None:
            raise SqlSyntaxError('expected a projection', self.end_offset)

        if token.kind == 'star':
            self.advance()
            expr = Star()
        elif token.kind == 'word' and self.peek(1) is not None and self.peek(1).value == '(':
            expr = self.parse_aggregate()
        else:
            expr = self.parse_column()

        alias = self.parse_alias()
        return Projection(expr, alias)

    def parse_aggregate(self) -> AggregateCall:
        name_token = self.advance()
        function = name_token.upper
        if function not in AGGREGATE_FUNCTIONS:
            label = f'aggregate {function}' if function in ('MIN', 'MAX') else f'function {function}'
            raise UnsupportedConstructError(label, name_token.offset)
        self.expect_punct('(')
        if self.at_word('DISTINCT'):
            raise UnsupportedConstructError(f'{function}(DISTINCT ...)', self.offset())
        if self.peek() is not None and self.peek().kind == 'star':
            if function != 'COUNT':
                raise SqlSyntaxError(f'{function}(*) is not valid', self.offset())
            self.advance()
            argument = None
        else:
            argument = self.parse_column()
        self.expect_punct(')')
        return AggregateCall(function, argument)

    def parse_alias(self) -> Optional[str]:
        if self.at_word('AS'):
            self.advance()
            return self.parse_identifier()
        token = self.peek()
        if token is not None and token.kind in ('word', 'quoted') and token.upper not in RESERVED \
                and not token.upper.endswith('JOIN'):
            return self.parse_identifier()
        return None

    # ---------- FROM ----------

    def parse_from(self) -> Tuple[List[TableRef], list]:
        tables = [self.parse_table_ref()]
        on_predicates = []
        while True:
            if self.at_punct(','):
                self.advance()
                tables.append(self.parse_table_ref())
                continue
            self.check_unsupported_word()
            if self.at_word('JOIN', 'INNER JOIN'):
                self.advance()
                tables.append(self.parse_table_ref())
                if self.at_word('USING'):
                    raise UnsupportedConstructError('JOIN USING', self.offset())
                self.expect_word('ON')
                on_predicates.append(self.parse_predicate(depth=0, allow_subquery=False))
                continue
            break
        return tables, on_predicates

    def parse_table_ref(self) -> TableRef:
        if self.at_punct('('):
            raise UnsupportedConstructError('subquery in FROM', self.offset())
        name = self.parse_identifier()
        if self.at_punct('.'):
            raise UnsupportedConstructError('schema-qualified table name', self.offset())
        alias = self.parse_alias()
        return TableRef(name, alias)

    # ---------- identifiers ----------

    def parse_identifier(self) -> str:
        token = self.peek()
        if token is None:
            raise SqlSyntaxError('expected an identifier', self.end_offset)
        if token.kind == 'quoted':
            self.advance()
            return token.value[1:-1].replace('""', '"').lower()
        if token.kind == 'word' and ' ' not in token.upper and token.upper not in RESERVED:
            if not re.fullmatch(r'[A-Za-z_][A-Za-z0-9_$]*', token.value):
                raise SqlSyntaxError(f'invalid identifier {token.value!r}', token.offset)
            self.advance()
            return token.value.lower()
        raise SqlSyntaxError(f'expected an identifier, got {token.value!r}', token.offset)

    def parse_column(self) -> ColumnRef:
        first = self.parse_identifier()
        if self.at_punct('.'):
            self.advance()
            if self.peek() is not None and self.peek().kind == 'star':
                raise UnsupportedConstructError('qualified star', self.offset())
            return ColumnRef(self.parse_identifier(), first)
        return ColumnRef(first)

    # ---------- predicates ----------

    def parse_predicate(self, depth: int, allow_subquery: bool = True):
        return self.parse_or(depth, allow_subquery)

    def parse_or(self, depth, allow_subquery):
        children = [self.parse_and(depth, allow_subquery)]
        while self.at_word('OR'):
            self.advance()
            children.append(self.parse_and(depth, allow_subquery))
        return disjoin(*children) if len(children) > 1 else children[0]

    def parse_and(self, depth, allow_subquery):
        children = [self.parse_unary(depth, allow_subquery)]
        while self.at_word('AND'):
            self.advance()
            children.append(self.parse_unary(depth, allow_subquery))
        if len(children) == 1:
            return children[0]
        # conjoin flattens (a AND b) AND c; column comparisons are kept as atoms
        flat = []
        for child in children:
            flat.extend(child.children if isinstance(child, And) else [child])
        return And(tuple(flat))

    def parse_unary(self, depth, allow_subquery):
        if self.at_word('NOT'):
            raise UnsupportedConstructError('NOT', self.offset())
        if self.at_word('EXISTS'):
            raise UnsupportedConstructError('EXISTS', self.offset())
        if self.at_punct('('):
            if self.peek(1) is not None and self.peek(1).kind == 'word' and self.peek(1).upper == 'SELECT':
                raise UnsupportedConstructError('scalar subquery', self.offset())
            self.advance()
            inner = self.parse_or(depth, allow_subquery)
            self.expect_punct(')')
            return inner
        return self.parse_atom(depth, allow_subquery)

    def parse_atom(self, depth, allow_subquery):
        start = self.offset()
        if self.peek_literal():
            value = self.parse_literal()
            op = self.parse_comparison_op()
            column = self.parse_column()
            return Comparison(column, _FLIPPED[op], value)

        column = self.parse_column()
        token = self.peek()
        if token is None:
            raise SqlSyntaxError('expected a comparison', self.end_offset)

        if token.kind == 'cmp':
            op = self.parse_comparison_op()
            if self.peek_literal():
                return Comparison(column, op, self.parse_literal())
            other = self.parse_column()
            return _ColumnComparison(column, op, other, start)

        if token.kind != 'word':
            raise SqlSyntaxError(f'unexpected {token.value!r}', token.offset)

        word = token.upper
        if word == 'BETWEEN':
            self.advance()
            low = self.parse_literal()
            self.expect_word('AND')
            high = self.parse_literal()
            return Between(column, low, high)
        if word == 'IN':
            self.advance()
            return self.parse_in(column, depth, allow_subquery)
        if word in ('IS', 'IS NOT'):
            raise UnsupportedConstructError('IS NULL', token.offset)
        if word.startswith('NOT'):
            raise UnsupportedConstructError(f'{word} predicate', token.offset)
        raise SqlSyntaxError(f'unexpected {token.value!r}', token.offset)

    def parse_in(self, column, depth, allow_subquery):
        self.expect_punct('(')
        if self.at_word('SELECT'):
            if not allow_subquery:
                raise UnsupportedConstructError('subquery in JOIN condition', self.offset())
            if depth + 1 > MAX_SUBQUERY_DEPTH:
                raise UnsupportedConstructError('IN-subquery nested deeper than one level', self.offset())
            sub = self.parse_query(depth + 1)
            self.expect_punct(')')
            return InSubquery(column, sub)
        values = [self.parse_literal()]
        while self.at_punct(','):
            self.advance()
            values.append(self.parse_literal())
        self.expect_punct(')')
        return InList(column, tuple(values))

    def parse_comparison_op(self) -> str:
        token = self.peek()
        if token is None or token.kind != 'cmp':
            raise SqlSyntaxError('expected a comparison operator', self.offset())
        op = token.value.upper()
        if op in ('LIKE', 'ILIKE', 'NOT LIKE', 'NOT ILIKE', 'RLIKE') or 'LIKE' in op:
            raise UnsupportedConstructError('LIKE', token.offset)
        if op == '!=':
            op = '<>'
        if op not in _FLIPPED:
            raise SqlSyntaxError(f'unknown comparison operator {token.value!r}', token.offset)
        self.advance()
        return op

    # ---------- literals ----------

    def peek_literal(self) -> bool:
        token = self.peek()
        if token is None:
            return False
        if token.kind in ('int', 'float', 'string'):
            return True
        nxt = self.peek(1)
        return token.kind == 'op' and token.value in ('-', '+') and nxt is not None \
            and nxt.kind in ('int', 'float')

    def parse_literal(self):
        token = self.advance()
        sign = 1
        if token.kind == 'op' and token.value in ('-', '+'):
            sign = -1 if token.value == '-' else 1
            token = self.advance()
        if token.kind == 'int':
            return sign * int(token.value)
        if token.kind == 'float':
            return sign * float(token.value)
        if token.kind == 'string' and sign == 1:
            if not token.value.startswith("'"):
                raise SqlSyntaxError('string literals use single quotes', token.offset)
            return token.value[1:-1].replace("''", "'")
        if token.kind == 'word' and token.upper == 'NULL':
            raise UnsupportedConstructError('NULL', token.offset)
        raise SqlSyntaxError(f'expected a literal, got {token.value!r}', token.offset)
