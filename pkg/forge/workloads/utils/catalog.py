"""
Schema catalog and desk-scale table data
Loads the JSON schema document and one CSV file per table
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from ..exceptions import DataLoadError, SchemaError

logger = logging.getLogger(__name__)

VALUE_TYPES = ('integer', 'decimal', 'text')
NUMERIC_TYPES = ('integer', 'decimal')

_VALUE_PATTERNS = {
    'integer': r'[+-]?\d+',
    'decimal': r'[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?',
}


@dataclass(frozen=True)
class ColumnDef:
    name: str
    value_type: str

    @property
    def is_numeric(self) -> bool:
        return self.value_type in NUMERIC_TYPES


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: Tuple[ColumnDef, ...]
    primary_key: str
    indexes: Tuple[str, ...] = ()

    def column(self, name: str) -> Optional[ColumnDef]:
        name = name.lower()
        for column in self.columns:
            if column.name == name:
                return column
        return None

    @property
    def column_names(self) -> List[str]:
        return [column.name for column in self.columns]

    @property
    def indexed_columns(self) -> Tuple[str, ...]:
        """Primary key first, then declared secondary indexes"""
        extra = tuple(c for c in self.indexes if c != self.primary_key)
        return (self.primary_key,) + extra


@dataclass(frozen=True)
class ForeignKey:
    child_table: str
    child_column: str
    parent_table: str
    parent_column: str

    def links(self, table_a: str, column_a: str, table_b: str, column_b: str) -> bool:
        """True when (a, b) is this edge in either direction"""
        forward = (self.child_table, self.child_column, self.parent_table, self.parent_column)
        return (table_a, column_a, table_b, column_b) in (
            forward,
            (forward[2], forward[3], forward[0], forward[1]),
        )

    def __str__(self):
        return f'{self.child_table}.{self.child_column} -> {self.parent_table}.{self.parent_column}'


@dataclass(frozen=True)
class SchemaCatalog:
    tables: Tuple[TableDef, ...]
    foreign_keys: Tuple[ForeignKey, ...] = ()
    _by_name: Dict[str, TableDef] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._by_name.update({table.name: table for table in self.tables})

    def table(self, name: str) -> Optional[TableDef]:
        return self._by_name.get(name.lower())

    @property
    def table_names(self) -> List[str]:
        return [table.name for table in self.tables]

    @property
    def total_columns(self) -> int:
        return sum(len(table.columns) for table in self.tables)

    def column_type(self, table: str, column: str) -> Optional[str]:
        table_def = self.table(table)
        column_def = table_def.column(column) if table_def else None
        return column_def.value_type if column_def else None

    def is_fk_edge(self, table_a: str, column_a: str, table_b: str, column_b: str) -> bool:
        return any(fk.links(table_a, column_a, table_b, column_b) for fk in self.foreign_keys)

    def edges_between(self, table_a: str, table_b: str) -> List[ForeignKey]:
        """Foreign keys joining the two tables, in declaration order"""
        pair = {table_a, table_b}
        return [
            fk for fk in self.foreign_keys
            if {fk.child_table, fk.parent_table} == pair
            and (table_a != table_b or fk.child_table == fk.parent_table)
        ]

    def to_dict(self) -> dict:
        return {
            'tables': [
                {
                    'name': table.name,
                    'columns': [
                        {'name': c.name, 'type': c.value_type} for c in table.columns
                    ],
                    'primary_key': table.primary_key,
                    'indexes': list(table.indexes),
                }
                for table in self.tables
            ],
            'foreign_keys': [
                {
                    'from': f'{fk.child_table}.{fk.child_column}',
                    'to': f'{fk.parent_table}.{fk.parent_column}',
                }
                for fk in self.foreign_keys
            ],
        }


@dataclass(frozen=True)
class TableData:
    """Typed columnar rows of one table; treated as read-only after load"""
    table: str
    frame: pd.DataFrame = field(compare=False, repr=False)

    @property
    def row_count(self) -> int:
        return len(self.frame)

    def values(self, column: str):
        return self.frame[column].to_numpy()


# ==================== SCHEMA LOADING ====================

def load_catalog(schema_file) -> SchemaCatalog:
    """
    Load and validate a schema document

    Args:
        schema_file: Path to the JSON schema document

    Returns:
        Validated SchemaCatalog
    """
    path = Path(schema_file)
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise SchemaError('schema file not found', location=str(path))
    except json.JSONDecodeError as e:
        raise SchemaError(f'parse error: {e.msg}', location=f'{path}:{e.lineno}:{e.colno}')

    catalog = catalog_from_dict(document)
    logger.info(
        f'Catalog loaded from {path}: {len(catalog.tables)} tables, '
        f'{len(catalog.foreign_keys)} foreign keys'
    )
    return catalog


def catalog_from_dict(document: dict) -> SchemaCatalog:
    """Build a catalog from an already-decoded schema document"""
    if not isinstance(document, dict):
        raise SchemaError('schema document must be an object', location='$')

    raw_tables = document.get('tables') or []
    if not raw_tables:
        raise SchemaError('no tables', location='tables')

    tables = []
    seen_tables = set()
    for t_index, raw in enumerate(raw_tables):
        location = f'tables[{t_index}]'
        name = str(raw.get('name', '')).strip().lower()
        if not name:
            raise SchemaError('table without a name', location=location)
        if name in seen_tables:
            raise SchemaError(f'duplicate table {name!r}', location=location)
        seen_tables.add(name)

        raw_columns = raw.get('columns') or []
        if not raw_columns:
            raise SchemaError(f'table {name!r} has no columns', location=f'{location}.columns')

        columns = []
        seen_columns = set()
        for c_index, raw_column in enumerate(raw_columns):
            c_location = f'{location}.columns[{c_index}]'
            c_name = str(raw_column.get('name', '')).strip().lower()
            c_type = str(raw_column.get('type', '')).strip().lower()
            if not c_name:
                raise SchemaError('column without a name', location=c_location)
            if c_name in seen_columns:
                raise SchemaError(f'duplicate column {name}.{c_name}', location=c_location)
            if c_type not in VALUE_TYPES:
                raise SchemaError(
                    f'unknown value type {c_type!r} (expected one of {", ".join(VALUE_TYPES)})',
                    location=c_location
                )
            seen_columns.add(c_name)
            columns.append(ColumnDef(c_name, c_type))

        primary_key = str(raw.get('primary_key', '')).strip().lower()
        if primary_key not in seen_columns:
            raise SchemaError(
                f'primary key {primary_key!r} is not a column of {name!r}',
                location=f'{location}.primary_key'
            )

        indexes = []
        for i_index, raw_index in enumerate(raw.get('indexes') or []):
            column = str(raw_index).strip().lower()
            if column not in seen_columns:
                raise SchemaError(
                    f'index on unknown column {name}.{column}',
                    location=f'{location}.indexes[{i_index}]'
                )
            if column not in indexes and column != primary_key:
                indexes.append(column)

        tables.append(TableDef(name, tuple(columns), primary_key, tuple(indexes)))

    catalog = SchemaCatalog(tuple(tables))
    foreign_keys = []
    for f_index, raw_fk in enumerate(document.get('foreign_keys') or []):
        location = f'foreign_keys[{f_index}]'
        child = _split_column_ref(raw_fk.get('from'), location + '.from')
        parent = _split_column_ref(raw_fk.get('to'), location + '.to')

        for side, (table, column) in (('from', child), ('to', parent)):
            if catalog.table(table) is None:
                raise SchemaError(f'dangling foreign key: no table {table!r}', location=f'{location}.{side}')
            if catalog.table(table).column(column) is None:
                raise SchemaError(
                    f'dangling foreign key: no column {table}.{column}',
                    location=f'{location}.{side}'
                )

        child_type = catalog.column_type(*child)
        parent_type = catalog.column_type(*parent)
        if child_type != parent_type:
            raise SchemaError(
                f'foreign key type mismatch: {child_type} vs {parent_type}',
                location=location
            )
        foreign_keys.append(ForeignKey(child[0], child[1], parent[0], parent[1]))

    return SchemaCatalog(tuple(tables), tuple(foreign_keys))


def _split_column_ref(raw, location) -> Tuple[str, str]:
    text = str(raw or '').strip().lower()
    if text.count('.') != 1:
        raise SchemaError(f'expected "table.column", got {raw!r}', location=location)
    table, column = text.split('.')
    return table, column


# ==================== DATA LOADING ====================

def load_table_data(catalog: SchemaCatalog, data_dir) -> Dict[str, TableData]:
    """
    Load one <table>.csv per catalog table

    Args:
        catalog: Validated schema catalog
        data_dir: Directory holding the CSV files

    Returns:
        Mapping table name -> TableData
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataLoadError(f'data directory not found: {data_dir}')

    loaded = {}
    for table in catalog.tables:
        loaded[table.name] = load_table_file(table, data_dir / f'{table.name}.csv')

    logger.info(
        f'Loaded {len(loaded)} tables from {data_dir}: '
        + ', '.join(f'{name}={data.row_count}' for name, data in loaded.items())
    )
    return loaded


def load_table_file(table: TableDef, path: Path) -> TableData:
    """Read and type one table's CSV file"""
    if not path.is_file():
        raise DataLoadError(f'missing data file for table {table.name}: {path}', table=table.name)

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    except pd.errors.EmptyDataError:
        raise DataLoadError(f'{path}: file is empty (header row required)', table=table.name)
    except pd.errors.ParserError as e:
        raise DataLoadError(f'{path}: ragged rows ({e})', table=table.name)

    header = [str(c).strip().lower() for c in raw.columns]
    raw.columns = header
    expected = table.column_names
    if sorted(header) != sorted(expected):
        raise DataLoadError(
            f'{path}: header {header} does not match columns {expected}',
            table=table.name
        )

    missing = raw.isna().any(axis=1)
    if missing.any():
        row = int(missing.to_numpy().nonzero()[0][0])
        raise DataLoadError(f'{path}: ragged row {row} (too few fields)', table=table.name, row=row)

    typed = {}
    for column in table.columns:
        series = raw[column.name].str.strip()
        if column.value_type == 'text':
            typed[column.name] = series.astype(object)
            continue

        ok = series.str.fullmatch(_VALUE_PATTERNS[column.value_type])
        if not ok.all():
            row = int((~ok).to_numpy().nonzero()[0][0])
            raise DataLoadError(
                f'{path}: row {row}, column {column.name}: '
                f'{series.iloc[row]!r} is not {column.value_type}',
                table=table.name, row=row, column=column.name
            )
        dtype = 'int64' if column.value_type == 'integer' else 'float64'
        typed[column.name] = series.astype(dtype)

    frame = pd.DataFrame(typed, columns=expected)
    return TableData(table.name, frame)
