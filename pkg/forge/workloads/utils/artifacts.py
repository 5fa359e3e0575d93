"""
Run artifacts
Atomic CSV/JSON writers with seed headers, readers and named sub-seeds
"""
import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..exceptions import MissingArtifactError, SqlSyntaxError, UnsupportedConstructError
from .sql_ast import QueryAst, query_from_dict
from .sql_parser import parse_sql, split_statements

logger = logging.getLogger(__name__)

SEED_HEADER = '# forge seed='

STATISTICS_FILE = 'statistics.json'
QUERIES_CSV = 'queries.csv'
QUERIES_JSON = 'queries.json'
REJECTED_CSV = 'rejected.csv'
LABELS_CSV = 'labels.csv'
LABELS_JSON = 'labels.json'
LABEL_FAILURES_CSV = 'label_failures.csv'
PLANS_CSV = 'plans.csv'
REPORTS_DIR = 'reports'
TRANSCRIPT_DIR = 'transcript'
RUN_LOG = 'run.log'


def derive_seed(seed: int, name: str) -> int:
    """Named sub-seed, independent of how much randomness other stages consume"""
    digest = hashlib.sha256(f'{int(seed)}:{name}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'big')


def atomic_write_text(path, text: str) -> Path:
    """Write to a temp file beside path, then rename over it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    return path


def write_csv(path, rows: Sequence[dict], columns: List[str], seed: int) -> Path:
    buffer = io.StringIO()
    buffer.write(f'{SEED_HEADER}{seed}\n')
    pd.DataFrame(list(rows), columns=columns).to_csv(buffer, index=False, lineterminator='\n')
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path, stage: Optional[str] = None) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(path, stage)
    return pd.read_csv(path, skiprows=1, dtype=str, keep_default_na=False)


def read_seed(path) -> Optional[int]:
    """Seed recorded in a CSV header line or a JSON artifact"""
    path = Path(path)
    if path.suffix == '.json':
        return json.loads(path.read_text(encoding='utf-8')).get('seed')
    with path.open(encoding='utf-8') as handle:
        first = handle.readline().strip()
    return int(first[len(SEED_HEADER):]) if first.startswith(SEED_HEADER) else None


def write_json(path, payload: dict, seed: int) -> Path:
    document = {'seed': seed}
    document.update(payload)
    return atomic_write_text(path, json.dumps(document, indent=2, default=str) + '\n')


def read_json(path, stage: Optional[str] = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(path, stage)
    return json.loads(path.read_text(encoding='utf-8'))


def write_text(path, text: str) -> Path:
    return atomic_write_text(path, text)


# ==================== QUERY FILES ====================

def read_queries(path) -> Tuple[List[str], List[QueryAst], List[Tuple[str, str, str]]]:
    """
    Queries from a queries.json/queries.csv artifact or a hand-written .sql file

    Returns:
        (ids, queries, unparseable) where unparseable holds (id, sql, reason)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(path, 'generate')

    ids, queries, bad = [], [], []
    if path.suffix == '.json':
        for item in read_json(path)['queries']:
            ids.append(item['query_id'])
            queries.append(query_from_dict(item['ast']))
        return ids, queries, bad

    if path.suffix == '.csv':
        frame = read_csv(path, 'generate')
        pairs = list(zip(frame['query_id'], frame['sql']))
    else:
        pairs = [(f'q{i:05d}', sql) for i, sql in enumerate(split_statements(path.read_text(encoding='utf-8')))]

    for query_id, sql in pairs:
        try:
            queries.append(parse_sql(sql))
            ids.append(query_id)
        except (SqlSyntaxError, UnsupportedConstructError) as e:
            bad.append((query_id, sql, str(e)))
    if bad:
        logger.warning(f'{len(bad)} statements in {path} could not be parsed')
    return ids, queries, bad


def output_paths(out_dir) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    return {
        'statistics': out_dir / STATISTICS_FILE,
        'queries_csv': out_dir / QUERIES_CSV,
        'queries_json': out_dir / QUERIES_JSON,
        'rejected': out_dir / REJECTED_CSV,
        'labels_csv': out_dir / LABELS_CSV,
        'labels_json': out_dir / LABELS_JSON,
        'label_failures': out_dir / LABEL_FAILURES_CSV,
        'plans': out_dir / PLANS_CSV,
        'reports': out_dir / REPORTS_DIR,
        'transcript': out_dir / TRANSCRIPT_DIR,
        'run_log': out_dir / RUN_LOG,
    }
