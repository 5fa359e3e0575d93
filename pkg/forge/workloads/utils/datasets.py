"""
Bundled desk-scale IMDB-like dataset
Deterministic CSV data for the imdb_lite schema (seeded numpy + Faker)
"""
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd
from faker import Faker

logger = logging.getLogger(__name__)

# Row counts at scale 1.0; every table stays at or below 10,000 rows
BASE_ROWS = {
    'movies': 2000,
    'title': 2000,
    'persons': 3000,
    'cast_info': 10000,
    'companies': 300,
    'movie_companies': 4000,
    'keywords': 500,
    'movie_keyword': 6000,
}

GENRES = ['drama', 'comedy', 'action', 'thriller', 'horror', 'romance',
          'documentary', 'animation', 'crime', 'sci-fi', 'western', 'musical']
GENRE_WEIGHTS = [0.22, 0.18, 0.12, 0.1, 0.08, 0.08, 0.06, 0.05, 0.05, 0.03, 0.02, 0.01]
KINDS = ['movie', 'tv series', 'episode', 'video', 'short']
KIND_WEIGHTS = [0.45, 0.1, 0.3, 0.1, 0.05]
ROLES = ['actor', 'actress', 'director', 'producer', 'writer', 'composer', 'editor']
ROLE_WEIGHTS = [0.38, 0.3, 0.08, 0.08, 0.08, 0.04, 0.04]
COUNTRIES = ['us', 'gb', 'fr', 'de', 'in', 'jp', 'ng', 'ca']
COUNTRY_WEIGHTS = [0.4, 0.15, 0.1, 0.1, 0.1, 0.07, 0.05, 0.03]
COMPANY_TYPES = ['production', 'distribution', 'special effects', 'miscellaneous']
COMPANY_TYPE_WEIGHTS = [0.5, 0.3, 0.1, 0.1]


def _rows(table: str, scale: float) -> int:
    return max(2, int(round(BASE_ROWS[table] * scale)))


def _skewed_years(rng, n, lo, hi, dense_lo, dense_hi, dense_share):
    """Dense block of modern years plus a uniform tail; both extremes present"""
    dense = rng.random(n) < dense_share
    years = np.where(
        dense,
        rng.integers(dense_lo, dense_hi + 1, size=n),
        rng.integers(lo, hi + 1, size=n),
    )
    years[0], years[1] = lo, hi
    return years


def _popularity(rng, n, size, exponent=0.8):
    """Foreign-key draws with a Zipf-like skew over 1..n"""
    weights = 1.0 / np.arange(1, n + 1) ** exponent
    order = rng.permutation(n) + 1
    return order[rng.choice(n, size=size, p=weights / weights.sum())]


def build_imdb_lite(out_dir, seed: int = 7, scale: float = 1.0) -> Dict[str, int]:
    """
    Write the desk-scale dataset as one CSV per table

    Args:
        out_dir: Destination directory (created if missing)
        seed: Generator seed
        scale: Multiplier on the base row counts

    Returns:
        Mapping table -> rows written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    fake = Faker('en_US')
    fake.seed_instance(seed)

    n_movies = _rows('movies', scale)
    budgets = np.round(rng.lognormal(mean=9.5, sigma=1.0, size=n_movies)).astype(int) * 1000
    frames = {
        'movies': pd.DataFrame({
            'id': np.arange(1, n_movies + 1),
            'title': [fake.catch_phrase() for _ in range(n_movies)],
            'genre': rng.choice(GENRES, size=n_movies, p=GENRE_WEIGHTS),
            'release_year': _skewed_years(rng, n_movies, 1920, 2024, 1985, 2020, 0.8),
            'rating': np.round(np.clip(rng.normal(6.3, 1.3, size=n_movies), 1.0, 10.0), 1),
            'duration': np.clip(np.round(rng.normal(105, 20, size=n_movies)), 60, 240).astype(int),
            'budget': budgets,
            'revenue': np.round(budgets * rng.gamma(2.0, 1.2, size=n_movies)).astype(int),
        })
    }

    n_title = _rows('title', scale)
    movie_ids = rng.integers(1, n_movies + 1, size=n_title)
    kinds = rng.choice(KINDS, size=n_title, p=KIND_WEIGHTS)
    episode_of = np.where(kinds == 'episode', rng.integers(1, n_movies + 1, size=n_title), movie_ids)
    frames['title'] = pd.DataFrame({
        'id': np.arange(1, n_title + 1),
        'movie_id': movie_ids,
        'episode_of_id': episode_of,
        'kind': kinds,
        'start_year': _skewed_years(rng, n_title, 1900, 2025, 1990, 2020, 0.85),
        'runtime': np.clip(np.round(rng.normal(95, 30, size=n_title)), 5, 300).astype(int),
    })

    n_persons = _rows('persons', scale)
    frames['persons'] = pd.DataFrame({
        'id': np.arange(1, n_persons + 1),
        'name': [fake.name() for _ in range(n_persons)],
        'gender': rng.choice(['f', 'm', 'x'], size=n_persons, p=[0.46, 0.5, 0.04]),
        'birth_year': np.clip(np.round(rng.normal(1965, 18, size=n_persons)), 1890, 2010).astype(int),
    })

    n_cast = _rows('cast_info', scale)
    frames['cast_info'] = pd.DataFrame({
        'id': np.arange(1, n_cast + 1),
        'movie_id': _popularity(rng, n_movies, n_cast),
        'person_id': _popularity(rng, n_persons, n_cast, exponent=0.6),
        'role': rng.choice(ROLES, size=n_cast, p=ROLE_WEIGHTS),
        'nr_order': rng.integers(1, 31, size=n_cast),
    })

    n_companies = _rows('companies', scale)
    frames['companies'] = pd.DataFrame({
        'id': np.arange(1, n_companies + 1),
        'name': [fake.company() for _ in range(n_companies)],
        'country_code': rng.choice(COUNTRIES, size=n_companies, p=COUNTRY_WEIGHTS),
    })

    n_mc = _rows('movie_companies', scale)
    frames['movie_companies'] = pd.DataFrame({
        'id': np.arange(1, n_mc + 1),
        'movie_id': _popularity(rng, n_movies, n_mc, exponent=0.5),
        'company_id': _popularity(rng, n_companies, n_mc),
        'company_type': rng.choice(COMPANY_TYPES, size=n_mc, p=COMPANY_TYPE_WEIGHTS),
    })

    n_keywords = _rows('keywords', scale)
    frames['keywords'] = pd.DataFrame({
        'id': np.arange(1, n_keywords + 1),
        'keyword': [f'{fake.word()}-{fake.word()}' for _ in range(n_keywords)],
    })

    n_mk = _rows('movie_keyword', scale)
    frames['movie_keyword'] = pd.DataFrame({
        'id': np.arange(1, n_mk + 1),
        'movie_id': _popularity(rng, n_movies, n_mk, exponent=0.5),
        'keyword_id': _popularity(rng, n_keywords, n_mk, exponent=1.0),
    })

    written = {}
    for name, frame in frames.items():
        frame.to_csv(out_dir / f'{name}.csv', index=False)
        written[name] = len(frame)

    logger.info(f'imdb_lite written to {out_dir} (seed={seed}, scale={scale}): {written}')
    return written
