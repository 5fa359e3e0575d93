"""
Django settings for the workload forge
Synthetic SQL workloads, exact cardinality labels and cost-labeled plans
"""
import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-forge-local-only')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third party apps
    'rest_framework',

    # Local apps
    'workloads.apps.WorkloadsConfig',
]

# The forge keeps its data in memory; the database is only a Django requirement
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# ==================== FORGE ====================

# Bundled desk-scale schema
FORGE_FIXTURES_DIR = BASE_DIR / 'workloads' / 'fixtures'
FORGE_SCHEMA_FILE = FORGE_FIXTURES_DIR / 'imdb_lite' / 'schema.json'
FORGE_EXAMPLE_CONFIG = FORGE_FIXTURES_DIR / 'example_config.json'

# Intra-stage parallelism (overridden by --jobs)
FORGE_JOBS = int(os.getenv('FORGE_JOBS', 4))

FORGE_STATISTICS = {
    'SAMPLE_SIZE': int(os.getenv('FORGE_SAMPLE_SIZE', 1000)),
    'BUCKET_COUNT': int(os.getenv('FORGE_BUCKET_COUNT', 32)),
}

# Live provider speaks the OpenAI-compatible chat-completions protocol
FORGE_PROVIDER = {
    'KIND': os.getenv('FORGE_PROVIDER_KIND', 'MockGrammar'),
    'ENDPOINT': os.getenv('FORGE_PROVIDER_ENDPOINT', 'https://api.openai.com/v1'),
    'MODEL': os.getenv('FORGE_PROVIDER_MODEL', 'gpt-4o'),
    'TEMPERATURE': float(os.getenv('FORGE_PROVIDER_TEMPERATURE', 0.7)),
    'API_KEY_ENV': os.getenv('FORGE_PROVIDER_API_KEY_ENV', 'OPENAI_API_KEY'),
    'TIMEOUT': float(os.getenv('FORGE_PROVIDER_TIMEOUT', 60)),
    'MAX_RETRIES': int(os.getenv('FORGE_PROVIDER_MAX_RETRIES', 3)),
    'MAX_QUERIES_PER_CALL': int(os.getenv('FORGE_PROVIDER_MAX_QUERIES_PER_CALL', 20)),
    'PARALLELISM': int(os.getenv('FORGE_PROVIDER_PARALLELISM', 4)),
}

FORGE_COST_MODEL = {
    'io_page_cost': 1.0,
    'cpu_tuple_cost': 0.01,
    'index_lookup_cost': 0.5,
    'hash_build_factor': 1.2,
    'sort_factor': 2.0,
    'page_size_tuples': 100,
    'memory_budget_pages': 64,
}

FORGE_PLANNER = {
    'LIMIT': int(os.getenv('FORGE_PLAN_LIMIT', 1000)),
}

FORGE_LABELING = {
    'LOW_CONFIDENCE_MIN_MATCHES': 10,
    'MAX_UNIVERSE_SIZE': 2 ** 63 - 1,
}

FORGE_METRICS = {
    'MIN_BUCKET_SIZE': 20,
    'STUDY_COLUMNS': ['title.start_year'],
    'TIMING_SIZES': [10, 20, 30, 40, 50, 100],
}

# Context words the mock provider maps to columns it should focus on
FORGE_CONTEXT_HINTS = {
    'accountant': ['budget', 'revenue', 'duration', 'rating'],
    'casting': ['nr_order', 'role', 'birth_year'],
    'archivist': ['start_year', 'release_year', 'kind'],
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'bare': {
            'format': '{message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'workloads': {
            'handlers': ['console'],
            'level': os.getenv('FORGE_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
        'provider_calls': {
            'handlers': ['console'],
            'level': os.getenv('FORGE_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}

# Sentry (Error Tracking)
if os.getenv('SENTRY_DSN'):
    import sentry_sdk
    from sentry_sdk.integrations.django import DjangoIntegration

    sentry_sdk.init(
        dsn=os.getenv('SENTRY_DSN'),
        integrations=[DjangoIntegration()],
        traces_sample_rate=0.0,
        send_default_pii=False
    )
