"""
Generation providers
Profiles, the provider interface and the live OpenAI-compatible chat-completions client
"""
import logging
import os
import re
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Optional, Tuple

import requests
from django.conf import settings

from .generation import GenerationRequest, Slot
from .sql_parser import split_statements

logger = logging.getLogger(__name__)

LIVE_HTTP = 'LiveHttp'
MOCK_GRAMMAR = 'MockGrammar'
PROVIDER_KINDS = (LIVE_HTTP, MOCK_GRAMMAR)

SYSTEM_PROMPT = 'You write SQL workloads for database benchmarking. Answer with SQL statements only.'

_FENCE = re.compile(r'```[a-zA-Z]*\s*\n?(.*?)```', re.DOTALL)


@dataclass(frozen=True)
class ProviderProfile:
    kind: str = MOCK_GRAMMAR
    endpoint: str = 'https://api.openai.com/v1'
    model: str = 'gpt-4o'
    temperature: float = 0.7
    api_key_env: str = 'OPENAI_API_KEY'
    timeout: float = 60.0
    max_retries: int = 3
    max_queries_per_call: int = 20
    parallelism: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f'unknown provider kind {self.kind!r}')
        if self.max_queries_per_call < 1:
            raise ValueError('max_queries_per_call must be >= 1')
        if self.max_retries < 1:
            raise ValueError('max_retries must be >= 1')
        if self.parallelism < 1:
            raise ValueError('parallelism must be >= 1')
        if self.timeout <= 0:
            raise ValueError('timeout must be > 0')

    @classmethod
    def from_settings(cls, **overrides) -> 'ProviderProfile':
        config = {key.lower(): value for key, value in getattr(settings, 'FORGE_PROVIDER', {}).items()}
        config.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in config.items() if k in known})

    @property
    def is_live(self) -> bool:
        return self.kind == LIVE_HTTP


@dataclass(frozen=True)
class ProviderCall:
    """One batch request to a provider"""
    prompt: str
    request: GenerationRequest
    count: int
    slots: Tuple[Slot, ...]
    call_index: int
    seed: int


@dataclass(frozen=True)
class ProviderResponse:
    ok: bool
    text: str = ''
    error: Optional[str] = None
    latency_ms: float = 0.0


def strip_code_fences(text: str) -> str:
    """Body of the Markdown code blocks in text, or text itself when it has none"""
    blocks = _FENCE.findall(text or '')
    if not blocks:
        return (text or '').strip()
    return '\n'.join(block.strip() for block in blocks)


class GenerationProvider(ABC):
    """Turns one ProviderCall into SQL text; must be safe to call from several threads"""

    kind: str = ''

    @abstractmethod
    def generate(self, call: ProviderCall) -> ProviderResponse:
        raise NotImplementedError


class LiveHttpProvider(GenerationProvider):
    """
    Client for an OpenAI-compatible chat-completions endpoint
    """

    kind = LIVE_HTTP

    def __init__(self, profile: ProviderProfile):
        self.profile = profile
        self.base_url = profile.endpoint.rstrip('/')
        self.api_key = os.getenv(profile.api_key_env, '')
        if not self.api_key:
            logger.warning(f'Environment variable {profile.api_key_env} is not set; requests will be unauthenticated')

        self.headers = {
            'Authorization': f'Bearer {self.api_key}',
            'Content-Type': 'application/json',
        }

    def _make_request(self, endpoint: str, data: Dict) -> Dict[str, Any]:
        """
        POST to the provider API

        Args:
            endpoint: API endpoint (e.g., '/chat/completions')
            data: Request payload

        Returns:
            {'status': True, 'data': ...} or {'status': False, 'message': ...}
        """
        url = f"{self.base_url}{endpoint}"

        try:
            response = requests.post(url, headers=self.headers, json=data, timeout=self.profile.timeout)
            response.raise_for_status()
            result = response.json()

            logger.info(f"Provider API POST {endpoint}: {response.status_code}")
            return {'status': True, 'data': result}

        except requests.exceptions.RequestException as e:
            logger.error(f"Provider API error on POST {endpoint}: {str(e)}")
            return {
                'status': False,
                'message': f'API request failed: {str(e)}'
            }
        except ValueError as e:
            logger.error(f"Provider API returned invalid JSON on POST {endpoint}: {str(e)}")
            return {
                'status': False,
                'message': f'Invalid JSON response: {str(e)}'
            }

    def generate(self, call: ProviderCall) -> ProviderResponse:
        payload = {
            'model': self.profile.model,
            'temperature': self.profile.temperature,
            'messages': [
                {'role': 'system', 'content': SYSTEM_PROMPT},
                {'role': 'user', 'content': call.prompt},
            ],
        }

        start = time.perf_counter()
        result = self._make_request('/chat/completions', payload)
        latency_ms = (time.perf_counter() - start) * 1000

        if not result['status']:
            return ProviderResponse(False, error=result['message'], latency_ms=latency_ms)

        try:
            content = result['data']['choices'][0]['message']['content']
        except (KeyError, IndexError, TypeError):
            return ProviderResponse(False, error='Malformed chat-completions response', latency_ms=latency_ms)

        return ProviderResponse(True, text=strip_code_fences(content), latency_ms=latency_ms)


def split_response(text: str) -> List[str]:
    """Statements of a response, code fences removed"""
    return split_statements(strip_code_fences(text))
