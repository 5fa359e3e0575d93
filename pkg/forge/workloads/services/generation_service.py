"""
Generation Service for Forge
Batched, deduplicated and schema-validated workload generation over a pluggable provider
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set

from django.conf import settings

from ..exceptions import ForgeError, SqlSyntaxError, UnsupportedConstructError
from ..signals import provider_call_completed
from ..utils.artifacts import derive_seed, write_csv, write_json
from ..utils.catalog import SchemaCatalog
from ..utils.generation import GenerationRequest, Intent, SlotBook, request_for_slots
from ..utils.mock_provider import MockGrammarProvider
from ..utils.mutation import mutations
from ..utils.prompts import build_prompt
from ..utils.providers import (
    GenerationProvider, LiveHttpProvider, ProviderCall, ProviderProfile, ProviderResponse, split_response,
)
from ..utils.sql_ast import QueryAst, classify, predicate_kind, query_to_dict, referenced_tables
from ..utils.sql_parser import parse_sql
from ..utils.sql_printer import canonical_key, print_sql
from ..utils.statistics import StatisticsMap
from ..utils.validation import resolved_columns, validate

logger = logging.getLogger(__name__)

PROVIDER = 'provider'
MUTATION = 'mutation'

QUERY_COLUMNS = ['query_id', 'sql', 'category', 'predicate_kind', 'provenance', 'call_index']
REJECTED_COLUMNS = ['call_index', 'raw', 'reason']


@dataclass(frozen=True)
class GeneratedQuery:
    query_id: str
    query: QueryAst
    provenance: str = PROVIDER
    call_index: int = -1

    @property
    def sql(self) -> str:
        return print_sql(self.query)

    def to_row(self) -> dict:
        return {
            'query_id': self.query_id,
            'sql': self.sql,
            'category': classify(self.query).value,
            'predicate_kind': predicate_kind(self.query).value,
            'provenance': self.provenance,
            'call_index': self.call_index,
        }


@dataclass(frozen=True)
class RejectedStatement:
    raw: str
    reason: str
    call_index: int = -1


@dataclass
class GenerationResult:
    requested: int
    accepted: List[GeneratedQuery] = field(default_factory=list)
    rejected: List[RejectedStatement] = field(default_factory=list)
    per_call_latency: List[float] = field(default_factory=list)
    calls_made: int = 0
    failed_calls: int = 0
    incomplete: bool = False
    deviations: List[str] = field(default_factory=list)
    duration_ms: float = 0.0

    @property
    def queries(self) -> List[QueryAst]:
        return [item.query for item in self.accepted]

    @property
    def query_ids(self) -> List[str]:
        return [item.query_id for item in self.accepted]

    def renumber(self, offset: int = 0):
        self.accepted = [
            GeneratedQuery(f'q{offset + i:05d}', item.query, item.provenance, item.call_index)
            for i, item in enumerate(self.accepted)
        ]


def build_provider(profile: ProviderProfile, catalog: SchemaCatalog, stats: StatisticsMap) -> GenerationProvider:
    if profile.is_live:
        return LiveHttpProvider(profile)
    return MockGrammarProvider(catalog, stats, getattr(settings, 'FORGE_CONTEXT_HINTS', {}))


def footprint(queries: Iterable[QueryAst], catalog: SchemaCatalog):
    """(tables, (table, column) pairs) referenced by the queries"""
    tables, columns = set(), set()
    for q in queries:
        tables.update(referenced_tables(q))
        columns.update((c.table, c.column) for c in resolved_columns(q, catalog))
    return tables, columns


class GenerationService:
    """
    Service for producing validated workloads from a generation provider
    """

    def generate_workload(self, req: GenerationRequest, profile: ProviderProfile, catalog: SchemaCatalog,
                          stats: StatisticsMap, provider: Optional[GenerationProvider] = None,
                          transcript_dir=None, seen_keys: Optional[Set[str]] = None,
                          call_offset: int = 0) -> GenerationResult:
        """
        Collect up to req.n distinct valid queries in batched provider calls

        Args:
            req: Generation request
            profile: Provider profile (batch size, retries, parallelism, seed)
            catalog: Schema catalog queries are validated against
            stats: Column statistics for prompts and the mock provider
            provider: Provider override (built from profile when omitted)
            transcript_dir: Directory for prompt/response transcripts
            seen_keys: Canonical keys already taken (shared across requests)
            call_offset: First call index

        Returns:
            GenerationResult; incomplete when the retry budget ran out first

        Raises:
            MissingStatisticsError: a selectivity-targeted request lacks its statistics
        """
        start = time.perf_counter()
        provider = provider or build_provider(profile, catalog, stats)
        build_prompt(req, catalog, stats)

        per_call = profile.max_queries_per_call
        budget = math.ceil(req.n / per_call) + profile.max_retries
        book = SlotBook.for_request(req)
        seen = seen_keys if seen_keys is not None else set()
        if req.intent == Intent.WORKLOAD_EXPANSION:
            seen.update(canonical_key(q) for q in req.seed_workload)

        result = GenerationResult(requested=req.n)
        while book.remaining and result.calls_made < budget and result.failed_calls < profile.max_retries:
            wave = min(
                profile.parallelism,
                math.ceil(book.remaining / per_call),
                profile.max_retries - result.failed_calls,
                budget - result.calls_made,
            )
            slots = book.slots()
            calls = []
            for i in range(wave):
                chunk = slots[i * per_call:(i + 1) * per_call]
                call_req = request_for_slots(req, chunk)
                index = call_offset + result.calls_made + i
                calls.append(ProviderCall(
                    prompt=build_prompt(call_req, catalog, stats),
                    request=call_req,
                    count=len(chunk),
                    slots=tuple(chunk),
                    call_index=index,
                    seed=derive_seed(profile.seed, f'call-{index}'),
                ))

            responses = self._run_wave(provider, calls, profile.parallelism)
            result.calls_made += len(calls)
            for call, response in zip(calls, responses):
                self._absorb(call, response, provider, result, book, seen, catalog, transcript_dir)

        result.incomplete = book.remaining > 0
        if req.intent == Intent.WORKLOAD_EXPANSION:
            self._record_deviations(result, req.seed_workload, catalog)
        result.renumber()
        result.duration_ms = (time.perf_counter() - start) * 1000

        if result.incomplete:
            logger.warning(
                f'Generation incomplete: {len(result.accepted)} of {req.n} queries after '
                f'{result.calls_made} calls ({result.failed_calls} failed)'
            )
        else:
            logger.info(f'Generated {len(result.accepted)} queries in {result.calls_made} calls')
        return result

    def _run_wave(self, provider: GenerationProvider, calls: Sequence[ProviderCall],
                  parallelism: int) -> List[ProviderResponse]:
        """Responses in call order, whatever the completion order"""

        def run(call):
            try:
                return provider.generate(call)
            except (ForgeError, ValueError) as e:
                logger.error(f'Provider call {call.call_index} raised: {e}')
                return ProviderResponse(False, error=str(e))

        if parallelism > 1 and len(calls) > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                return list(pool.map(run, calls))
        return [run(call) for call in calls]

    def _absorb(self, call: ProviderCall, response: ProviderResponse, provider: GenerationProvider,
                result: GenerationResult, book: SlotBook, seen: Set[str], catalog: SchemaCatalog,
                transcript_dir):
        """Split, parse, validate and dedupe one response, in statement order"""
        statements = split_response(response.text) if response.ok else []
        result.per_call_latency.append(response.latency_ms)
        provider_call_completed.send(
            sender=self.__class__,
            call_index=call.call_index,
            provider=provider.kind,
            latency_ms=response.latency_ms,
            statements=len(statements),
            ok=response.ok,
            error=response.error,
            prompt=call.prompt,
            response=response.text,
            transcript_dir=transcript_dir,
        )
        if not response.ok:
            result.failed_calls += 1
            return

        def reject(raw, reason):
            result.rejected.append(RejectedStatement(raw, reason, call.call_index))

        parsed = 0
        for raw in statements:
            try:
                q = parse_sql(raw)
            except (SqlSyntaxError, UnsupportedConstructError) as e:
                reject(raw, f'parse error: {e}')
                continue
            parsed += 1

            report = validate(q, catalog)
            if not report.is_valid:
                reject(raw, f'invalid: {report.summary()}')
                continue
            if parse_sql(print_sql(q)) != q:
                reject(raw, 'does not round-trip through the printer')
                continue
            if not book.remaining:
                reject(raw, 'surplus statement')
                continue
            key = canonical_key(q)
            if key in seen:
                reject(raw, 'duplicate')
                continue
            if book.take(classify(q), predicate_kind(q)) is None:
                reject(raw, 'outside the requested mix')
                continue
            seen.add(key)
            result.accepted.append(GeneratedQuery('', q, PROVIDER, call.call_index))

        if not parsed:
            logger.warning(f'Call {call.call_index} returned no parseable statements')
            result.failed_calls += 1

    def _record_deviations(self, result: GenerationResult, seed_workload, catalog: SchemaCatalog):
        tables, columns = footprint(seed_workload, catalog)
        result.deviations = []
        for item in result.accepted:
            q_tables, q_columns = footprint([item.query], catalog)
            outside = sorted(q_tables - tables) + sorted(f'{t}.{c}' for t, c in q_columns - columns)
            if outside:
                result.deviations.append(f'{print_sql(item.query)}: outside seed footprint ({", ".join(outside)})')

    def expand_workload(self, seed_workload: Sequence[QueryAst], n: int, profile: ProviderProfile,
                        catalog: SchemaCatalog, stats: StatisticsMap,
                        provider: Optional[GenerationProvider] = None, transcript_dir=None,
                        seen_keys: Optional[Set[str]] = None, call_offset: int = 0) -> GenerationResult:
        """
        Grow a seed workload to n new queries; mutations fill what the provider leaves out

        Args:
            seed_workload: Valid seed queries (non-empty)
            n: New queries wanted (>= 1)

        Returns:
            GenerationResult; mutation-sourced queries carry provenance 'mutation'
        """
        if n < 1:
            raise ValueError('n must be >= 1')
        if not seed_workload:
            raise ValueError('seed workload must not be empty')
        for q in seed_workload:
            report = validate(q, catalog)
            if not report.is_valid:
                raise ValueError(f'invalid seed query {print_sql(q)}: {report.summary()}')

        seen = seen_keys if seen_keys is not None else set()
        req = GenerationRequest(Intent.WORKLOAD_EXPANSION, n, seed_workload=tuple(seed_workload))
        result = self.generate_workload(req, profile, catalog, stats, provider, transcript_dir, seen, call_offset)

        missing = n - len(result.accepted)
        attempt = 0
        while missing > 0 and attempt < len(seed_workload) * 4:
            base = seed_workload[attempt % len(seed_workload)]
            for mutation in mutations(base, stats, derive_seed(profile.seed, f'mutation-{attempt}'), missing, catalog):
                key = canonical_key(mutation.query)
                if key in seen or missing == 0:
                    continue
                seen.add(key)
                result.accepted.append(GeneratedQuery('', mutation.query, MUTATION))
                missing -= 1
            attempt += 1

        topped_up = sum(item.provenance == MUTATION for item in result.accepted)
        if topped_up:
            logger.info(f'Expansion topped up with {topped_up} mutations')
        result.incomplete = len(result.accepted) < n
        result.renumber()
        return result

    def generate_all(self, requests: Sequence[GenerationRequest], profile: ProviderProfile,
                     catalog: SchemaCatalog, stats: StatisticsMap,
                     provider: Optional[GenerationProvider] = None, transcript_dir=None) -> GenerationResult:
        """Several requests as one workload; ids and call indices continue across requests"""
        merged = GenerationResult(requested=sum(req.n for req in requests))
        seen: Set[str] = set()
        provider = provider or build_provider(profile, catalog, stats)
        for req in requests:
            if req.intent == Intent.WORKLOAD_EXPANSION:
                part = self.expand_workload(req.seed_workload, req.n, profile, catalog, stats, provider,
                                            transcript_dir, seen, merged.calls_made)
            else:
                part = self.generate_workload(req, profile, catalog, stats, provider, transcript_dir,
                                              seen, merged.calls_made)
            merged.accepted.extend(part.accepted)
            merged.rejected.extend(part.rejected)
            merged.per_call_latency.extend(part.per_call_latency)
            merged.calls_made += part.calls_made
            merged.failed_calls += part.failed_calls
            merged.incomplete = merged.incomplete or part.incomplete
            merged.deviations.extend(part.deviations)
            merged.duration_ms += part.duration_ms
        merged.renumber()
        return merged

    # ==================== EXPORT ====================

    def export_queries(self, result: GenerationResult, paths: dict, seed: int) -> int:
        """queries.csv, queries.json and rejected.csv"""
        write_csv(paths['queries_csv'], [item.to_row() for item in result.accepted], QUERY_COLUMNS, seed)
        write_json(paths['queries_json'], {
            'requested': result.requested,
            'calls_made': result.calls_made,
            'incomplete': result.incomplete,
            'deviations': result.deviations,
            'queries': [
                dict(item.to_row(), ast=query_to_dict(item.query)) for item in result.accepted
            ],
        }, seed)
        write_csv(
            paths['rejected'],
            [{'call_index': r.call_index, 'raw': r.raw, 'reason': r.reason} for r in result.rejected],
            REJECTED_COLUMNS, seed,
        )
        logger.info(f'Wrote {len(result.accepted)} queries and {len(result.rejected)} rejects')
        return len(result.accepted)


# Singleton instance
generation_service = GenerationService()
