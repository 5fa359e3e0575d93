"""
Generation requests
What a workload generation call asks for, and the per-query slots that honour its mix
"""
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .sql_ast import PredicateKind, QueryAst, QueryCategory

DEFAULT_TARGET_COLUMN = 'title.start_year'


class Intent(str, Enum):
    SCHEMA_AWARE = 'SchemaAware'
    CONTEXT_AWARE = 'ContextAware'
    WORKLOAD_EXPANSION = 'WorkloadExpansion'
    SELECTIVITY_TARGETED = 'SelectivityTargeted'


class SelectivityLevel(str, Enum):
    SELECTIVE = 'Selective'
    NON_SELECTIVE = 'NonSelective'


class PredicateFamily(str, Enum):
    EQUALITY_ONLY = 'EqualityOnly'
    INEQUALITY_ONLY = 'InequalityOnly'


class StatsStrategy(str, Enum):
    BOUNDARIES_ONLY = 'BoundariesOnly'
    SAMPLE_ONLY = 'SampleOnly'
    HISTOGRAM_ONLY = 'HistogramOnly'


@dataclass(frozen=True)
class SelectivityTarget:
    level: SelectivityLevel
    predicate_kind: PredicateFamily


@dataclass(frozen=True)
class GenerationRequest:
    intent: Intent
    n: int
    category_mix: Optional[Dict[QueryCategory, int]] = None
    context_text: Optional[str] = None
    seed_workload: Tuple[QueryAst, ...] = ()
    selectivity_target: Optional[SelectivityTarget] = None
    stats_strategy: Optional[StatsStrategy] = None
    predicate_mix: Optional[Dict[PredicateKind, int]] = None
    target_columns: Tuple[str, ...] = (DEFAULT_TARGET_COLUMN,)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError('n must be >= 1')
        if self.intent == Intent.WORKLOAD_EXPANSION and not self.seed_workload:
            raise ValueError('WorkloadExpansion requires a seed workload')
        if self.intent == Intent.SELECTIVITY_TARGETED and (
                self.selectivity_target is None or self.stats_strategy is None):
            raise ValueError('SelectivityTargeted requires selectivity_target and stats_strategy')
        if self.intent == Intent.CONTEXT_AWARE and not (self.context_text or '').strip():
            raise ValueError('ContextAware requires context_text')
        for name, mix in (('category_mix', self.category_mix), ('predicate_mix', self.predicate_mix)):
            if mix and sum(mix.values()) > self.n:
                raise ValueError(f'{name} asks for more than n={self.n} queries')
            if mix and any(count < 0 for count in mix.values()):
                raise ValueError(f'{name} counts must be >= 0')


# A slot is one requested query: (category or None, predicate kind or None)
Slot = Tuple[Optional[QueryCategory], Optional[PredicateKind]]


@dataclass
class SlotBook:
    """Outstanding slots of a request; accepted queries consume the best-fitting slot"""
    outstanding: Counter = field(default_factory=Counter)

    @classmethod
    def for_request(cls, req: GenerationRequest) -> 'SlotBook':
        categories: List[Optional[QueryCategory]] = []
        for category in QueryCategory:
            categories.extend([category] * int((req.category_mix or {}).get(category, 0)))
        categories.extend([None] * (req.n - len(categories)))

        kinds: List[Optional[PredicateKind]] = []
        for kind in PredicateKind:
            kinds.extend([kind] * int((req.predicate_mix or {}).get(kind, 0)))
        kinds.extend([None] * (req.n - len(kinds)))

        return cls(Counter(zip(categories, kinds)))

    @property
    def remaining(self) -> int:
        return sum(self.outstanding.values())

    def slots(self) -> List[Slot]:
        """Outstanding slots in a stable order"""
        order = {c: i for i, c in enumerate(list(QueryCategory) + [None])}
        kind_order = {k: i for i, k in enumerate(list(PredicateKind) + [None])}
        result = []
        for slot in sorted(self.outstanding, key=lambda s: (order[s[0]], kind_order[s[1]])):
            result.extend([slot] * self.outstanding[slot])
        return result

    def take(self, category: QueryCategory, kind: PredicateKind) -> Optional[Slot]:
        for slot in ((category, kind), (category, None), (None, kind), (None, None)):
            if self.outstanding.get(slot, 0) > 0:
                self.outstanding[slot] -= 1
                if not self.outstanding[slot]:
                    del self.outstanding[slot]
                return slot
        return None


def request_for_slots(req: GenerationRequest, slots: List[Slot]) -> GenerationRequest:
    """The request one provider call carries: len(slots) queries with the slots' mix"""
    categories = Counter(category for category, _ in slots if category is not None)
    kinds = Counter(kind for _, kind in slots if kind is not None)
    return replace(
        req,
        n=len(slots),
        category_mix=dict(categories) if req.category_mix else None,
        predicate_mix=dict(kinds) if req.predicate_mix else None,
    )
