from workloads.utils.executor import execute_count
from workloads.utils.mutation import (
    ADD_CONJUNCT, REMOVE_CONJUNCT, SWAP_JOIN_EDGE, mutate_query, mutations,
)
from workloads.utils.sql_ast import conjuncts
from workloads.utils.sql_parser import parse_sql
from workloads.utils.validation import validate

from .factories import desk_dataset

BASE = parse_sql(
    'SELECT * FROM movies m, title t WHERE m.id = t.movie_id '
    'AND t.start_year BETWEEN 1995 AND 2010 AND m.rating > 5.0'
)


class TestMutation:

    def test_variants_are_valid_and_distinct(self):
        desk = desk_dataset()
        variants = mutate_query(BASE, desk.stats, seed=5, n=12, catalog=desk.catalog)
        assert variants
        assert all(validate(v, desk.catalog).is_valid for v in variants)
        assert BASE not in variants
        assert len({str(v) for v in variants}) == len(variants)

    def test_same_seed_same_variants(self):
        desk = desk_dataset()
        first = mutate_query(BASE, desk.stats, seed=8, n=6, catalog=desk.catalog)
        again = mutate_query(BASE, desk.stats, seed=8, n=6, catalog=desk.catalog)
        assert first == again

    def test_adding_a_conjunct_never_grows_the_result(self):
        desk = desk_dataset()
        base_count = execute_count(BASE, desk.data, desk.catalog)
        found = mutations(BASE, desk.stats, seed=13, n=10, catalog=desk.catalog, kinds=(ADD_CONJUNCT,))
        assert found
        for mutation in found:
            assert len(conjuncts(mutation.query.where)) == len(conjuncts(BASE.where)) + 1
            assert execute_count(mutation.query, desk.data, desk.catalog) <= base_count

    def test_removing_a_conjunct_never_shrinks_the_result(self):
        desk = desk_dataset()
        base_count = execute_count(BASE, desk.data, desk.catalog)
        for mutation in mutations(BASE, desk.stats, seed=2, n=2, catalog=desk.catalog, kinds=(REMOVE_CONJUNCT,)):
            assert execute_count(mutation.query, desk.data, desk.catalog) >= base_count

    def test_join_edge_swaps_to_the_other_foreign_key(self):
        desk = desk_dataset()
        found = mutations(BASE, desk.stats, seed=1, n=1, catalog=desk.catalog, kinds=(SWAP_JOIN_EDGE,))
        assert len(found) == 1
        join = found[0].query.join_predicates[0]
        assert {join.left.name, join.right.name} == {'id', 'episode_of_id'}

    def test_no_applicable_edit_yields_nothing(self):
        desk = desk_dataset()
        q = parse_sql('SELECT * FROM movies')
        assert mutations(q, desk.stats, seed=1, n=3, catalog=desk.catalog, kinds=(SWAP_JOIN_EDGE,)) == []
