import random

from hypothesis import given, settings
from hypothesis import strategies as st

from _synthcheck import check_family, make_family, walk_decision
from demoflow import synthesis

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(seed=seeds)
@settings(deadline=None)
def test_conflict_free_families_fold_cleanly(seed):
    schema, scenarios = make_family(seed)
    program, conflicts = synthesis.synthesize_all(scenarios, schema)
    assert conflicts == []
    for scenario in scenarios:
        assert walk_decision(program, scenario) == scenario.decision()


@given(seed=seeds)
@settings(deadline=None)
def test_merge_is_idempotent(seed):
    schema, scenarios = make_family(seed)
    program, _ = synthesis.synthesize_all(scenarios, schema)
    again, conflict = synthesis.merge_scenario(
        program, random.Random(seed).choice(scenarios), schema
    )
    assert conflict is None
    assert again.canonical_json() == program.canonical_json()


@given(seed=seeds)
@settings(deadline=None)
def test_merge_order_never_changes_shape(seed):
    schema, scenarios = make_family(seed)
    forward, _ = synthesis.synthesize_all(scenarios, schema)
    shuffled = scenarios[:]
    random.Random(seed).shuffle(shuffled)
    permuted, conflicts = synthesis.synthesize_all(shuffled, schema)
    assert conflicts == []
    assert synthesis.iso_signature(permuted) == synthesis.iso_signature(forward)


@given(seed=seeds)
@settings(deadline=None)
def test_every_merge_property_holds(seed):
    # the full battery: fold, replay, idempotence, permutation, coverage
    # monotonicity and conflict atomicity in one pass
    assert len(check_family(seed)) == 5
