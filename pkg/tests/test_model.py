import random

import pytest

from fusionsim.errors import MutationError, NotationError, PartitionError
from fusionsim.model import (
    FusionGroup,
    FusionSetup,
    Merge,
    SplitOut,
    apply_mutation,
    format_setup,
    parse_setup,
    singleton_setup,
)


def test_parse_basic():
    setup = parse_setup("(A,B)-(C)")
    assert [g.tasks for g in setup.groups] == [("A", "B"), ("C",)]


def test_parse_canonicalizes_order():
    assert parse_setup("(C)-(B,A)").key == "(A,B)-(C)"
    assert parse_setup("(b)-(a)").key == "(a)-(b)"


def test_parse_duplicate_task_across_groups():
    with pytest.raises(PartitionError, match="duplicate task"):
        parse_setup("(A)-(A,B)")


def test_parse_duplicate_task_within_group():
    with pytest.raises(PartitionError, match="duplicate task"):
        parse_setup("(A,A)")


@pytest.mark.parametrize(
    "text",
    ["", "(A", "A)", "(A)(B)", "(A)-", "-(A)", "()", "(A,)-(B)", "(A,B)-()", "(A B)"],
)
def test_parse_syntax_errors(text):
    with pytest.raises(NotationError):
        parse_setup(text)


def test_format_alphabetical():
    setup = FusionSetup.of([["B", "A"], ["C"]])
    assert format_setup(setup) == "(A,B)-(C)"


def test_format_benchmark_setups():
    tree_final = FusionSetup.of([["A", "B", "D", "E"], ["C"], ["F"], ["G"]])
    assert format_setup(tree_final) == "(A,B,D,E)-(C)-(F)-(G)"
    iot_final = FusionSetup.of(
        [["AS"], ["CA", "DJ"], ["CS", "CSA", "CSL"], ["CT"], ["CW", "I", "SE"]]
    )
    assert format_setup(iot_final) == "(AS)-(CA,DJ)-(CS,CSA,CSL)-(CT)-(CW,I,SE)"


def test_singleton_setup():
    assert singleton_setup({"A", "B", "C"}).key == "(A)-(B)-(C)"
    assert singleton_setup(["A"]).key == "(A)"
    with pytest.raises(PartitionError):
        singleton_setup([])


def test_singleton_setup_tree_tasks():
    setup = singleton_setup("ABCDEFG")
    assert len(setup.groups) == 7
    assert all(len(g.tasks) == 1 for g in setup.groups)


def test_merge():
    setup = parse_setup("(A)-(B)")
    assert apply_mutation(setup, Merge("A", "B")).key == "(A,B)"


def test_split_out_is_merge_inverse():
    setup = parse_setup("(A,B)")
    assert apply_mutation(setup, SplitOut("B")).key == "(A)-(B)"


def test_merge_unknown_task():
    setup = parse_setup("(A,B,D)-(C)")
    with pytest.raises(MutationError, match="unknown task 'E'"):
        apply_mutation(setup, Merge("A", "E"))


def test_merge_same_group_rejected():
    with pytest.raises(MutationError, match="merge"):
        apply_mutation(parse_setup("(A,B)"), Merge("A", "B"))


def test_split_singleton_rejected():
    with pytest.raises(MutationError, match="already alone"):
        apply_mutation(parse_setup("(A)-(B)"), SplitOut("A"))


def test_group_validation():
    with pytest.raises(PartitionError):
        FusionGroup(())
    with pytest.raises(NotationError):
        FusionGroup(("no-hyphens",))


def _random_partition(rng: random.Random) -> FusionSetup:
    alphabet = "ABCDEFGHJKMNPQRSTUVWXYZ_0123456789abcdefghij"
    n = rng.randint(1, 12)
    names = rng.sample([a + b for a in alphabet for b in alphabet], n)
    rng.shuffle(names)
    groups, current = [], []
    for name in names:
        current.append(name)
        if rng.random() < 0.4:
            groups.append(current)
            current = []
    if current:
        groups.append(current)
    return FusionSetup.of(groups)


def test_parse_format_round_trip_randomized():
    rng = random.Random(20240917)
    for _ in range(300):
        setup = _random_partition(rng)
        assert parse_setup(format_setup(setup)) == setup


def test_mutations_preserve_partition_randomized():
    rng = random.Random(8451)
    for _ in range(300):
        setup = _random_partition(rng)
        tasks = sorted(setup.tasks)
        a, b = rng.choice(tasks), rng.choice(tasks)
        if setup.group_of(a) != setup.group_of(b):
            mutated = apply_mutation(setup, Merge(a, b))
        elif len(setup.group_of(a).tasks) > 1:
            mutated = apply_mutation(setup, SplitOut(a))
        else:
            continue
        assert mutated.tasks == setup.tasks  # still covering
        # canonical form re-parses to itself => disjoint and ordered
        assert parse_setup(mutated.key) == mutated


def test_merge_then_split_restores_original_singleton():
    rng = random.Random(77)
    for _ in range(100):
        setup = _random_partition(rng)
        singles = [g.tasks[0] for g in setup.groups if len(g.tasks) == 1]
        others = [t for g in setup.groups for t in g.tasks if t not in singles]
        if not singles or not others:
            continue
        task = rng.choice(singles)
        other = rng.choice(others)
        merged = apply_mutation(setup, Merge(task, other))
        restored = apply_mutation(merged, SplitOut(task))
        assert restored == setup
