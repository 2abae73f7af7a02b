import pytest

from muskia.commands import SaveLayer, is_balanced
from muskia.corpus import (
    FAMILIES,
    NEAR_MISS_FAMILIES,
    PATTERN_FAMILIES,
    generate_buffer,
    generate_corpus,
    make_entry,
)
from muskia.optimizer.buffer import RecordBuffer
from muskia.optimizer.harness import transform
from muskia.optimizer.passes import PASSES
from muskia.optimizer.pipeline import optimize
from muskia.optimizer.rewrites import SRCOVER
from muskia.skplite import normalize_program


def test_deterministic_by_seed():
    a = generate_corpus(9, 45)
    b = generate_corpus(9, 45)
    assert [e.program for e in a] == [e.program for e in b]
    assert [e.program for e in generate_corpus(10, 45)] != [e.program for e in a]


def test_single_srcover_instance():
    (e,) = generate_corpus(1, 1, {"srcover": 1.0})
    assert e.family == "srcover"
    _, trace = optimize(e.program)
    assert trace.firing_counts() == e.expected
    if e.variant != "nested":
        assert e.expected == {SRCOVER: 1}


def test_mix_allocation():
    entries = generate_corpus(0, 10, {"luma": 1.0, "random": 1.0})
    assert [e.family for e in entries].count("luma") == 5
    with pytest.raises(ValueError):
        generate_corpus(0, 3, {"nope": 1.0})
    with pytest.raises(ValueError):
        generate_corpus(0, 3, {"luma": 0.0})


def test_translucent_stop_near_miss_annotated_zero():
    for k in range(40):
        e = make_entry(0, "gradient_near", k)
        if e.variant == "translucent_stop":
            assert e.expected == {} and e.expected_total() == 0
            assert len(optimize(e.program)[1]) == 0
            return
    pytest.fail("no translucent-stop near miss in the first 40 entries")


@pytest.mark.parametrize("family", PATTERN_FAMILIES + NEAR_MISS_FAMILIES)
def test_annotations_match_firings(family):
    for k in range(40):
        e = make_entry(2, family, k)
        _, trace = optimize(e.program)
        assert trace.firing_counts() == e.expected, (e.name, e.variant)


@pytest.mark.parametrize("family", NEAR_MISS_FAMILIES)
def test_near_misses_untouched_by_each_pass(family):
    for k in range(40):
        e = make_entry(4, family, k)
        for name, cls in PASSES.items():
            firings, _ = transform(cls(), RecordBuffer.from_program(e.program))
            assert not firings, (e.name, name)


def test_random_family_is_unannotated_and_every_program_normalized():
    for e in generate_corpus(5, 90):
        assert e.family in FAMILIES
        assert is_balanced(e.program.records)
        assert normalize_program(e.program) == e.program
        if e.family == "random":
            assert e.expected is None


def test_variants_cover_every_generator_branch():
    seen = {}
    for family in PATTERN_FAMILIES + NEAR_MISS_FAMILIES:
        seen[family] = {make_entry(0, family, k).variant for k in range(60)}
    assert seen["luma"] == {"plain", "in_context", "nest", "nest_clipped"}
    assert len(seen["dstin_near"]) == 6
    assert len(seen["gradient_near"]) == 4


def test_generate_buffer():
    p = generate_buffer(2000, seed=3)
    assert len(p) == 2000
    assert is_balanced(p.records)
    assert sum(isinstance(r, SaveLayer) for r in p) > 50
    assert generate_buffer(2000, seed=3) == p
