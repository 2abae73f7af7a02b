import pytest

from muskia.commands import Draw, Program, RESTORE, SaveLayer
from muskia.corpus import make_entry
from muskia.mutate import MUTATIONS, fault_suite, find_sites, force_apply, legal_sites, make_mutant
from muskia.optimizer.rewrites import GRADIENT, PASS_ORDER, SRCOVER
from muskia.shapes import Rect
from muskia.validator import ValidateConfig, validate_trace
from conftest import BLACK, RED, solid

FAST = ValidateConfig(resolution=64, samples=512)


@pytest.fixture(scope="module")
def suite():
    return fault_suite(0)


def test_suite_covers_every_pass_and_mutation(suite):
    assert len(suite) == 12
    assert {(m.pass_name, m.mutation) for m in suite} == {(p, m) for p in PASS_ORDER for m in MUTATIONS}
    for m in suite:
        assert m.after != m.before
        assert m.trace.snapshots[0] == m.before and m.trace.snapshots[-1] == m.after


def test_no_mutant_validates(suite):
    for m in suite:
        v = validate_trace(m.trace, FAST)
        assert not v.validated, (m.pass_name, m.mutation, m.source)


def test_suite_is_deterministic(suite):
    again = fault_suite(0)
    assert [m.after for m in again] == [m.after for m in suite]


def test_force_apply_none_without_site():
    p = Program([Draw(Rect(0, 0, 4, 4), solid(RED))])
    for name in PASS_ORDER:
        assert find_sites(p, name) == []
        assert force_apply(p, name) is None


def test_legal_sites_subset_of_sites():
    p = Program([SaveLayer(solid(BLACK)), Draw(Rect(0, 0, 4, 4), solid(RED)), RESTORE])
    assert legal_sites(p, SRCOVER) == find_sites(p, SRCOVER) == [(0,)]
    e = make_entry(0, "gradient_near", 0)
    assert legal_sites(e.program, GRADIENT) == []


def test_unknown_mutation():
    with pytest.raises(ValueError):
        make_mutant(SRCOVER, "flip_bits")
