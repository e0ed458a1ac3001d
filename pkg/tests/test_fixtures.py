import pytest

from poisson_sigma.fixtures import SUITES, UnknownSuite, compute, load_fixture


@pytest.mark.parametrize("suite", sorted(SUITES))
def test_stored_fixtures_reproduce(suite):
    stored = load_fixture(suite)
    fresh = compute(suite)
    assert stored["version"] == fresh["version"] == 1
    assert stored["normalization"] == fresh["normalization"]
    import json
    assert json.loads(json.dumps(fresh["cases"])) == stored["cases"]


def test_unknown_suite():
    with pytest.raises(UnknownSuite):
        compute("weights")


def test_jacobiator_fixture_is_zero():
    rows = load_fixture("linfty")["cases"]["jacobiator-x3"]
    assert all(v == "0" for a in rows for b in a for v in b)
