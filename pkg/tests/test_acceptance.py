"""The 14 acceptance criteria, one test each.

The suite object is session-scoped so the expensive simulation ensembles
are built once and shared.  Criterion 6 checks an asymptotic normalization
whose stated band is not reached at desk-scale parameters; the test asserts
it faithfully and is expected to fail (see the module docstring of
mdla.acceptance for the analysis).
"""
import pytest

from mdla.acceptance import AcceptanceSuite


@pytest.fixture(scope="session")
def suite(tmp_path_factory):
    return AcceptanceSuite(out_dir=str(tmp_path_factory.mktemp("accept")),
                           seed=0)


@pytest.mark.parametrize("number", range(1, 15))
def test_criterion(suite, number):
    result = suite.run_one(number)
    print(result.line())
    assert result.passed, result.detail
