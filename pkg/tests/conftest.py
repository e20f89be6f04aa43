import functools
import itertools

import numpy as np
import pytest

from chabauty_lab import GroupModel, build_root_system, group_exp

MODELS = ["sl:2", "sl:3", "sl:4", "sopp:2"]
ALL_MODELS = MODELS + ["sopp:3"]


@functools.lru_cache(maxsize=None)
def rs_of(spec: str):
    return build_root_system(GroupModel.parse(spec))


def proper_subsets(rs):
    return [I for r in range(rs.rank) for I in itertools.combinations(range(rs.rank), r)]


def random_algebra(rs, rng, scale=1.0):
    X = sum(rng.standard_normal() * B for B in rs.basis)
    return scale * X / max(1.0, float(np.linalg.norm(X)))


def random_group(rs, rng, scale=3.0):
    """``exp`` of an algebra element of norm at most ``scale``."""
    return group_exp(random_algebra(rs, rng, scale))


def random_K(rs, rng):
    """A random element of ``K`` as ``exp`` of a skew element of the algebra."""
    X = random_algebra(rs, rng, 3.0)
    return group_exp(0.5 * (X - X.T))


@pytest.fixture(params=MODELS)
def rs(request):
    return rs_of(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- one line per acceptance criterion -----------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    failed = rep.failed
    if rep.when == "call" or failed:
        prev = _CRITERIA.get(n, (True, []))
        ok = prev[0] and not failed
        _CRITERIA[n] = (ok, prev[1] + [f"{item.name} {rep.duration:.1f}s"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, parts = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({'; '.join(parts)})")
