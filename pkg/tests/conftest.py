import pytest

from tvsg.synth import CONTEXT, STYLE, SynthConfig, generate_corpus

_criteria: dict[str, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        _criteria[marker.args[0]] = rep.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_criteria):
        terminalreporter.write_line(
            f"{'PASS' if _criteria[name] else 'FAIL'}: {name}"
        )


@pytest.fixture(scope="session")
def style_corpus():
    """Seeded 4-character/50-scene corpus with per-character vocabularies."""
    return generate_corpus(SynthConfig(show="styleshow", chars=4, scenes=50, seed=7, mode=STYLE))


@pytest.fixture(scope="session")
def context_corpus():
    """Corpus whose only identity signal sits in supporting characters' lines."""
    return generate_corpus(SynthConfig(show="ctxshow", chars=4, scenes=50, seed=7, mode=CONTEXT))


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(SynthConfig(show="smallshow", scenes=10, seed=3))
