import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def small_herd():
    """Feature vectors for 5 pigs x 6 low-noise images."""
    from earvein import pipeline, synth
    from earvein.classify import Dataset

    vecs = [pipeline.extract(it.image, pig_id=it.pig_id, source=f"{it.pig_id}_{it.instance}").features
            for it in synth.iter_herd(5, 6, synth.LOW_NOISE, seed=11)]
    return Dataset.from_vectors(vecs)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion checked by a test")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    item.config._criteria.append((mark.args[0], mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n, text, ok, detail in sorted(config._criteria):
        line = f"[{'PASS' if ok else 'FAIL'}] {n}. {text}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
