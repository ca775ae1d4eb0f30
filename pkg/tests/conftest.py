import pytest

from edgeanomaly.config import builtin_config_text, default_corpus, parse_config
from edgeanomaly.orchestrator import run_corpus

LOCATION_DOC = """\
app: location_retrieval
microservices: [location_service]
seed: 42
normal:
  duration_s: 3h
anomalies:
  duration_s: 2h
  inject:
    - {kind: cpu_hog, target: location_service}
    - {kind: memory_stress, target: location_service}
    - {kind: user_surge_spike, target: location_service}
    - {kind: user_surge_step, target: location_service}
    - {kind: network_delay, target: location_service}
output: dataset
"""


@pytest.fixture
def location_doc():
    return LOCATION_DOC


@pytest.fixture
def location_cfg():
    return parse_config(LOCATION_DOC)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """The bundled three-app corpus at seed 42, generated once per session."""
    root = tmp_path_factory.mktemp("corpus")
    run_corpus(default_corpus(), root, threads=4)
    return root


@pytest.fixture(scope="session")
def builtin_texts():
    from edgeanomaly.config import BUILTIN_CONFIGS

    return {n: builtin_config_text(n) for n in BUILTIN_CONFIGS}


@pytest.fixture(scope="session")
def acceptance(request):
    """Criterion number -> (passed, detail); printed in the terminal summary."""
    results = getattr(request.config, "_acceptance_results", None)
    if results is None:
        results = request.config._acceptance_results = {}
    return results


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
