import pytest

from ctxforge.cache import build_cache
from ctxforge.config import EngineConfig
from ctxforge.corpus import CorpusStore
from ctxforge.syncorpus import CorpusSpec, generate


@pytest.fixture(scope="session")
def standard_corpus():
    return generate(CorpusSpec.standard(0))


@pytest.fixture(scope="session")
def standard_store(standard_corpus):
    return CorpusStore.from_documents(standard_corpus.documents)


@pytest.fixture(scope="session")
def mixed_corpus():
    """Standard corpus plus one withheld topic and a 50/50 hit/miss trace."""
    return generate(CorpusSpec.standard(0, withheld_topics=1, n_queries=200, miss_fraction=0.5))


@pytest.fixture(scope="session")
def standard_snapshot(standard_store):
    return build_cache(standard_store, EngineConfig())


@pytest.fixture(scope="session")
def trained_policy():
    """One full-length training run shared by the policy and ablation checks."""
    from ctxforge.policy.envs import CompressionEnv
    from ctxforge.policy.ppo import PpoConfig, ppo_train

    return ppo_train(CompressionEnv(), PpoConfig())


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, printed at the end of the run."""
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
