import pytest

from vulnlearn.pipeline import EmbeddingParams, ExperimentConfig, ForestParams, ResNetParams
from vulnlearn.synth import generate_synthetic_corpus

# small enough for unit tests; the acceptance suite uses the defaults
FAST = ExperimentConfig(
    embedding_params=EmbeddingParams(dim=16, epochs=2),
    forest=ForestParams(n_trees=30),
    resnet=ResNetParams(blocks=2, channels=4, epochs=8),
)


@pytest.fixture(scope="session")
def fast_config():
    return FAST


@pytest.fixture(scope="session")
def corpora(tmp_path_factory):
    """Three token-signal projects and one architecture-signal project."""
    out = tmp_path_factory.mktemp("corpora")
    token = [generate_synthetic_corpus(out, seed=s, n_files=200, vuln_rate=0.4, signal="token")[1]
             for s in (1, 2, 3)]
    arch = generate_synthetic_corpus(out, seed=1, n_files=200, vuln_rate=0.4, signal="arch")[1]
    return {"token": token, "arch": arch, "dir": out}


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, value in rep.user_properties:
                if key == "acceptance":
                    lines.append(f"{outcome.upper()[:4]:4}  {value}  ({rep.duration:.1f}s)")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
