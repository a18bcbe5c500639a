import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def write_counts(path, values, sample_ids=None, feature_ids=None, delimiter=","):
    values = np.asarray(values)
    n, p = values.shape
    sample_ids = sample_ids or [f"s{i + 1}" for i in range(n)]
    feature_ids = feature_ids or [f"g{j + 1}" for j in range(p)]
    lines = [delimiter.join(["id", *feature_ids])]
    for sid, row in zip(sample_ids, values):
        lines.append(delimiter.join([sid, *(str(int(v)) for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def zero_inflated_counts(n, p, zero_rate, seed):
    """Correlated counts with roughly ``zero_rate`` zeros, no empty rows."""
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((p, 2))
    Z = rng.standard_normal((n, 2)) @ L.T + 0.5 * rng.standard_normal((n, p))
    counts = np.rint(50 * np.exp(Z)).astype(np.int64)
    counts[rng.random((n, p)) < zero_rate] = 0
    counts[:, 0] = np.maximum(counts[:, 0], 1)
    return counts


@pytest.fixture
def counts_csv(tmp_path):
    return write_counts(tmp_path / "counts.csv", zero_inflated_counts(40, 6, 0.3, seed=3))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
