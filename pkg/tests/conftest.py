import numpy as np
import pytest

from grnbvs import Dataset


def make_dataset(g, f, b, m, tf_gene_map=None):
    g, f = np.atleast_2d(np.asarray(g, float)), np.atleast_2d(np.asarray(f, float))
    b, m = np.atleast_2d(np.asarray(b, float)), np.atleast_2d(np.asarray(m, float))
    N, T = g.shape
    J = f.shape[0]
    return Dataset([f"g{i}" for i in range(N)], [f"tf{j}" for j in range(J)],
                   [f"e{t}" for t in range(T)], g, f, b, m, tf_gene_map or {})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, N, J, T, eps=1e-3):
    b = rng.uniform(eps, 1 - eps, (N, J))
    m = rng.uniform(eps, 1 - eps, (N, J))
    return make_dataset(rng.normal(size=(N, T)), rng.normal(size=(J, T)), b, m)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
