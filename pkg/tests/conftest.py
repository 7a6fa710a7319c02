"""Collects one pass/fail line per acceptance criterion and prints them after the run."""

import pytest

TITLES = {
    1: "SCFE vs C&W bound, 0 violations, < 10 s",
    2: "SCFE vs DeepFool bound, 0 violations, < 10 s",
    3: "C-CHVAE vs NAE bound, 0 violations over >= 100 pairs, < 60 s",
    4: "closed-form equivalence identities on 1000 random linear models",
    5: "iterative SCFE and C&W match their oracles within 1e-3",
    6: "input gradients match central differences (rel < 1e-5)",
    7: "logistic and MLP test accuracy >= 0.88, < 30 s",
    8: "d_match monotone in theta, Spearman reference values",
    9: "category ordering of mean rank correlations (linear and MLP)",
    10: "repeated pipeline runs are byte-identical",
}

_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def report(request):
    """Attach a measurement summary to the current criterion (call before asserting)."""
    def _report(detail: str):
        request.node.user_properties.append(("detail", detail))
    return _report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        n = marker.args[0]
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        _results[n] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for n in sorted(_results):
        status, detail = _results[n]
        tr.write_line(f"criterion {n}: {status}  {TITLES.get(n, '')}" + (f"  [{detail}]" if detail else ""))
