import pytest

_LINES: list[str] = []


class CriterionLog:
    """Collects (name, value, bound) checks for one acceptance criterion and
    emits a single pass/fail line."""

    def __init__(self, label: str):
        self.label = label
        self.items: list[tuple[str, float, float, bool]] = []
        self.notes: list[str] = []

    def check(self, name: str, value: float, bound: float, strict: bool = False) -> bool:
        ok = bool(value < bound if strict else value <= bound)
        self.items.append((name, float(value), float(bound), ok))
        return ok

    def note(self, text: str) -> None:
        self.notes.append(text)

    @property
    def passed(self) -> bool:
        return bool(self.items) and all(ok for *_, ok in self.items)

    def line(self) -> str:
        worst = [f"{n}={v:.3g}/{b:.3g}" for n, v, b, ok in self.items if not ok] or [
            f"{n}={v:.3g}/{b:.3g}" for n, v, b, _ in self.items[:3]
        ]
        extra = f" ({'; '.join(self.notes)})" if self.notes else ""
        return f"{self.label}: {'PASS' if self.passed else 'FAIL'} {', '.join(worst)}{extra}"


@pytest.fixture
def criterion(request):
    log = CriterionLog(request.node.get_closest_marker("criterion").args[0])
    yield log
    line = log.line()
    _LINES.append(line)
    print(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
