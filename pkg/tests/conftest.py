"""Shared pytest plumbing: collect verdict lines into the terminal summary."""

VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter) -> None:
    if VERDICTS:
        terminalreporter.section("conformance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)
