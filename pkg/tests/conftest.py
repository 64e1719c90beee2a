import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from verdicts import VERDICTS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in VERDICTS:
        terminalreporter.write_line(line)
