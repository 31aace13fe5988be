import jax

jax.config.update("jax_enable_x64", True)

_LINES: dict[int, str] = {}


def record(number: int, ok: bool, summary: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {summary}"
    _LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
