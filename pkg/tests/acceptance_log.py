"""Collects one verdict line per acceptance criterion."""

LINES: list[str] = []


def report(number: int, ok: bool, text: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {text}"
    LINES.append(line)
    print(line, flush=True)
    return ok
