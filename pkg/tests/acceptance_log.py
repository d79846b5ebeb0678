"""Per-criterion outcome lines collected during the acceptance run."""

LINES = []


def record(number, title, ok, detail=""):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    LINES.append((number, line))
    print(line)
