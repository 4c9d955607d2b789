import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=int):
        parts = ACCEPTANCE[crit]
        states = {s for _, s, _ in parts}
        skipped = sum(s == "SKIP" for _, s, _ in parts)
        if "FAIL" in states:
            overall = "FAIL"
        elif skipped == len(parts):
            overall = "SKIP"
        elif skipped:
            overall = f"PASS ({skipped} of {len(parts)} parts skipped)"
        else:
            overall = "PASS"
        tr.write_line(f"criterion {crit}: {overall}")
        for part, status, detail in parts:
            tr.write_line(f"    {status:<4} {part}{': ' + detail if detail else ''}")
