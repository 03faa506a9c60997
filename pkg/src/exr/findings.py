"""Shared diagnostic record used by validators, linters, and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

SEVERITIES = ("info", "warning", "error")


@dataclass(frozen=True)
class Finding:
    severity: str  # "info" | "warning" | "error"
    code: str
    message: str
    pos: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        assert self.severity in SEVERITIES

    def to_json(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "pos": list(self.pos) if self.pos else None,
        }


def sort_findings(findings: list[Finding]) -> list[Finding]:
    return sorted(findings, key=lambda f: (f.pos or (0, 0), f.code))


def max_severity(findings: list[Finding]) -> str | None:
    worst = None
    for f in findings:
        if worst is None or SEVERITIES.index(f.severity) > SEVERITIES.index(worst):
            worst = f.severity
    return worst
