"""Subprocess validator checks (lint, test, build) and the show/hide gate.

Checks run sequentially within one workspace: a build and a test sharing a
directory must not interleave. Distinct workspaces may validate
concurrently; the service layer bounds that parallelism.
"""

from __future__ import annotations

import fnmatch
import os
import signal
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

__all__ = [
    "ValidatorCheck",
    "CheckResult",
    "ValidationReport",
    "CheckSpec",
    "run_validators",
    "gate_shown",
    "checks_for_file",
]

Category = Literal["lint", "test", "build"]
CheckStatus = Literal["pass", "fail", "timeout", "spawn_error"]


@dataclass(frozen=True)
class ValidatorCheck:
    name: str
    category: Category
    argv: tuple[str, ...]
    workdir: str = "."
    timeout_s: float = 30.0
    output_cap_bytes: int = 8192

    def __post_init__(self):
        if not self.argv:
            raise ValueError(f"check {self.name}: argv must be non-empty")
        if self.timeout_s <= 0:
            raise ValueError(f"check {self.name}: timeout_s must be > 0")


@dataclass(frozen=True)
class CheckResult:
    name: str
    category: Category
    status: CheckStatus
    exit_code: int | None
    duration_ms: int
    stdout_excerpt: str
    stderr_excerpt: str


@dataclass(frozen=True)
class ValidationReport:
    per_check: tuple[CheckResult, ...]
    all_passed: bool

    @classmethod
    def from_results(cls, results: Sequence[CheckResult]) -> "ValidationReport":
        return cls(
            per_check=tuple(results),
            all_passed=all(r.status == "pass" for r in results),
        )

    def to_dict(self) -> dict:
        return {
            "per_check": [
                {
                    "name": r.name,
                    "category": r.category,
                    "status": r.status,
                    "exit_code": r.exit_code,
                    "duration_ms": r.duration_ms,
                    "stdout_excerpt": r.stdout_excerpt,
                    "stderr_excerpt": r.stderr_excerpt,
                }
                for r in self.per_check
            ],
            "all_passed": self.all_passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        results = [
            CheckResult(
                name=str(c["name"]),
                category=c["category"],
                status=c["status"],
                exit_code=c["exit_code"],
                duration_ms=int(c["duration_ms"]),
                stdout_excerpt=str(c["stdout_excerpt"]),
                stderr_excerpt=str(c["stderr_excerpt"]),
            )
            for c in d.get("per_check", [])
        ]
        report = cls.from_results(results)
        # trust the recomputed all_passed over the stored one
        return report


def _truncate(data: bytes, cap: int) -> str:
    return data[:cap].decode("utf-8", errors="replace")


def _run_one(check: ValidatorCheck, workspace: Path) -> CheckResult:
    workdir = (workspace / check.workdir).resolve()
    t0 = time.perf_counter()
    try:
        # own process group so a timeout kill reaps grandchildren too
        proc = subprocess.Popen(
            list(check.argv),
            cwd=str(workdir),
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except OSError as exc:
        return CheckResult(
            name=check.name,
            category=check.category,
            status="spawn_error",
            exit_code=None,
            duration_ms=int((time.perf_counter() - t0) * 1000),
            stdout_excerpt="",
            stderr_excerpt=str(exc),
        )
    try:
        stdout, stderr = proc.communicate(timeout=check.timeout_s)
        status: CheckStatus = "pass" if proc.returncode == 0 else "fail"
        exit_code: int | None = proc.returncode
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
        stdout, stderr = proc.communicate()
        status = "timeout"
        exit_code = None
    return CheckResult(
        name=check.name,
        category=check.category,
        status=status,
        exit_code=exit_code,
        duration_ms=int((time.perf_counter() - t0) * 1000),
        stdout_excerpt=_truncate(stdout or b"", check.output_cap_bytes),
        stderr_excerpt=_truncate(stderr or b"", check.output_cap_bytes),
    )


def run_validators(checks: Sequence[ValidatorCheck], workspace: str | Path) -> ValidationReport:
    """Run checks in declared order inside `workspace`; failures are statuses.

    Pass means exit code 0 within the timeout. Signal-terminated processes
    report as fail; timed-out ones are killed (whole process group) and
    report as timeout.
    """
    ws = Path(workspace)
    if not ws.is_dir():
        raise ValueError(f"workspace does not exist: {ws}")
    results = [_run_one(check, ws) for check in checks]
    return ValidationReport.from_results(results)


def gate_shown(report: ValidationReport, reviewer_approved: bool) -> bool:
    """Show a suggestion iff all checks passed or a reviewer approved it."""
    return report.all_passed or reviewer_approved


@dataclass(frozen=True)
class CheckSpec:
    """A configured check plus the file glob that selects it.

    argv entries may contain `{file}` and `{workspace}` placeholders,
    substituted when the check is instantiated for a concrete file.
    """

    check: ValidatorCheck
    glob: str = "*"


def checks_for_file(
    specs: Sequence[CheckSpec], file_path: str, workspace: str | Path | None = None
) -> list[ValidatorCheck]:
    """Select and instantiate the checks whose glob matches `file_path`."""
    selected: list[ValidatorCheck] = []
    for spec in specs:
        if not (
            fnmatch.fnmatch(file_path, spec.glob)
            or fnmatch.fnmatch(Path(file_path).name, spec.glob)
        ):
            continue
        argv = tuple(
            arg.replace("{file}", file_path).replace("{workspace}", str(workspace or "."))
            for arg in spec.check.argv
        )
        selected.append(
            ValidatorCheck(
                name=spec.check.name,
                category=spec.check.category,
                argv=argv,
                workdir=spec.check.workdir,
                timeout_s=spec.check.timeout_s,
                output_cap_bytes=spec.check.output_cap_bytes,
            )
        )
    return selected
