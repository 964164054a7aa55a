"""Test confirmation: drive the target project's build toolchain over the
emitted tests and produce the machine-readable confirmation report.

Commands are externally configured templates (the default targets a standard
Maven single-test invocation); a missing toolchain degrades to a report in
which every test stays Emitted, so analysis results are never lost to an
unavailable build environment.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import VulnreachError
from .testgen import TestArtifact

STATUS_EMITTED = "Emitted"
STATUS_COMPILE_ERROR = "CompileError"
STATUS_RUN_FAILED = "RunFailed"
STATUS_CONFIRMED = "Confirmed"


class ToolchainUnavailable(VulnreachError):
    pass


class IoFailure(VulnreachError):
    pass


@dataclass(frozen=True)
class ToolchainConfig:
    compile_cmd: str = "mvn -q test-compile"
    test_cmd: str = "mvn -q -Dtest={test_class} test"
    timeout_s: float = 120.0
    working_dir: str = "."

    def __post_init__(self):
        if "{test_class}" not in self.test_cmd:
            raise ValueError("test_cmd must contain a {test_class} placeholder")


@dataclass(frozen=True)
class PathRecord:
    signatures: tuple[str, ...]
    reachable: bool
    transfer_summary: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestRecord:
    __test__ = False  # not a pytest class

    file: str
    status: str
    detail: str = ""


@dataclass(frozen=True)
class ConfirmationReport:
    project: str
    cve_id: str
    paths: tuple[PathRecord, ...]
    tests: tuple[TestRecord, ...]
    diagnostics: tuple[str, ...] = ()

    @property
    def totals(self) -> tuple[int, int, int]:
        emitted = len(self.tests)
        compiled = sum(1 for t in self.tests
                       if t.status in (STATUS_CONFIRMED, STATUS_RUN_FAILED))
        confirmed = sum(1 for t in self.tests if t.status == STATUS_CONFIRMED)
        return emitted, compiled, confirmed

    @property
    def project_confirmed(self) -> bool:
        return any(t.status == STATUS_CONFIRMED for t in self.tests)


def _run(command: str, cwd: str, timeout_s: float) -> tuple[int, str]:
    proc = subprocess.run(shlex.split(command), cwd=cwd, timeout=timeout_s,
                          capture_output=True, text=True)
    output = (proc.stdout + proc.stderr).strip()
    return proc.returncode, output


def _confirm_one(artifact: TestArtifact, cfg: ToolchainConfig) -> TestRecord:
    compile_cmd = cfg.compile_cmd.replace("{test_class}", artifact.class_name)
    try:
        code, output = _run(compile_cmd, cfg.working_dir, cfg.timeout_s)
    except subprocess.TimeoutExpired:
        return TestRecord(artifact.file_name, STATUS_COMPILE_ERROR, "compile timeout")
    if code != 0:
        return TestRecord(artifact.file_name, STATUS_COMPILE_ERROR, output[-2000:])
    test_cmd = cfg.test_cmd.replace("{test_class}", artifact.class_name)
    try:
        code, output = _run(test_cmd, cfg.working_dir, cfg.timeout_s)
    except subprocess.TimeoutExpired:
        return TestRecord(artifact.file_name, STATUS_RUN_FAILED, "timeout")
    if code == 0:
        return TestRecord(artifact.file_name, STATUS_CONFIRMED, "")
    return TestRecord(artifact.file_name, STATUS_RUN_FAILED, output[-2000:])


def run_confirmation(artifacts: list[TestArtifact], cfg: ToolchainConfig,
                     project: str = "", cve_id: str = "",
                     paths: tuple[PathRecord, ...] = (),
                     parallel: bool = False) -> ConfirmationReport:
    """Compile and execute each emitted test, recording the outcome.

    Compile failure records the captured output and excludes the test from
    execution; a run timeout records RunFailed with a timeout detail (for
    hang-style vulnerabilities the timeout itself may be the signal, which
    is left to the operator to interpret).

    Tests run sequentially by default because they share the project's build
    state; parallel=True fans out per test class and must only be used with
    a toolchain whose invocations are isolated. Results merge in artifact
    order either way.
    """
    tests: list[TestRecord] = []
    diagnostics: list[str] = []
    try:
        if parallel and len(artifacts) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=min(4, len(artifacts))) as pool:
                tests = list(pool.map(lambda a: _confirm_one(a, cfg), artifacts))
        else:
            tests = [_confirm_one(a, cfg) for a in artifacts]
    except FileNotFoundError as e:
        # Toolchain binary missing: everything stays Emitted.
        diagnostics.append(f"toolchain unavailable: {e}")
        tests = [TestRecord(a.file_name, STATUS_EMITTED, "") for a in artifacts]
    return ConfirmationReport(project=project, cve_id=cve_id, paths=paths,
                              tests=tuple(tests), diagnostics=tuple(diagnostics))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def report_to_doc(report: ConfirmationReport) -> dict:
    emitted, compiled, confirmed = report.totals
    return {
        "project": report.project,
        "cve_id": report.cve_id,
        "paths": [
            {
                "signatures": list(p.signatures),
                "reachable": p.reachable,
                "transfer_summary": list(p.transfer_summary),
            }
            for p in report.paths
        ],
        "tests": [
            {"file": t.file, "status": t.status, "detail": t.detail}
            for t in report.tests
        ],
        "totals": {"emitted": emitted, "compiled": compiled, "confirmed": confirmed},
        "project_confirmed": report.project_confirmed,
        "diagnostics": list(report.diagnostics),
    }


def serialize_report(report: ConfirmationReport) -> str:
    return json.dumps(report_to_doc(report), indent=2) + "\n"


def parse_report_doc(doc: dict) -> ConfirmationReport:
    return ConfirmationReport(
        project=doc.get("project", ""),
        cve_id=doc.get("cve_id", ""),
        paths=tuple(PathRecord(signatures=tuple(p.get("signatures", ())),
                               reachable=bool(p.get("reachable", False)),
                               transfer_summary=tuple(p.get("transfer_summary", ())))
                    for p in doc.get("paths", [])),
        tests=tuple(TestRecord(file=t.get("file", ""), status=t.get("status", ""),
                               detail=t.get("detail", ""))
                    for t in doc.get("tests", [])),
        diagnostics=tuple(doc.get("diagnostics", [])),
    )


def read_report(path: str | Path) -> ConfirmationReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read report {path}: {e}") from e
    return parse_report_doc(doc)


def write_report(report: ConfirmationReport, out: str | Path) -> None:
    out = Path(out)
    if not out.parent.is_dir():
        raise IoFailure(f"parent directory missing for {out}")
    try:
        out.write_text(serialize_report(report), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write report {out}: {e}") from e
