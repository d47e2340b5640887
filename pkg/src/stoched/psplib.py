"""PSPLIB single-mode (.sm) instance ingestion.

Instances are plain ASCII with star-delimited sections. Three things are
read: the job count from the "jobs (incl. supersource/sink )" header
line, successor lists from the PRECEDENCE RELATIONS table, and mode-1
durations from the REQUESTS/DURATIONS table. Resource columns and
availabilities are skipped without validation. Lines are parsed by
whitespace token splitting, not column offsets: the files are roughly
column-aligned but not reliably so across generator versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    JobCountMismatch,
    MalformedDurationRow,
    MalformedHeader,
    MalformedPrecedenceRow,
)
from .network import ProjectNetwork, build_network

_JOBS_MARKER = "jobs (incl."
_PRECEDENCE_MARKER = "PRECEDENCE RELATIONS"
_DURATIONS_MARKER = "REQUESTS/DURATIONS"


@dataclass(frozen=True)
class PsplibInstance:
    """Parsed instance: job ids are 1-based as in the file; job 1 and job
    job_count are the dummy source and sink."""

    instance_name: str
    job_count: int
    durations: tuple[int, ...]
    successors: tuple[tuple[int, ...], ...]


def parse_sm(text, instance_name: str = "") -> PsplibInstance:
    """Parse .sm text (str or bytes) into a validated PsplibInstance.

    Raises MalformedHeader, MalformedPrecedenceRow, MalformedDurationRow,
    JobCountMismatch, or CycleDetected/DuplicateEdge from graph validation.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MalformedHeader(f"instance file is not ASCII: {exc}") from exc
    lines = text.splitlines()

    job_count = _parse_job_count(lines)
    successors = _parse_precedence(lines, job_count)
    durations = _parse_durations(lines, job_count)

    inst = PsplibInstance(
        instance_name=instance_name,
        job_count=job_count,
        durations=durations,
        successors=successors,
    )
    to_network(inst)  # validates acyclicity and edge sanity at parse time
    return inst


def _parse_job_count(lines: list[str]) -> int:
    for line in lines:
        if _JOBS_MARKER in line:
            _, _, value = line.rpartition(":")
            try:
                n = int(value.split()[0])
            except (ValueError, IndexError) as exc:
                raise MalformedHeader(f"unreadable job count in {line!r}") from exc
            if n < 1:
                raise MalformedHeader(f"job count must be >= 1, got {n}")
            return n
    raise MalformedHeader(f"no header line containing {_JOBS_MARKER!r}")


def _section_rows(lines: list[str], marker: str, error_cls) -> list[tuple[int, list[str]]]:
    """Rows of the table that follows the section line containing marker.

    Returns (1-based line number, tokens) pairs, ending at the next
    star-delimiter line. A table that runs into end-of-file (a truncated
    file) raises error_cls.
    """
    start = None
    for idx, line in enumerate(lines):
        if marker in line:
            start = idx + 1
            break
    if start is None:
        raise error_cls(f"section {marker!r} not found")
    # Skip the column-header line and any dashed rule under it.
    while start < len(lines) and (
        lines[start].lstrip().startswith(("jobnr", "-")) or not lines[start].strip()
    ):
        start += 1
    rows = []
    for idx in range(start, len(lines)):
        stripped = lines[idx].strip()
        if stripped.startswith("*"):
            return rows
        if not stripped:
            continue
        rows.append((idx + 1, stripped.split()))
    raise error_cls(f"section {marker!r} not terminated before end of file")


def _parse_precedence(lines: list[str], job_count: int) -> tuple[tuple[int, ...], ...]:
    successors: dict[int, tuple[int, ...]] = {}
    for lineno, tokens in _section_rows(lines, _PRECEDENCE_MARKER, MalformedPrecedenceRow):
        try:
            ints = [int(t) for t in tokens]
        except ValueError as exc:
            raise MalformedPrecedenceRow(
                f"line {lineno}: non-numeric token in precedence row"
            ) from exc
        if len(ints) < 3:
            raise MalformedPrecedenceRow(
                f"line {lineno}: expected jobnr, #modes, #successors"
            )
        job, _modes, n_succ = ints[0], ints[1], ints[2]
        succ = ints[3:]
        if n_succ < 0 or len(succ) != n_succ:
            raise MalformedPrecedenceRow(
                f"line {lineno}: row declares {n_succ} successors, lists {len(succ)}"
            )
        if not 1 <= job <= job_count:
            raise MalformedPrecedenceRow(
                f"line {lineno}: job number {job} outside 1..{job_count}"
            )
        if any(not 1 <= s <= job_count for s in succ):
            raise MalformedPrecedenceRow(
                f"line {lineno}: successor outside 1..{job_count}"
            )
        if job in successors:
            raise MalformedPrecedenceRow(f"line {lineno}: duplicate row for job {job}")
        successors[job] = tuple(succ)
    if set(successors) != set(range(1, job_count + 1)):
        raise JobCountMismatch(
            f"precedence table covers {len(successors)} jobs, header declares {job_count}"
        )
    return tuple(successors[j] for j in range(1, job_count + 1))


def _parse_durations(lines: list[str], job_count: int) -> tuple[int, ...]:
    durations: dict[int, int] = {}
    for lineno, tokens in _section_rows(lines, _DURATIONS_MARKER, MalformedDurationRow):
        try:
            ints = [int(t) for t in tokens]
        except ValueError as exc:
            raise MalformedDurationRow(
                f"line {lineno}: non-numeric token in duration row"
            ) from exc
        if len(ints) < 3:
            raise MalformedDurationRow(
                f"line {lineno}: expected jobnr, mode, duration"
            )
        job, _mode, duration = ints[0], ints[1], ints[2]
        if not 1 <= job <= job_count:
            raise MalformedDurationRow(
                f"line {lineno}: job number {job} outside 1..{job_count}"
            )
        if duration < 0:
            raise MalformedDurationRow(f"line {lineno}: negative duration {duration}")
        if job in durations:
            raise MalformedDurationRow(f"line {lineno}: duplicate row for job {job}")
        durations[job] = duration
    if set(durations) != set(range(1, job_count + 1)):
        raise JobCountMismatch(
            f"duration table covers {len(durations)} jobs, header declares {job_count}"
        )
    return tuple(durations[j] for j in range(1, job_count + 1))


def to_network(inst: PsplibInstance) -> tuple[ProjectNetwork, np.ndarray]:
    """Map 1-based jobs to 0-based activities; return network + baselines."""
    edges = [
        (job - 1, succ - 1)
        for job in range(1, inst.job_count + 1)
        for succ in inst.successors[job - 1]
    ]
    net = build_network(inst.job_count, edges)
    return net, np.asarray(inst.durations, dtype=np.float64)


def real_activity_count(inst: PsplibInstance) -> int:
    """Jobs excluding the dummy source and sink."""
    return max(inst.job_count - 2, 0)


def canonical_sm(inst: PsplibInstance) -> str:
    """Minimal .sm-format rendering of the parsed content.

    Contains exactly the sections parse_sm reads, so parsing the output
    reproduces job_count, durations, and successors.
    """
    bar = "*" * 72
    out = [
        bar,
        f"jobs (incl. supersource/sink ):  {inst.job_count}",
        bar,
        "PRECEDENCE RELATIONS:",
        "jobnr.    #modes  #successors   successors",
    ]
    for job in range(1, inst.job_count + 1):
        succ = inst.successors[job - 1]
        row = f"{job:4d} {1:9d} {len(succ):12d}"
        if succ:
            row += "   " + "  ".join(str(s) for s in succ)
        out.append(row)
    out += [
        bar,
        "REQUESTS/DURATIONS:",
        "jobnr. mode duration",
        "-" * 72,
    ]
    for job in range(1, inst.job_count + 1):
        out.append(f"{job:4d} {1:5d} {inst.durations[job - 1]:9d}")
    out.append(bar)
    return "\n".join(out) + "\n"
