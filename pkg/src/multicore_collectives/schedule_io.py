"""Line-oriented schedule files and the flat validation-report format.

Schedule file::

    # comment
    round
    xfer 0,0 -> 1,0 [root]
    asm 1,1 d1.1
    write 0,0 [d0.1, d1.0]

Process refs may also be written in angle brackets (``<0,0>``).
"""

from __future__ import annotations

import re

from .model import (
    ROOT,
    Action,
    Assemble,
    Datum,
    ExternalTransfer,
    LocalWrite,
    RoundSchedule,
    Schedule,
    ValidationReport,
)
from .topology import ProcessRef


class ScheduleSyntaxError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.line = lineno


_PROC = r"<?\s*(\d+)\s*,\s*(\d+)\s*>?"
_XFER_RE = re.compile(rf"^xfer\s+{_PROC}\s*->\s*{_PROC}\s*\[(.*)\]$")
_ASM_RE = re.compile(rf"^asm\s+{_PROC}\s+(\S+)$")
_WRITE_RE = re.compile(rf"^write\s+{_PROC}\s*\[(.*)\]$")
_DATUM_RE = re.compile(r"^d(\d+)\.(\d+)$")


def parse_datum(text: str) -> Datum:
    text = text.strip()
    if text == "root":
        return ROOT
    m = _DATUM_RE.match(text)
    if not m:
        raise ValueError(f"bad datum {text!r} (expected 'root' or 'd<m>.<i>')")
    return Datum(int(m[1]), int(m[2]))


def _datum_list(text: str) -> frozenset[Datum]:
    items = [x for x in text.split(",") if x.strip()]
    return frozenset(parse_datum(x) for x in items)


def parse_schedule(text: str) -> Schedule:
    rounds: list[list[Action]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "round":
            rounds.append([])
            continue
        if not rounds:
            raise ScheduleSyntaxError(lineno, "action before the first 'round'")
        try:
            if m := _XFER_RE.match(line):
                action: Action = ExternalTransfer(
                    ProcessRef(int(m[1]), int(m[2])), ProcessRef(int(m[3]), int(m[4])), _datum_list(m[5])
                )
            elif m := _ASM_RE.match(line):
                action = Assemble(ProcessRef(int(m[1]), int(m[2])), parse_datum(m[3]))
            elif m := _WRITE_RE.match(line):
                action = LocalWrite(ProcessRef(int(m[1]), int(m[2])), _datum_list(m[3]))
            else:
                raise ValueError(f"syntax error: {raw.strip()!r}")
        except ValueError as err:
            raise ScheduleSyntaxError(lineno, str(err)) from None
        rounds[-1].append(action)
    return Schedule(tuple(RoundSchedule(tuple(r)) for r in rounds))


def _fmt_data(payload: frozenset[Datum]) -> str:
    return "[" + ",".join(str(d) for d in sorted(payload)) + "]"


def format_action(a: Action) -> str:
    if isinstance(a, ExternalTransfer):
        return f"xfer {a.sender} -> {a.receiver} {_fmt_data(a.payload)}"
    if isinstance(a, Assemble):
        return f"asm {a.process} {a.datum}"
    return f"write {a.writer} {_fmt_data(a.payload)}"


def serialize_schedule(s: Schedule) -> str:
    lines: list[str] = []
    for rnd in s.rounds:
        lines.append("round")
        lines.extend(format_action(a) for a in rnd.actions)
    return "\n".join(lines) + ("\n" if lines else "")


def format_report(report: ValidationReport) -> str:
    """Flat key=value block, then one ``violation`` line per violation."""
    util = ",".join(f"{m}:{u:.3f}" for m, u in sorted(report.max_nic_utilization.items()))
    lines = [
        f"valid={str(report.valid).lower()}",
        f"completed={str(report.completed).lower()}",
        f"rounds_used={report.rounds_used}",
        f"external_messages={report.external_messages}",
        f"max_nic_utilization={util}",
        f"violations={len(report.violations)}",
    ]
    lines += [f"violation round={v.round} {v.description}" for v in report.violations]
    return "\n".join(lines) + "\n"
