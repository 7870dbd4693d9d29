"""
Instance files and report output.

Instances are YAML (JSON is accepted as well) documents of the form
``{alpha, m, jobs: [{id, release, deadline, workload, value}]}``. Parse and
validation errors are reported with the line of the offending node.
"""
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, ValidationError

from app.schemas.schemas import Instance, RunReport
from app.utils.errors import InstanceParseError

logger = logging.getLogger("profit_sched.utils.instance_io")

PathLike = Union[str, Path]

TRACE_HEADER = ("interval_index", "t_start", "t_end", "processor", "job_id", "speed")
IDLE = "IDLE"


def _node_line(root: Optional[yaml.Node], loc: Sequence) -> Optional[int]:
    """1-based line of the deepest node reachable along a pydantic error location."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            matches = [value for name, value in node.value if name.value == str(key)]
            if not matches:
                break
            node = matches[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        line = node.start_mark.line + 1
    return line


def parse_instance(text: str) -> Instance:
    """
    Parse and validate an instance document.

    Raises:
        InstanceParseError: malformed YAML or an invalid field, with its line
    """
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise InstanceParseError(str(getattr(e, "problem", None) or e), mark.line + 1 if mark else None)

    if not isinstance(data, dict):
        raise InstanceParseError("instance must be a mapping with alpha, m and jobs", 1)

    try:
        return Instance.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise InstanceParseError(f"{location}: {error['msg']}", _node_line(root, error["loc"]))


def load_instance(path: PathLike) -> Instance:
    """Read an instance file; see ``parse_instance``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InstanceParseError(f"cannot read {path}: {e.strerror}")
    instance = parse_instance(text)
    logger.debug(f"Loaded {len(instance.jobs)} jobs from {path}")
    return instance


def dump_instance(instance: Instance) -> str:
    """YAML text of an instance; jobs keep their order."""
    return yaml.safe_dump(instance.model_dump(), sort_keys=False)


def instance_digest(instance: Instance) -> str:
    """SHA-256 of the canonical JSON form of the instance."""
    canonical = json.dumps(instance.model_dump(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_atomic(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def report_json(report: BaseModel) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def write_report(report: BaseModel, path: PathLike) -> Path:
    """Write a report as sorted JSON; the file appears only once complete."""
    written = write_atomic(path, report_json(report))
    logger.info(f"Report written to {written}")
    return written


def trace_rows(report: RunReport) -> List[tuple]:
    """One row per processor segment, idle time included."""
    rows = []
    for interval in report.intervals:
        for processor in interval.processors:
            for segment in processor.segments:
                rows.append((
                    interval.index,
                    segment.start,
                    segment.end,
                    processor.processor,
                    segment.job_id if segment.job_id is not None else IDLE,
                    processor.speed if segment.job_id is not None else 0.0,
                ))
    return rows


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_trace(report: RunReport, path: PathLike) -> Path:
    """Export the schedule as CSV rows for external plotting."""
    written = write_atomic(path, _csv_text(TRACE_HEADER, trace_rows(report)))
    logger.info(f"Trace written to {written}")
    return written


def write_table(header: Sequence[str], rows: Iterable[Sequence], path: PathLike) -> Path:
    written = write_atomic(path, _csv_text(header, rows))
    logger.info(f"Table written to {written}")
    return written


def table_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    return _csv_text(header, rows)
