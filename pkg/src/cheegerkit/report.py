"""Structured-text reports: a stable, machine-readable key = value format.

Every command serializes its outputs through this module so that runs are
reproducible byte-for-byte: fixed key order per schema, floats written with
repr (shortest exact round trip), no timestamps unless explicitly requested
by the caller.  Lines starting with '#' are comments; geometry keys carry a
geom_ prefix so downstream consumers can check that two reports describe
the same object before comparing their numbers.
"""

from __future__ import annotations

import numbers
import re
from dataclasses import dataclass

from .errors import ConfigurationError

__all__ = [
    "ReportData",
    "format_value",
    "render_report",
    "write_report",
    "read_report",
    "geometry_echo",
    "require_matching_geometry",
]

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def format_value(value) -> str:
    """Canonical text form of a report value.

    Floats use repr (deterministic shortest representation); sequences are
    space-joined element-wise; booleans are lowercase.  Numpy scalars
    collapse to the matching builtin so reprs stay stable across numpy
    versions.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)) or (
        hasattr(value, "ndim") and getattr(value, "ndim") == 1
    ):
        return " ".join(format_value(v) for v in value)
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        raise ConfigurationError(
            f"cannot serialize report value of type {type(value).__name__}"
        )


def render_report(schema: str, items) -> str:
    """Render an ordered sequence of (key, value) pairs as report text."""
    seen = set()
    lines = ["# cheegerkit report", f"schema = {schema}"]
    for key, value in items:
        if not _KEY_RE.match(key):
            raise ConfigurationError(f"invalid report key {key!r}")
        if key in seen or key == "schema":
            raise ConfigurationError(f"duplicate report key {key!r}")
        seen.add(key)
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def write_report(path, schema: str, items) -> str:
    """Render and write a report; returns the rendered text."""
    text = render_report(schema, items)
    with open(path, "w") as fh:
        fh.write(text)
    return text


@dataclass(frozen=True)
class ReportData:
    """Parsed report: schema tag plus ordered key/value strings."""

    schema: str
    values: dict
    order: tuple

    def get(self, key: str, default=None) -> str:
        return self.values.get(key, default)

    def get_float(self, key: str) -> float:
        if key not in self.values:
            raise ConfigurationError(f"report is missing key {key!r}")
        return float(self.values[key])


def read_report(path) -> ReportData:
    """Parse a report file written by write_report."""
    values = {}
    order = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigurationError(
                    f"malformed report line {raw.strip()!r} in {path}"
                )
            key = key.strip()
            val = val.strip()
            if key in values:
                raise ConfigurationError(f"duplicate key {key!r} in {path}")
            values[key] = val
            order.append(key)
    if "schema" not in values:
        raise ConfigurationError(f"{path} has no schema line; not a report file")
    schema = values.pop("schema")
    order.remove("schema")
    return ReportData(schema=schema, values=values, order=tuple(order))


def geometry_echo(report: ReportData) -> dict:
    """The geom_-prefixed keys of a report, in order."""
    return {k: report.values[k] for k in report.order if k.startswith("geom_")}


def require_matching_geometry(a: ReportData, b: ReportData, label: str) -> None:
    """Refuse to combine reports whose geometry echoes disagree.

    Both reports must carry geom_ keys, and every key present in both must
    match exactly (values compare as canonical strings).
    """
    ga, gb = geometry_echo(a), geometry_echo(b)
    if not ga or not gb:
        raise ConfigurationError(
            f"cannot compare with {label}: a report has no geometry echo"
        )
    common = [k for k in ga if k in gb]
    if not common:
        raise ConfigurationError(
            f"cannot compare with {label}: no geometry keys in common"
        )
    for k in common:
        if ga[k] != gb[k]:
            raise ConfigurationError(
                f"geometry mismatch with {label}: {k} = {ga[k]} vs {gb[k]}"
            )
