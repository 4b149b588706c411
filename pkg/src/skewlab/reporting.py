"""Deterministic text reports and delimited data files.

Reports are plain-text key/value sections with stable key order; floats are
written with round-trip precision so identical runs produce byte-identical
files.  CSV output uses 17-significant-digit floats for the same reason.
"""

from __future__ import annotations

import csv
import os


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(format_value(x) for x in v) + ")"
    if hasattr(v, "item") and not hasattr(v, "__len__"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def provenance(subcommand=None, input_path=None, depth=None, tol=None,
               seed=None, grid=None, iters=None, variant=None) -> dict:
    """The reproducibility block every report embeds, fixed key order."""
    block = {}
    for key, val in (("subcommand", subcommand), ("input", input_path),
                     ("depth", depth), ("tol", tol), ("seed", seed),
                     ("grid", grid), ("iters", iters), ("variant", variant)):
        if val is not None:
            block[key] = val
    return block


def render_report(title: str, sections) -> str:
    """sections: iterable of (section_name, dict-of-entries)."""
    lines = [f"# {title}"]
    if isinstance(sections, dict):
        sections = sections.items()
    for name, entries in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key, val in entries.items():
            lines.append(f"{key} = {format_value(val)}")
    return "\n".join(lines) + "\n"


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if hasattr(v, "item") and not hasattr(v, "__len__"):
        return _cell(v.item())
    return str(v)


def write_csv(path: str, header, rows) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path
