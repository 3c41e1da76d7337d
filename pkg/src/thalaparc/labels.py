"""Nucleus label schema: the thirteen scoreable codes plus the Conflicted marker.

``NUCLEI`` is the canonical schema order used for vote tie-breaking and
serialization. Report tables use ``REPORT_COLUMNS``, which swaps VLP ahead of
VLa to match the published column layout.
"""

from __future__ import annotations

from .errors import DataValidationError

NUCLEI: tuple[str, ...] = (
    "AN", "CL", "CM", "LD", "LP", "MD", "PuA",
    "PuI", "VA", "VLa", "VLP", "VPL", "VPM",
)

CONFLICTED = "Conflicted"

ALL_CODES: tuple[str, ...] = NUCLEI + (CONFLICTED,)

# Published tables order VLP before VLa.
REPORT_COLUMNS: tuple[str, ...] = (
    "AN", "CL", "CM", "LD", "LP", "MD", "PuA",
    "PuI", "VA", "VLP", "VLa", "VPL", "VPM",
)

NUCLEUS_INDEX: dict[str, int] = {code: i for i, code in enumerate(NUCLEI)}

LABEL_SEPARATOR = ";"


def parse_label_cell(cell: str) -> tuple[str, ...]:
    """Parse a semicolon-separated label cell into a canonically ordered tuple.

    Empty cells yield an empty tuple (an unlabeled voxel). Unknown codes raise
    :class:`DataValidationError`.
    """
    parts = [p.strip() for p in cell.split(LABEL_SEPARATOR) if p.strip()]
    for p in parts:
        if p not in ALL_CODES:
            raise DataValidationError(f"unknown label code {p!r}")
    unique = set(parts)
    ordered = [c for c in NUCLEI if c in unique]
    if CONFLICTED in unique:
        ordered.append(CONFLICTED)
    return tuple(ordered)


def format_label_set(labels: tuple[str, ...]) -> str:
    return LABEL_SEPARATOR.join(labels)
