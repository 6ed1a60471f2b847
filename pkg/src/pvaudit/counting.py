"""Analysis search-space counting: how many test/model combinations a study allows."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .model import ParseError, SchemaError

COUNT_COLUMNS = ("ref", "author", "year", "outcomes", "causes", "covariates")
OUTPUT_COLUMNS = COUNT_COLUMNS + ("tests", "models", "space")

# 2**covariates must stay an exact integer; beyond 62 the doubled count would
# not even fit a signed 64-bit intermediate in downstream consumers.
MAX_COVARIATES = 62


@dataclass(frozen=True)
class SearchSpaceEntry:
    """Counts for one study: inputs plus the derived tests/models/space."""

    outcomes: int
    causes: int
    covariates: int
    tests: int
    models: int
    space: int
    ref_id: int | None = None
    author: str = ""
    year: int | None = None


class SpaceSummary(NamedTuple):
    median: float
    min: int
    max: int


def search_space(
    outcomes: int,
    causes: int,
    covariates: int,
    *,
    ref_id: int | None = None,
    author: str = "",
    year: int | None = None,
) -> SearchSpaceEntry:
    """tests = outcomes * causes, models = 2**covariates, space = tests * models.

    All exact integer arithmetic. Counts must be non-negative and covariates
    at most 62.
    """
    for name, value in (("outcomes", outcomes), ("causes", causes), ("covariates", covariates)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"{name} must be an integer, got {value!r}")
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")
    if covariates > MAX_COVARIATES:
        raise ValueError(
            f"covariates must be at most {MAX_COVARIATES}, got {covariates}"
        )
    tests = outcomes * causes
    models = 2 ** covariates
    return SearchSpaceEntry(
        outcomes=outcomes,
        causes=causes,
        covariates=covariates,
        tests=tests,
        models=models,
        space=tests * models,
        ref_id=ref_id,
        author=author,
        year=year,
    )


def summarize_spaces(entries: Iterable[SearchSpaceEntry]) -> SpaceSummary:
    """Median (midpoint for even counts), min, and max of the space column."""
    spaces = sorted(e.space for e in entries)
    if not spaces:
        raise ValueError("summary needs at least one entry")
    return SpaceSummary(
        median=statistics.median(spaces), min=spaces[0], max=spaces[-1]
    )


def parse_search_space_csv(text: str) -> list[SearchSpaceEntry]:
    """Parse a counting CSV with header ref,author,year,outcomes,causes,covariates."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise SchemaError("empty input: no header row", missing=COUNT_COLUMNS)
    header = [name.strip().lstrip("﻿") for name in reader.fieldnames]
    missing = tuple(c for c in COUNT_COLUMNS if c not in header)
    if missing:
        raise SchemaError(
            "missing required column(s): " + ", ".join(missing), missing=missing
        )
    entries = []
    for i, raw in enumerate(reader):
        fields = {k.strip().lstrip("﻿"): (v or "") for k, v in raw.items() if k}

        def grab(name: str) -> int:
            try:
                return int(fields[name].strip())
            except ValueError:
                raise ParseError(i, name, f"malformed integer {fields[name]!r}") from None

        def grab_optional(name: str) -> int | None:
            return None if not fields[name].strip() else grab(name)

        counts = {}
        for name in ("outcomes", "causes", "covariates"):
            counts[name] = grab(name)
            if counts[name] < 0:
                raise ParseError(i, name, f"must be non-negative, got {counts[name]}")
        if counts["covariates"] > MAX_COVARIATES:
            raise ParseError(
                i,
                "covariates",
                f"must be at most {MAX_COVARIATES}, got {counts['covariates']}",
            )
        entries.append(
            search_space(
                counts["outcomes"],
                counts["causes"],
                counts["covariates"],
                ref_id=grab_optional("ref"),
                author=fields["author"].strip(),
                year=grab_optional("year"),
            )
        )
    return entries


def serialize_search_space_csv(entries: Iterable[SearchSpaceEntry]) -> str:
    """Write entries back out with tests, models, and space columns appended."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OUTPUT_COLUMNS)
    for e in entries:
        writer.writerow(
            [
                "" if e.ref_id is None else e.ref_id,
                e.author,
                "" if e.year is None else e.year,
                e.outcomes,
                e.causes,
                e.covariates,
                e.tests,
                e.models,
                e.space,
            ]
        )
    return buf.getvalue()
