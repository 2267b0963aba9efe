"""Plain-text formats: count tables, scans, master fractions, histograms, reports.

All writers are byte-deterministic: fixed column order, ``repr`` floats,
sorted JSON keys, trailing newline.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .estimators import ScanEntry
from .multilevel import BoxSchedule, SurvivalCounts
from .twolevel import TrialBatch

PUBLISHED_TABLES = {
    "1,1": "e11.tsv",
    "2,2": "e22.tsv",
    "1,1,1": "e111.tsv",
    "1,1,2": "e112.tsv",
    "1,1,1,1": "e1111.tsv",
    "1,1,1,2": "e1112.tsv",
    "1,1,1,1,1": "e11111.tsv",
}

# L_min used for each published estimate
PUBLISHED_KMIN_L = {
    "1,1": 1069,
    "2,2": 605,
    "1,1,1": 18575,
    "1,1,2": 1069,
    "1,1,1,1": 39813,
    "1,1,1,2": 27194,
    "1,1,1,1,1": 27194,
}


class FormatError(ValueError):
    pass


def format_counts_table(counts: SurvivalCounts) -> str:
    rows = ["L_k\tN_k"]
    rows += [f"{L}\t{n}" for L, n in zip(counts.levels, counts.n)]
    return "\n".join(rows) + "\n"


def ingest_counts_table(text: str, spec=None) -> SurvivalCounts:
    """Parse a two-column ``L_k<TAB>N_k`` table.

    Blank lines and ``#`` comments are skipped, as is a single non-numeric
    header line. Rows must have strictly increasing L and nonincreasing N.
    """
    levels: list[int] = []
    n: list[int] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"row {lineno}: expected two columns, got {len(fields)}")
        try:
            L, count = int(fields[0]), int(fields[1])
        except ValueError:
            if not levels and not seen_header:
                seen_header = True
                continue
            raise FormatError(f"row {lineno}: non-integer entry {line!r}") from None
        if L < 1 or count < 0:
            raise FormatError(f"row {lineno}: L must be positive and N non-negative")
        if levels and L <= levels[-1]:
            raise FormatError(f"row {lineno}: L={L} does not increase (previous {levels[-1]})")
        if n and count > n[-1]:
            raise FormatError(f"row {lineno}: N={count} increases (previous {n[-1]})")
        levels.append(L)
        n.append(count)
    if len(levels) < 2:
        raise FormatError("a counts table needs at least two data rows")
    return SurvivalCounts(tuple(n), BoxSchedule(tuple(levels)), spec)


def load_published_table(packets: str) -> SurvivalCounts:
    """One of the bundled published data tables, keyed like ``"1,1,2"``."""
    from .walkers import PacketSpec

    key = packets.replace(" ", "")
    try:
        name = PUBLISHED_TABLES[key]
    except KeyError:
        raise KeyError(f"no bundled table for ({key}); have {sorted(PUBLISHED_TABLES)}") from None
    text = resources.files("intersection_exponents").joinpath("data", name).read_text()
    return ingest_counts_table(text, PacketSpec.parse(key))


def format_scan(entries: Iterable[ScanEntry]) -> str:
    rows = ["kmin\tL_kmin\texponent\ttwo_sigma"]
    for e in entries:
        if e.exponent is None:
            rows.append(f"{e.kmin}\t{e.L_kmin}\tnan\tnan")
        else:
            rows.append(f"{e.kmin}\t{e.L_kmin}\t{e.exponent!r}\t{e.two_sigma!r}")
    return "\n".join(rows) + "\n"


def format_fractions(batch: TrialBatch) -> str:
    rows = ["master_index\tx\tm"]
    rows += [f"{i}\t{x}\t{batch.m}" for i, x in zip(batch.master_index.tolist(), batch.x.tolist())]
    return "\n".join(rows) + "\n"


def format_histogram(batch: TrialBatch, bins: int = 50) -> str:
    counts, edges = batch.histogram(bins)
    rows = ["bin_lo\tbin_hi\tcount"]
    rows += [f"{lo!r}\t{hi!r}\t{c}" for lo, hi, c in zip(edges[:-1].tolist(), edges[1:].tolist(),
                                                          counts.tolist())]
    return "\n".join(rows) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def emit_report(doc: dict, path=None, provenance: Optional[dict] = None) -> str:
    """Serialise a report. Non-deterministic provenance goes to a ``.meta.json`` sidecar."""
    text = dumps(doc)
    if path is not None:
        write_text(path, text)
        if provenance is not None:
            write_text(Path(str(path) + ".meta.json"), dumps(provenance))
    return text
