"""Command-line entry point: ``ixexp``.

Three schemes share one flag set:

    ixexp --scheme multilevel --packets 1,1 --lmax 2000 --samples 200000 --seed 7 --out run/
    ixexp --scheme twolevel --packets 2,2,2 --l1 10000 --l2 20000 --masters 16000 --out run/
    ixexp --scheme replay --published-table 1,1 --out replay/

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .estimators import EstimationError, kmin_scan, mle, regression_estimate
from .io import (PUBLISHED_KMIN_L, FormatError, emit_report, format_counts_table, format_fractions,
                 format_histogram, format_scan, ingest_counts_table, load_published_table, write_text)
from .lattice import SPARSE_THRESHOLD
from .multilevel import (DEFAULT_GROWTH, DEFAULT_MEMORY_BUDGET, CheckpointError,
                         ConfigurationError, SurvivalCounts, as_fraction, build_schedule,
                         run_campaign)
from .reference import reference_summary
from .rng import DIRECTION_RULES, parse_seed
from .twolevel import DEFAULT_BINS, DEFAULT_TRIALS, run_twolevel_campaign, two_level_estimate
from .walkers import PacketSpec

MEMORY_ENV = "IXEXP_MEMORY_BUDGET"
SCHEMES = ("multilevel", "twolevel", "replay")


class UsageError(Exception):
    pass


@dataclass
class CampaignConfig:
    scheme: str
    packets: Optional[PacketSpec] = None
    L0: int = 30
    Lmax: Optional[int] = None
    growth: Fraction = DEFAULT_GROWTH
    samples: Optional[int] = None
    L1: Optional[int] = None
    L2: Optional[int] = None
    trials: int = DEFAULT_TRIALS
    masters: Optional[int] = None
    bins: int = DEFAULT_BINS
    seed: int = 0
    workers: int = 1
    kmin: Optional[int] = None
    kmin_L: Optional[int] = None
    kmin_auto: bool = False
    counts_path: Optional[Path] = None
    published_table: Optional[str] = None
    out: Optional[Path] = None
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    sparse: bool = False
    checkpoint: Optional[Path] = None
    checkpoint_every: Optional[int] = None
    record_entry: bool = False
    direction_rule: str = "top"
    provenance: bool = True

    def describe(self) -> dict:
        d = asdict(self)
        d["packets"] = None if self.packets is None else list(self.packets.counts)
        d["growth"] = str(self.growth)
        for key in ("counts_path", "out", "checkpoint"):
            d[key] = None if d[key] is None else str(d[key])
        d.pop("provenance")
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ixexp", description="Multiple intersection exponents of planar random walks.")
    p.add_argument("--config", type=Path, help="JSON file of option values; flags override it")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--packets", help="packet sizes, e.g. 1,1,2")
    p.add_argument("--l0", type=int, help="scatter box half-length (default 30)")
    p.add_argument("--lmax", type=int, help="last box half-length (multilevel)")
    p.add_argument("--growth", help="box growth factor (default 1.1)")
    p.add_argument("--samples", type=int, help="sample count N (multilevel)")
    p.add_argument("--l1", type=int, help="master box half-length (twolevel)")
    p.add_argument("--l2", type=int, help="trial box half-length (twolevel)")
    p.add_argument("--trials", type=int, help="trials per master m (default 1000)")
    p.add_argument("--masters", type=int, help="number of master samples n (twolevel)")
    p.add_argument("--bins", type=int, help="histogram bins (default 50)")
    p.add_argument("--seed", help="base seed, decimal or 0x-hex")
    p.add_argument("--workers", type=int, help="worker threads")
    k = p.add_mutually_exclusive_group()
    k.add_argument("--kmin", help="first fitted level: an index, or 'auto'")
    k.add_argument("--kmin-l", type=int, dest="kmin_l", help="first fitted level as a box half-length")
    p.add_argument("--counts", type=Path, help="L_k/N_k table to replay")
    p.add_argument("--published-table", dest="published_table", help="replay a bundled published table, e.g. 1,1")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--memory-budget", type=int, dest="memory_budget",
                   help=f"bytes allowed for a dense grid (env {MEMORY_ENV})")
    p.add_argument("--sparse", action="store_true", default=None, help="force the sparse grid")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--record-entry", action="store_true", default=None, dest="record_entry",
                   help="also record each walker's entry cell at every level")
    p.add_argument("--direction-rule", choices=sorted(DIRECTION_RULES), dest="direction_rule")
    p.add_argument("--no-provenance", action="store_false", default=None, dest="provenance",
                   help="skip the .meta.json sidecar")
    return p


def _merge(args: argparse.Namespace) -> dict:
    values = {}
    if args.config is not None:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        known = set(vars(args)) - {"config"}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")
    for key, val in vars(args).items():
        if key != "config" and val is not None:
            values[key] = val
    return values


def _positive(name, value):
    if value is not None and value < 1:
        raise UsageError(f"--{name.replace('_', '-')} must be positive, got {value}")
    return value


def parse_config(argv=None) -> CampaignConfig:
    """Parse and validate flags (plus an optional JSON config file)."""
    v = _merge(build_parser().parse_args(argv))
    scheme = v.get("scheme")
    if scheme is None:
        raise UsageError("--scheme is required")
    if scheme not in SCHEMES:
        raise UsageError(f"--scheme must be one of {SCHEMES}, got {scheme!r}")
    cfg = CampaignConfig(scheme=scheme)

    if v.get("packets") is not None:
        try:
            cfg.packets = PacketSpec.parse(str(v["packets"]))
        except ValueError as exc:
            msg = str(exc)
            if "at least p=2" in msg:
                msg = f"--packets {v['packets']!r}: p >= 2 packets required"
            raise UsageError(msg) from None
    for key, attr in (("l0", "L0"), ("lmax", "Lmax"), ("samples", "samples"), ("l1", "L1"),
                      ("l2", "L2"), ("trials", "trials"), ("masters", "masters"), ("bins", "bins"),
                      ("workers", "workers"), ("checkpoint_every", "checkpoint_every")):
        if v.get(key) is not None:
            setattr(cfg, attr, _positive(key, int(v[key])))
    if v.get("growth") is not None:
        try:
            cfg.growth = as_fraction(str(v["growth"]))
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--growth must be a number, got {v['growth']!r}") from None
        if cfg.growth <= 1:
            raise UsageError(f"--growth must exceed 1, got {v['growth']}")
    if v.get("seed") is not None:
        try:
            cfg.seed = parse_seed(v["seed"])
        except ValueError as exc:
            raise UsageError(f"--seed: {exc}") from None

    kmin = v.get("kmin")
    if kmin is not None:
        if str(kmin) == "auto":
            cfg.kmin_auto = True
        else:
            try:
                cfg.kmin = int(kmin)
            except ValueError:
                raise UsageError(f"--kmin must be an index or 'auto', got {kmin!r}") from None
            if cfg.kmin < 0:
                raise UsageError(f"--kmin must be non-negative, got {kmin}")
    if v.get("kmin_l") is not None:
        cfg.kmin_L = _positive("kmin_l", int(v["kmin_l"]))

    for key in ("counts", "out", "checkpoint"):
        if v.get(key) is not None:
            setattr(cfg, "counts_path" if key == "counts" else key, Path(v[key]))
    cfg.published_table = v.get("published_table")
    cfg.sparse = bool(v.get("sparse") or False)
    cfg.record_entry = bool(v.get("record_entry") or False)
    cfg.direction_rule = v.get("direction_rule") or "top"
    if cfg.direction_rule not in DIRECTION_RULES:
        raise UsageError(f"--direction-rule must be one of {sorted(DIRECTION_RULES)}")
    if v.get("provenance") is not None:
        cfg.provenance = bool(v["provenance"])

    budget = v.get("memory_budget")
    if budget is None and os.environ.get(MEMORY_ENV):
        try:
            budget = int(os.environ[MEMORY_ENV])
        except ValueError:
            raise UsageError(f"{MEMORY_ENV} must be an integer byte count") from None
    if budget is not None:
        cfg.memory_budget = _positive("memory_budget", int(budget))

    _validate(cfg)
    return cfg


def _validate(cfg: CampaignConfig) -> None:
    if cfg.scheme == "replay":
        if (cfg.counts_path is None) == (cfg.published_table is None):
            raise UsageError("replay needs exactly one of --counts or --published-table")
        return
    if cfg.packets is None:
        raise UsageError(f"--packets is required for the {cfg.scheme} scheme")
    if cfg.L0 < 2:
        raise UsageError(f"--l0 must be at least 2, got {cfg.L0}")
    if cfg.scheme == "multilevel":
        if cfg.Lmax is None or cfg.samples is None:
            raise UsageError("multilevel needs --lmax and --samples")
        if cfg.Lmax <= cfg.L0:
            raise UsageError(f"--lmax ({cfg.Lmax}) must exceed --l0 ({cfg.L0})")
        big = cfg.Lmax > SPARSE_THRESHOLD and not cfg.sparse
        if big and (2 * cfg.Lmax + 1) ** 2 > cfg.memory_budget:
            raise UsageError(f"--lmax {cfg.Lmax} needs {(2 * cfg.Lmax + 1) ** 2} bytes of grid; "
                             "raise --memory-budget or pass --sparse")
    else:
        if cfg.L1 is None or cfg.L2 is None or cfg.masters is None:
            raise UsageError("twolevel needs --l1, --l2 and --masters")
        if not cfg.L0 < cfg.L1 < cfg.L2:
            raise UsageError(f"need l0 < l1 < l2, got {cfg.L0}, {cfg.L1}, {cfg.L2}")
        if cfg.checkpoint is not None:
            raise UsageError("checkpointing is only available for the multilevel scheme")


def auto_kmin(counts: SurvivalCounts) -> int:
    """Level closest (in log scale) to the geometric mean of the first and last box."""
    L = counts.levels
    target = 0.5 * (math.log(L[0]) + math.log(L[-1]))
    return min(range(len(L) - 1), key=lambda k: (abs(math.log(L[k]) - target), k))


def _kmin_for(cfg: CampaignConfig, counts: SurvivalCounts) -> int:
    if cfg.kmin is not None:
        if cfg.kmin >= len(counts.n) - 1:
            raise ConfigurationError(f"--kmin {cfg.kmin} is beyond the last usable level")
        return cfg.kmin
    if cfg.kmin_L is not None:
        return counts.schedule.index_of(cfg.kmin_L)
    if cfg.kmin_auto or cfg.published_table is None:
        return auto_kmin(counts)
    return counts.schedule.index_of(PUBLISHED_KMIN_L[cfg.published_table.replace(" ", "")])


def _git_describe() -> Optional[str]:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def _multilevel_doc(cfg, counts: SurvivalCounts) -> tuple[dict, dict]:
    """Report document and TSV outputs for a counts table."""
    kmin = _kmin_for(cfg, counts)
    files = {"counts.tsv": format_counts_table(counts)}
    scan = kmin_scan(counts)
    files["kmin_scan.tsv"] = format_scan(scan)
    doc = {
        "scheme": cfg.scheme,
        "config": cfg.describe(),
        "seed": counts.base_seed,
        "counts": {"L": list(counts.levels), "N": list(counts.n)},
        "kmin": kmin,
        "L_kmin": counts.levels[kmin],
    }
    try:
        doc["estimate"] = mle(counts, kmin).to_dict()
    except EstimationError as exc:
        doc["estimate"] = None
        doc["estimate_error"] = f"{type(exc).__name__}: {exc}"
    try:
        doc["regression"] = regression_estimate(counts, kmin).to_dict()
    except EstimationError as exc:
        doc["regression"] = None
    if counts.spec is not None:
        doc["packets"] = list(counts.spec.counts)
        doc["reference"] = reference_summary(counts.spec)
    return doc, files


def run(cfg: CampaignConfig) -> dict:
    started = time.time()
    t0 = time.perf_counter()
    if cfg.scheme == "replay":
        if cfg.published_table is not None:
            counts = load_published_table(cfg.published_table)
        else:
            try:
                text = Path(cfg.counts_path).read_text()
            except OSError as exc:
                raise FormatError(f"cannot read counts table: {exc}") from None
            counts = ingest_counts_table(text, cfg.packets)
        doc, files = _multilevel_doc(cfg, counts)
    elif cfg.scheme == "multilevel":
        schedule = build_schedule(cfg.L0, cfg.growth, cfg.Lmax)
        counts = run_campaign(cfg.packets, schedule, cfg.samples, cfg.seed, cfg.workers,
                              record_entry=cfg.record_entry, rule=cfg.direction_rule,
                              memory_budget=cfg.memory_budget, sparse=cfg.sparse,
                              checkpoint_path=cfg.checkpoint,
                              checkpoint_every=cfg.checkpoint_every)
        doc, files = _multilevel_doc(cfg, counts)
    else:
        batch = run_twolevel_campaign(cfg.packets, cfg.L0, cfg.L1, cfg.L2, cfg.masters, cfg.trials,
                                      cfg.seed, cfg.workers, record_entry=cfg.record_entry,
                                      rule=cfg.direction_rule, memory_budget=cfg.memory_budget,
                                      sparse=cfg.sparse)
        files = {"fractions.tsv": format_fractions(batch),
                 "histogram.tsv": format_histogram(batch, cfg.bins)}
        doc = {"scheme": cfg.scheme, "config": cfg.describe(), "seed": cfg.seed,
               "packets": list(cfg.packets.counts), "attempts": batch.attempts,
               "dead_attempts": batch.dead_attempts,
               "reference": reference_summary(cfg.packets)}
        try:
            rep = two_level_estimate(batch)
            doc["estimate"] = rep.to_dict()
        except EstimationError as exc:
            doc["estimate"] = None
            doc["estimate_error"] = f"{type(exc).__name__}: {exc}"
        doc["timing_note"] = "per-master and per-trial CPU times are in the .meta.json sidecar"
        doc_timing = batch.timing
    provenance = {
        "version": __version__,
        "git_describe": _git_describe(),
        "started_unix": started,
        "wall_seconds": time.perf_counter() - t0,
    }
    if cfg.scheme == "twolevel":
        provenance["timing"] = doc_timing
    if cfg.out is not None:
        for name, text in files.items():
            write_text(cfg.out / name, text)
        emit_report(doc, cfg.out / "report.json", provenance if cfg.provenance else None)
    return doc


def _summary(doc: dict) -> str:
    est = doc.get("estimate")
    if not est:
        return f"no estimate: {doc.get('estimate_error')}"
    lo, hi = est["ci95"]
    line = (f"{est['method']}: exponent {est['exponent_hat']:.6f} +- {2 * est['sigma_hat']:.6f} "
            f"(95% CI [{lo:.6f}, {hi:.6f}])")
    ref = (doc.get("reference") or {}).get("exact")
    if ref:
        line += f"; exact {ref['label']} = {ref['value']:.6f}"
    return line


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"ixexp: usage error: {exc}", file=sys.stderr)
        return 1
    try:
        doc = run(cfg)
    except ConfigurationError as exc:
        print(f"ixexp: usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, EstimationError, KeyError) as exc:
        print(f"ixexp: data error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, MemoryError, OSError, RuntimeError) as exc:
        print(f"ixexp: runtime error: {exc}", file=sys.stderr)
        return 3
    print(_summary(doc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
