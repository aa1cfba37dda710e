"""Event-log analytics: gap times, per-client generations, run durations,
evaluation time series, and the speedup computation.

All analyses are pure functions of the record list; identical inputs produce
byte-identical CSV output. Quartiles use the nearest-rank convention
(rank = ceil(q*n) into the sorted data, no interpolation), which matches the
integer-valued medians these logs are reported with.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .server import EventRecord

GAP_MAX_SECONDS = 100
GENERATIONS_DISPLAY_CAP = 400


@dataclass
class LoadedEvents:
    records: list[EventRecord]
    skipped: int


def load_events(source: str | Path | Iterable[str]) -> LoadedEvents:
    """Parse a JSONL event log; malformed lines are counted and skipped.

    Records come back sorted by timestamp (stable, so same-second records
    keep file order).
    """
    if isinstance(source, (str, Path)):
        try:
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ValueError(f"cannot read event log {source}: {exc}") from None
    else:
        lines = source

    records = []
    skipped = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            records.append(EventRecord.from_obj(obj))
        except (ValueError, KeyError, TypeError):
            skipped += 1
    records.sort(key=lambda r: r.timestamp)
    return LoadedEvents(records=records, skipped=skipped)


def quantile_nearest_rank(values, q: float):
    """Smallest element whose rank is >= q*n (rank = ceil(q*n), 1-based)."""
    if not values:
        raise ValueError("quantile of empty data")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    data = sorted(values)
    rank = max(1, math.ceil(q * len(data)))
    return data[rank - 1]


@dataclass
class GapSample:
    client_id: str
    gap_seconds: int


def gap_samples(records: list[EventRecord]) -> tuple[list[GapSample], int]:
    """Per-client consecutive-timestamp differences, filtered to [0, 100].

    Differences are taken in the given record order per (experiment, client);
    out-of-range gaps (negative, or > 100 s) are dropped and counted.
    """
    last_seen: dict[tuple[int, str], int] = {}
    samples = []
    dropped = 0
    for rec in records:
        key = (rec.experiment_id, rec.client_id)
        if key in last_seen:
            gap = rec.timestamp - last_seen[key]
            if 0 <= gap <= GAP_MAX_SECONDS:
                samples.append(GapSample(rec.client_id, gap))
            else:
                dropped += 1
        last_seen[key] = rec.timestamp
    return samples, dropped


@dataclass
class GapStats:
    histogram: dict[int, int]
    samples: int
    dropped: int
    mean: float | None
    q1: int | None
    median: int | None
    q3: int | None


def gap_distribution(records: list[EventRecord]) -> GapStats:
    samples, dropped = gap_samples(records)
    gaps = [s.gap_seconds for s in samples]
    histogram: dict[int, int] = {}
    for g in gaps:
        histogram[g] = histogram.get(g, 0) + 1
    if gaps:
        return GapStats(
            histogram=histogram,
            samples=len(gaps),
            dropped=dropped,
            mean=sum(gaps) / len(gaps),
            q1=quantile_nearest_rank(gaps, 0.25),
            median=quantile_nearest_rank(gaps, 0.5),
            q3=quantile_nearest_rank(gaps, 0.75),
        )
    return GapStats(histogram={}, samples=0, dropped=dropped, mean=None, q1=None, median=None, q3=None)


@dataclass
class GenerationStats:
    per_client: dict[str, int]
    histogram: dict[int, int]  # display histogram, values above the cap dropped
    display_cap: int
    capped_out: int
    q1: int | None
    median: int | None
    q3: int | None


def generations_per_client(
    records: list[EventRecord], display_cap: int = GENERATIONS_DISPLAY_CAP
) -> GenerationStats:
    """Total generations granted per client_id (summed across experiments).

    The display histogram drops totals above display_cap; quartiles are
    computed on the uncapped totals. Records with unknown grants (< 0, e.g.
    from the Apache compatibility parser) are ignored.
    """
    per_client: dict[str, int] = {}
    for rec in records:
        if rec.generations_granted < 0:
            continue
        per_client[rec.client_id] = per_client.get(rec.client_id, 0) + rec.generations_granted
    totals = list(per_client.values())
    histogram: dict[int, int] = {}
    capped_out = 0
    for t in totals:
        if t > display_cap:
            capped_out += 1
            continue
        histogram[t] = histogram.get(t, 0) + 1
    if totals:
        return GenerationStats(
            per_client=per_client,
            histogram=histogram,
            display_cap=display_cap,
            capped_out=capped_out,
            q1=quantile_nearest_rank(totals, 0.25),
            median=quantile_nearest_rank(totals, 0.5),
            q3=quantile_nearest_rank(totals, 0.75),
        )
    return GenerationStats(per_client={}, histogram={}, display_cap=display_cap,
                           capped_out=0, q1=None, median=None, q3=None)


@dataclass
class DurationStats:
    durations: dict[int, int]  # experiment_id -> seconds, completed only
    incomplete: int
    minimum: int | None
    q1: int | None
    median: int | None
    q3: int | None
    mean: float | None


def run_durations(records: list[EventRecord]) -> DurationStats:
    """First report to budget-reaching report, per completed experiment.

    An experiment counts as completed when it contains a report granted 0
    further generations (the reply rule at budget exhaustion); experiments
    without one are excluded and counted as incomplete.
    """
    first_ts: dict[int, int] = {}
    finish_ts: dict[int, int] = {}
    for rec in records:
        if rec.generations_granted < 0:
            continue
        exp = rec.experiment_id
        if exp not in first_ts:
            first_ts[exp] = rec.timestamp
        if rec.generations_granted == 0 and exp not in finish_ts:
            finish_ts[exp] = rec.timestamp
    durations = {exp: finish_ts[exp] - first_ts[exp] for exp in sorted(finish_ts)}
    incomplete = len(first_ts) - len(finish_ts)
    values = list(durations.values())
    if values:
        return DurationStats(
            durations=durations,
            incomplete=incomplete,
            minimum=min(values),
            q1=quantile_nearest_rank(values, 0.25),
            median=quantile_nearest_rank(values, 0.5),
            q3=quantile_nearest_rank(values, 0.75),
            mean=sum(values) / len(values),
        )
    return DurationStats(durations={}, incomplete=incomplete, minimum=None,
                         q1=None, median=None, q3=None, mean=None)


def speedup(
    avg_segment_seconds: float, segments_per_experiment: float, observed_duration: float
) -> float:
    """Estimated single-machine time over observed duration."""
    if avg_segment_seconds <= 0 or segments_per_experiment <= 0 or observed_duration <= 0:
        raise ValueError("speedup inputs must all be positive")
    return (avg_segment_seconds * segments_per_experiment) / observed_duration


def evaluations_series(records: list[EventRecord]) -> dict[int, list[tuple[int, int]]]:
    """Cumulative evaluations vs seconds since each experiment's first report."""
    series: dict[int, list[tuple[int, int]]] = {}
    first_ts: dict[int, int] = {}
    for rec in records:
        if rec.generations_granted < 0:
            continue
        exp = rec.experiment_id
        if exp not in first_ts:
            first_ts[exp] = rec.timestamp
            series[exp] = []
        series[exp].append((rec.timestamp - first_ts[exp], rec.evaluations_total_after))
    return series


# -- CSV emission ----------------------------------------------------------------


def write_gaps_csv(stats: GapStats, path: str | Path) -> None:
    lines = ["gap_seconds,count"]
    for gap in sorted(stats.histogram):
        lines.append(f"{gap},{stats.histogram[gap]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_generations_csv(stats: GenerationStats, per_client_path, histogram_path) -> None:
    lines = ["client_id,total_generations"]
    for client_id in sorted(stats.per_client):
        lines.append(f"{client_id},{stats.per_client[client_id]}")
    Path(per_client_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["total_generations,count"]
    for total in sorted(stats.histogram):
        lines.append(f"{total},{stats.histogram[total]}")
    Path(histogram_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_durations_csv(stats: DurationStats, path: str | Path) -> None:
    lines = ["experiment_id,duration_seconds"]
    for exp in sorted(stats.durations):
        lines.append(f"{exp},{stats.durations[exp]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_series_csv(series: dict[int, list[tuple[int, int]]], path: str | Path) -> None:
    lines = ["experiment_id,elapsed_seconds,evaluations_total"]
    for exp in sorted(series):
        for elapsed, total in series[exp]:
            lines.append(f"{exp},{elapsed},{total}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def summarize(loaded: LoadedEvents) -> dict:
    """Headline stats as one JSON-ready object."""
    records = loaded.records
    gaps = gap_distribution(records)
    gens = generations_per_client(records)
    durs = run_durations(records)
    experiments = sorted({r.experiment_id for r in records})
    return {
        "events": len(records),
        "skipped_lines": loaded.skipped,
        "experiments": len(experiments),
        "completed_experiments": len(durs.durations),
        "incomplete_experiments": durs.incomplete,
        "distinct_clients": len({r.client_id for r in records}),
        "gap": {
            "samples": gaps.samples,
            "dropped": gaps.dropped,
            "mean": gaps.mean,
            "q1": gaps.q1,
            "median": gaps.median,
            "q3": gaps.q3,
        },
        "generations_per_client": {
            "clients": len(gens.per_client),
            "q1": gens.q1,
            "median": gens.median,
            "q3": gens.q3,
        },
        "run_durations": {
            "min": durs.minimum,
            "q1": durs.q1,
            "median": durs.median,
            "q3": durs.q3,
            "mean": durs.mean,
        },
    }


# -- Apache combined-log compatibility ---------------------------------------------

_APACHE_LINE = re.compile(
    r'^(?P<host>\S+) \S+ \S+ \[(?P<time>[^\]]+)\] "(?P<method>\S+) (?P<path>\S+)[^"]*" '
    r"(?P<status>\d{3}) \S+"
)


def parse_apache_log(
    lines: Iterable[str], path_prefix: str = "/api/migration"
) -> LoadedEvents:
    """Best-effort gap-analysis records from an Apache combined/common log.

    Only the timestamp and client identity (remote host) are recoverable;
    generations_granted is set to -1 so every analysis except the gap
    distribution ignores these records.
    """
    records = []
    skipped = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        match = _APACHE_LINE.match(line)
        if match is None:
            skipped += 1
            continue
        if not match.group("path").startswith(path_prefix):
            continue
        if match.group("status") != "200":
            continue
        try:
            stamp = datetime.strptime(match.group("time"), "%d/%b/%Y:%H:%M:%S %z")
        except ValueError:
            skipped += 1
            continue
        records.append(
            EventRecord(
                timestamp=int(stamp.timestamp()),
                experiment_id=0,
                client_id=match.group("host"),
                segment_index=0,
                best_fitness=0.0,
                evaluations_total_after=0,
                generations_granted=-1,
            )
        )
    records.sort(key=lambda r: r.timestamp)
    return LoadedEvents(records=records, skipped=skipped)
