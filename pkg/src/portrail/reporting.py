"""KPI computation over run traces, and the exported report/trace formats.

Reports are pure functions of an immutable :class:`EventTrace`. Per-day
figures exclude a warm-up window (default 7 simulated days) so the empty
system at run start does not bias steady-state averages. Exports are
byte-stable for fixed inputs: JSON with sorted keys, CSV with a fixed header.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .engine import EventKind, TraceEvent
from .errors import ScenarioError

SINGLE_TRACK_DAILY_TRIP_CAP = 36

TRACE_CSV_HEADER = ("time_min", "train_id", "event", "location")


@dataclass(frozen=True)
class EventTrace:
    """Time-ordered record of every train movement and servicing milestone."""

    events: tuple[TraceEvent, ...]
    run_metadata: dict

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class VisitWindow:
    train: str
    terminal: str
    call_up: float
    lift_start: float | None = None
    lift_complete: float | None = None
    exit_complete: float | None = None


def visit_windows(trace: EventTrace) -> list[VisitWindow]:
    """Reconstruct terminal servicing windows from the trace milestones."""
    open_visits: dict[str, VisitWindow] = {}
    visits: list[VisitWindow] = []
    for ev in trace.events:
        if ev.kind == EventKind.CALL_UP.value:
            visit = VisitWindow(train=ev.train, terminal=ev.location, call_up=ev.time)
            open_visits[ev.train] = visit
            visits.append(visit)
        elif ev.kind == EventKind.LIFT_START.value:
            if ev.train in open_visits:
                open_visits[ev.train].lift_start = ev.time
        elif ev.kind == EventKind.LIFT_COMPLETE.value:
            if ev.train in open_visits:
                open_visits[ev.train].lift_complete = ev.time
        elif ev.kind == EventKind.EXIT_COMPLETE.value:
            if ev.train in open_visits:
                open_visits[ev.train].exit_complete = ev.time
                del open_visits[ev.train]
    return visits


def completion_times(trace: EventTrace) -> dict[str, float]:
    """Time each train finished all servicing (last terminal exit)."""
    exits: dict[str, list[float]] = {}
    for ev in trace.events:
        if ev.kind == EventKind.EXIT_COMPLETE.value:
            exits.setdefault(ev.train, []).append(ev.time)
    trains_meta = trace.run_metadata.get("trains", {})
    completed = {}
    for train_id, times in exits.items():
        itinerary = trains_meta.get(train_id, {}).get("itinerary", [])
        if itinerary and len(times) == len(itinerary):
            completed[train_id] = times[-1]
    return completed


def _window(trace: EventTrace) -> tuple[float, float, float]:
    horizon_days = trace.run_metadata["horizon_days"]
    warmup_days = trace.run_metadata.get("warmup_days", 0)
    start = warmup_days * 1440.0
    end = horizon_days * 1440.0
    days = horizon_days - warmup_days
    if days <= 0:
        raise ScenarioError("report window is empty: warmup_days >= horizon_days")
    return start, end, float(days)


def annual_teu(trace: EventTrace) -> float:
    """Actual import+export TEU of serviced trains, scaled to 365 days."""
    start, end, days = _window(trace)
    trains_meta = trace.run_metadata.get("trains", {})
    total = 0
    for train_id, done in completion_times(trace).items():
        if start <= done <= end:
            row = trains_meta[train_id]
            total += row["actual_import_teu"] + row["actual_export_teu"]
    return total * 365.0 / days


def trains_per_day(trace: EventTrace) -> float:
    start, end, days = _window(trace)
    count = sum(1 for done in completion_times(trace).values() if start <= done <= end)
    return count / days


def time_split(trace: EventTrace) -> tuple[float, float]:
    """(pct_lifting, pct_shunting) of terminal servicing time, in percent.

    Lifting is the time between lift start and lift completion; shunting is
    all remaining servicing time (shunt moves, splitting overhead and any
    placement delay), so the two always sum to 100% of servicing.
    """
    start, end, _ = _window(trace)
    lifting = 0.0
    servicing = 0.0
    for visit in visit_windows(trace):
        if visit.exit_complete is None or not start <= visit.exit_complete <= end:
            continue
        servicing += visit.exit_complete - visit.call_up
        if visit.lift_start is not None and visit.lift_complete is not None:
            lifting += visit.lift_complete - visit.lift_start
    if servicing == 0.0:
        return 0.0, 0.0
    pct_lifting = 100.0 * lifting / servicing
    return pct_lifting, 100.0 - pct_lifting


def terminal_utilisation(trace: EventTrace) -> dict[str, float]:
    """Fraction of the post-warmup horizon each terminal spent servicing."""
    start, end, _ = _window(trace)
    busy: dict[str, float] = {}
    for visit in visit_windows(trace):
        visit_end = visit.exit_complete if visit.exit_complete is not None else end
        overlap = min(visit_end, end) - max(visit.call_up, start)
        if overlap > 0:
            busy[visit.terminal] = busy.get(visit.terminal, 0.0) + overlap
    window = end - start
    terminals = _terminal_names(trace)
    util = {}
    for name in terminals:
        spec_capacity = trace.run_metadata.get("resources", {}).get(name, 1)
        util[name] = busy.get(name, 0.0) / (window * spec_capacity)
    return util


def _terminal_names(trace: EventTrace) -> list[str]:
    names: list[str] = []
    for ev in trace.events:
        if ev.kind == EventKind.CALL_UP.value and ev.location not in names:
            names.append(ev.location)
    for train_row in trace.run_metadata.get("trains", {}).values():
        for name in train_row.get("itinerary", []):
            if name not in names:
                names.append(name)
    return sorted(names)


def single_line_trips_per_day(trace: EventTrace) -> tuple[float, int]:
    """(mean, peak) daily return trips over the single-track section.

    Each train crossing twice (in and out) is one return trip, so daily
    grants / 2 is the day's return-trip count.
    """
    start, end, days = _window(trace)
    per_day = [0] * int(days)
    for ev in trace.events:
        if ev.kind == EventKind.RESOURCE_GRANT.value and ev.location == "SingleTrack":
            if start <= ev.time < end:
                per_day[int((ev.time - start) // 1440.0)] += 1
    trips = [count / 2.0 for count in per_day]
    if not trips:
        return 0.0, 0
    return sum(trips) / len(trips), int(max(trips))


def single_line_utilisation(trace: EventTrace) -> float:
    """Mean daily return trips divided by the 36-return-trip daily cap."""
    mean_trips, _ = single_line_trips_per_day(trace)
    return utilisation_of_trip_cap(mean_trips)


def utilisation_of_trip_cap(trips_per_day: float,
                            cap: int = SINGLE_TRACK_DAILY_TRIP_CAP) -> float:
    return trips_per_day / cap


def queue_stats(trace: EventTrace) -> dict[str, dict]:
    """Time-weighted occupancy summaries per resource, over the full horizon."""
    horizon = trace.run_metadata["horizon_days"] * 1440.0
    state: dict[str, tuple[int, float, float, int, int]] = {}
    # per resource: (occupancy, last_time, weighted_sum, max_occ, grants)
    for ev in trace.events:
        if ev.kind == EventKind.RESOURCE_GRANT.value:
            delta = 1
        elif ev.kind == EventKind.RESOURCE_RELEASE.value:
            delta = -1
        else:
            continue
        occ, last, acc, peak, grants = state.get(ev.location, (0, 0.0, 0.0, 0, 0))
        acc += occ * (ev.time - last)
        occ += delta
        peak = max(peak, occ)
        grants += 1 if delta == 1 else 0
        state[ev.location] = (occ, ev.time, acc, peak, grants)
    stats = {}
    for name in sorted(state):
        occ, last, acc, peak, grants = state[name]
        acc += occ * (horizon - last)
        stats[name] = {
            "mean_occupancy": acc / horizon if horizon > 0 else 0.0,
            "max_occupancy": peak,
            "grants": grants,
        }
    return stats


def reconstruct_occupancy(trace: EventTrace) -> dict[str, list[tuple[float, int]]]:
    """Occupancy step series per resource, for cross-checking engine counters."""
    series: dict[str, list[tuple[float, int]]] = {}
    counts: dict[str, int] = {}
    for ev in trace.events:
        if ev.kind == EventKind.RESOURCE_GRANT.value:
            counts[ev.location] = counts.get(ev.location, 0) + 1
        elif ev.kind == EventKind.RESOURCE_RELEASE.value:
            counts[ev.location] = counts.get(ev.location, 0) - 1
        else:
            continue
        series.setdefault(ev.location, []).append((ev.time, counts[ev.location]))
    return series


@dataclass
class KpiReport:
    """Aggregated outputs of one run."""

    scenario: dict
    seed: int
    horizon_days: int
    warmup_days: int
    annual_teu: float
    trains_per_day: float
    trains_serviced: int
    pct_lifting: float
    pct_shunting: float
    terminal_utilisation: dict
    single_line_trips_per_day_mean: float
    single_line_trips_per_day_peak: int
    single_line_utilisation: float
    single_line_utilisation_pct: int
    queue_stats: dict
    conservation: dict
    duration_resamples: int
    per_train: list

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "horizon_days": self.horizon_days,
            "warmup_days": self.warmup_days,
            "annual_teu": self.annual_teu,
            "trains_per_day": self.trains_per_day,
            "trains_serviced": self.trains_serviced,
            "pct_lifting": self.pct_lifting,
            "pct_shunting": self.pct_shunting,
            "terminal_utilisation": self.terminal_utilisation,
            "single_line_trips_per_day_mean": self.single_line_trips_per_day_mean,
            "single_line_trips_per_day_peak": self.single_line_trips_per_day_peak,
            "single_line_utilisation": self.single_line_utilisation,
            "single_line_utilisation_pct": self.single_line_utilisation_pct,
            "queue_stats": self.queue_stats,
            "conservation": self.conservation,
            "duration_resamples": self.duration_resamples,
            "per_train": self.per_train,
        }


def compute_report(trace: EventTrace) -> KpiReport:
    start, end, days = _window(trace)
    meta = trace.run_metadata
    completed = completion_times(trace)
    serviced = sum(1 for done in completed.values() if start <= done <= end)
    pct_lift, pct_shunt = time_split(trace)
    mean_trips, peak_trips = single_line_trips_per_day(trace)
    util_fraction = utilisation_of_trip_cap(mean_trips)
    per_train = [meta["trains"][train_id] for train_id in sorted(meta.get("trains", {}))]
    return KpiReport(
        scenario=meta["scenario"],
        seed=meta["seed"],
        horizon_days=meta["horizon_days"],
        warmup_days=meta.get("warmup_days", 0),
        annual_teu=annual_teu(trace),
        trains_per_day=serviced / days,
        trains_serviced=serviced,
        pct_lifting=pct_lift,
        pct_shunting=pct_shunt,
        terminal_utilisation=terminal_utilisation(trace),
        single_line_trips_per_day_mean=mean_trips,
        single_line_trips_per_day_peak=peak_trips,
        single_line_utilisation=util_fraction,
        single_line_utilisation_pct=round(util_fraction * 100),
        queue_stats=queue_stats(trace),
        conservation={
            "entered": meta.get("entered", 0),
            "exited": meta.get("exited", 0),
            "residents_at_end": meta.get("residents_at_end", 0),
        },
        duration_resamples=meta.get("duration_resamples", 0),
        per_train=per_train,
    )


def export_report(report: KpiReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def export_trace(trace: EventTrace, path: str | Path) -> Path:
    """Flat table (time, train, event, location) for external tools."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_CSV_HEADER)
        for ev in trace.events:
            writer.writerow([repr(ev.time), ev.train, ev.kind, ev.location])
    return path
