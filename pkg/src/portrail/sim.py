"""Corridor simulation runs: train generation, lifecycle driving, and sweeps.

One run owns all mutable state and executes on a single thread; the returned
trace and report are immutable afterwards, so parameter sweeps can fan out
across processes safely.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor

from .engine import CapacitatedResource, EventKind, Simulation, YardResource
from .errors import ScenarioError
from .network import CorridorNetwork, TerminalSpec, build_network
from .reporting import EventTrace, KpiReport, compute_report
from .scenarios import ScenarioConfig, apply_sweep_value, build_registry
from .stochastics import RandomStreams, sample_positive_from
from .trains import (LONG_RAKE_TEU, LifecycleState, Train, TrainCategory,
                     lifts_required, make_train)

ENFIELD = "Enfield"
BOTANY_YARD = "BotanyYard"
COOKS_RIVER = "CooksRiver"
SINGLE_TRACK = "SingleTrack"


class CorridorSimulation:
    """Drives every train through the servicing lifecycle of the corridor.

    Port-side terminals are fed from Botany Yard staging; trains reach the
    yard through Cook's River and the single-track section. Terminals call
    trains up FIFO from the staged pool. Off-dock terminals (MCS, the
    centralized facility) are fed directly from Enfield.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.network = build_network(config.variant, config.capacity_overrides)
        self.registry = build_registry(config)
        self.streams = RandomStreams(config.seed)
        self.sim = Simulation()

        self.yard = self.sim.add_resource(
            YardResource(BOTANY_YARD, roads=self.network.botany_yard.roads,
                         long_threshold_m=self.network.botany_yard.long_threshold_m))
        self.cooks_river = self.sim.add_resource(
            CapacitatedResource(COOKS_RIVER, self.network.cooks_river_capacity))
        self.single_track = self.sim.add_resource(
            CapacitatedResource(SINGLE_TRACK, self.network.single_track_capacity))
        self.terminal_res: dict[str, CapacitatedResource] = {}
        for spec in self.network.terminals:
            self.terminal_res[spec.name] = self.sim.add_resource(
                CapacitatedResource(spec.name, spec.service_capacity))

        self.trains: dict[str, Train] = {}
        self.ready: dict[str, deque[str]] = {s.name: deque() for s in self.network.terminals}
        self.pipeline: dict[str, int] = {s.name: 0 for s in self.network.terminals}
        self.port_area_halfslots = 0
        self.entered = 0
        self.departed_count = 0
        self.resample_count = 0
        self._next_train_no = 1
        self._last_dispatch_min: float | None = None
        self._headway_timer_set = False
        self._pending_category: TrainCategory | None = None
        self._window_timer_set: set[str] = set()

    # ------------------------------------------------------------------ dispatch

    def _halfslots(self, length_m: float) -> int:
        return 2 if length_m > self.yard.long_threshold_m else 1

    def _category_weights(self) -> list[tuple[TrainCategory, float]]:
        return [(TrainCategory(name), weight)
                for name, weight in self.config.train_mix.items() if weight > 0]

    def _draw_category(self) -> TrainCategory:
        weights = self._category_weights()
        if len(weights) == 1:
            return weights[0][0]
        rng = self.streams.stream("train_mix")
        total = sum(w for _, w in weights)
        pick = rng.random() * total
        acc = 0.0
        for category, weight in weights:
            acc += weight
            if pick <= acc:
                return category
        return weights[-1][0]

    def _assign_itinerary(self, category: TrainCategory) -> list[str]:
        """Demand-pull assignment: send work where the pipeline is shortest."""
        if category is TrainCategory.NON_STEVEDORE:
            pool = [t for t in self.network.terminals if not t.is_stevedore]
        else:
            pool = list(self.network.stevedores())
        ranked = sorted(pool, key=lambda t: (self.pipeline[t.name],
                                             [s.name for s in self.network.terminals].index(t.name)))
        if category is TrainCategory.SPLIT:
            return [ranked[0].name, ranked[1].name]
        return [ranked[0].name]

    def _gate_allows(self, category: TrainCategory) -> bool:
        itinerary = self._assign_itinerary(category)
        first = self.network.terminal(itinerary[0])
        wagons = self.config.rake_wagons
        length = wagons * 20.3
        if first.uses_yard:
            budget = self.yard.half_slot_capacity()
            if self.config.staging_policy == "enfield":
                # Hold trains at the source; keep only a small port-side pipeline.
                if self.pipeline[first.name] >= first.service_capacity + 1:
                    return False
            return self.port_area_halfslots + self._halfslots(length) <= budget
        # Direct-fed terminals: dispatch keeps one train staged per free siding.
        return self.pipeline[first.name] < first.service_capacity + 1

    def _make_train(self, category: TrainCategory, itinerary: list[str],
                    wagons: int | None = None) -> Train:
        train_id = f"T{self._next_train_no:05d}"
        self._next_train_no += 1
        wagons = self.config.rake_wagons if wagons is None else wagons
        teu_capacity = None
        if self.config.rake_preset == "900m":
            teu_capacity = LONG_RAKE_TEU
        variance = None
        if self.registry.container_variance.kind != "constant" or \
                self.registry.container_variance.params[0] != 0.0:
            variance = self.registry.container_variance
        train = make_train(
            train_id, category, wagons, itinerary, self.streams.stream("container_variance"),
            teu_capacity=teu_capacity, load_fraction=self.config.load_fraction,
            variance_dist=variance)
        return train

    def _try_dispatch(self) -> None:
        if self.config.timetable is not None:
            return
        while True:
            if self._pending_category is None:
                self._pending_category = self._draw_category()
            category = self._pending_category
            if not self._gate_allows(category):
                return
            if self._last_dispatch_min is not None:
                headway, extra = sample_positive_from(self.registry.headway,
                                                      self.streams.stream("headway"))
                self.resample_count += extra
                next_allowed = self._last_dispatch_min + headway
                if self.sim.now < next_allowed:
                    if not self._headway_timer_set:
                        self._headway_timer_set = True
                        self.sim.schedule_internal(next_allowed, self._headway_timer_fired)
                    return
            itinerary = self._assign_itinerary(category)
            self._pending_category = None
            self._dispatch(self._make_train(category, itinerary))

    def _headway_timer_fired(self) -> None:
        self._headway_timer_set = False
        self._try_dispatch()

    def _dispatch(self, train: Train) -> None:
        self.trains[train.id] = train
        self.entered += 1
        train.dispatched_min = self.sim.now
        self._last_dispatch_min = self.sim.now
        self.pipeline[train.current_visit().terminal] += 1
        self.sim.record(EventKind.ARRIVAL, train.id, ENFIELD)
        first = self.network.terminal(train.current_visit().terminal)
        if first.uses_yard:
            self.port_area_halfslots += self._halfslots(train.length_m)
            self.cooks_river.request(train.id, train.length_m,
                                     lambda t=train: self._at_cooks_river(t))
        else:
            self._direct_approach(train)

    # ------------------------------------------------------------------ inbound

    def _at_cooks_river(self, train: Train) -> None:
        # Reserve a yard road before committing to the single track, so a
        # train never sits on the track waiting for staging room.
        self.yard.request(train.id, train.length_m,
                          lambda t=train: self._yard_reserved(t))

    def _yard_reserved(self, train: Train) -> None:
        self.single_track.request(train.id, train.length_m,
                                  lambda t=train: self._track_granted_inbound(t))

    def _track_granted_inbound(self, train: Train) -> None:
        self.cooks_river.release(train.id)
        self.sim.schedule(self.sim.now + self.network.single_track_traverse_min,
                          EventKind.ARRIVAL, train.id, BOTANY_YARD,
                          lambda t=train: self._arrived_at_yard(t))

    def _arrived_at_yard(self, train: Train) -> None:
        self.single_track.release(train.id)
        train.advance(LifecycleState.STAGED_AWAITING_RUNAROUND)
        train.advance(LifecycleState.RUNAROUND)
        self.sim.schedule(self.sim.now + self.network.run_around_min,
                          EventKind.RUN_AROUND_COMPLETE, train.id, BOTANY_YARD,
                          lambda t=train: self._run_around_done(t))

    def _run_around_done(self, train: Train) -> None:
        train.advance(LifecycleState.STAGED_AWAITING_CALLUP)
        self._enqueue_ready(train)

    def _direct_approach(self, train: Train) -> None:
        spec = self.network.terminal(train.current_visit().terminal)
        if spec.locomotive_detaches:
            train.advance(LifecycleState.STAGED_AWAITING_RUNAROUND)
            train.advance(LifecycleState.RUNAROUND)
            self.sim.schedule(self.sim.now + self.network.run_around_min,
                              EventKind.RUN_AROUND_COMPLETE, train.id, spec.name,
                              lambda t=train: self._run_around_done(t))
        else:
            train.advance(LifecycleState.STAGED_AWAITING_CALLUP)
            self._enqueue_ready(train)

    # ------------------------------------------------------------------ servicing

    def _enqueue_ready(self, train: Train) -> None:
        terminal = train.current_visit().terminal
        self.ready[terminal].append(train.id)
        self._try_callups(terminal)

    def _window_open(self, spec: TerminalSpec) -> bool:
        open_min, close_min = spec.operating_window
        minute = self.sim.now % 1440.0
        return open_min <= minute < close_min

    def _schedule_window_retry(self, spec: TerminalSpec) -> None:
        if spec.name in self._window_timer_set:
            return
        self._window_timer_set.add(spec.name)
        open_min = spec.operating_window[0]
        day_start = self.sim.now - (self.sim.now % 1440.0)
        next_open = day_start + open_min
        if next_open <= self.sim.now:
            next_open += 1440.0
        self.sim.schedule_internal(next_open, lambda n=spec.name: self._window_reopened(n))

    def _window_reopened(self, name: str) -> None:
        self._window_timer_set.discard(name)
        self._try_callups(name)

    def _try_callups(self, terminal: str) -> None:
        spec = self.network.terminal(terminal)
        res = self.terminal_res[terminal]
        while self.ready[terminal]:
            if not self._window_open(spec):
                self._schedule_window_retry(spec)
                return
            head = self.trains[self.ready[terminal][0]]
            if not res.can_admit(head.length_m):
                return
            self.ready[terminal].popleft()
            res.request(head.id, head.length_m, lambda t=head: self._begin_service(t))

    def _begin_service(self, train: Train) -> None:
        visit = train.current_visit()
        spec = self.network.terminal(visit.terminal)
        train.advance(LifecycleState.SHUNTING_IN)
        self.sim.record(EventKind.CALL_UP, train.id, visit.terminal)
        visit.call_up_min = self.sim.now
        if spec.uses_yard:
            self.yard.release(train.id)
            self._try_dispatch()

        lifts = lifts_required(visit.import_teu) + lifts_required(visit.export_teu)
        visit.lifts = lifts
        visit.split_applied = spec.needs_split(train.length_m)

        shunt_rng = self.streams.stream(f"shunt.{visit.terminal}")
        shunt_in, r1 = sample_positive_from(self.registry.shunt_in[visit.terminal], shunt_rng)
        shunt_out, r2 = sample_positive_from(self.registry.shunt_out[visit.terminal], shunt_rng)
        split = self.registry.split_overhead_min[visit.terminal] if visit.split_applied else 0.0
        delay, r3 = sample_positive_from(self.registry.placement_delay,
                                         self.streams.stream("placement_delay"))
        law = self.registry.rate_law.get(visit.terminal)
        if law is not None:
            rate_per_hr = law.rate_per_hr(lifts)
            r4 = 0
        else:
            rate_per_hr, r4 = sample_positive_from(
                self.registry.lift_rate[visit.terminal],
                self.streams.stream(f"lift_rate.{visit.terminal}"), allow_zero=False)
        self.resample_count += r1 + r2 + r3 + r4
        lifting = lifts * 60.0 / rate_per_hr if lifts > 0 else 0.0

        self.sim.schedule(self.sim.now + shunt_in, EventKind.SHUNT_IN_COMPLETE,
                          train.id, visit.terminal,
                          lambda t=train, s=split, d=delay, lf=lifting, so=shunt_out:
                          self._shunt_in_done(t, s, d, lf, so))

    def _shunt_in_done(self, train: Train, split: float, delay: float,
                       lifting: float, shunt_out: float) -> None:
        visit = train.current_visit()
        visit.shunt_in_complete_min = self.sim.now
        self.sim.schedule(self.sim.now + split + delay, EventKind.LIFT_START,
                          train.id, visit.terminal,
                          lambda t=train, lf=lifting, so=shunt_out: self._lift_started(t, lf, so))

    def _lift_started(self, train: Train, lifting: float, shunt_out: float) -> None:
        visit = train.current_visit()
        train.advance(LifecycleState.PLACED_LIFTING)
        visit.lift_start_min = self.sim.now
        self.sim.schedule(self.sim.now + lifting, EventKind.LIFT_COMPLETE,
                          train.id, visit.terminal,
                          lambda t=train, so=shunt_out: self._lift_done(t, so))

    def _lift_done(self, train: Train, shunt_out: float) -> None:
        visit = train.current_visit()
        visit.lift_complete_min = self.sim.now
        train.advance(LifecycleState.AWAITING_CALLOUT)
        self.sim.record(EventKind.CALL_OUT, train.id, visit.terminal)
        visit.call_out_min = self.sim.now
        train.advance(LifecycleState.SHUNTING_OUT)
        self.sim.schedule(self.sim.now + shunt_out, EventKind.SHUNT_OUT_COMPLETE,
                          train.id, visit.terminal,
                          lambda t=train: self._shunt_out_done(t))

    def _shunt_out_done(self, train: Train) -> None:
        spec = self.network.terminal(train.current_visit().terminal)
        if spec.uses_yard:
            # The train exits into the yard; the terminal frees once staging
            # room is granted (the dispatch gate keeps room available).
            self.yard.request(train.id, train.length_m,
                              lambda t=train: self._complete_exit(t))
        else:
            self._complete_exit(train)

    def _complete_exit(self, train: Train) -> None:
        visit = train.current_visit()
        terminal = visit.terminal
        self.sim.record(EventKind.EXIT_COMPLETE, train.id, terminal)
        visit.exit_complete_min = self.sim.now
        self.pipeline[terminal] -= 1
        self.terminal_res[terminal].release(train.id)

        if train.visit_index + 1 < len(train.visits):
            train.visit_index += 1
            train.advance(LifecycleState.STAGED_AWAITING_CALLUP)
            self.pipeline[train.current_visit().terminal] += 1
            self._enqueue_ready(train)
        else:
            train.advance(LifecycleState.STAGED_AWAITING_DEPARTURE)
            spec = self.network.terminal(terminal)
            if spec.uses_yard:
                self.single_track.request(train.id, train.length_m,
                                          lambda t=train: self._track_granted_outbound(t))
            else:
                self.sim.schedule(self.sim.now, EventKind.DEPARTURE, train.id, ENFIELD,
                                  lambda t=train: self._departed(t))
        self._try_callups(terminal)
        self._try_dispatch()

    # ------------------------------------------------------------------ outbound

    def _track_granted_outbound(self, train: Train) -> None:
        self.yard.release(train.id)
        self.sim.schedule(self.sim.now + self.network.single_track_traverse_min,
                          EventKind.DEPARTURE, train.id, ENFIELD,
                          lambda t=train: self._departed(t))

    def _departed(self, train: Train) -> None:
        first = self.network.terminal(train.visits[0].terminal)
        if first.uses_yard:
            self.single_track.release(train.id)
            self.port_area_halfslots -= self._halfslots(train.length_m)
        train.advance(LifecycleState.DEPARTED)
        train.departed_min = self.sim.now
        self.departed_count += 1
        self._try_dispatch()

    # ------------------------------------------------------------------ run

    def _load_timetable(self) -> None:
        for entry in self.config.timetable:
            def fire(e=entry):
                category = TrainCategory(e["category"])
                itinerary = list(e["terminals"]) or self._assign_itinerary(category)
                for name in itinerary:
                    self.network.terminal(name)  # validates
                train = self._make_train(category, itinerary, wagons=e["wagons"])
                self._dispatch(train)
            self.sim.schedule_internal(entry["time_min"], fire)

    def run(self) -> EventTrace:
        if self.config.timetable is not None:
            self._load_timetable()
        else:
            self._try_dispatch()
        self.sim.run(until=self.config.horizon_min)
        residents = self.entered - self.departed_count
        metadata = {
            "scenario": self.config.to_dict(),
            "seed": self.config.seed,
            "horizon_days": self.config.horizon_days,
            "warmup_days": self.config.warmup_days,
            "entered": self.entered,
            "exited": self.departed_count,
            "residents_at_end": residents,
            "duration_resamples": self.resample_count,
            "resources": {name: res.capacity for name, res in self.sim.resources.items()},
            "trains": {t.id: t.to_row() for t in self.trains.values()},
        }
        return EventTrace(events=tuple(self.sim.trace), run_metadata=metadata)


def simulate(config: ScenarioConfig) -> tuple[EventTrace, KpiReport]:
    """Run one scenario and compute its KPI report."""
    trace = CorridorSimulation(config).run()
    return trace, compute_report(trace)


def _sweep_one(doc: dict) -> KpiReport:
    from .scenarios import load_scenario
    _, report = simulate(load_scenario(doc))
    return report


def sweep(base: ScenarioConfig, parameter: str, values: list,
          jobs: int = 1) -> list[KpiReport]:
    """One independent run per value, same seed policy, reports in input order."""
    if not values:
        raise ScenarioError("sweep needs at least one value")
    configs = [apply_sweep_value(base, parameter, value) for value in values]
    if jobs > 1 and len(configs) > 1:
        docs = [c.to_dict() for c in configs]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, docs))
    return [simulate(config)[1] for config in configs]
