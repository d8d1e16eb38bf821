"""Train entities, the servicing lifecycle state machine, and service-job arithmetic.

A train is one or more locomotives plus a rake of wagons. Standard shuttles
run 32 wagons (a 650 m rake carrying 96 TEU); the long-rake preset runs 44
wagons (a 900 m rake carrying 136 TEU, 88 lifts to fully strip or load).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import LifecycleError, ScenarioError
from .network import WAGON_LENGTH_M

TEU_PER_WAGON = 3
MAX_STANDARD_WAGONS = 32
LONG_RAKE_WAGONS = 44
LONG_RAKE_TEU = 136
LONG_RAKE_LIFTS = 88
# Implied 20'/40' mix: 136 TEU move in 88 lifts.
TEU_PER_LIFT = LONG_RAKE_TEU / LONG_RAKE_LIFTS
# Nominal lengths follow the rake-length convention used by the corridor's
# capacity rules (a 32-wagon rake is the 650 m standard train).
LOCOMOTIVE_LENGTH_M = 0.0


class TrainCategory(str, Enum):
    DEDICATED = "dedicated"          # one stevedore terminal
    SPLIT = "split"                  # two stevedore terminals
    NON_STEVEDORE = "non_stevedore"  # empty-container parks only


class LifecycleState(str, Enum):
    EN_ROUTE_IN = "en_route_in"
    STAGED_AWAITING_RUNAROUND = "staged_awaiting_runaround"
    RUNAROUND = "runaround"
    STAGED_AWAITING_CALLUP = "staged_awaiting_callup"
    SHUNTING_IN = "shunting_in"
    PLACED_LIFTING = "placed_lifting"
    AWAITING_CALLOUT = "awaiting_callout"
    SHUNTING_OUT = "shunting_out"
    STAGED_AWAITING_DEPARTURE = "staged_awaiting_departure"
    DEPARTED = "departed"


# Legal forward transitions. Split trains loop from SHUNTING_OUT back to
# STAGED_AWAITING_CALLUP for their second terminal visit.
_TRANSITIONS: dict[LifecycleState, tuple[LifecycleState, ...]] = {
    LifecycleState.EN_ROUTE_IN: (LifecycleState.STAGED_AWAITING_RUNAROUND,
                                 LifecycleState.STAGED_AWAITING_CALLUP),
    LifecycleState.STAGED_AWAITING_RUNAROUND: (LifecycleState.RUNAROUND,),
    LifecycleState.RUNAROUND: (LifecycleState.STAGED_AWAITING_CALLUP,),
    LifecycleState.STAGED_AWAITING_CALLUP: (LifecycleState.SHUNTING_IN,),
    LifecycleState.SHUNTING_IN: (LifecycleState.PLACED_LIFTING,),
    LifecycleState.PLACED_LIFTING: (LifecycleState.AWAITING_CALLOUT,),
    LifecycleState.AWAITING_CALLOUT: (LifecycleState.SHUNTING_OUT,),
    LifecycleState.SHUNTING_OUT: (LifecycleState.STAGED_AWAITING_CALLUP,
                                  LifecycleState.STAGED_AWAITING_DEPARTURE),
    LifecycleState.STAGED_AWAITING_DEPARTURE: (LifecycleState.DEPARTED,),
    LifecycleState.DEPARTED: (),
}


def rake_length_m(wagons: int) -> float:
    return LOCOMOTIVE_LENGTH_M + wagons * WAGON_LENGTH_M


def teu_capacity_for(wagons: int) -> int:
    return TEU_PER_WAGON * wagons


def lifts_required(rake_teu: float, teu_per_lift: float = TEU_PER_LIFT) -> int:
    """Crane lifts needed to move ``rake_teu`` TEU at the configured 20'/40' mix."""
    if rake_teu < 0:
        raise ScenarioError("rake_teu must be >= 0")
    return round(rake_teu / teu_per_lift)


@dataclass
class TerminalVisit:
    """One terminal stop in a train's itinerary, timestamped during the run."""

    terminal: str
    import_teu: int
    export_teu: int
    lifts: int = 0
    split_applied: bool = False
    call_up_min: float | None = None
    shunt_in_complete_min: float | None = None
    lift_start_min: float | None = None
    lift_complete_min: float | None = None
    call_out_min: float | None = None
    exit_complete_min: float | None = None


@dataclass
class Train:
    """A locomotive + rake entity with lifecycle state and per-milestone timestamps."""

    id: str
    category: TrainCategory
    wagons: int
    length_m: float
    teu_capacity: int
    planned_import_teu: int
    planned_export_teu: int
    actual_import_teu: int
    actual_export_teu: int
    visits: list[TerminalVisit]
    state: LifecycleState = LifecycleState.EN_ROUTE_IN
    visit_index: int = 0
    dispatched_min: float | None = None
    departed_min: float | None = None

    def __post_init__(self):
        if self.actual_import_teu > self.teu_capacity or self.actual_export_teu > self.teu_capacity:
            raise ScenarioError(f"train {self.id}: actual TEU exceeds capacity")
        stevedore_visits = len(self.visits)
        if self.category is TrainCategory.DEDICATED and stevedore_visits != 1:
            raise ScenarioError(f"dedicated train {self.id} must have exactly one terminal visit")
        if self.category is TrainCategory.SPLIT and stevedore_visits != 2:
            raise ScenarioError(f"split train {self.id} must have exactly two terminal visits")

    @property
    def itinerary(self) -> list[str]:
        return [v.terminal for v in self.visits]

    def current_visit(self) -> TerminalVisit:
        return self.visits[self.visit_index]

    def advance(self, new_state: LifecycleState) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise LifecycleError(
                f"train {self.id}: illegal transition {self.state.value} -> {new_state.value}")
        self.state = new_state

    def to_row(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.value,
            "wagons": self.wagons,
            "length_m": self.length_m,
            "planned_import_teu": self.planned_import_teu,
            "planned_export_teu": self.planned_export_teu,
            "actual_import_teu": self.actual_import_teu,
            "actual_export_teu": self.actual_export_teu,
            "itinerary": self.itinerary,
            "completed": self.state is LifecycleState.DEPARTED,
        }


@dataclass(frozen=True)
class ServiceJob:
    """Sampled component durations for one terminal visit, in minutes."""

    train: str
    terminal: str
    lifts_required: int
    shunt_in_min: float
    split_overhead_min: float
    lifting_min: float
    shunt_out_min: float
    resamples: int = 0


def service_duration(job: ServiceJob) -> float:
    """Total servicing time: shunt in + split overhead + lifting + shunt out."""
    return job.shunt_in_min + job.split_overhead_min + job.lifting_min + job.shunt_out_min


def make_train(train_id: str, category: TrainCategory, wagons: int,
               itinerary: list[str], rng, *,
               teu_capacity: int | None = None,
               load_fraction: float = 1.0,
               variance_dist=None) -> Train:
    """Build a train with planned loads and their (optionally perturbed) actuals.

    Planned TEU per direction is ``load_fraction`` of capacity. The variance
    distribution perturbs actuals multiplicatively and is clamped to
    [0, capacity]; peak presets use zero variance so actuals equal plans.
    """
    if wagons < 1:
        raise ScenarioError("a train needs at least one wagon")
    capacity = teu_capacity if teu_capacity is not None else teu_capacity_for(wagons)
    planned = int(round(capacity * load_fraction))

    def actual(planned_teu: int) -> int:
        if variance_dist is None:
            return planned_teu
        delta = variance_dist.sample(rng)
        return int(min(max(round(planned_teu * (1.0 + delta)), 0), capacity))

    n_visits = len(itinerary)
    if n_visits == 0:
        raise ScenarioError(f"train {train_id}: empty itinerary")
    actual_import = actual(planned)
    actual_export = actual(planned)
    # Split trains divide their load across their stevedore visits.
    visits = []
    for i, terminal in enumerate(itinerary):
        share_in = actual_import // n_visits + (1 if i < actual_import % n_visits else 0)
        share_out = actual_export // n_visits + (1 if i < actual_export % n_visits else 0)
        visits.append(TerminalVisit(terminal=terminal, import_teu=share_in, export_teu=share_out))
    return Train(
        id=train_id,
        category=category,
        wagons=wagons,
        length_m=rake_length_m(wagons),
        teu_capacity=capacity,
        planned_import_teu=planned,
        planned_export_teu=planned,
        actual_import_teu=actual_import,
        actual_export_teu=actual_export,
        visits=visits,
    )
