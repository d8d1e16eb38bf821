"""Corridor topology: source/sink, staging yards, single-track section and terminals.

The network is a small queueing topology. Enfield is the source and sink.
Port-side terminals are reached through Cook's River and a single-track
section into Botany Yard; MCS sits at Mascot before the single track and
is reached directly. The centralized variant is an off-dock facility fed
straight from Enfield, bypassing the port-side infrastructure.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ScenarioError

WAGON_LENGTH_M = 20.3
STANDARD_TRAIN_LENGTH_M = 650.0

VARIANTS = ("as_is", "soon_to_be", "centralized", "dpw_extended", "single_track_duplicated")


@dataclass(frozen=True)
class TerminalSpec:
    """Static description of one rail terminal.

    ``requires_split_above_m`` is the rake length above which the train must
    be split across sidings before servicing. ``operating_window`` is the
    daily (open, close) window in minutes; the default is 24/7.
    """

    name: str
    siding_count: int
    siding_length_m: float
    requires_split_above_m: float
    service_capacity: int = 1
    operating_window: tuple[float, float] = (0.0, 1440.0)
    is_stevedore: bool = True
    uses_single_track: bool = True
    uses_yard: bool = True
    locomotive_detaches: bool = True

    def __post_init__(self):
        if self.service_capacity < 1:
            raise ScenarioError(f"terminal {self.name}: service_capacity must be >= 1")
        if self.requires_split_above_m > self.siding_length_m:
            raise ScenarioError(
                f"terminal {self.name}: requires_split_above ({self.requires_split_above_m}) "
                f"exceeds siding length ({self.siding_length_m})")

    def needs_split(self, rake_length_m: float) -> bool:
        return rake_length_m > self.requires_split_above_m

    def max_serviceable_length_m(self) -> float:
        return self.siding_count * self.siding_length_m


@dataclass(frozen=True)
class YardSpec:
    """A staging yard made of roads; see engine.YardResource for the policy."""

    name: str
    road_lengths_m: tuple[float, ...]
    long_threshold_m: float = STANDARD_TRAIN_LENGTH_M
    policy: str = "half_road_best_fit"

    @property
    def roads(self) -> int:
        return len(self.road_lengths_m)


# Known terminals. Siding geometry for DP World is the documented 3 x 350 m
# layout; the remaining figures are working defaults, all overridable.
KNOWN_TERMINALS: dict[str, TerminalSpec] = {
    "Patrick": TerminalSpec("Patrick", siding_count=2, siding_length_m=650.0,
                            requires_split_above_m=650.0),
    "DPWorld": TerminalSpec("DPWorld", siding_count=3, siding_length_m=350.0,
                            requires_split_above_m=350.0),
    "HPH": TerminalSpec("HPH", siding_count=2, siding_length_m=650.0,
                        requires_split_above_m=650.0),
    "SydneyHaulage": TerminalSpec("SydneyHaulage", siding_count=2, siding_length_m=650.0,
                                  requires_split_above_m=650.0, is_stevedore=False),
    "MCS": TerminalSpec("MCS", siding_count=2, siding_length_m=650.0,
                        requires_split_above_m=650.0, is_stevedore=False,
                        uses_single_track=False, uses_yard=False),
    "EnfieldILC": TerminalSpec("EnfieldILC", siding_count=2, siding_length_m=650.0,
                               requires_split_above_m=650.0, is_stevedore=False,
                               uses_single_track=False, uses_yard=False),
    "CentralTerminal": TerminalSpec("CentralTerminal", siding_count=3, siding_length_m=900.0,
                                    requires_split_above_m=900.0, service_capacity=3,
                                    uses_single_track=False, uses_yard=False,
                                    locomotive_detaches=False),
}

_VARIANT_TERMINALS = {
    "as_is": ("Patrick", "DPWorld", "SydneyHaulage", "MCS"),
    "soon_to_be": ("Patrick", "DPWorld", "HPH", "SydneyHaulage", "MCS"),
    "dpw_extended": ("Patrick", "DPWorld", "SydneyHaulage", "MCS"),
    "single_track_duplicated": ("Patrick", "DPWorld", "SydneyHaulage", "MCS"),
    "centralized": ("CentralTerminal", "SydneyHaulage", "MCS"),
}


@dataclass(frozen=True)
class CorridorNetwork:
    """Validated queue topology for one infrastructure variant."""

    variant: str
    terminals: tuple[TerminalSpec, ...]
    botany_yard: YardSpec
    cooks_river_capacity: int = 3
    single_track_capacity: int = 1
    single_track_traverse_min: float = 6.0
    run_around_min: float = 15.0
    single_track_daily_trip_cap: int = 36

    def terminal(self, name: str) -> TerminalSpec:
        for spec in self.terminals:
            if spec.name == name:
                return spec
        raise ScenarioError(f"unknown terminal {name!r} in variant {self.variant}")

    def stevedores(self) -> tuple[TerminalSpec, ...]:
        return tuple(t for t in self.terminals if t.is_stevedore)

    def adjacency(self) -> dict[str, list[str]]:
        """Reachability map from the Enfield source, per the corridor layout."""
        adj: dict[str, list[str]] = {"Enfield": []}
        port_side = [t.name for t in self.terminals if t.uses_yard]
        direct = [t.name for t in self.terminals if not t.uses_yard]
        if port_side:
            adj["Enfield"].append("CooksRiver")
            adj["CooksRiver"] = ["SingleTrack"]
            adj["SingleTrack"] = ["BotanyYard"]
            adj["BotanyYard"] = list(port_side)
            for name in port_side:
                adj[name] = ["BotanyYard"]
        for name in direct:
            adj["Enfield"].append(name)
            adj[name] = ["Enfield"]
        return adj


def build_network(variant: str,
                  capacity_overrides: dict | None = None) -> CorridorNetwork:
    """Construct the validated network for a named infrastructure variant.

    ``capacity_overrides`` may adjust: single_track_capacity, cooks_river_capacity,
    botany_yard_roads, single_track_traverse_min, run_around_min, and per-terminal
    keys of the form ``<terminal>.service_capacity`` / ``<terminal>.requires_split_above_m``
    / ``<terminal>.siding_length_m`` / ``<terminal>.siding_count``.
    """
    if variant not in VARIANTS:
        raise ScenarioError(f"unknown infrastructure variant {variant!r}; "
                            f"expected one of {', '.join(VARIANTS)}")
    overrides = dict(capacity_overrides or {})

    terminals = []
    for name in _VARIANT_TERMINALS[variant]:
        spec = KNOWN_TERMINALS[name]
        if variant == "dpw_extended" and name == "DPWorld":
            # Sidings extended to take a standard rake without splitting.
            spec = replace(spec, siding_length_m=650.0, requires_split_above_m=650.0)
        changes = {}
        for key in ("service_capacity", "requires_split_above_m", "siding_length_m",
                    "siding_count"):
            ov = overrides.pop(f"{name}.{key}", None)
            if ov is not None:
                changes[key] = type(getattr(spec, key))(ov)
        if changes:
            spec = replace(spec, **changes)
        terminals.append(spec)

    roads = int(overrides.pop("botany_yard_roads", 4))
    if roads < 1:
        raise ScenarioError("botany_yard_roads must be >= 1")
    yard = YardSpec("BotanyYard", road_lengths_m=(2 * STANDARD_TRAIN_LENGTH_M,) * roads)

    single_track_capacity = int(overrides.pop(
        "single_track_capacity", 2 if variant == "single_track_duplicated" else 1))
    if single_track_capacity < 1:
        raise ScenarioError("single_track_capacity must be >= 1")

    network = CorridorNetwork(
        variant=variant,
        terminals=tuple(terminals),
        botany_yard=yard,
        cooks_river_capacity=int(overrides.pop("cooks_river_capacity", 3)),
        single_track_capacity=single_track_capacity,
        single_track_traverse_min=float(overrides.pop("single_track_traverse_min", 6.0)),
        run_around_min=float(overrides.pop("run_around_min", 15.0)),
    )
    if overrides:
        raise ScenarioError(f"unknown capacity overrides: {sorted(overrides)}")
    return network
