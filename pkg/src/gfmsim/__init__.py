"""gfmsim: grid-forming battery storage + data-center load dynamics simulator."""

from .control import (
    ControllerState,
    DroopParams,
    GfmParams,
    LoopGains,
    PowerMeasurement,
    controller_step,
    current_loop,
    droop_update,
    initial_controller_state,
    measure_power,
    voltage_loop,
)
from .engine import (
    CompareReport,
    ScenarioConfig,
    SimTrace,
    SummaryMetrics,
    UnitConfig,
    compare,
    default_grid,
    default_unit_config,
    load_defaults,
    preset,
    run,
)
from .network import (
    BreakerSpec,
    DeadBusError,
    FaultSpec,
    GridEquivalent,
    InverterPlantState,
    LoadState,
    SimulationFault,
    apply_fault,
    grid_derivatives,
    grid_step,
    load_draw,
    make_load,
    plant_derivatives,
    solve_pcc,
)
from .per_unit import (
    FilterParams,
    PerUnitBase,
    compute_base_impedance,
    design_filter,
    from_per_unit,
    to_per_unit,
)
from .signals import (
    AbcTriple,
    DqPair,
    LpfState,
    PiState,
    advance_angle,
    inverse_park,
    lpf_step,
    park,
    pi_step,
    wrap_angle,
)
from .workload import LoadTrace, WorkloadProfile, load_trace_csv, sample_load

__version__ = "0.1.0"

__all__ = [
    "AbcTriple",
    "BreakerSpec",
    "CompareReport",
    "ControllerState",
    "DeadBusError",
    "DqPair",
    "DroopParams",
    "FaultSpec",
    "FilterParams",
    "GfmParams",
    "GridEquivalent",
    "InverterPlantState",
    "LoadState",
    "LoadTrace",
    "LoopGains",
    "LpfState",
    "PerUnitBase",
    "PiState",
    "PowerMeasurement",
    "ScenarioConfig",
    "SimTrace",
    "SimulationFault",
    "SummaryMetrics",
    "UnitConfig",
    "WorkloadProfile",
    "advance_angle",
    "apply_fault",
    "compare",
    "compute_base_impedance",
    "controller_step",
    "current_loop",
    "default_grid",
    "default_unit_config",
    "design_filter",
    "droop_update",
    "from_per_unit",
    "grid_derivatives",
    "grid_step",
    "initial_controller_state",
    "inverse_park",
    "load_defaults",
    "load_draw",
    "load_trace_csv",
    "lpf_step",
    "make_load",
    "measure_power",
    "park",
    "pi_step",
    "plant_derivatives",
    "preset",
    "run",
    "sample_load",
    "solve_pcc",
    "to_per_unit",
    "voltage_loop",
    "wrap_angle",
]
