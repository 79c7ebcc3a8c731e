from .models import (ControlScheme, ConverterMeasurements, coi_frequency, converter_control,
                     machine_model)
from .solver import SimState, initialize_dynamics, simulate
from .system import System, initial_state
from .trajectory import EventRecord, Trajectory

__all__ = ["ControlScheme", "ConverterMeasurements", "EventRecord", "SimState", "System",
           "Trajectory", "coi_frequency", "converter_control", "initial_state",
           "initialize_dynamics", "machine_model", "simulate"]
