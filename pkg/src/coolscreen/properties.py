"""The ten immersion-fluid properties and their fixed units."""

import math
from typing import NamedTuple

import numpy as np


class PropertyVector(NamedTuple):
    boiling_point: float  # degC
    melting_point: float  # degC
    flash_point: float  # degC
    critical_temperature: float  # degC
    decomposition_temperature: float  # degC
    specific_heat: float  # J/(g degC)
    vapor_pressure: float  # kPa
    dynamic_viscosity: float  # N s/m^2
    density: float  # kg/m^3
    dielectric_constant: float  # dimensionless, 1 kHz

    @classmethod
    def from_array(cls, row):
        row = np.asarray(row, dtype=float).ravel()
        if row.size != len(cls._fields):
            raise ValueError(f"expected {len(cls._fields)} values, got {row.size}")
        return cls(*(float(v) for v in row))

    def to_array(self):
        return np.array(self, dtype=float)

    def is_finite(self):
        return all(math.isfinite(v) for v in self)


PROPERTY_NAMES = PropertyVector._fields

UNITS = {
    "boiling_point": "degC",
    "melting_point": "degC",
    "flash_point": "degC",
    "critical_temperature": "degC",
    "decomposition_temperature": "degC",
    "specific_heat": "J/(g*degC)",
    "vapor_pressure": "kPa",
    "dynamic_viscosity": "N*s/m^2",
    "density": "kg/m^3",
    "dielectric_constant": "1",
}
