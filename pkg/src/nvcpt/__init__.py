"""Lindblad simulation of nuclear-spin-resolved CPT spectroscopy in NV centers."""
from .config import Config, ConfigError, load_config, parse_config
from .dressed import DressingSpec, dip_positions, dressed_oracle, dressed_shifts
from .dynamics import propagate, run_sequence, sector_steady_states, steady_state
from .experiments import cpt_scan, ple_scan, rabi_scan, stark_scan
from .fitting import FitModel, FitResult, LorentzianDip, fit, fit_cpt
from .model import DriveField, NvParams, build_basis, build_collapse, build_hamiltonian
from .spectrum import Spectrum, find_dips

__version__ = "1.0.0"

__all__ = [
    "Config", "ConfigError", "load_config", "parse_config",
    "DressingSpec", "dip_positions", "dressed_oracle", "dressed_shifts",
    "propagate", "run_sequence", "sector_steady_states", "steady_state",
    "cpt_scan", "ple_scan", "rabi_scan", "stark_scan",
    "FitModel", "FitResult", "LorentzianDip", "fit", "fit_cpt",
    "DriveField", "NvParams", "build_basis", "build_collapse", "build_hamiltonian",
    "Spectrum", "find_dips",
]
