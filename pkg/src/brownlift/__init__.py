"""Brownian-type block operators: classification, powers, extensions and spectra."""
from .classify import BlockTriangular, check_brownian_type, entry_class_predicates
from .core import *  # noqa: F401,F403
from .extension import DefectSpec, basic_construction, build_mne
from .powers import block_power, extension_power, power_classS_condition, shift_power_criterion
from .spectra import (SpectrumRegion, block_spectrum, eigen_witness, extension_spectra_check,
                      filling_holes_check, symbolic_spectrum)

__version__ = "0.1.0"
