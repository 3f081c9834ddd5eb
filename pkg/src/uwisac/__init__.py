"""Simulation and subcarrier/element allocation for multi-user, multi-target
underwater MIMO-OFDM integrated sensing and communication."""

from .channel import ChannelResponse, NoiseModelParams, PathSpec
from .metrics import FeasibilityReport, PrrReport, check_feasibility, prr, user_rate
from .optimizer import (SearchContext, SearchState, TdgrsConfig, baseline_random, baseline_sequential,
                        exhaustive_search, init_sequential, tdgrs)
from .scenario import Scenario, full_scale_scenario
from .sensing import DelayProfile, TargetSpec, delay_profile
from .waveform import AllocationMatrix, InterleavePattern, PowerVector, SymbolFrame

__version__ = "0.1.0"
