"""Monte Carlo simulator for a heterogeneous cellular network in which
small cells run on grid power, harvested energy, or both, and coordinate
user association with transmit-power and sleep/off adaptation."""

from .association import (AlgoParams, AssociationResult, SchemeKind, UserClass,
                          associate_user, coverage_radius, SlotEngine)
from .channel import LinkGain, received_power, sir, user_rate
from .config import (ChannelParams, ConfigError, OutputParams, RunConfig,
                     SweepParams, default_config, load_config)
from .energy import (ALLOWED_MODES, BaseStation, BsMode, EnergyLedger, PowerModel,
                     bs_power, grid_power, harvest_energy, ledger_update,
                     mode_transition)
from .simulation import (MetricsRow, NetworkState, SampleStats, run_sample,
                         run_sweep, simulate_slot)
from .topology import (BsKind, LayoutConfig, LayoutError, NetworkLayout,
                       Position, build_layout, sample_users)

__version__ = "0.1.0"
