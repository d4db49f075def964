import dataclasses

import pytest

from hcnsim.config import RunConfig, default_config


@pytest.fixture
def cfg() -> RunConfig:
    return default_config()


@pytest.fixture
def det_cfg() -> RunConfig:
    """Default scenario with fading pinned to 1 for exact oracles."""
    base = default_config()
    return dataclasses.replace(
        base, channel=dataclasses.replace(base.channel, deterministic_fading=True))


def tiny_sweep_cfg(n_samples=4, densities=(0.0, 30.0), lambdas=(44.0,),
                   schemes=None, threads=1, seed=7) -> RunConfig:
    base = default_config()
    sweep = dataclasses.replace(
        base.sweep,
        densities=tuple(float(d) for d in densities),
        lambda_e=tuple(float(x) for x in lambdas),
        n_samples=n_samples,
        master_seed=seed,
        threads=threads,
        **({"schemes": schemes} if schemes else {}))
    return dataclasses.replace(base, sweep=sweep)
