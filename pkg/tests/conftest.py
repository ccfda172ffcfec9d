import pytest

from futureguided.dataio import ExperimentManifest
from futureguided.mackey_glass import MgParams


@pytest.fixture(scope="session")
def tiny_manifest():
    """Desk-scale structure at toy size: trains in seconds, exercises every path."""
    return ExperimentManifest(
        seeds=(0, 1),
        bins=(8,),
        horizons=(2, 3),
        alphas=(0.0, 0.5),
        temperature=4.0,
        lookback=8,
        hidden=12,
        mg=MgParams(length=700),
        epochs=2,
        batch_size=64,
        lr=3e-3,
    )
