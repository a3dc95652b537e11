import pytest

from sdmcable.cable import CableBaseline, PowerFeedSpec, calibrate_feed, design_sweep, with_feed
from sdmcable.photonic import AmplifierSpec, FiberSpec, LinkGeometry, WdmGrid

TRANSATLANTIC_KM = 6900.0


def scuba_geometry(span_km=50.0, total_km=TRANSATLANTIC_KM, **kw) -> LinkGeometry:
    """SCUBA fibre, C-band grid; ``round(total/span)`` spans of equal length."""
    count = max(1, round(total_km / span_km))
    return LinkGeometry(
        fiber=FiberSpec.scuba(),
        amplifier=AmplifierSpec(4.5),
        grid=WdmGrid.c_band(),
        span_length_km=total_km / count,
        span_count=count,
        **kw,
    )


@pytest.fixture(scope="session")
def geometry_50km():
    return scuba_geometry(50.0)


@pytest.fixture(scope="session")
def dunant():
    """Baseline, calibrated feed and the sweeps every cable test reads from."""
    baseline = CableBaseline()
    cal = calibrate_feed(baseline, PowerFeedSpec(15e3), boundary_fiber_pairs=19, backoff_db=2.0)
    feed15 = cal.feed
    feed18 = feed15.at_voltage(18e3)
    sweep0 = design_sweep(baseline, feed15, backoff_db=0.0)
    return {
        "baseline": baseline,
        "calibration": cal,
        "feed15": feed15,
        "feed18": feed18,
        "sweep15": cal.sweep,
        "sweep18": with_feed(cal.sweep, feed18),
        "sweep0_15": sweep0,
        "sweep0_18": with_feed(sweep0, feed18),
    }
