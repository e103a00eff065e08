import math

import pytest

from geoword.geo import EARTH_RADIUS_KM, GeoPoint


def law_of_cosines_km(a: GeoPoint, b: GeoPoint) -> float:
    """Independent great-circle oracle (spherical law of cosines)."""
    p1, l1 = math.radians(a.lat), math.radians(a.lon)
    p2, l2 = math.radians(b.lat), math.radians(b.lon)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(l2 - l1)
    return EARTH_RADIUS_KM * math.acos(max(-1.0, min(1.0, c)))


@pytest.fixture
def oracle_distance():
    return law_of_cosines_km
