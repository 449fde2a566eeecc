import pytest
from hypothesis import HealthCheck, settings

from wrenchlink import default_config

# the cfg fixture is a frozen value object, safe to share across examples
settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("deterministic")


@pytest.fixture
def cfg():
    return default_config()
