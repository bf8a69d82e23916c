import pytest

from guardian.sim.cluster import Cluster
from guardian.sim.scenario import load_scenario
from guardian.sim.state import ClusterSpec


@pytest.fixture
def small_spec():
    """A scaled-down cluster that keeps tests fast."""
    return ClusterSpec(data_count=6, index_count=12, primary_shards=60)


@pytest.fixture
def small_cluster(small_spec):
    return Cluster.from_spec(small_spec, seed=1, zero_noise=True)


@pytest.fixture
def default_cluster():
    return Cluster.from_spec(seed=42, zero_noise=True)


@pytest.fixture
def outage_scenario():
    return load_scenario("builtin:incident1_outage")


@pytest.fixture
def nic_scenario():
    return load_scenario("builtin:incident2_nic")
