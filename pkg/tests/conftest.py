import pytest

from trackflow import generate_road_network


@pytest.fixture(scope="session")
def city(tmp_path_factory):
    """Canonical 1000-vertex road network shared by scenario-scale tests."""
    root = tmp_path_factory.mktemp("city")
    net, start = generate_road_network(1000, 2817, 84.5, seed=1)
    graph = root / "graph.txt"
    net.to_file(str(graph))
    return {"net": net, "start": start, "graph_file": str(graph)}


@pytest.fixture(scope="session")
def town(tmp_path_factory):
    """Smaller 300-vertex network for quick end-to-end runs."""
    root = tmp_path_factory.mktemp("town")
    net, start = generate_road_network(300, 840, 84.5, seed=7)
    graph = root / "graph.txt"
    net.to_file(str(graph))
    return {"net": net, "start": start, "graph_file": str(graph)}
