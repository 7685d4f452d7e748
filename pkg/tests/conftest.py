"""
Pytest configuration and fixtures for the observability toolkit tests.
Reference systems come from reference_systems.py; random systems are drawn
with seeded generators so every run sees the same matrices.
"""

import pytest
import os
import sys
import json
from typing import Dict, Any

# Add project root and the tests directory to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import reference_systems as refs
from strategies import random_partially_observable
from system_model import system_to_dict


@pytest.fixture
def counterexample_system():
    """Discrete 4-state system with a pathological period of 4."""
    return refs.counterexample_system()


@pytest.fixture
def example_system():
    """Discrete 4-state, 3-output system recovered through a structured-Q certificate."""
    return refs.example_system()


@pytest.fixture
def oscillator_system():
    """Continuous harmonic oscillator."""
    return refs.oscillator_system()


@pytest.fixture
def example_certificate():
    return refs.example_certificate()


@pytest.fixture
def example_schedule():
    return refs.example_schedule()


@pytest.fixture
def counterexample_document():
    """JSON-ready system document of the counterexample."""
    return system_to_dict(refs.counterexample_system())


@pytest.fixture
def example_document():
    return system_to_dict(refs.example_system())


@pytest.fixture
def oscillator_document():
    return system_to_dict(refs.oscillator_system())


@pytest.fixture
def random_system_factory():
    """Factory for random partially observable systems (see random_partially_observable)."""
    return random_partially_observable


@pytest.fixture
def malicious_inputs():
    """Hostile inputs for security testing."""
    return {
        "non_numeric": [
            "'; DROP TABLE systems; --",
            "<script>alert('XSS')</script>",
            "; rm -rf /",
        ],
        "extreme_values": [
            float('inf'),
            float('-inf'),
            float('nan'),
        ],
        "buffer_overflow": [
            "A" * 10000,
            "nested_" * 100,
        ],
    }


@pytest.fixture
def write_json(tmp_path):
    """Write a document to a JSON file under tmp_path and return the path."""
    def _write(name: str, document: Any) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def api_client():
    """Flask test client for obsvkit_api."""
    from obsvkit_api import app
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


@pytest.fixture(autouse=True)
def clear_tolerance_override(monkeypatch):
    """Tests start without an OBSVKIT_TOL override."""
    monkeypatch.delenv("OBSVKIT_TOL", raising=False)


@pytest.fixture
def relaxed_rank_tolerance(clear_tolerance_override, monkeypatch):
    """
    Relative rank tolerance of 1e-9 for randomly rotated systems, whose
    structurally zero singular values sit a few hundred epsilons above zero.
    """
    monkeypatch.setenv("OBSVKIT_TOL", "1e-9")
    return 1e-9


# Test markers
def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "performance: Performance tests")
    config.addinivalue_line("markers", "security: Security tests")
    config.addinivalue_line("markers", "slow: Slow running tests")
    config.addinivalue_line("markers", "api: API endpoint tests")
    config.addinivalue_line("markers", "property: Randomised property tests")


# Custom assertions
def assert_valid_rank_result(result: Dict[str, Any]):
    """Assert that a serialised RankResult has the documented structure."""
    for field in ("rank", "singular_values", "tolerance"):
        assert field in result, f"Missing required field: {field}"
    assert isinstance(result["rank"], int)
    assert result["rank"] >= 0
    assert result["tolerance"] > 0
    values = result["singular_values"]
    assert all(a >= b for a, b in zip(values, values[1:])), "singular values must be non-increasing"


def assert_valid_api_response(response):
    """Assert that an API response is valid JSON with an allowed status."""
    assert response.status_code in [200, 400, 413, 415, 422, 500], f"Unexpected status code: {response.status_code}"
    data = response.get_json(silent=True)
    assert isinstance(data, dict), "Response should be a JSON object"
    if response.status_code != 200:
        assert "error" in data


# Make custom assertions available globally
pytest.assert_valid_rank_result = assert_valid_rank_result
pytest.assert_valid_api_response = assert_valid_api_response
