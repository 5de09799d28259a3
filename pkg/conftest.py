"""Fixtures compartilhadas dos testes"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from network_simulator import FeedbackMode, Topology  # noqa: E402

# Taxas do exemplo de casamento com 3 saltos: linhas são caminhos, colunas são saltos
EXAMPLE_RATES_BY_PATH = [
    [0.8, 0.4, 0.8],
    [0.2, 0.8, 0.8],
    [0.8, 0.8, 0.3],
    [0.8, 0.6, 0.7],
]
BOTTLENECK_FREE_RATES_BY_PATH = [
    [0.8, 0.4, 0.8],
    [0.4, 0.8, 0.8],
    [0.6, 0.8, 0.4],
    [0.8, 0.6, 0.6],
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mp_eps():
    return [0.2, 0.4, 0.6, 0.8]


@pytest.fixture
def mp_topology(mp_eps):
    return Topology.single_hop(mp_eps, 20)


@pytest.fixture
def example_rates():
    """Taxas H×P do exemplo de casamento (linhas são saltos)"""
    return np.array(EXAMPLE_RATES_BY_PATH).T


@pytest.fixture
def bottleneck_free_rates():
    return np.array(BOTTLENECK_FREE_RATES_BY_PATH).T


def mh_grid_eps(e1: float, e2: float) -> np.ndarray:
    """Matriz H×P de apagamentos da rede multi-hop de 3 saltos e 4 caminhos"""
    by_path = [
        [e1, 0.6, 0.3],
        [0.8, e1, e1],
        [0.2, e2, 0.7],
        [e2, 0.4, e2],
    ]
    return np.array(by_path).T


@pytest.fixture
def mh_topology():
    return Topology(mh_grid_eps(0.2, 0.2), 12, FeedbackMode.END_TO_END)
