"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from deltaex import (
    Component,
    GaussianLeaf,
    SignedGaussianMixture,
    square_smm,
)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rq2_base(target_id: int) -> SignedGaussianMixture:
    alpha1 = {1: 0.12, 2: 0.16}[target_id]
    return SignedGaussianMixture(
        [
            Component(alpha1, 0.0, GaussianLeaf(np.zeros(2), np.full(2, 0.6))),
            Component(-0.36, 0.0, GaussianLeaf(np.zeros(2), np.ones(2))),
        ]
    )


def valley_mixture(dim: int = 1) -> SignedGaussianMixture:
    """Normalized signed mixture (Z_q = 1) whose positive part covers a region
    where the full density cancels to exactly zero in floats: the two leaves
    at -30 annihilate and the +30 leaf underflows there."""
    lo = np.full(dim, -30.0)
    hi = np.full(dim, 30.0)
    one = np.ones(dim)
    return SignedGaussianMixture(
        [
            Component(1.0, 0.0, GaussianLeaf(lo, one)),
            Component(-1.0, 0.0, GaussianLeaf(lo, one)),
            Component(1.0, 0.0, GaussianLeaf(hi, one)),
        ]
    )


@pytest.fixture(scope="session")
def target1():
    return square_smm(rq2_base(1))


@pytest.fixture(scope="session")
def target2():
    return square_smm(rq2_base(2))


def random_leaf(rng: np.random.Generator, d: int) -> GaussianLeaf:
    return GaussianLeaf(rng.standard_normal(d), rng.uniform(0.5, 2.0, size=d))
