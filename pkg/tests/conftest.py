"""Shared fixtures: cached tori and spectrum reports.

Construction and full-spectrum assembly dominate the suite's runtime, so
every test pulls its tori from one process-wide cache keyed by family and
parameter.
"""

from functools import lru_cache

import pytest

import cwtori as cw


@lru_cache(maxsize=None)
def _two_lobe(b: float):
    return cw.shoot_two_lobe(b)


@lru_cache(maxsize=None)
def _homogeneous(b: float):
    return cw.homogeneous_torus(b)


@lru_cache(maxsize=None)
def _report(family: str, b: float, J: int = 64, m_max: int = 8):
    t = _two_lobe(b) if family == "two_lobe" else _homogeneous(b)
    return cw.full_hessian(t, m_max=m_max, J=J)


@pytest.fixture(scope="session")
def two_lobe():
    """Cached two-lobed torus factory, keyed by b."""
    return _two_lobe


@pytest.fixture(scope="session")
def homogeneous():
    """Cached homogeneous torus factory, keyed by b."""
    return _homogeneous


@pytest.fixture(scope="session")
def spectrum_report():
    """Cached full-Hessian report factory, keyed by (family, b, J, m_max)."""
    return _report
