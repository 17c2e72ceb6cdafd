import pytest

from reifenberg_lab import fdsolver as fd
from reifenberg_lab.geometry import log_example
from reifenberg_lab.pucci import Ellipticity


@pytest.fixture(scope="session")
def log_harmonic():
    """Harmonic field on the log-domain, 0 on the graph and 1 on the arc, h = 2^-10."""
    dom = log_example()
    grid = fd.build_domain(fd.GraphShape(dom), 2.0**-10)
    u, report = fd.solve(grid, "laplace", Ellipticity(1.0, 1.0), g=fd.parse_bc("graph=0,arc=1"))
    return u, report


@pytest.fixture(scope="session")
def half_disc_sup_128():
    grid = fd.build_domain(fd.HalfDisc(1.0), 1 / 128)
    u, report = fd.solve(grid, "sup", Ellipticity(1.0, 2.0), g=fd.parse_bc("flat=0,arc=1"))
    return u, report
