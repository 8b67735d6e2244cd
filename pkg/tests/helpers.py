"""Shared distribution configs and closed-form oracles."""
import math

from semistable_renewal.dists import dist_from_dict

ALPHA075 = {"alpha": 0.75, "c": 2.0, "M_R": {"kind": "fourier", "data": {"cos": [1.0, 0.1]}}}
ALPHA06 = {"alpha": 0.6, "c": 2.0, "M_R": {"kind": "fourier", "data": {"cos": [1.0, 0.1]}}}
ALPHA04 = {"alpha": 0.4, "c": 2.0, "M_R": {"kind": "fourier", "data": {"cos": [1.0, 0.1]}}}
C16 = {"alpha": 0.75, "c": 16.0, "M_R": {"kind": "fourier", "data": {"cos": [1.0, 0.38]}}}
STABLE05 = {"alpha": 0.5, "c": 2.0, "M_R": {"kind": "const", "data": 1.0}}
GOLDEN = {**ALPHA075, "offset_a": (math.sqrt(5.0) - 1.0) / 2.0}


def build(cfg, **extra):
    return dist_from_dict({**cfg, **extra})


def levy_density(x):
    """Density of the one-sided index-1/2 stable law with Levy tail ``x**-0.5``."""
    return 0.5 * x ** -1.5 * math.exp(-math.pi / (4 * x))


def levy_cdf(x):
    return math.erfc(math.sqrt(math.pi / (4 * x)))
