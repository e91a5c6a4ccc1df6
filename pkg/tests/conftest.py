import numpy as np
import pytest
from hypothesis import settings

from qploc.generators import random_instance
from qploc.instance import VARIANTS, apply_variant

settings.register_profile("qploc", max_examples=40, deadline=None)
settings.load_profile("qploc")

VARIANT_NAMES = sorted(VARIANTS)


def make_instance(n, seed, variant="chlpsa", p=2, **kw):
    """Random dense instance configured as ``variant``."""
    inst = random_instance(n, seed, capacitated=variant.startswith("c"), p=p, **kw)
    return apply_variant(inst, variant, p)


def random_assignment(inst, rng):
    """A random assignment respecting open-facility structure (capacity ignored)."""
    n = inst.n
    h = int(rng.integers(1, inst.p + 1))
    H = rng.choice(n, h, replace=False)
    a = rng.choice(H, n)
    a[H] = H
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
