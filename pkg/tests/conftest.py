import functools

import pytest

from affine_sobolev import fields as F
from affine_sobolev import sphere as S


@functools.lru_cache(maxsize=None)
def cached_field(name, n=2, cells=None, **params):
    return F.named_field(name, n, cells, **params)


@functools.lru_cache(maxsize=None)
def cached_rule(n, resolution=None, seed=0):
    return S.sphere_rule(n, resolution, seed)


@pytest.fixture(scope="session")
def rule2():
    return cached_rule(2)
