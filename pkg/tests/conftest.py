import random

import numpy as np
import pytest

from fedreverse import ClientKey, DcParams, KeygenConfig, generate_client_keys


def axis_keys(dc_list):
    """Standard-basis keys, one axis per client; dimension = len(dc_list)."""
    r = len(dc_list)
    eye = np.eye(r)
    return [
        ClientKey(client_id=str(i + 1), partial_vectors=(eye[i],), active_vector=eye[i], dc=dc)
        for i, dc in enumerate(dc_list)
    ]


def orthogonal_keys(r, n, dc_list, seed=0):
    """n mutually orthogonal non-axis keys in dimension r, deterministic in seed.

    The key_int+1 regeneration rule cannot fix dependencies among early
    matrix columns, so draw fresh key ints until one succeeds.
    """
    from fedreverse import RankDeficiencyError

    rng = random.Random(seed)
    quotas = [1] * n
    quotas[-1] += r - n
    for _ in range(32):
        cfg = KeygenConfig(
            bits_per_entry=2,
            dimension=r,
            entry_range=32768,
            key_int=rng.getrandbits(2 * r * r),
            client_quotas=tuple(quotas),
        )
        try:
            keys, _ = generate_client_keys(cfg, dc_list)
            return keys
        except RankDeficiencyError:
            continue
    raise AssertionError("no full-rank key matrix found")


@pytest.fixture
def two_axis_keys():
    dc = DcParams(delta=1.0, alpha=0.75)
    return axis_keys([dc, dc])
