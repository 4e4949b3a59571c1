import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from fedreverse import DcParams, KeySetError, Payload, WatermarkEmbedder, embed_payloads, plan_for
from conftest import axis_keys, orthogonal_keys


@pytest.fixture
def keys():
    dc = DcParams(delta=0.1, alpha=0.9)
    return orthogonal_keys(4, 2, [dc, dc], seed=1)


@pytest.fixture
def blocks():
    rng = np.random.default_rng(3)
    return rng.normal(0, 0.05, (50, 4))


class TestEstimatorContract:
    def test_get_set_params_and_clone(self, keys):
        est = WatermarkEmbedder(keys=keys, payloads={"1": b"\xa5"})
        params = est.get_params()
        assert params["keys"] is keys
        cloned = clone(est)
        assert cloned.get_params()["payloads"] == {"1": b"\xa5"}
        est.set_params(payloads=None)
        assert est.payloads is None

    def test_not_fitted(self, keys, blocks):
        with pytest.raises(NotFittedError):
            WatermarkEmbedder(keys=keys).transform(blocks)

    def test_requires_keys(self, blocks):
        with pytest.raises(KeySetError):
            WatermarkEmbedder().fit(blocks)

    def test_shape_mismatch_after_fit(self, keys, blocks):
        est = WatermarkEmbedder(keys=keys).fit(blocks)
        with pytest.raises(KeySetError):
            est.transform(blocks[:, :3])


class TestEstimatorBehavior:
    def test_transform_matches_functional_path(self, keys, blocks):
        payloads = {"1": b"\xde\xad", "2": (b"\xbe\xef", 12)}
        est = WatermarkEmbedder(keys=keys, payloads=payloads).fit(blocks)
        got = est.transform(blocks)
        plan = plan_for(blocks.size, 4, keys)
        want = embed_payloads(
            blocks.ravel(),
            plan,
            [Payload("1", b"\xde\xad"), Payload("2", b"\xbe\xef", 12)],
            keys,
        ).reshape(blocks.shape)
        np.testing.assert_array_equal(got, want)

    def test_inverse_transform_round_trip(self, keys, blocks):
        est = WatermarkEmbedder(keys=keys, payloads={"1": b"\x42"}).fit(blocks)
        restored = est.inverse_transform(est.transform(blocks))
        np.testing.assert_allclose(restored, blocks, atol=1e-9)

    def test_extract(self, keys, blocks):
        est = WatermarkEmbedder(keys=keys, payloads={"1": b"\xa5", "2": b"\x3c"}).fit(blocks)
        wm = est.transform(blocks)
        assert est.extract(wm, "1") == b"\xa5"
        assert est.extract(wm) == {"1": b"\xa5", "2": b"\x3c"}
        with pytest.raises(KeySetError):
            est.extract(wm, "9")

    def test_capacity_checked_at_fit(self, keys):
        small = np.zeros((4, 4))  # 4 blocks < 8 bits
        with pytest.raises(Exception):
            WatermarkEmbedder(keys=keys, payloads={"1": b"\xff"}).fit(small)

    def test_fit_transform_in_pipeline(self, keys, blocks):
        pipe = Pipeline([("wm", WatermarkEmbedder(keys=keys, payloads={"1": b"\x42"}))])
        wm = pipe.fit_transform(blocks)
        assert wm.shape == blocks.shape
        assert not np.array_equal(wm, blocks)

    def test_axis_keys_reduce_to_scalar_lattice(self):
        dc = DcParams(delta=1.0, alpha=0.75)
        keys2 = axis_keys([dc, dc])
        X = np.array([[0.3, 0.7]])
        est = WatermarkEmbedder(keys=keys2, payloads={"1": (b"\x80", 1)}).fit(X)
        np.testing.assert_allclose(est.transform(X), [[0.45, 0.925]], atol=1e-15)
