import numpy as np
import pytest

from fedreverse import (
    BadMagicError,
    DcParams,
    ManifestError,
    ParameterError,
    Payload,
    PlanManifest,
    SelectionSpec,
    TruncatedError,
    WeightContainer,
    embed_payloads,
    histogram,
    load_plan,
    load_raw,
    plan_for,
    read_container,
    recover_sequence,
    save_plan,
    select_cover,
    write_back,
    write_container,
)
from fedreverse.container import MAGIC, check_key_digest, container_bytes
from fedreverse.errors import PlanDigestError
from conftest import orthogonal_keys


@pytest.fixture
def sample_container():
    rng = np.random.default_rng(0)
    return WeightContainer(
        {
            "layer0.weight": rng.normal(0, 0.05, (16, 8)).astype(np.float32),
            "layer1.weight": rng.normal(0, 0.05, (8, 4)).astype(np.float64),
        }
    )


class TestRoundTrip:
    def test_write_read_rewrite(self, sample_container, tmp_path):
        path = tmp_path / "weights.frwc"
        write_container(sample_container, path)
        back = read_container(path)
        assert set(back.tensors) == set(sample_container.tensors)
        for name in back.tensors:
            np.testing.assert_array_equal(back.tensor(name), sample_container.tensor(name))
            assert back.tensor(name).dtype == sample_container.tensor(name).dtype
        path2 = tmp_path / "again.frwc"
        write_container(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_import_raw(self, tmp_path):
        values = np.arange(12, dtype="<f4")
        raw = tmp_path / "w.bin"
        raw.write_bytes(values.tobytes())
        cont = load_raw(raw, "f32", (3, 4), name="w")
        np.testing.assert_array_equal(cont.tensor("w"), values.reshape(3, 4))
        with pytest.raises(ManifestError):
            load_raw(raw, "f32", (5, 4))

    def test_rejects_non_float_dtype(self):
        with pytest.raises(ParameterError):
            WeightContainer({"x": np.arange(4)})


class TestFormatErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.frwc"
        path.write_bytes(b"NOTFRWC1" + bytes(32))
        with pytest.raises(BadMagicError):
            read_container(path)

    def test_truncated_manifest(self, tmp_path):
        path = tmp_path / "trunc.frwc"
        path.write_bytes(MAGIC + (1000).to_bytes(8, "little") + b"{}")
        with pytest.raises(TruncatedError):
            read_container(path)

    def test_manifest_data_inconsistency(self, tmp_path, sample_container):
        path = tmp_path / "w.frwc"
        blob = bytearray(container_bytes(sample_container))
        # corrupt the declared byte_length of the first tensor
        text = blob.decode("latin1")
        text = text.replace('"byte_length":512', '"byte_length":513', 1)
        path.write_bytes(text.encode("latin1"))
        with pytest.raises(ManifestError):
            read_container(path)

    def test_truncated_data(self, tmp_path, sample_container):
        path = tmp_path / "w.frwc"
        blob = container_bytes(sample_container)
        path.write_bytes(blob[:-4])
        with pytest.raises(TruncatedError):
            read_container(path)


class TestSelection:
    def test_prefix_selection(self, sample_container):
        values, idx = select_cover(
            sample_container, SelectionSpec("layer0.weight", 5, permute=False)
        )
        np.testing.assert_array_equal(idx, np.arange(5))
        np.testing.assert_array_equal(
            values, sample_container.tensor("layer0.weight").ravel()[:5].astype(np.float64)
        )
        assert values.dtype == np.float64

    def test_permute_deterministic(self, sample_container):
        spec = SelectionSpec("layer0.weight", 30, permute=True, location_seed=bytes(range(32)))
        _, i1 = select_cover(sample_container, spec)
        _, i2 = select_cover(sample_container, spec)
        np.testing.assert_array_equal(i1, i2)
        other = SelectionSpec("layer0.weight", 30, permute=True, location_seed=bytes(32))
        _, i3 = select_cover(sample_container, other)
        assert not np.array_equal(i1, i3)

    def test_full_permutation(self, sample_container):
        n = sample_container.tensor("layer0.weight").size
        spec = SelectionSpec("layer0.weight", n, permute=True, location_seed=bytes(32))
        _, idx = select_cover(sample_container, spec)
        np.testing.assert_array_equal(np.sort(idx), np.arange(n))

    def test_count_overflow(self, sample_container):
        with pytest.raises(ParameterError):
            select_cover(sample_container, SelectionSpec("layer1.weight", 10**6))

    def test_unknown_tensor(self, sample_container):
        with pytest.raises(ParameterError):
            select_cover(sample_container, SelectionSpec("nope", 1))


class TestWriteBack:
    def test_identity_write_back(self, sample_container):
        values, idx = select_cover(sample_container, SelectionSpec("layer1.weight", 32))
        out = write_back(sample_container, "layer1.weight", idx, values)
        np.testing.assert_array_equal(
            out.tensor("layer1.weight"), sample_container.tensor("layer1.weight")
        )

    def test_f32_identity_when_values_originated_f32(self, sample_container):
        values, idx = select_cover(sample_container, SelectionSpec("layer0.weight", 64))
        out = write_back(sample_container, "layer0.weight", idx, values)
        assert (
            out.tensor("layer0.weight").tobytes()
            == sample_container.tensor("layer0.weight").tobytes()
        )

    def test_empty_and_single(self, sample_container):
        out = write_back(sample_container, "layer1.weight", [], [])
        np.testing.assert_array_equal(
            out.tensor("layer1.weight"), sample_container.tensor("layer1.weight")
        )
        out = write_back(sample_container, "layer1.weight", [3], [9.5])
        diff = out.tensor("layer1.weight").ravel() != sample_container.tensor(
            "layer1.weight"
        ).ravel()
        assert int(np.sum(diff)) == 1

    def test_does_not_mutate_input(self, sample_container):
        before = sample_container.tensor("layer1.weight").copy()
        write_back(sample_container, "layer1.weight", [0], [123.0])
        np.testing.assert_array_equal(sample_container.tensor("layer1.weight"), before)

    def test_index_out_of_range(self, sample_container):
        with pytest.raises(ParameterError):
            write_back(sample_container, "layer1.weight", [32], [0.0])


class TestHistogram:
    def test_hand_binning(self):
        counts, edges = histogram([0.0, 0.5, 1.0], 2, (0.0, 1.0))
        np.testing.assert_array_equal(counts, [1, 2])  # last bin closed: 1.0 counts
        np.testing.assert_allclose(edges, [0.0, 0.5, 1.0])

    def test_all_equal_single_bin(self):
        counts, _ = histogram([5.0, 5.0, 5.0], 4)
        assert int(np.max(counts)) == 3 and int(np.sum(counts > 0)) == 1

    def test_counts_sum(self):
        rng = np.random.default_rng(1)
        v = rng.normal(0, 1, 1234)
        counts, _ = histogram(v, 7)
        assert int(np.sum(counts)) == 1234

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            histogram([], 3)


class TestPlanManifest:
    def make_plan(self, count=40, dim=4, tail=0):
        sel = SelectionSpec("layer0.weight", count, permute=True, location_seed=bytes(32))
        return PlanManifest(
            selection=sel,
            dimension=dim,
            num_blocks=(count - tail) // dim,
            tail_length=tail,
            clients=(("1", 8), ("2", 0)),
            key_digest="ab" * 32,
        )

    def test_round_trip(self, tmp_path):
        plan = self.make_plan(count=42, tail=2)
        path = tmp_path / "plan.json"
        save_plan(path, plan)
        assert load_plan(path) == plan

    def test_count_invariant(self):
        with pytest.raises(ParameterError):
            self.make_plan(count=41, tail=0)

    def test_digest_check(self, tmp_path):
        key_path = tmp_path / "keys.json"
        key_path.write_bytes(b"{}")
        plan = self.make_plan(count=40)
        with pytest.raises(PlanDigestError):
            check_key_digest(plan, key_path)

    def test_embedding_plan_view(self):
        plan = self.make_plan()
        eplan = plan.embedding_plan()
        assert eplan.client_order == ("1", "2")
        assert plan.bit_length_of("1") == 8
        with pytest.raises(ParameterError):
            plan.bit_length_of("9")


class TestEndToEndThroughContainers:
    def _run(self, dtype, alpha, tol):
        rng = np.random.default_rng(17)
        weights = rng.normal(0, 0.05, (40, 25)).astype(dtype)
        cont = WeightContainer({"layer0.weight": weights})
        dc = DcParams(delta=0.1, alpha=alpha)
        keys = orthogonal_keys(5, 2, [dc, dc], seed=2)
        sel = SelectionSpec("layer0.weight", 1000, permute=True, location_seed=bytes(32))
        cover, idx = select_cover(cont, sel)
        plan = plan_for(cover.size, 5, keys)
        payloads = [Payload(k.client_id, rng.bytes(25), 200) for k in keys]
        wm = embed_payloads(cover, plan, payloads, keys)
        wm_cont = write_back(cont, "layer0.weight", idx, wm)

        cover2, _ = select_cover(wm_cont, sel)
        restored = recover_sequence(cover2, plan, keys)
        out = write_back(wm_cont, "layer0.weight", idx, restored)
        a = out.tensor("layer0.weight").astype(np.float64)
        b = cont.tensor("layer0.weight").astype(np.float64)
        bound = tol * np.maximum(1.0, np.abs(b))
        assert np.all(np.abs(a - b) <= bound)

    def test_f64_restores_within_1e9(self):
        self._run(np.float64, alpha=0.9, tol=1e-9)

    def test_f32_restores_within_cast_error(self):
        # alpha <= 0.75: recovery amplifies the f32 cast error by alpha/(1-alpha)
        self._run(np.float32, alpha=0.75, tol=1.2e-7)
