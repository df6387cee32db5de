import struct

import numpy as np
import pytest

import ievm
from ievm import io
from ievm.errors import DataFormatError


@pytest.fixture
def samples():
    rng = np.random.default_rng(33)
    out = []
    for label in ("alpha", "beta", "label,with comma", "unié"):
        for _ in range(3):
            out.append(ievm.LabeledSample(rng.normal(size=4), label))
    return out


class TestFeatureCSV:
    def test_round_trip_exact(self, samples, tmp_path):
        path = tmp_path / "feats.csv"
        io.save_features(samples, path, "csv")
        back = io.load_features(path)
        assert len(back) == len(samples)
        for a, b in zip(samples, back):
            assert a.label == b.label
            # repr() serialisation keeps float64 exactly
            np.testing.assert_array_equal(a.features, b.features)

    def test_header_layout(self, samples, tmp_path):
        path = tmp_path / "feats.csv"
        io.save_features(samples, path, "csv")
        assert path.read_text().splitlines()[0] == "label,f0,f1,f2,f3"

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("name,f0\nx,1.0\n")
        with pytest.raises(DataFormatError, match="header"):
            io.load_features(path, "csv")

    def test_bad_field_count_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0,f1\na,1.0,2.0\nb,3.0\n")
        with pytest.raises(DataFormatError, match="row 3"):
            io.load_features(path, "csv")

    def test_non_numeric_value_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\na,1.0\nb,oops\n")
        with pytest.raises(DataFormatError, match="row 3"):
            io.load_features(path, "csv")

    def test_empty_body_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("label,f0\n")
        with pytest.raises(DataFormatError, match="no samples"):
            io.load_features(path, "csv")

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gaps.csv"
        path.write_text("label,f0\na,1.0\n\nb,2.0\n")
        assert len(io.load_features(path, "csv")) == 2


class TestFeatureBinary:
    def test_round_trip_is_float32(self, samples, tmp_path):
        path = tmp_path / "feats.bin"
        io.save_features(samples, path, "binary")
        back = io.load_features(path)
        for a, b in zip(samples, back):
            assert a.label == b.label
            expected = a.features.astype(np.float32).astype(np.float64)
            np.testing.assert_array_equal(expected, b.features)

    def test_magic_and_sniffing(self, samples, tmp_path):
        binary = tmp_path / "feats.bin"
        csv_path = tmp_path / "feats.csv"
        io.save_features(samples, binary, "binary")
        io.save_features(samples, csv_path, "csv")
        assert binary.read_bytes()[:4] == b"EVMF"
        assert io.sniff_format(binary) == "binary"
        assert io.sniff_format(csv_path) == "csv"

    def test_truncated_record_rejected(self, samples, tmp_path):
        path = tmp_path / "feats.bin"
        io.save_features(samples, path, "binary")
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(DataFormatError, match="truncated"):
            io.load_features(path)

    def test_trailing_garbage_rejected(self, samples, tmp_path):
        path = tmp_path / "feats.bin"
        io.save_features(samples, path, "binary")
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(DataFormatError, match="trailing"):
            io.load_features(path)

    def test_wrong_version_rejected(self, samples, tmp_path):
        path = tmp_path / "feats.bin"
        io.save_features(samples, path, "binary")
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError, match="version"):
            io.load_features(path)

    def test_explicit_format_overrides_sniffing(self, samples, tmp_path):
        path = tmp_path / "feats.bin"
        io.save_features(samples, path, "binary")
        with pytest.raises(DataFormatError):
            io.load_features(path, "csv")


class TestSaveValidation:
    def test_empty_set_rejected(self, tmp_path):
        with pytest.raises(DataFormatError, match="empty"):
            io.save_features([], tmp_path / "x.csv", "csv")

    def test_mixed_dimensions_rejected(self, tmp_path):
        bad = [
            ievm.LabeledSample(np.zeros(2), "a"),
            ievm.LabeledSample(np.zeros(3), "b"),
        ]
        with pytest.raises(DataFormatError, match="dimension"):
            io.save_features(bad, tmp_path / "x.csv", "csv")

    def test_unknown_format_rejected(self, samples, tmp_path):
        with pytest.raises(DataFormatError, match="format"):
            io.save_features(samples, tmp_path / "x", "parquet")


class TestConvert:
    def test_csv_to_binary_and_back(self, samples, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.bin"
        c = tmp_path / "c.csv"
        io.save_features(samples, a, "csv")
        assert io.convert_features(a, b) == "binary"
        assert io.convert_features(b, c) == "csv"
        back = io.load_features(c)
        for x, y in zip(samples, back):
            assert x.label == y.label
            expected = x.features.astype(np.float32).astype(np.float64)
            np.testing.assert_array_equal(expected, y.features)

    def test_explicit_target_format(self, samples, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        io.save_features(samples, a, "csv")
        assert io.convert_features(a, b, "csv") == "csv"
        assert io.sniff_format(b) == "csv"


class TestModelIO:
    @pytest.fixture
    def model(self):
        data = ievm.synth_blobs(3, 15, 4, 1.0, 77)
        model = ievm.batch_fit(data[:30], ievm.EVMConfig(tail_size=7, budget=5))
        ievm.partial_fit(model, data[30:])
        return model

    def test_round_trip_bitwise(self, model, tmp_path):
        path = tmp_path / "model.evmm"
        io.save_model(model, path)
        back = io.load_model(path)
        assert back.config == model.config
        assert back.epoch == model.epoch
        assert back.class_labels == model.class_labels
        for label in model.classes:
            assert len(back.classes[label]) == len(model.classes[label])
            for a, b in zip(model.classes[label], back.classes[label]):
                np.testing.assert_array_equal(a.anchor, b.anchor)
                np.testing.assert_array_equal(a.tail, b.tail)
                assert a.params == b.params
            np.testing.assert_array_equal(
                model.coverage_sums[label], back.coverage_sums[label]
            )

    def test_predictions_survive_round_trip(self, model, tmp_path):
        path = tmp_path / "model.evmm"
        io.save_model(model, path)
        back = io.load_model(path)
        q = np.full(4, 0.3)
        assert ievm.predict(model, q) == ievm.predict(back, q)

    def test_crc_detects_corruption(self, model, tmp_path):
        path = tmp_path / "model.evmm"
        io.save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError, match="checksum"):
            io.load_model(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.evmm"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(DataFormatError, match="magic"):
            io.load_model(path)

    def test_truncated_payload_rejected(self, model, tmp_path):
        path = tmp_path / "model.evmm"
        io.save_model(model, path)
        blob = path.read_bytes()
        cut = blob[:-40]
        path.write_bytes(cut + struct.pack("<I", __import__("zlib").crc32(cut) & 0xFFFFFFFF))
        with pytest.raises(DataFormatError, match="truncated|unread"):
            io.load_model(path)
