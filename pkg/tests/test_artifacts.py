"""Checkpoint container and report serialization."""

import numpy as np
import pytest

from bdhh import artifacts, dataio
from bdhh.errors import ArtifactError, MissingFile
from bdhh.metrics import build_report
from bdhh.model import ModelState, init_params
from bdhh.objective import HyperParams
from conftest import planted_records


def make_state(seed=0):
    records = planted_records(n_users=3, n_items=6, set_size=2, n_baskets=3, seed=seed)
    dataset = dataio.preprocess(records, tag="toy", n_levels=3)
    hp = HyperParams(d=4, heads=2, max_seq_len=6, seed=seed)
    params = init_params(hp, dataset.vocab, np.random.default_rng(seed))
    return ModelState(params=params, hp=hp, vocab=dataset.vocab)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        state = make_state()
        path = tmp_path / "model.bdhh"
        artifacts.save_checkpoint(path, state, extra_meta={"config_hash": "x"})
        loaded, meta = artifacts.load_checkpoint(path)
        assert meta["extra"]["config_hash"] == "x"
        assert loaded.hp == state.hp
        assert loaded.vocab.item_ids == state.vocab.item_ids
        assert set(loaded.params) == set(state.params)
        for name in state.params:
            np.testing.assert_array_equal(loaded.params[name], state.params[name])

    def test_two_saves_are_byte_identical(self, tmp_path):
        state = make_state()
        p1, p2 = tmp_path / "a.bdhh", tmp_path / "b.bdhh"
        artifacts.save_checkpoint(p1, state)
        artifacts.save_checkpoint(p2, state)
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_is_byte_identical(self, tmp_path):
        state = make_state()
        p1, p2 = tmp_path / "a.bdhh", tmp_path / "b.bdhh"
        artifacts.save_checkpoint(p1, state)
        loaded, meta = artifacts.load_checkpoint(p1)
        artifacts.save_checkpoint(p2, loaded, extra_meta=meta["extra"])
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_and_corrupt_files(self, tmp_path):
        with pytest.raises(MissingFile):
            artifacts.load_checkpoint(tmp_path / "none.bdhh")
        bad = tmp_path / "bad.bdhh"
        bad.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ArtifactError):
            artifacts.load_checkpoint(bad)

    def test_truncation_detected(self, tmp_path):
        state = make_state()
        path = tmp_path / "model.bdhh"
        artifacts.save_checkpoint(path, state)
        blob = path.read_bytes()
        path.write_bytes(blob + b"extra")
        with pytest.raises(ArtifactError):
            artifacts.load_checkpoint(path)


class TestReports:
    def _report(self):
        values = {f"{m}@{k}": 0.5 for k in (5, 10) for m in ("ndcg", "hit", "recall")}
        return build_report(
            dataset="toy", variant="bdhh", values=values, n_users=3, seed=1,
            checkpoint_id="deadbeef", ks=(5, 10),
        )

    def test_report_round_trip_and_determinism(self, tmp_path):
        report = self._report()
        j1, t1 = tmp_path / "r1.json", tmp_path / "r1.tsv"
        j2, t2 = tmp_path / "r2.json", tmp_path / "r2.tsv"
        artifacts.save_report(report, j1, t1)
        artifacts.save_report(report, j2, t2)
        assert j1.read_bytes() == j2.read_bytes()
        assert t1.read_bytes() == t2.read_bytes()
        import json

        payload = json.loads(j1.read_text())
        assert payload["reports"][0]["variant"] == "bdhh"
        assert payload["reports"][0]["checkpoint_id"] == "deadbeef"

    def test_multi_report_tsv_has_single_header(self, tmp_path):
        reports = [self._report(), self._report()]
        j, t = tmp_path / "r.json", tmp_path / "r.tsv"
        artifacts.save_report(reports, j, t)
        lines = t.read_text().splitlines()
        assert lines[0].startswith("variant\t")
        assert sum(1 for line in lines if line.startswith("variant\t")) == 1
        assert len(lines) == 1 + 2 * 2  # header + 2 reports x 2 ks


def test_config_hash_is_stable_and_order_free():
    h1 = artifacts.config_hash({"a": 1, "b": [1, 2]})
    h2 = artifacts.config_hash({"b": [1, 2], "a": 1})
    assert h1 == h2
    assert h1 != artifacts.config_hash({"a": 2, "b": [1, 2]})
