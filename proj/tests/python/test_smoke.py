"""Smoke tests for the python bindings: exercise the text-level pipeline
and the numeric primitives end to end."""

import math
import os

import pytest

import powergear as pg

TINY_DFG = """dfg v1 latency=4
node 0 load memory-op width=8
node 1 add binary-op width=8
node 2 ret control-op width=8
edge 0 1 var=a width=8
edge 1 2 var=b width=8
"""


def test_version_string():
    assert pg.__version__


def test_normalize_round_trip():
    normalized = pg.normalize_dfg(TINY_DFG)
    assert normalized.startswith("dfg v1 latency=4")
    assert pg.normalize_dfg(normalized) == normalized


def test_dfg_stats():
    nodes, edges, latency = pg.dfg_stats(TINY_DFG)
    assert (nodes, edges, latency) == (3, 2, 4)


def test_parse_errors_raise_value_error():
    with pytest.raises(ValueError):
        pg.normalize_dfg("dfg v1 latency=1\nnode 0 bogus binary-op width=8\n")


def test_hamming():
    assert pg.hamming_hex("ff", "00", 8) == 8
    assert pg.hamming_hex("a", "a", 4) == 0


def test_activities():
    events = [(0, "0"), (1, "f"), (2, "0")]
    assert pg.switching_activity(events, 4, 3) == pytest.approx(8.0 / 3.0)
    assert pg.activation_rate(events, 4, 3) == pytest.approx(2.0 / 3.0)


def test_trace_construct_oracle_pipeline():
    stim = "stim v1\nin 0 0x01 0x02 0x03\n"
    trace_text = pg.trace_dfg(TINY_DFG, stim, 4)
    assert trace_text.startswith("trace v1")
    sample_text = pg.construct_sample(TINY_DFG, trace_text)
    assert sample_text.startswith("sample v1")
    watts = pg.oracle_power_text(sample_text)
    assert watts > 0


def test_pareto_and_adrs():
    front = pg.pareto_front([(1, 2), (2, 1), (2, 2)])
    assert front == [(1.0, 2.0), (2.0, 1.0)]
    assert pg.adrs([(1, 1)], [(1.1, 1.2)]) == pytest.approx(0.2)
    assert pg.adrs([(1, 1)], [(1, 1)]) == 0.0


def test_corpus_train_predict(tmp_path):
    root = tmp_path / "corpus"
    entries = pg.emit_corpus(8, 12, str(root))
    assert len(entries) == 8
    assert all(e.dynamic_watts > 0 for e in entries)
    apps = {e.app for e in entries}
    assert apps  # grouped into family subdirectories
    for e in entries:
        assert (root / e.app / (e.stem + ".sample")).exists()
        assert (root / e.app / (e.stem + ".meta")).exists()

    ckpt = tmp_path / "model.ckpt"
    val_mape = pg.train_single_dir(str(root), "dynamic", 0, 3, 4, str(ckpt))
    assert val_mape >= 0
    assert ckpt.exists()

    sample_path = root / entries[0].app / (entries[0].stem + ".sample")
    meta_path = root / entries[0].app / (entries[0].stem + ".meta")
    watts = pg.predict_file(str(ckpt), sample_path.read_text(), meta_path.read_text())
    assert math.isfinite(watts)
