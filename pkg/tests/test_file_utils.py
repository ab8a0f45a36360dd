"""
Tests for the file and console utilities
"""
import io
import json
import logging
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from utils.console_utils import ConsoleUtils
from utils.file_utils import FileUtils


def test_get_safe_filename():
    assert FileUtils.get_safe_filename('run: a/b?.csv') == 'run__a_b_.csv'


def test_run_directory(tmp_path):
    path = FileUtils.run_directory(str(tmp_path / "out"), "study 1", "ode-run")
    assert path == tmp_path / "out" / "study_1-ode-run"
    assert path.is_dir()
    assert FileUtils.run_directory(str(tmp_path / "out"), "study 1", "ode-run") == path


def test_default_output_root(monkeypatch):
    monkeypatch.setenv("STEPFLOW_OUTPUT_DIR", "/data/runs")
    assert FileUtils.default_output_root() == "/data/runs"
    monkeypatch.delenv("STEPFLOW_OUTPUT_DIR")
    assert FileUtils.default_output_root() == "stepflow_output"


@pytest.mark.parametrize("value,text", [
    (0.1, "0.10000000000000001"),
    (1.0, "1"),
    (1e-20, "9.9999999999999995e-21"),
    (np.float64(2.5), "2.5"),
])
def test_format_float(value, text):
    assert FileUtils.format_float(value) == text


def test_write_csv(tmp_path):
    path = FileUtils.write_csv(tmp_path / "table.csv", ("family", "N", "residual"),
                               [("I1", 16, 0.25), ("F", np.int64(32), np.float64(1e-3))])
    assert path.read_bytes() == b"family,N,residual\nI1,16,0.25\nF,32,0.001\n"


def test_to_json_is_deterministic():
    data = {"b": np.float64(1.5), "a": [np.int64(2), float("nan"), float("inf")], "c": None}
    text = FileUtils.to_json(data)
    assert text == FileUtils.to_json(dict(reversed(list(data.items()))))
    assert json.loads(text) == {"a": [2, "nan", "inf"], "b": 1.5, "c": None}


def test_write_json_and_list_outputs(tmp_path):
    FileUtils.write_json(tmp_path / "meta.json", {"version": "1.0.0"})
    FileUtils.write_csv(tmp_path / "energy.csv", ("t",), [(0.0,)])
    (tmp_path / "notes.txt").write_text("skip")
    assert (tmp_path / "meta.json").read_text().endswith("}\n")
    assert FileUtils.list_outputs(tmp_path) == ["energy.csv", "meta.json"]


def test_read_text_detects_encoding(tmp_path):
    path = tmp_path / "config.cfg"
    path.write_bytes("profile.A = 0.2\n".encode("utf-16"))
    assert "profile.A = 0.2" in FileUtils.read_text(str(path))
    assert FileUtils.detect_text_encoding(str(tmp_path / "missing")) == "utf-8"


def test_summary_line_sorted_and_compact():
    line = ConsoleUtils.summary_line({"status": "ok", "command": "selftest", "slope": None})
    assert line == '{"command":"selftest","slope":null,"status":"ok"}'
    stream = io.StringIO()
    ConsoleUtils.print_summary({"a": 1}, stream)
    assert stream.getvalue() == '{"a":1}\n'


def test_configure_logging_replaces_handler():
    stream = io.StringIO()
    ConsoleUtils.configure_logging(verbose=True, stream=stream)
    ConsoleUtils.configure_logging(verbose=True, stream=stream)
    root = logging.getLogger()
    assert sum(1 for handler in root.handlers if getattr(handler, "_stepflow", False)) == 1
    ConsoleUtils.progress_logger("stepflow.test")("halfway", 50)
    assert "[ 50%] halfway" in stream.getvalue()
    ConsoleUtils.configure_logging()
    assert root.level == logging.WARNING
