"""Tests for the SQLite run archive"""

import json
import sqlite3

import pytest

from src.core.run_archive import RunArchive, RunRecord


@pytest.fixture
def archive(tmp_path):
    return RunArchive(str(tmp_path / "workspace"))


def _record(command="analyze", exit_code=0):
    return RunRecord(command=command, scenario="harmonic_potential", exit_code=exit_code,
                     config={"scenario": {"name": "harmonic_potential"}, "order": 1})


def test_workspace_layout(archive):
    assert archive.db_path.exists()
    assert (archive.workspace_dir / "runs").is_dir()


def test_record_and_get(archive):
    document = {"zeros": {"zeros": []}, "config": {"order": 1}}
    run_id = archive.record_run(_record(), document)
    assert run_id is not None

    stored = archive.get_run(run_id)
    assert stored["command"] == "analyze"
    assert stored["config"]["order"] == 1
    assert stored["document"] == document
    with open(archive.workspace_dir / "runs" / f"{run_id}.json") as f:
        assert json.load(f) == document


def test_failed_run_without_document(archive):
    run_id = archive.record_run(_record(exit_code=2))
    stored = archive.get_run(run_id)
    assert stored["exit_code"] == 2
    assert stored["document"] is None


def test_list_runs_filters_by_command(archive):
    archive.record_run(_record("analyze"))
    archive.record_run(_record("sweep"))
    archive.record_run(_record("sweep"))
    assert len(archive.list_runs()) == 3
    sweeps = archive.list_runs("sweep")
    assert [r.command for r in sweeps] == ["sweep", "sweep"]
    assert sweeps[0].run_id < sweeps[1].run_id


def test_sweep_rows_keep_order(archive):
    run_id = archive.record_run(_record("sweep"))
    rows = [{"swept_value": v, "zero_count": c, "zeros": [], "error": None}
            for v, c in [(-3.0, 1), (-2.0, 1), (1.0, 0)]]
    assert archive.record_sweep_rows(run_id, rows) == 3
    assert archive.get_sweep_rows(run_id) == rows


def test_delete_run(archive):
    run_id = archive.record_run(_record("sweep"), {"sweep": {"rows": []}})
    archive.record_sweep_rows(run_id, [{"swept_value": 1.0, "zero_count": 0}])
    assert archive.delete_run(run_id)
    assert archive.get_run(run_id) is None
    assert archive.get_sweep_rows(run_id) == []
    assert not (archive.workspace_dir / "runs" / f"{run_id}.json").exists()
    assert not archive.delete_run(run_id)


def test_unknown_run(archive):
    assert archive.get_run(999) is None


class FailingConnection:
    """Connection stand-in whose statements fail; records whether it was closed."""

    def __init__(self):
        self.closed = False

    def execute(self, *args):
        raise sqlite3.OperationalError("disk I/O error")

    executemany = execute

    def close(self):
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


@pytest.fixture
def failing(archive, monkeypatch):
    opened = []

    def connect():
        opened.append(FailingConnection())
        return opened[-1]

    monkeypatch.setattr(archive, "_connect", connect)
    return opened


def test_write_failures_are_logged_and_close_the_connection(archive, failing, caplog):
    assert archive.record_run(_record()) is None
    assert archive.record_sweep_rows(1, [{"swept_value": 1.0, "zero_count": 0}]) == 0
    assert not archive.delete_run(1)
    assert len(failing) == 3
    assert all(conn.closed for conn in failing)
    assert "Failed to archive sweep rows of run 1" in caplog.text


def test_read_failures_close_the_connection(archive, failing):
    with pytest.raises(sqlite3.OperationalError):
        archive.get_run(1)
    with pytest.raises(sqlite3.OperationalError):
        archive.list_runs()
    assert all(conn.closed for conn in failing)
