"""
Run Archive for PoissonOrbits
Keeps analyze and sweep runs in a SQLite database

Each archived run stores the resolved configuration, the result document
and the exit code; sweep runs additionally store one row per grid value.
The archive lives in a workspace directory:

workspace/
├── archive.db        # SQLite database
└── runs/             # one <run_id>.json copy of each result document
"""

import json
import sqlite3
from contextlib import closing
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

# Set up module-level logger
logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """
    One archived invocation.

    Attributes:
        command: "analyze" or "sweep"
        scenario: scenario name from the config
        exit_code: process exit code of the run
        config: resolved configuration document
        created_at: ISO timestamp (archive metadata only, never part of results)
        run_id: database id, set once stored
    """
    command: str
    scenario: str
    exit_code: int
    config: Dict[str, Any] = field(default_factory=dict)
    created_at: str = ""
    run_id: Optional[int] = None

    def __post_init__(self):
        if not self.created_at:
            self.created_at = datetime.now().isoformat()


class RunArchive:
    """SQLite-backed store of analyze/sweep runs under `workspace_dir`."""

    def __init__(self, workspace_dir: str = "./workspace"):
        """
        Open (and create if needed) the archive.

        Args:
            workspace_dir: directory holding archive.db and the runs/ copies
        """
        self.workspace_dir = Path(workspace_dir)
        self.workspace_dir.mkdir(parents=True, exist_ok=True)
        (self.workspace_dir / "runs").mkdir(exist_ok=True)
        self.db_path = self.workspace_dir / "archive.db"
        self._init_database()

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def _init_database(self):
        """
        Initialize SQLite database schema.

        Creates tables for:
        - runs: one row per invocation with config and result document
        - sweep_rows: per-grid-value results of sweep runs
        """
        with closing(self._connect()) as conn, conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    command TEXT NOT NULL,
                    scenario TEXT NOT NULL,
                    exit_code INTEGER NOT NULL,
                    config TEXT NOT NULL,
                    document TEXT,
                    created_at TEXT NOT NULL
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS sweep_rows (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL REFERENCES runs(id),
                    position INTEGER NOT NULL,
                    swept_value REAL,
                    zero_count INTEGER,
                    row TEXT NOT NULL
                )
            """)

    def record_run(self, record: RunRecord, document: Optional[Dict[str, Any]] = None) -> Optional[int]:
        """
        Store a run and a JSON copy of its document.

        Args:
            record: run metadata and config
            document: result document (may be None for failed runs)

        Returns:
            the new run id, or None if the archive could not be written
        """
        try:
            with closing(self._connect()) as conn, conn:
                cursor = conn.execute("""
                    INSERT INTO runs (command, scenario, exit_code, config, document, created_at)
                    VALUES (?, ?, ?, ?, ?, ?)
                """, (
                    record.command,
                    record.scenario,
                    record.exit_code,
                    json.dumps(record.config, sort_keys=True),
                    json.dumps(document, sort_keys=True) if document is not None else None,
                    record.created_at,
                ))
                record.run_id = cursor.lastrowid

            if document is not None:
                with open(self.workspace_dir / "runs" / f"{record.run_id}.json", "w") as f:
                    json.dump(document, f, indent=2, sort_keys=True)

            logger.info(f"Archived {record.command} run {record.run_id} ({record.scenario}, exit {record.exit_code})")
            return record.run_id

        except Exception as e:
            logger.error(f"Failed to archive run: {str(e)}")
            return None

    def record_sweep_rows(self, run_id: int, rows: List[Dict[str, Any]]) -> int:
        """Store sweep rows in order; returns the number written (0 on failure)."""
        try:
            with closing(self._connect()) as conn, conn:
                conn.executemany("""
                    INSERT INTO sweep_rows (run_id, position, swept_value, zero_count, row)
                    VALUES (?, ?, ?, ?, ?)
                """, [
                    (run_id, position, row.get("swept_value"), row.get("zero_count"),
                     json.dumps(row, sort_keys=True))
                    for position, row in enumerate(rows)
                ])
            return len(rows)
        except Exception as e:
            logger.error(f"Failed to archive sweep rows of run {run_id}: {str(e)}")
            return 0

    def list_runs(self, command: Optional[str] = None) -> List[RunRecord]:
        """
        List archived runs, oldest first.

        Args:
            command: optional filter ("analyze" or "sweep")
        """
        query = "SELECT id, command, scenario, exit_code, config, created_at FROM runs"
        params: tuple = ()
        if command:
            query += " WHERE command = ?"
            params = (command,)
        with closing(self._connect()) as conn:
            fetched = conn.execute(query + " ORDER BY id", params).fetchall()
        return [
            RunRecord(command=row[1], scenario=row[2], exit_code=row[3], config=json.loads(row[4]),
                      created_at=row[5], run_id=row[0])
            for row in fetched
        ]

    def get_run(self, run_id: int) -> Optional[Dict[str, Any]]:
        """Run metadata plus its document, or None if unknown."""
        with closing(self._connect()) as conn:
            row = conn.execute("""
                SELECT id, command, scenario, exit_code, config, document, created_at
                FROM runs WHERE id = ?
            """, (run_id,)).fetchone()
        if row is None:
            logger.error(f"Run not found: {run_id}")
            return None
        record = RunRecord(command=row[1], scenario=row[2], exit_code=row[3], config=json.loads(row[4]),
                           created_at=row[6], run_id=row[0])
        return {**asdict(record), "document": json.loads(row[5]) if row[5] else None}

    def get_sweep_rows(self, run_id: int) -> List[Dict[str, Any]]:
        with closing(self._connect()) as conn:
            fetched = conn.execute("SELECT row FROM sweep_rows WHERE run_id = ? ORDER BY position",
                                   (run_id,)).fetchall()
        return [json.loads(r[0]) for r in fetched]

    def delete_run(self, run_id: int) -> bool:
        """Remove a run, its sweep rows and its document copy."""
        try:
            with closing(self._connect()) as conn, conn:
                conn.execute("DELETE FROM sweep_rows WHERE run_id = ?", (run_id,))
                deleted = conn.execute("DELETE FROM runs WHERE id = ?", (run_id,)).rowcount > 0
            copy = self.workspace_dir / "runs" / f"{run_id}.json"
            if copy.exists():
                copy.unlink()
            if deleted:
                logger.info(f"Deleted run: {run_id}")
            return deleted
        except Exception as e:
            logger.error(f"Failed to delete run: {str(e)}")
            return False
