#!/usr/bin/env python3
"""
Database module for LatticeBS - SQLite registry of command-line runs
"""

import json
import logging
import os
import sqlite3
from datetime import date
from typing import Any, Dict, List, Optional

import config

logger = logging.getLogger(__name__)


class RunDatabase:
    """
    SQLite database handler recording every simulator run with its manifest.
    """

    def __init__(self, db_path: str = config.RUN_DATABASE_PATH):
        """
        Initialize the database connection and create tables if they don't exist.

        Args:
            db_path (str): Path to the SQLite database file
        """
        self.db_path = db_path
        self.init_database()

    def init_database(self):
        """
        Create the runs table if it doesn't exist.
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL UNIQUE,
                    command TEXT NOT NULL,
                    seed INTEGER,
                    config_hash TEXT,
                    status TEXT NOT NULL,
                    exit_code INTEGER NOT NULL,
                    output_dir TEXT,
                    manifest TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)

            # Runs of the same configuration are looked up together
            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_config_hash
                ON runs(config_hash)
            """)

            conn.commit()

    def save_run(self, run_id: str, command: str, seed: Optional[int], config_hash: Optional[str],
                 status: str, exit_code: int, output_dir: Optional[str] = None,
                 manifest: Optional[Dict[str, Any]] = None) -> bool:
        """
        Save a run to the database.

        Args:
            run_id (str): Unique run identifier
            command (str): CLI command name
            seed (int, optional): Master seed
            config_hash (str, optional): SHA-256 of the configuration snapshot
            status (str): ok, config-error, data-error, validation-failed or stage-error
            exit_code (int): Process exit code
            output_dir (str, optional): Output directory of the run
            manifest (Dict, optional): Run manifest

        Returns:
            bool: True if saved successfully, False otherwise
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute("""
                    INSERT OR REPLACE INTO runs
                        (run_id, command, seed, config_hash, status, exit_code, output_dir, manifest)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """, (run_id, command, seed, config_hash, status, exit_code, output_dir,
                      json.dumps(manifest) if manifest is not None else None))
                conn.commit()
                return True
        except Exception as e:
            logger.error(f"Error saving run {run_id}: {e}")
            return False

    @staticmethod
    def _row_to_dict(row) -> Dict[str, Any]:
        run_id, command, seed, config_hash, status, exit_code, output_dir, manifest, created_at = row
        return {
            'run_id': run_id,
            'command': command,
            'seed': seed,
            'config_hash': config_hash,
            'status': status,
            'exit_code': exit_code,
            'output_dir': output_dir,
            'manifest': json.loads(manifest) if manifest else None,
            'created_at': created_at,
        }

    _COLUMNS = "run_id, command, seed, config_hash, status, exit_code, output_dir, manifest, created_at"

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """
        Retrieve a run from the database.

        Args:
            run_id (str): Run identifier

        Returns:
            Dict or None: Run record if found, None otherwise
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute(f"SELECT {self._COLUMNS} FROM runs WHERE run_id = ?", (run_id,))
                result = cursor.fetchone()
                return self._row_to_dict(result) if result else None
        except Exception as e:
            logger.error(f"Error retrieving run {run_id}: {e}")
            return None

    def get_runs_by_config(self, config_hash: str) -> List[Dict[str, Any]]:
        """
        Retrieve all runs of one configuration, oldest first.

        Args:
            config_hash (str): Configuration hash

        Returns:
            List[Dict]: Run records
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute(f"""
                    SELECT {self._COLUMNS} FROM runs
                    WHERE config_hash = ?
                    ORDER BY id
                """, (config_hash,))
                return [self._row_to_dict(row) for row in cursor.fetchall()]
        except Exception as e:
            logger.error(f"Error retrieving runs for config {config_hash}: {e}")
            return []

    def get_recent_runs(self, limit: int = 20) -> List[Dict[str, Any]]:
        """Most recent runs, newest first."""
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute(f"SELECT {self._COLUMNS} FROM runs ORDER BY id DESC LIMIT ?", (limit,))
                return [self._row_to_dict(row) for row in cursor.fetchall()]
        except Exception as e:
            logger.error(f"Error retrieving recent runs: {e}")
            return []

    def run_exists(self, run_id: str) -> bool:
        """
        Check if a run is recorded.

        Args:
            run_id (str): Run identifier

        Returns:
            bool: True if the run exists, False otherwise
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute("SELECT COUNT(*) FROM runs WHERE run_id = ?", (run_id,))
                return cursor.fetchone()[0] > 0
        except Exception as e:
            logger.error(f"Error checking run existence for {run_id}: {e}")
            return False

    def delete_old_runs(self, days_to_keep: int = 30) -> int:
        """
        Delete runs older than specified days.

        Args:
            days_to_keep (int): Number of days to keep runs for

        Returns:
            int: Number of deleted records
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute("""
                    DELETE FROM runs
                    WHERE date(created_at) < date('now', ?)
                """, (f"-{int(days_to_keep)} days",))
                deleted_count = cursor.rowcount
                conn.commit()
                return deleted_count
        except Exception as e:
            logger.error(f"Error deleting old runs: {e}")
            return 0

    def get_database_stats(self) -> Dict[str, Any]:
        """
        Get database statistics.

        Returns:
            Dict: Database statistics
        """
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()

                cursor.execute("SELECT COUNT(*) FROM runs")
                total_runs = cursor.fetchone()[0]

                cursor.execute("SELECT COUNT(*) FROM runs WHERE exit_code != 0")
                failed_runs = cursor.fetchone()[0]

                cursor.execute("SELECT COUNT(DISTINCT config_hash) FROM runs")
                unique_configs = cursor.fetchone()[0]

                today = date.today().strftime('%Y-%m-%d')
                cursor.execute("SELECT COUNT(*) FROM runs WHERE date(created_at) = ?", (today,))
                runs_today = cursor.fetchone()[0]

                file_size = os.path.getsize(self.db_path) if os.path.exists(self.db_path) else 0

                return {
                    'total_runs': total_runs,
                    'failed_runs': failed_runs,
                    'unique_configs': unique_configs,
                    'runs_today': runs_today,
                    'database_size_bytes': file_size,
                    'database_size_mb': round(file_size / (1024 * 1024), 2)
                }
        except Exception as e:
            logger.error(f"Error getting database stats: {e}")
            return {
                'total_runs': 0,
                'failed_runs': 0,
                'unique_configs': 0,
                'runs_today': 0,
                'database_size_bytes': 0,
                'database_size_mb': 0
            }
