#!/usr/bin/env python3
"""
Test script to verify the SQLite run registry.
"""

import os
import sqlite3
import sys
import tempfile

from database import RunDatabase


def _database(tmp):
    return RunDatabase(os.path.join(tmp, "runs.db"))


def test_save_and_get_run():
    with tempfile.TemporaryDirectory() as tmp:
        db = _database(tmp)
        manifest = {"run_id": "pipeline-1", "seed": 7, "artifacts": {"vn.bin": "ab" * 32}}
        assert db.save_run("pipeline-1", "pipeline", 7, "c" * 64, "ok", 0, "output", manifest)
        record = db.get_run("pipeline-1")
        assert record["command"] == "pipeline" and record["seed"] == 7
        assert record["manifest"] == manifest
        assert record["created_at"] is not None
        assert db.run_exists("pipeline-1")
        assert not db.run_exists("pipeline-2")
        assert db.get_run("pipeline-2") is None
    print("✓ Runs saved with their manifest and read back")


def test_save_replaces_same_run_id():
    with tempfile.TemporaryDirectory() as tmp:
        db = _database(tmp)
        db.save_run("sample-1", "sample", 1, "h", "ok", 0)
        db.save_run("sample-1", "sample", 1, "h", "data-error", 3)
        assert db.get_run("sample-1")["status"] == "data-error"
        assert db.get_database_stats()["total_runs"] == 1
    print("✓ Saving an existing run id replaces the record")


def test_runs_by_config_and_recent():
    with tempfile.TemporaryDirectory() as tmp:
        db = _database(tmp)
        for index in range(3):
            db.save_run(f"haar-{index}", "haar", index, "same", "ok", 0)
        db.save_run("evolve-0", "evolve", None, None, "config-error", 2)
        assert [r["run_id"] for r in db.get_runs_by_config("same")] == ["haar-0", "haar-1", "haar-2"]
        recent = db.get_recent_runs(2)
        assert [r["run_id"] for r in recent] == ["evolve-0", "haar-2"]
        assert recent[0]["manifest"] is None and recent[0]["seed"] is None
    print("✓ Runs grouped by configuration hash; recent runs newest first")


def test_database_stats():
    with tempfile.TemporaryDirectory() as tmp:
        db = _database(tmp)
        db.save_run("a", "pipeline", 0, "x", "ok", 0)
        db.save_run("b", "pipeline", 0, "x", "validation-failed", 4)
        db.save_run("c", "nist", 1, "y", "ok", 0)
        stats = db.get_database_stats()
        assert stats["total_runs"] == 3
        assert stats["failed_runs"] == 1
        assert stats["unique_configs"] == 2
        assert stats["runs_today"] == 3
        assert stats["database_size_bytes"] > 0
    print("✓ Statistics count runs, failures and configurations")


def test_delete_old_runs():
    with tempfile.TemporaryDirectory() as tmp:
        db = _database(tmp)
        db.save_run("old", "haar", 0, "x", "ok", 0)
        db.save_run("new", "haar", 0, "x", "ok", 0)
        with sqlite3.connect(db.db_path) as conn:
            conn.execute("UPDATE runs SET created_at = '2000-01-01 00:00:00' WHERE run_id = 'old'")
        assert db.delete_old_runs(30) == 1
        assert not db.run_exists("old") and db.run_exists("new")
    print("✓ Runs older than the retention window deleted")


def run_all_tests():
    """
    Run all tests and provide a summary.
    """
    tests = [
        ("Save and get", test_save_and_get_run),
        ("Replace", test_save_replaces_same_run_id),
        ("Config and recent", test_runs_by_config_and_recent),
        ("Statistics", test_database_stats),
        ("Retention", test_delete_old_runs),
    ]

    print("=" * 60)
    print("LATTICEBS - DATABASE TESTS")
    print("=" * 60)
    passed_tests = 0
    for test_name, test_function in tests:
        print(f"\n{'=' * 20} {test_name} {'=' * 20}")
        try:
            test_function()
            passed_tests += 1
            print(f"✓ {test_name} PASSED")
        except Exception as e:
            print(f"✗ {test_name} FAILED with exception: {e!r}")
    print("\n" + "=" * 60)
    print(f"Tests passed: {passed_tests}/{len(tests)}")
    print("=" * 60)
    return passed_tests == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_all_tests() else 1)
