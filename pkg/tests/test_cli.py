"""Command-line behavior: exit codes, seed resolution, output, serving.

Exit-code contract under test:
    0  run finished with every milestone reached / dataset verified
    2  unusable input (unknown scenario, malformed document, bad dataset)
    3  run executed but a milestone missed its deadline
"""

from __future__ import annotations

import json
import shutil
import signal
import subprocess
import sys
import time
import urllib.request

import pytest

from railrange.cli import SEED_ENV_VAR, _parse_speed, main
from railrange.errors import SchemaError
from railrange.scenario import get_builtin, to_document


@pytest.fixture(autouse=True)
def clean_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


class TestArgumentHandling:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["--version"])
        assert err.value.code == 0
        assert capsys.readouterr().out.startswith("railrange ")

    def test_no_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_speed_parsing(self):
        assert _parse_speed("max") == "max"
        assert _parse_speed("2.5") == 2.5
        with pytest.raises(SchemaError):
            _parse_speed("fast")
        with pytest.raises(SchemaError):
            _parse_speed("0")

    def test_unknown_scenario(self, capsys):
        assert main(["run", "--scenario", "nosuch"]) == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_bad_speed_value(self, capsys):
        assert main(["run", "--scenario", "benign", "--speed", "-1"]) == 2


class TestRun:
    def test_benign_run_with_dataset(self, tmp_path, capsys):
        code = main(["run", "--scenario", "benign", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "scenario benign seed 42" in out
        assert "0/0 locators resolved" in out
        assert (tmp_path / "benign" / "manifest.json").is_file()

    def test_seed_env_fallback(self, monkeypatch, capsys):
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert main(["run", "--scenario", "benign"]) == 0
        assert "scenario benign seed 7" in capsys.readouterr().out

    def test_seed_flag_beats_env(self, monkeypatch, capsys):
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert main(["run", "--scenario", "benign", "--seed", "9"]) == 0
        assert "scenario benign seed 9" in capsys.readouterr().out

    def test_bad_seed_env(self, monkeypatch, capsys):
        monkeypatch.setenv(SEED_ENV_VAR, "zz")
        assert main(["run", "--scenario", "benign"]) == 2
        assert SEED_ENV_VAR in capsys.readouterr().err

    def test_scenario_from_file(self, tmp_path, capsys):
        doc = to_document(get_builtin("benign"))
        path = tmp_path / "benign.json"
        path.write_text(json.dumps(doc))
        assert main(["run", "--scenario", str(path)]) == 0
        assert "scenario benign" in capsys.readouterr().out

    def test_invalid_json_file(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{oops")
        assert main(["run", "--scenario", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_structurally_invalid_document(self, tmp_path, capsys):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"schema_version": "1"}))
        assert main(["run", "--scenario", str(path)]) == 2

    def test_missed_milestone_is_exit_3(self, tmp_path, capsys):
        doc = to_document(get_builtin("as1"))
        doc["milestones"][0]["deadline_us"] = 1_000_000  # impossible deadline
        path = tmp_path / "as1-hopeless.json"
        path.write_text(json.dumps(doc))
        assert main(["run", "--scenario", str(path)]) == 3
        assert "milestone failed" in capsys.readouterr().err

    def test_paced_run(self, capsys):
        # Large ratio exercises the wall-clock pacing loop without real delay.
        assert main(["run", "--scenario", "benign", "--speed", "100000"]) == 0
        assert "scenario benign" in capsys.readouterr().out

    def test_two_runs_package_identically(self, tmp_path, capsys):
        for sub in ("a", "b"):
            assert main(["run", "--scenario", "benign",
                         "--out", str(tmp_path / sub)]) == 0
        for name in ("manifest.json", "catalog.json", "timeline.log"):
            first = (tmp_path / "a" / "benign" / name).read_bytes()
            second = (tmp_path / "b" / "benign" / name).read_bytes()
            assert first == second


class TestInspect:
    def test_verifies_and_resolves(self, benign_bundle, capsys):
        assert main(["inspect", "--dataset", str(benign_bundle)]) == 0
        out = capsys.readouterr().out
        assert "manifest: OK (5 files, scenario benign, seed 42)" in out
        assert "catalog: 0/0 locators resolved" in out

    def test_ioc_scan_clean_on_benign(self, benign_bundle, capsys):
        assert main(["inspect", "--dataset", str(benign_bundle), "--ioc-scan"]) == 0
        assert "findings: none" in capsys.readouterr().out

    def test_missing_dataset(self, tmp_path, capsys):
        assert main(["inspect", "--dataset", str(tmp_path / "nowhere")]) == 2

    def test_tampered_file_detected(self, benign_bundle, tmp_path, capsys):
        copy = tmp_path / "copy"
        shutil.copytree(benign_bundle, copy)
        with open(copy / "timeline.log", "ab") as fh:
            fh.write(b"x")
        assert main(["inspect", "--dataset", str(copy)]) == 2
        assert "timeline.log" in capsys.readouterr().err

    def test_stray_file_detected(self, benign_bundle, tmp_path, capsys):
        copy = tmp_path / "copy"
        shutil.copytree(benign_bundle, copy)
        (copy / "extra.bin").write_bytes(b"planted")
        assert main(["inspect", "--dataset", str(copy)]) == 2


class TestServe:
    def test_bad_pause_label(self, capsys):
        code = main(["serve", "--scenario", "as2", "--port", "0",
                     "--pause-at", "AS2-step-99"])
        assert code == 2
        assert "AS2-step-99" in capsys.readouterr().err

    def test_serve_benign_to_completion(self):
        proc = subprocess.Popen(
            [sys.executable, "-m", "railrange.cli", "serve", "--scenario",
             "benign", "--port", "0", "--speed", "max"],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
        try:
            banner = proc.stdout.readline().strip()
            assert banner.startswith("serving benign (seed 42) on http://")
            url = banner.rsplit(" ", 1)[-1]
            deadline = time.time() + 60
            state = None
            while time.time() < deadline:
                with urllib.request.urlopen(url + "/state", timeout=5) as resp:
                    state = json.loads(resp.read())
                if state["finished"]:
                    break
                time.sleep(0.2)
            assert state is not None and state["finished"] is True
            assert state["sim_time_us"] == state["duration_us"]
        finally:
            proc.send_signal(signal.SIGINT)
            assert proc.wait(timeout=15) == 0
