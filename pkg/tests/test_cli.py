import json

import pytest

from hendorse.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from hendorse.constants import SCENARIOS_DIR, SERVE_HISTORY_LIMIT
from hendorse.reader import read_records

from .conftest import INPUTS_DIR


class TestScenarioCommands:
    def test_run_passes(self, capsys, tmp_path):
        script = str(SCENARIOS_DIR / "malicious-1.script")
        code = main(["scenario", "run", script, "--config", "lock_motion", "--audit", str(tmp_path / "audit.rec")])

        assert code == EXIT_OK
        assert capsys.readouterr().out.startswith("malicious-1: PASS (decision DENY)")
        audit = read_records(tmp_path / "audit.rec")
        assert audit.headers["SCENARIO"] == "malicious-1"
        assert "DENIED_ENDORSEMENT" in audit["STATUS"].tolist()

    def test_baseline_run_fails_expectations(self, capsys):
        script = str(SCENARIOS_DIR / "malicious-1.script")
        assert main(["scenario", "run", script, "--config", "lock_motion", "--baseline"]) == EXIT_FAILED
        assert "FAIL (decision ALLOW)" in capsys.readouterr().out

    def test_suite_writes_json_matrix(self, capsys, tmp_path):
        output = tmp_path / "matrix.json"
        assert main(["scenario", "suite", "--golden-only", "-o", str(output)]) == EXIT_OK
        assert "12/12 decisions as expected" in capsys.readouterr().out

        document = json.loads(output.read_text())
        assert document["headers"]["SCENARIOS"] == 12
        assert len(document["rows"]) == 12

    def test_bad_script_is_a_usage_error(self, caplog):
        assert main(["scenario", "run", str(INPUTS_DIR / "bad.script"), "--config", "lock_motion"]) == EXIT_USAGE
        assert "Line 3" in caplog.text


class TestServe:
    def test_history_is_bounded_by_default(self, monkeypatch):
        served = []
        monkeypatch.setattr("hendorse.api.serve", lambda platform, listen: served.append((platform, listen)))

        assert main(["serve", "--config", "lock_motion"]) == EXIT_OK
        assert main(["serve", "--config", "lock_motion", "--history-limit", "0", "--listen", "0.0.0.0:9000"]) == EXIT_OK

        (bounded, listen), (unbounded, other_listen) = served
        assert listen == "127.0.0.1:8123"
        assert bounded.home.history_limit == SERVE_HISTORY_LIMIT
        assert bounded.monitor.audit.maxlen == SERVE_HISTORY_LIMIT
        assert other_listen == "0.0.0.0:9000"
        assert unbounded.monitor.audit.maxlen is None


class TestPolicyCommands:
    def test_show(self, capsys):
        assert main(["policy", "show", "--config", "lock_motion"]) == EXIT_OK
        assert "home=home  [" in capsys.readouterr().out

    def test_gen(self, capsys, tmp_path):
        output = tmp_path / "templates.json"
        assert main(["spec", "gen", "--aho", "home", "--value", "home", "-o", str(output)]) == EXIT_OK
        count = int(capsys.readouterr().out.split()[0])
        assert count > 0
        assert len(json.loads(output.read_text())) == count

    def test_gen_unknown_target(self, caplog):
        assert main(["spec", "gen", "--aho", "home", "--value", "moon"]) == EXIT_USAGE
        assert "No inferences target home=moon" in caplog.text

    def test_ingest(self, capsys, tmp_path):
        output = tmp_path / "map.json"
        files = [str(INPUTS_DIR / "locks_ocf.json"), str(INPUTS_DIR / "locks_attrs.json")]
        designated = str(INPUTS_DIR / "lock_designated.json")
        assert main(["spec", "ingest", *files, "--designated", designated, "-o", str(output)]) == EXIT_OK
        assert "smart-lock.lockState" in capsys.readouterr().out
        assert output.is_file()


def test_missing_command_exits():
    with pytest.raises(SystemExit) as error:
        main([])
    assert error.value.code == EXIT_USAGE
