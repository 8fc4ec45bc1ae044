import json
import subprocess
import sys

from chargerig.gateway import export_assets
from chargerig.sim import make_demo_scenario


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "chargerig.cli", *args], cwd=cwd, capture_output=True, text=True, timeout=120
    )


def test_serve_refuses_invalid_tree_corpus_with_exit_2(tmp_path):
    export_assets(tmp_path / "trees")
    charging = tmp_path / "trees" / "charging.tree.xml"
    charging.write_text(charging.read_text().replace('id="pop" name="PopHole"', 'id="pop" name="Nope"'))
    proc = run_cli(["serve", "--trees", "trees", "--snapshot-dir", "snaps"], cwd=tmp_path)
    assert proc.returncode == 2
    assert "startup failed" in proc.stderr


def test_serve_refuses_invalid_scenario_with_exit_2(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"face": {"w": 1, "h": 1}, "holes": [], "seed": 1}))
    proc = run_cli(["serve", "--scenario", "bad.json", "--snapshot-dir", "snaps"], cwd=tmp_path)
    assert proc.returncode == 2


def test_validate_exit_codes(tmp_path):
    export_assets(tmp_path)
    clean = run_cli(["validate", "charging.tree.xml"], cwd=tmp_path)
    assert clean.returncode == 0
    assert "clean" in clean.stdout

    warn_file = tmp_path / "warned.tree.xml"
    text = (tmp_path / "charging.tree.xml").read_text()
    needle = '<Action id="pop" name="PopHole" ports="mission=mission,out=current_hole"/>'
    warn_file.write_text(text.replace(needle, f'<Sequence id="m" memory="true">{needle}</Sequence>'))
    warned = run_cli(["validate", "warned.tree.xml"], cwd=tmp_path)
    assert warned.returncode == 1
    assert "memory-under-parallel" in warned.stdout

    bad_file = tmp_path / "broken.tree.xml"
    bad_file.write_text(text.replace("</TreeDocument>", ""))
    broken = run_cli(["validate", "broken.tree.xml"], cwd=tmp_path)
    assert broken.returncode == 2


def test_report_cli_writes_outputs(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps(make_demo_scenario(3, seed=4).to_json()))
    (tmp_path / "script.json").write_text(
        json.dumps(
            [
                {"at_tick": 1, "kind": "StartMission", "command_id": "c1"},
                {"when": "plan_ready", "kind": "StartCharging", "command_id": "c2"},
                {"when": "mission_complete", "kind": "Shutdown", "command_id": "c3"},
            ]
        )
    )
    serve = run_cli(
        [
            "serve",
            "--scenario",
            "scenario.json",
            "--headless",
            "script.json",
            "--event-log",
            "events.jsonl",
            "--snapshot-dir",
            "snaps",
            "--max-ticks",
            "50000",
        ],
        cwd=tmp_path,
    )
    assert serve.returncode == 0
    report = run_cli(["report", "events.jsonl", "--out", "out"], cwd=tmp_path)
    assert report.returncode == 0
    assert (tmp_path / "out" / "report.csv").exists()
    assert (tmp_path / "out" / "face_map.png").exists()
    assert (tmp_path / "out" / "timeline.png").exists()


def test_export_and_demo_scenario_commands(tmp_path):
    exported = run_cli(["export-trees", "--out", "mytrees"], cwd=tmp_path)
    assert exported.returncode == 0
    assert (tmp_path / "mytrees" / "charging.tree.xml").exists()
    demo = run_cli(["demo-scenario", "--out", "demo.json", "--holes", "6"], cwd=tmp_path)
    assert demo.returncode == 0
    data = json.loads((tmp_path / "demo.json").read_text())
    assert len(data["holes"]) == 6


def test_env_variable_overrides(tmp_path):
    import os

    env = dict(os.environ)
    env["CHARGERIG_MAX_TICKS"] = "5"
    env["CHARGERIG_SNAPSHOT_DIR"] = "envsnaps"
    (tmp_path / "empty.json").write_text("[]")
    env["CHARGERIG_HEADLESS"] = "empty.json"
    proc = subprocess.run(
        [sys.executable, "-m", "chargerig.cli", "serve"],
        cwd=tmp_path,
        env=env,
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 3  # hit the tick budget, the runtime guard
    assert (tmp_path / "envsnaps").is_dir()
