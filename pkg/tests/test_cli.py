import json

import numpy as np
import pytest


from conftest import stub_model
from emoflow import score_io
from emoflow.cli import main
from emoflow.vamodel import save_checkpoint
from synthdata import (
    chord_annotation_text,
    concat_track_sets,
    four_contrast_segments,
    write_corpus,
)


@pytest.fixture(scope="module")
def song_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("song")
    song = concat_track_sets(four_contrast_segments())
    (d / "song.mid").write_bytes(score_io.write_track_set(song))
    (d / "song.txt").write_text(chord_annotation_text(song))
    horizon = song.num_steps
    steps = np.arange(0, horizon, 8)
    def curve(kind, phase):
        values = np.clip(0.5 + 0.7 * np.sin(2 * np.pi * steps / horizon + phase), 0, 1)
        return {"kind": kind, "horizon": int(horizon),
                "samples": [[int(s), float(v)] for s, v in zip(steps, values)]}
    (d / "curves.json").write_text(json.dumps(
        {"valence": curve("valence", 0.0), "arousal": curve("arousal", 1.0)}))
    return d


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    return save_checkpoint(stub_model(), tmp_path_factory.mktemp("ck") / "m.zip",
                           "cli-test")


def test_evaluate_identical_files(song_files, capsys):
    rc = main(["evaluate", "--pred", str(song_files / "song.mid"),
               "--ref", str(song_files / "song.mid")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out["fs"] == 1.0 and out["fspc"] == 1.0


def test_evaluate_disjoint_files(song_files, tmp_path, capsys):
    other = score_io.PianoRoll.from_notes([score_io.NoteEvent(30, 0, 2, 64)], 16)
    path = tmp_path / "other.mid"
    path.write_bytes(score_io.write_midi(other))
    rc = main(["evaluate", "--pred", str(path), "--ref", str(song_files / "song.mid")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out["fs"] == 0.0


def test_convert_emits_flow(song_files, tmp_path, capsys):
    out_path = tmp_path / "flow.json"
    rc = main(["convert", "--in", str(song_files / "song.mid"),
               "--chords", str(song_files / "song.txt"),
               "--emit-flow", "--out", str(out_path)])
    assert rc == 0
    payload = json.loads(out_path.read_text())
    assert payload["valence"]["kind"] == "valence"
    assert payload["arousal"]["kind"] == "arousal"
    assert len(payload["arousal"]["samples"]) >= 2


def test_generate_writes_midi_and_report(song_files, checkpoint, tmp_path, capsys):
    out_mid = tmp_path / "acc.mid"
    report = tmp_path / "report.json"
    rc = main(["generate", "--melody", str(song_files / "song.mid"),
               "--chords", str(song_files / "song.txt"),
               "--curves", str(song_files / "curves.json"),
               "--checkpoint", str(checkpoint),
               "--out", str(out_mid), "--report", str(report),
               "--seed", "3"])
    assert rc == 0
    parsed = score_io.parse_midi(out_mid.read_bytes())
    assert parsed.num_steps >= 32
    body = json.loads(report.read_text())
    assert body["model_version"] == "cli-test"
    assert {"valence", "arousal"} <= set(body["measured_flow"])


def test_generate_rejects_flat_curves(song_files, checkpoint, tmp_path, capsys):
    flat = {"valence": {"kind": "valence", "horizon": 128,
                        "samples": [[0, 0.5], [127, 0.5]]},
            "arousal": {"kind": "arousal", "horizon": 128,
                        "samples": [[0, 0.4], [127, 0.4]]}}
    curves = tmp_path / "flat.json"
    curves.write_text(json.dumps(flat))
    rc = main(["generate", "--melody", str(song_files / "song.mid"),
               "--chords", str(song_files / "song.txt"),
               "--curves", str(curves), "--checkpoint", str(checkpoint),
               "--out", str(tmp_path / "x.mid")])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert "flatness" in err["message"]


def test_machine_readable_error_line(tmp_path, capsys):
    rc = main(["evaluate", "--pred", str(tmp_path / "missing.mid"),
               "--ref", str(tmp_path / "missing.mid")])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert set(err) == {"error", "message"}


def test_train_smoke(tmp_path, capsys):
    corpus = write_corpus(tmp_path / "corpus", num_songs=3, segments_per_song=2)
    out_dir = tmp_path / "run"
    rc = main(["train", "--corpus", str(corpus), "--out", str(out_dir),
               "--batch-size", "4", "--epochs", "1", "--max-steps", "1",
               "--seed", "0"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["steps"] == 1
    assert (out_dir / "checkpoint_final.zip").exists()
    assert (out_dir / "loss_history.csv").exists()


def test_evaluate_with_report_dir(song_files, tmp_path, capsys):
    rc = main(["evaluate", "--pred", str(song_files / "song.mid"),
               "--ref", str(song_files / "song.mid"),
               "--report-dir", str(tmp_path / "report")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out["fs"] == 1.0
    assert (tmp_path / "report" / "correlation_table.csv").exists()
    assert any("flow_comparison" in f for f in out["report"]["figures"])
