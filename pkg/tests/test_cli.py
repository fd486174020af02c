"""End-to-end command-line checks: every subcommand runs in-process.

``main(argv)`` is called directly so exit codes, stdout, and the files a
command leaves behind can all be asserted without spawning subprocesses.
Cohort sizes and training budgets are shrunk through ``--set`` to keep
each invocation well under a second.
"""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from mirep.cli import default_config, main
from mirep.model import load_checkpoint
from mirep.signal import (CohortSpec, generate_cohort, read_trialset,
                          write_trialset)
from mirep.training import evaluate

TINY = ["--set", "cohort.num_subjects=3", "--set", "cohort.trials_per_class=8",
        "--set", "cohort.n_c=4", "--set", "cohort.n_t=64",
        "--set", "cohort.sample_rate=64.0"]
QUICK = ["--set", "train.epochs=2", "--set", "train.batch_size=8",
         "--set", "train.lr=0.005", "--set", "train.l2=0.0",
         "--set", "train.dropout=0.0", "--set", "train.patience=10"]
N_TRIALS = 3 * 8 * 2


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def synth_dir(workdir):
    out = workdir / "synth"
    assert main(["synth", "--seed", "5", "--out", str(out), *TINY]) == 0
    return out


@pytest.fixture(scope="module")
def cohort_path(synth_dir):
    return synth_dir / "cohort.trialset"


@pytest.fixture(scope="module")
def trained_dir(workdir, cohort_path):
    out = workdir / "train"
    assert main(["train", str(cohort_path), "--seed", "5",
                 "--out", str(out), *QUICK]) == 0
    return out


class TestSynth:
    def test_writes_cohort_and_resolved_config(self, synth_dir):
        assert (synth_dir / "cohort.trialset").is_file()
        assert (synth_dir / "resolved_config.json").is_file()
        trials = read_trialset(synth_dir / "cohort.trialset")
        assert len(trials) == N_TRIALS
        assert {t.subject_id for t in trials} == {0, 1, 2}
        assert all(t.x.shape == (4, 64) for t in trials)

    def test_matches_library_generator(self, cohort_path):
        spec = CohortSpec(num_subjects=3, trials_per_class=8, n_c=4, n_t=64,
                          sample_rate=64.0, seed=5)
        expected = generate_cohort(spec)
        written = read_trialset(cohort_path)
        assert len(written) == len(expected)
        for got, want in zip(written, expected):
            np.testing.assert_array_equal(got.x, want.x)
            np.testing.assert_array_equal(got.y, want.y)
            assert got.subject_id == want.subject_id

    def test_rerun_is_byte_identical(self, tmp_path, cohort_path):
        out = tmp_path / "again"
        assert main(["synth", "--seed", "5", "--out", str(out), *TINY]) == 0
        assert (out / "cohort.trialset").read_bytes() == cohort_path.read_bytes()

    def test_seed_changes_bytes(self, tmp_path, cohort_path):
        out = tmp_path / "other"
        assert main(["synth", "--seed", "6", "--out", str(out), *TINY]) == 0
        assert (out / "cohort.trialset").read_bytes() != cohort_path.read_bytes()

    def test_reports_trial_count(self, tmp_path, capsys):
        out = tmp_path / "loud"
        assert main(["synth", "--seed", "1", "--out", str(out), *TINY]) == 0
        assert f"wrote {N_TRIALS} trials to" in capsys.readouterr().out

    def test_resolved_config_records_overrides(self, synth_dir):
        with open(synth_dir / "resolved_config.json") as fh:
            doc = json.load(fh)
        expected = default_config()
        expected["seed"] = 5
        expected["out"] = str(synth_dir)
        expected["cohort"].update(num_subjects=3, trials_per_class=8, n_c=4,
                                  n_t=64, sample_rate=64.0)
        # JSON round trip turns the class band tuple into a list
        expected["cohort"]["class_band"] = list(expected["cohort"]["class_band"])
        assert doc == expected


class TestConfigResolution:
    def test_config_file_applies(self, tmp_path):
        cfg = {"seed": 3, "cohort": {"num_subjects": 2, "trials_per_class": 4,
                                     "n_c": 4, "n_t": 64, "sample_rate": 64.0}}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert main(["synth", "--config", str(path), "--out", str(out)]) == 0
        trials = read_trialset(out / "cohort.trialset")
        assert len(trials) == 16
        assert {t.subject_id for t in trials} == {0, 1}

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 3}))
        out = tmp_path / "out"
        assert main(["synth", "--config", str(path), "--seed", "9",
                     "--out", str(out), *TINY]) == 0
        with open(out / "resolved_config.json") as fh:
            assert json.load(fh)["seed"] == 9

    def test_set_coerces_json_values(self, tmp_path):
        out = tmp_path / "out"
        assert main(["synth", "--out", str(out), *TINY,
                     "--set", "train.lr=0.01",
                     "--set", "variant=pooled"]) == 0
        with open(out / "resolved_config.json") as fh:
            doc = json.load(fh)
        assert doc["train"]["lr"] == 0.01
        assert doc["variant"] == "pooled"

    def test_last_set_wins(self, tmp_path):
        out = tmp_path / "out"
        assert main(["synth", "--out", str(out), *TINY,
                     "--set", "seed=1", "--set", "seed=2"]) == 0
        with open(out / "resolved_config.json") as fh:
            assert json.load(fh)["seed"] == 2

    def test_unknown_set_key_exits_2(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path), "--set", "cohort.bogus=1"])
        assert rc == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_set_section_as_value_exits_2(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--set", "cohort=5"]) == 2

    def test_set_without_equals_exits_2(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--set", "seed"]) == 2

    def test_set_path_through_value_exits_2(self, tmp_path):
        rc = main(["synth", "--out", str(tmp_path),
                   "--set", "cohort.num_subjects.deep=1"])
        assert rc == 2

    @pytest.mark.parametrize("weights", ["1,2", "a,b,c", "1;2;3"])
    def test_bad_weights_exit_2(self, tmp_path, weights):
        assert main(["synth", "--out", str(tmp_path), "--weights", weights]) == 2

    def test_config_file_unknown_key_exits_2(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"bogus": 1}')
        assert main(["synth", "--config", str(path),
                     "--out", str(tmp_path)]) == 2

    def test_config_file_invalid_json_exits_2(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{")
        assert main(["synth", "--config", str(path),
                     "--out", str(tmp_path)]) == 2

    def test_unknown_flag_raises_systemexit(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--bogus"])
        assert exc.value.code == 2

    def test_command_is_required(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestTrain:
    def test_outputs_exist(self, trained_dir):
        for name in ("checkpoint.ckpt", "history.csv", "resolved_config.json"):
            assert (trained_dir / name).is_file()

    def test_history_schema(self, trained_dir):
        rows = read_rows(trained_dir / "history.csv")
        assert rows[0] == ["epoch", "L_cls", "L_dec", "L_local", "L_global",
                           "total", "val_acc", "lr"]
        assert [r[0] for r in rows[1:]] == ["0", "1"]

    def test_rerun_is_byte_identical(self, workdir, cohort_path, trained_dir,
                                     capsys):
        out = workdir / "train_again"
        rc = main(["train", str(cohort_path), "--seed", "5",
                   "--out", str(out), *QUICK])
        assert rc == 0
        assert "best epoch" in capsys.readouterr().out
        for name in ("history.csv", "checkpoint.ckpt"):
            assert (out / name).read_bytes() == (trained_dir / name).read_bytes()

    def test_checkpoint_restores_a_working_model(self, trained_dir,
                                                 cohort_path):
        model, meta = load_checkpoint(trained_dir / "checkpoint.ckpt")
        assert meta["seed"] == 5
        trials = read_trialset(cohort_path)
        loss, acc = evaluate(model, trials[:16])
        assert np.isfinite(loss)
        assert 0.0 <= acc <= 1.0

    def test_pooled_variant_logs_zero_mi_terms(self, workdir, cohort_path):
        out = workdir / "train_pooled"
        rc = main(["train", str(cohort_path), "--seed", "5", "--out", str(out),
                   "--variant", "pooled", "--weights", "1,0,0", *QUICK])
        assert rc == 0
        rows = read_rows(out / "history.csv")
        header, body = rows[0], rows[1:]
        for column in ("L_dec", "L_local", "L_global"):
            i = header.index(column)
            assert all(float(r[i]) == 0.0 for r in body)
        i = header.index("L_cls")
        assert all(float(r[i]) > 0.0 for r in body)
        with open(out / "resolved_config.json") as fh:
            doc = json.load(fh)
        assert doc["variant"] == "pooled"
        assert doc["weights"] == {"alpha": 1.0, "beta": 0.0, "gamma": 0.0}

    def test_missing_trialset_exits_2(self, tmp_path, capsys):
        rc = main(["train", str(tmp_path / "nope.trialset"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_backbone_too_short_exits_2(self, tmp_path, cohort_path):
        rc = main(["train", str(cohort_path), "--backbone", "deepconvnet",
                   "--out", str(tmp_path / "out"), *QUICK])
        assert rc == 2

    def test_non_finite_data_exits_4(self, tmp_path, capsys):
        spec = CohortSpec(num_subjects=2, trials_per_class=4, n_c=4, n_t=64,
                          sample_rate=64.0, seed=0)
        trials = generate_cohort(spec)
        for t in trials:
            t.x[:] = np.nan
        path = tmp_path / "bad.trialset"
        write_trialset(path, trials)
        rc = main(["train", str(path), "--out", str(tmp_path / "out"), *QUICK])
        assert rc == 4
        assert "numeric abort" in capsys.readouterr().err


@pytest.fixture(scope="module")
def eval2_dir(workdir, cohort_path):
    out = workdir / "eval2"
    rc = main(["eval", str(cohort_path), "--seed", "5", "--scenario", "2",
               "--out", str(out), *QUICK, "--set", "train.epochs=1"])
    assert rc == 0
    return out


class TestEval:
    def test_scenario2_one_row_per_subject(self, eval2_dir):
        rows = read_rows(eval2_dir / "results.csv")
        assert rows[0] == ["scenario", "backbone", "variant", "subject_id",
                           "fold", "accuracy"]
        body = rows[1:]
        assert len(body) == 3
        assert all(r[0] == "II" for r in body)
        assert all(r[1] == "eegnet" for r in body)
        assert all(r[2] == "IV" for r in body)
        assert sorted(int(r[3]) for r in body) == [0, 1, 2]
        assert all(r[4] == "0" for r in body)
        assert all(0.0 <= float(r[5]) <= 1.0 for r in body)

    def test_json_summary_matches_csv(self, eval2_dir):
        body = read_rows(eval2_dir / "results.csv")[1:]
        with open(eval2_dir / "results.json") as fh:
            doc = json.load(fh)
        per_subject = {r[3]: float(r[5]) for r in body}
        assert doc["summary"]["per_subject"] == pytest.approx(per_subject)
        values = np.array(sorted(per_subject.values()))
        assert doc["summary"]["mean"] == pytest.approx(values.mean())
        assert doc["summary"]["std"] == pytest.approx(values.std())
        assert len(doc["rows"]) == len(body)

    def test_scenario1_row_per_fold_and_subject(self, workdir, cohort_path):
        out = workdir / "eval1"
        rc = main(["eval", str(cohort_path), "--seed", "5", "--scenario", "1",
                   "--out", str(out), *QUICK,
                   "--set", "train.epochs=1", "--set", "protocol.n_folds=2"])
        assert rc == 0
        body = read_rows(out / "results.csv")[1:]
        assert len(body) == 6
        assert all(r[0] == "I" for r in body)
        assert {(int(r[4]), int(r[3])) for r in body} == {
            (fold, subject) for fold in range(2) for subject in range(3)}

    def test_csp_baseline_rows(self, workdir, capsys):
        # the reference pipeline needs >= 6 channels for its filter bank
        synth = workdir / "csp_cohort"
        assert main(["synth", "--seed", "5", "--out", str(synth),
                     "--set", "cohort.num_subjects=3",
                     "--set", "cohort.trials_per_class=8"]) == 0
        out = workdir / "csp"
        rc = main(["eval", str(synth / "cohort.trialset"), "--seed", "5",
                   "--scenario", "2", "--baseline", "csp", "--out", str(out)])
        assert rc == 0
        assert "scenario II mean accuracy" in capsys.readouterr().out
        body = read_rows(out / "results.csv")[1:]
        assert len(body) == 3
        assert all(r[1] == "csp" and r[2] == "baseline" for r in body)
        assert all(0.0 <= float(r[5]) <= 1.0 for r in body)

    def test_csp_baseline_needs_enough_channels(self, tmp_path, cohort_path,
                                                capsys):
        rc = main(["eval", str(cohort_path), "--scenario", "2",
                   "--baseline", "csp", "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "n_filters" in capsys.readouterr().err

    def test_too_few_subjects_exits_3(self, tmp_path, capsys):
        out = tmp_path / "solo"
        assert main(["synth", "--out", str(out), *TINY,
                     "--set", "cohort.num_subjects=1"]) == 0
        rc = main(["eval", str(out / "cohort.trialset"), "--scenario", "2",
                   "--out", str(tmp_path / "res")])
        assert rc == 3
        assert "protocol error" in capsys.readouterr().err


class TestAblate:
    def test_runs_every_variant(self, workdir, cohort_path, capsys):
        out = workdir / "ablate"
        rc = main(["ablate", str(cohort_path), "--seed", "5", "--scenario", "1",
                   "--out", str(out), *QUICK,
                   "--set", "train.epochs=1", "--set", "protocol.n_folds=2"])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert [line.split(":")[0] for line in lines] == [
            "variant I", "variant II", "variant III", "variant IV"]
        body = read_rows(out / "ablation.csv")[1:]
        assert len(body) == 4 * 6
        for name in ("I", "II", "III", "IV"):
            assert sum(r[2] == name for r in body) == 6
        with open(out / "ablation.json") as fh:
            assert len(json.load(fh)["rows"]) == 4 * 6


@pytest.fixture(scope="module")
def explain_dir(workdir, trained_dir, cohort_path):
    out = workdir / "explain"
    rc = main(["explain", str(trained_dir / "checkpoint.ckpt"),
               str(cohort_path), "--out", str(out)])
    assert rc == 0
    return out


class TestExplain:
    def test_writes_exactly_the_three_tables(self, explain_dir):
        names = {p.name for p in explain_dir.iterdir()}
        assert names == {"topomap.csv", "embeddings.csv", "psd.csv",
                         "resolved_config.json"}

    def test_topomap_values_normalized(self, explain_dir):
        rows = read_rows(explain_dir / "topomap.csv")
        assert rows[0] == ["channel", "relevance"]
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2, 3]
        values = [float(r[1]) for r in rows[1:]]
        assert min(values) == 0.0
        assert max(values) == 1.0

    def test_psd_table_bounded_by_nyquist(self, explain_dir):
        rows = read_rows(explain_dir / "psd.csv")
        assert rows[0] == ["class", "channel", "freq_hz", "power"]
        body = rows[1:]
        # 2 classes x 4 channels x 33 frequency bins at n_t = fs = 64
        assert len(body) == 2 * 4 * 33
        assert {r[0] for r in body} == {"0", "1"}
        assert all(0.0 <= float(r[2]) <= 32.0 for r in body)
        assert all(float(r[3]) >= 0.0 for r in body)

    def test_missing_checkpoint_exits_2(self, tmp_path, cohort_path):
        rc = main(["explain", str(tmp_path / "nope.ckpt"), str(cohort_path),
                   "--out", str(tmp_path / "out")])
        assert rc == 2


class TestExport:
    def test_embeddings_table(self, workdir, trained_dir, cohort_path, capsys):
        out = workdir / "export"
        rc = main(["export", str(trained_dir / "checkpoint.ckpt"),
                   str(cohort_path), "--out", str(out)])
        assert rc == 0
        assert f"wrote embeddings for {N_TRIALS} trials" in capsys.readouterr().out
        rows = read_rows(out / "embeddings.csv")
        assert rows[0][:3] == ["kind", "subject_id", "class"]
        body = rows[1:]
        assert len(body) == 3 * N_TRIALS
        assert {r[0] for r in body} == {"f_re", "f_ir", "f_g"}
        for kind in ("f_re", "f_ir", "f_g"):
            assert sum(r[0] == kind for r in body) == N_TRIALS
