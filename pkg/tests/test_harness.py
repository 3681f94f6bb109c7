"""Config round trips, presets, exports, manifests and CLI behavior."""

import hashlib
import json

import numpy as np
import pytest

from mailab import demogen
from mailab.errors import ConfigError
from mailab.harness import (
    ExperimentConfig,
    TABLE1_PRESETS,
    list_presets,
    meets_threshold,
    preset_config,
)
from mailab.harness.cli import main as cli_main
from mailab.harness.exports import export_embeddings, sample_reachable_states
from mailab.harness.presets import canonical_name
from mailab.models import Encoder
from mailab.trainers import TrainConfig


class TestPresets:
    def test_table1_rows_all_present(self):
        names = list_presets()
        for expected in [
            "GAIL", "VAIL", "GAIL_LS", "VAIL_LS", "GAIL_GE",
            "MAIL", "MAIL+VDB", "DI-GAIL_GE", "DI-MAIL", "DI-MAIL+VDB",
        ]:
            assert expected in names

    def test_scheme_presets_cover_all_five(self):
        schemes = {
            preset_config(p).reward_scheme
            for p in ("MAIL_LOG", "MAIL_LOG_SCALED", "MAIL_LOG_SHIFT",
                      "MAIL_LINEAR", "MAIL_TAN")
        }
        assert schemes == {"log", "log_scaled", "log_shift", "linear", "tan"}

    def test_mail_preset_flags(self):
        cfg = preset_config("MAIL")
        assert cfg.global_encoder == "load_fix"
        assert cfg.reward_scheme == "log_shift"
        assert not cfg.vdb and not cfg.di

    def test_case_insensitive_lookup(self):
        assert canonical_name("mail+vdb") == "MAIL+VDB"

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset_config("NOPE")

    def test_every_preset_round_trips(self):
        for name in list_presets():
            exp = ExperimentConfig(preset=name, train=preset_config(name))
            parsed = ExperimentConfig.from_json(exp.to_json())
            assert parsed == exp


class TestExperimentConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict({"schema": 1, "bogus": 2})

    def test_unknown_train_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown train config keys"):
            ExperimentConfig.from_dict({"schema": 1, "train": {"nope": 1}})

    def test_bad_schema_rejected(self):
        with pytest.raises(ConfigError, match="schema"):
            ExperimentConfig.from_dict({"schema": 99})

    def test_seed_propagates_to_train(self):
        cfg = ExperimentConfig.from_dict({"schema": 1, "seed": 7})
        assert cfg.train.seed == 7

    def test_excluded_random_fix_strategy(self):
        cfg = TrainConfig(global_encoder="random_fix")
        with pytest.raises(ConfigError, match="excluded"):
            cfg.validate()


class TestMeetsThreshold:
    def test_window_one_picks_first_crossing(self):
        curve = [(10, -100.0), (20, -50.0), (30, -9.0), (40, -12.0)]
        assert meets_threshold(curve, threshold=-10, window=1) == 30

    def test_never_meeting_returns_none(self):
        curve = [(10, -100.0), (20, -40.0), (30, -20.0)]
        assert meets_threshold(curve, threshold=-10, window=1) is None

    def test_very_low_threshold_hits_first_step(self):
        curve = [(10, -100.0), (20, -50.0)]
        assert meets_threshold(curve, threshold=-1e9, window=5) == 10

    def test_rolling_window_smooths_spikes(self):
        curve = [(1, -100.0), (2, -9.0), (3, -100.0), (4, -9.0), (5, -9.0)]
        # window 2: means are -100, -54.5, -54.5, -54.5, -9
        assert meets_threshold(curve, threshold=-10, window=2) == 5

    def test_empty_curve_rejected(self):
        with pytest.raises(ConfigError):
            meets_threshold([], threshold=-10, window=1)


class TestEmbeddingsExport:
    def test_schema_and_determinism(self, tmp_path):
        enc = Encoder(np.random.default_rng(0))
        path = tmp_path / "embeddings.csv"
        export_embeddings(enc, 120, seed=4, path=path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header[:5] == ["state_id", "has_key", "agent_cell", "key_cell",
                              "car_cell"]
        assert len(header) == 5 + 128
        assert len(lines) == 1 + 120
        flags = {line.split(",")[1] for line in lines[1:]}
        assert flags == {"0", "1"}

    def test_identical_states_identical_rows(self, tmp_path):
        enc = Encoder(np.random.default_rng(1))
        states = sample_reachable_states(50, seed=9)
        dup = sample_reachable_states(50, seed=9)
        assert states == dup

    def test_sampled_states_are_reachable(self):
        for agent, key, car, has_key in sample_reachable_states(300, seed=2):
            if not has_key:
                assert agent != key
            else:
                assert agent != car


class TestCLI:
    def test_list_presets(self, capsys):
        assert cli_main(["list-presets"]) == 0
        out = capsys.readouterr().out
        for name in TABLE1_PRESETS:
            assert name in out

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as err:
            cli_main(["train", "--bogus-flag"])
        assert err.value.code == 2

    def test_unknown_preset_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            cli_main(["train", "--preset", "NOPE", "--out", str(tmp_path)])
        assert err.value.code == 2

    def test_gen_demos_deterministic_files(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["gen-demos", "--pairs", "500", "--seed", "1",
                         "--out", str(a)]) == 0
        assert cli_main(["gen-demos", "--pairs", "500", "--seed", "1",
                         "--out", str(b)]) == 0
        ha = hashlib.sha256((a / "demos.maildemo").read_bytes()).hexdigest()
        hb = hashlib.sha256((b / "demos.maildemo").read_bytes()).hexdigest()
        assert ha == hb
        manifest = json.loads((a / "manifest.json").read_text())
        assert manifest["seed"] == 1
        assert manifest["inputs"]["demos"]["sha256"] == ha

    def test_train_without_bc_checkpoint_fails_with_message(self, tmp_path, capsys):
        demo_dir = tmp_path / "demos"
        cli_main(["gen-demos", "--pairs", "300", "--seed", "1",
                  "--out", str(demo_dir)])
        code = cli_main([
            "train", "--preset", "MAIL",
            "--demos", str(demo_dir / "demos.maildemo"),
            "--out", str(tmp_path / "run"), "--steps", "1024",
        ])
        assert code == 1
        err = capsys.readouterr().err
        assert "behavior-cloning" in err and "train-bc" in err

    def test_eval_missing_checkpoint_fails(self, tmp_path, capsys):
        code = cli_main(["eval", "--checkpoint", str(tmp_path / "none")])
        assert code == 1


@pytest.mark.slow
class TestCLIPipeline:
    """Full gen-demos -> train-bc -> train -> eval/export round trip."""

    def test_full_pipeline(self, tmp_path, capsys):
        demo_dir = tmp_path / "demos"
        bc_dir = tmp_path / "bc"
        run_dir = tmp_path / "run"
        assert cli_main(["gen-demos", "--pairs", "4000", "--seed", "3",
                         "--out", str(demo_dir)]) == 0
        demos = str(demo_dir / "demos.maildemo")
        assert cli_main(["train-bc", "--demos", demos, "--seed", "3",
                         "--out", str(bc_dir)]) == 0
        assert cli_main([
            "train", "--preset", "MAIL", "--demos", demos,
            "--bc", str(bc_dir), "--seed", "3", "--steps", "8192",
            "--out", str(run_dir),
        ]) == 0
        for fname in ("report.csv", "summary.json", "manifest.json"):
            assert (run_dir / fname).is_file()
        assert (run_dir / "checkpoints" / "networks.json").is_file()
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["total_steps"] >= 8192
        capsys.readouterr()

        assert cli_main(["eval", "--checkpoint", str(run_dir / "checkpoints"),
                         "--episodes", "10", "--seed", "1"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["n_episodes"] == 10

        emb_dir = tmp_path / "emb"
        assert cli_main(["export-embeddings",
                         "--checkpoint", str(run_dir / "checkpoints"),
                         "--n-states", "64", "--seed", "2",
                         "--out", str(emb_dir)]) == 0
        assert (emb_dir / "embeddings.csv").is_file()
