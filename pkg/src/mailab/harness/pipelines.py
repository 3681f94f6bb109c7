"""End-to-end pipelines behind the CLI subcommands.

Every pipeline writes its artifacts under an output directory together
with a manifest (config copy, seed, input hashes) sufficient to re-run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import demogen
from .. import diffcore as dc
from .. import models
from ..errors import ConfigError
from ..models import Actor, Encoder, ModelDims, Posterior
from ..trainers import (
    TrainConfig,
    bc_pretrain,
    evaluate,
    posterior_pretrain,
    train,
)
from . import exports
from .config import ExperimentConfig
from .presets import canonical_name, preset_config

DEMO_FILENAME = "demos.maildemo"


def _prepare_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_gen_demos(pairs: int, seed: int, out_dir) -> Path:
    out = _prepare_out(out_dir)
    ds = demogen.generate(pairs, seed)
    path = out / DEMO_FILENAME
    demogen.save(ds, path)
    exports.write_manifest(
        out, "gen-demos", {"pairs": pairs}, seed, {"demos": path}
    )
    return path


def _load_demos(path) -> demogen.DemoDataset:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"demo dataset not found: {path}")
    return demogen.load(path)


def run_train_bc(demos_path, seed: int, out_dir,
                 cfg: TrainConfig | None = None, progress: bool = False) -> Path:
    out = _prepare_out(out_dir)
    demos = _load_demos(demos_path)
    cfg = cfg or TrainConfig()
    cfg.seed = seed
    encoder, actor, report = bc_pretrain(demos, cfg, progress=progress)
    models.save_networks(
        out, {"encoder": encoder, "actor": actor}, shared_encoder=True,
        meta={"kind": "bc", "di": False},
    )
    (out / "bc_report.json").write_text(json.dumps({
        "holdout_accuracy": report.holdout_accuracy,
        "epochs_run": report.epochs_run,
        "train_losses": report.train_losses,
        "holdout_curve": report.holdout_curve,
        "wall_clock_sec": report.wall_clock_sec,
    }, indent=2) + "\n")
    exports.write_manifest(
        out, "train-bc",
        {"bc_epochs": cfg.bc_epochs, "bc_lr": cfg.bc_lr,
         "bc_target_acc": cfg.bc_target_acc},
        seed, {"demos": demos_path},
    )
    return out


def load_bc_encoder_arrays(bc_dir) -> dict[str, np.ndarray]:
    bc_dir = Path(bc_dir)
    if not (bc_dir / "networks.json").is_file():
        raise ConfigError(
            f"no behavior-cloning checkpoint bundle at {bc_dir} "
            "(expected networks.json from train-bc)"
        )
    manifest = models.bundle_manifest(bc_dir)
    return dc.load_params(bc_dir / manifest["files"]["encoder"])


def _frozen_encoder_from(bc_dir, dims: ModelDims) -> Encoder:
    encoder = Encoder(np.random.default_rng(0), dims)
    encoder.params.load_arrays(load_bc_encoder_arrays(bc_dir))
    encoder.freeze()
    return encoder


def run_train_posterior(demos_path, bc_dir, seed: int, out_dir,
                        cfg: TrainConfig | None = None,
                        progress: bool = False) -> Path:
    out = _prepare_out(out_dir)
    demos = _load_demos(demos_path)
    cfg = cfg or TrainConfig()
    cfg.seed = seed
    dims = ModelDims()
    encoder = _frozen_encoder_from(bc_dir, dims)
    posterior, actor, report = posterior_pretrain(
        demos, encoder, cfg, dims, progress=progress
    )
    models.save_networks(
        out, {"posterior": posterior, "actor": actor}, shared_encoder=True,
        meta={"kind": "posterior", "di": True},
    )
    (out / "posterior_report.json").write_text(json.dumps({
        "epoch_losses": report.epoch_losses,
        "epochs_run": report.epochs_run,
    }, indent=2) + "\n")
    exports.write_manifest(
        out, "train-posterior",
        {"posterior_epochs": cfg.posterior_epochs,
         "posterior_kl_weight": cfg.posterior_kl_weight},
        seed,
        {"demos": demos_path, "bc": Path(bc_dir) / "networks.json"},
    )
    return out


def load_posterior_arrays(posterior_dir) -> dict[str, np.ndarray]:
    posterior_dir = Path(posterior_dir)
    if not (posterior_dir / "networks.json").is_file():
        raise ConfigError(
            f"no posterior checkpoint bundle at {posterior_dir} "
            "(expected networks.json from train-posterior)"
        )
    manifest = models.bundle_manifest(posterior_dir)
    return dc.load_params(posterior_dir / manifest["files"]["posterior"])


def run_train(experiment: ExperimentConfig, progress: bool = False) -> dict:
    """Phase-2/3 adversarial training; writes report.csv, summary.json,
    checkpoints/ and manifest.json under the output directory."""
    cfg = experiment.train
    cfg.seed = experiment.seed
    cfg.validate()
    if experiment.out_dir is None:
        raise ConfigError("train needs an output directory (--out)")
    if experiment.demos is None:
        raise ConfigError("train needs a demo dataset (--demos or config)")
    out = _prepare_out(experiment.out_dir)
    demos = _load_demos(experiment.demos)

    bc_arrays = None
    if cfg.global_encoder in ("load_fix", "load_train"):
        if experiment.bc_checkpoint is None:
            raise ConfigError(
                f"global_encoder={cfg.global_encoder!r} needs the phase-1 "
                "behavior-cloning encoder checkpoint: pass --bc DIR "
                "(from train-bc)"
            )
        bc_arrays = load_bc_encoder_arrays(experiment.bc_checkpoint)
    posterior_arrays = None
    if cfg.di:
        if experiment.posterior_checkpoint is None:
            raise ConfigError(
                "latent-code presets need the phase-2 posterior checkpoint: "
                "pass --posterior DIR (from train-posterior)"
            )
        posterior_arrays = load_posterior_arrays(experiment.posterior_checkpoint)

    report = train(cfg, demos, bc_encoder_arrays=bc_arrays,
                   posterior_arrays=posterior_arrays, progress=progress)

    exports.write_report_csv(out / "report.csv", report)
    summary = exports.summarize(report)
    exports.write_summary_json(out / "summary.json", summary)
    models.save_networks(
        out / "checkpoints", report.networks,
        shared_encoder=report.shared_encoder,
        meta={
            "kind": "train",
            "di": cfg.di,
            "vdb": cfg.vdb,
            "global_encoder": cfg.global_encoder,
            "preset": experiment.preset,
        },
    )
    inputs = {"demos": experiment.demos}
    if experiment.bc_checkpoint:
        inputs["bc"] = Path(experiment.bc_checkpoint) / "networks.json"
    if experiment.posterior_checkpoint:
        inputs["posterior"] = Path(experiment.posterior_checkpoint) / "networks.json"
    exports.write_manifest(out, "train", experiment.to_dict(),
                           experiment.seed, inputs)
    return summary


def _rebuild_policy(checkpoint_dir):
    """Encoder + actor (+ posterior) from a train/bc checkpoint bundle."""
    checkpoint_dir = Path(checkpoint_dir)
    if not (checkpoint_dir / "networks.json").is_file():
        raise ConfigError(f"no checkpoint bundle at {checkpoint_dir}")
    manifest = models.bundle_manifest(checkpoint_dir)
    meta = manifest.get("meta", {})
    dims = ModelDims()
    rng = np.random.default_rng(0)
    files = manifest["files"]
    enc_key = "encoder" if "encoder" in files else "policy_encoder"
    encoder = Encoder(rng, dims, name=enc_key)
    encoder.params.load_arrays(dc.load_params(checkpoint_dir / files[enc_key]))
    encoder.freeze()
    actor = Actor(rng, dims, di=bool(meta.get("di", False)))
    actor.params.load_arrays(dc.load_params(checkpoint_dir / files["actor"]))
    posterior = None
    if meta.get("di", False):
        if "posterior" not in files:
            raise ConfigError(
                f"bundle {checkpoint_dir} is latent-code mode but has no "
                "posterior network"
            )
        posterior = Posterior(rng, dims)
        posterior.params.load_arrays(
            dc.load_params(checkpoint_dir / files["posterior"])
        )
    return encoder, actor, posterior


def run_eval(checkpoint_dir, episodes: int, seed: int, out_dir=None) -> dict:
    encoder, actor, posterior = _rebuild_policy(checkpoint_dir)
    report = evaluate(actor, encoder, episodes, seed, posterior=posterior)
    result = {
        "n_episodes": report.n_episodes,
        "score_mean": report.mean,
        "score_std": report.std,
        "success_rate": report.success_rate,
    }
    if out_dir is not None:
        out = _prepare_out(out_dir)
        (out / "eval.json").write_text(json.dumps(result, indent=2) + "\n")
        exports.write_manifest(
            out, "eval", {"episodes": episodes}, seed,
            {"checkpoint": Path(checkpoint_dir) / "networks.json"},
        )
    return result


def run_export_embeddings(checkpoint_dir, n_states: int, seed: int, out_dir) -> Path:
    encoder, _actor, _posterior = _rebuild_policy(checkpoint_dir)
    out = _prepare_out(out_dir)
    path = out / "embeddings.csv"
    exports.export_embeddings(encoder, n_states, seed, path)
    exports.write_manifest(
        out, "export-embeddings", {"n_states": n_states}, seed,
        {"checkpoint": Path(checkpoint_dir) / "networks.json"},
    )
    return path


def run_export_code_stats(checkpoint_dir, episodes: int, seed: int, out_dir) -> dict:
    encoder, actor, posterior = _rebuild_policy(checkpoint_dir)
    if posterior is None:
        raise ConfigError(
            f"checkpoint {checkpoint_dir} is not a latent-code (DI) policy"
        )
    out = _prepare_out(out_dir)
    summary = exports.export_code_stats(
        actor, encoder, posterior, episodes, seed,
        out / "codes.csv", out / "code_summary.json",
    )
    exports.write_manifest(
        out, "export-code-stats", {"episodes": episodes}, seed,
        {"checkpoint": Path(checkpoint_dir) / "networks.json"},
    )
    return summary


def experiment_from_args(preset: str | None, config_path, seed: int | None,
                         demos, bc, posterior, out_dir, steps: int | None) -> ExperimentConfig:
    """Merge a config file and CLI flags into one ExperimentConfig."""
    if config_path is not None:
        exp = ExperimentConfig.load(config_path)
    else:
        exp = ExperimentConfig()
    if preset is not None:
        name = canonical_name(preset)
        exp.preset = name
        exp.train = preset_config(name, seed=exp.seed)
    if seed is not None:
        exp.seed = seed
        exp.train.seed = seed
    if demos is not None:
        exp.demos = str(demos)
    if bc is not None:
        exp.bc_checkpoint = str(bc)
    if posterior is not None:
        exp.posterior_checkpoint = str(posterior)
    if out_dir is not None:
        exp.out_dir = str(out_dir)
    if steps is not None:
        exp.train.total_steps = steps
    return exp
