"""Command-line entry point: ``rddi {spectrum,dataset,train,eval,attribute,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dataset as dsmod
from .attribution import band_fraction, crossover_indices, integrated_gradients, magnitude_summary
from .eigen import decay_spectrum
from .kernel import DipoleGeometry, build_kernel, to_image
from .neuralnet import Model, ModelConfig, TrainConfig, load_checkpoint, save_checkpoint, train
from .reporting import write_csv, write_manifest, write_ppm

log = logging.getLogger("rddi")


class CommandError(RuntimeError):
    """A stage failed for a reason the user can act on."""


def _geometry(cfg: cfgmod.RunConfig, spacing: float) -> DipoleGeometry:
    return DipoleGeometry(cfg.n_atoms, float(spacing), axis=cfg.axis, dipole=cfg.dipole)


def _prepare(cfg: cfgmod.RunConfig, name: str) -> Path:
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    path = cfg.out_path / f"{name}.config"
    cfg.write(path)
    return path


def _split(cfg: cfgmod.RunConfig):
    path = cfg.dataset_path
    if not path.exists():
        raise CommandError(f"dataset file not found: {path} (run 'rddi dataset' first)")
    data = dsmod.load(path)
    if data.n_atoms != cfg.n_atoms:
        raise CommandError(f"dataset has N = {data.n_atoms} but config requests n_atoms = {cfg.n_atoms}")
    return dsmod.split(data, cfg.train_fraction, cfg.split_seed)


def _model(cfg: cfgmod.RunConfig) -> Model:
    path = cfg.checkpoint_path
    if not path.exists():
        raise CommandError(f"checkpoint not found: {path} (run 'rddi train' first)")
    model = load_checkpoint(path)
    if model.n_atoms != cfg.n_atoms:
        raise CommandError(f"checkpoint has N = {model.n_atoms} but config requests n_atoms = {cfg.n_atoms}")
    return model


def cmd_spectrum(cfg: cfgmod.RunConfig) -> list[Path]:
    written = [_prepare(cfg, "spectrum")]
    rows = []
    for d in np.linspace(cfg.spacing_min, cfg.spacing_max, cfg.spacing_points):
        try:
            spec = decay_spectrum(build_kernel(_geometry(cfg, d)))
        except Exception as exc:
            raise CommandError(f"eigensolver failed at spacing {d!r}: {exc}") from exc
        rows += [(float(d), m + 1, g, s) for m, (g, s) in enumerate(zip(spec.decay_rates, spec.shifts))]
    written.append(write_csv(cfg.out_path / "spectrum.csv", "spectrum", ["spacing", "m", "Gamma_m", "shift_m"], rows))
    return written


def cmd_dataset(cfg: cfgmod.RunConfig) -> list[Path]:
    written = [_prepare(cfg, "dataset")]
    data = dsmod.generate(
        cfg.n_atoms, cfg.count, cfg.spacing_min, cfg.spacing_max, cfg.data_seed, axis=cfg.axis, dipole=cfg.dipole
    )
    cfg.dataset_path.parent.mkdir(parents=True, exist_ok=True)
    dsmod.save(data, cfg.dataset_path)
    written.append(cfg.dataset_path)
    return written


def cmd_train(cfg: cfgmod.RunConfig) -> list[Path]:
    written = [_prepare(cfg, "train")]
    train_set, test_set = _split(cfg)
    model = Model(ModelConfig.for_atoms(cfg.n_atoms, seed=cfg.init_seed))
    tcfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        epsilon=cfg.epsilon,
        shuffle_seed=cfg.shuffle_seed,
    )
    model, history = train(model, train_set.images, train_set.labels, tcfg, test_set.images, test_set.labels)
    cfg.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, cfg.checkpoint_path)
    written.append(cfg.checkpoint_path)
    rows = [(e + 1, tr, te) for e, (tr, te) in enumerate(zip(history.train_loss, history.test_loss))]
    written.append(write_csv(cfg.out_path / "loss_history.csv", "loss", ["epoch", "train_loss", "test_loss"], rows))
    return written


def pearson(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    if a.size < 2:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def cmd_eval(cfg: cfgmod.RunConfig) -> list[Path]:
    written = [_prepare(cfg, "eval")]
    _, test_set = _split(cfg)
    model = _model(cfg)
    pred = model.forward(test_set.images)
    order = np.argsort(test_set.spacings, kind="stable")
    rows = []
    for i in order:
        for m in range(cfg.n_atoms):
            rows.append((float(test_set.spacings[i]), m + 1, test_set.labels[i, m], pred[i, m]))
    written.append(
        write_csv(
            cfg.out_path / "eval.csv", "eval", ["spacing", "m", "true_log_rate", "predicted_log_rate"], rows
        )
    )
    gate = test_set.spacings >= cfg.gate_min_spacing
    summary = [
        ("all", int(len(test_set)), pearson(pred, test_set.labels)),
        (f"spacing>={cfg.gate_min_spacing!r}", int(gate.sum()), pearson(pred[gate], test_set.labels[gate])),
        (f"spacing<{cfg.gate_min_spacing!r}", int((~gate).sum()), pearson(pred[~gate], test_set.labels[~gate])),
    ]
    written.append(write_csv(cfg.out_path / "eval_summary.csv", "eval-summary", ["subset", "samples", "pearson"], summary))
    for name, count, r in summary:
        log.info("pearson(%s, n=%d) = %.6f", name, count, r)
    return written


def cmd_attribute(cfg: cfgmod.RunConfig) -> list[Path]:
    written = [_prepare(cfg, "attribute")]
    model = _model(cfg)
    metrics = []
    for d in cfg.attr_spacings:
        kernel = build_kernel(_geometry(cfg, d))
        image = to_image(kernel)
        spectrum = decay_spectrum(kernel)
        triple = crossover_indices(spectrum)
        targets = cfg.targets or triple
        log.info("spacing %.3f: crossover indices %s", d, triple)
        maps = []
        for m in targets:
            amap = integrated_gradients(model, image, m - 1, steps=cfg.ig_steps)
            maps.append(amap)
            stem = f"attr_d{d:.3f}_m{m:02d}"
            n = cfg.n_atoms
            rows = [
                (i + 1, j + 1, amap.per_channel[0, i, j], amap.per_channel[1, i, j], amap.collapsed[i, j])
                for i in range(n)
                for j in range(n)
            ]
            written.append(
                write_csv(cfg.out_path / f"{stem}.csv", "attribution", ["mu", "nu", "re_channel", "im_channel", "collapsed"], rows)
            )
            written.append(write_ppm(cfg.out_path / f"{stem}.ppm", amap.collapsed, comment=f"spacing {d!r} m {m}"))
        for m, amap, peak in zip(targets, maps, magnitude_summary(maps)):
            rel = amap.completeness_residual / abs(amap.delta) if amap.delta else 0.0
            metrics.append(
                (
                    d,
                    m,
                    "/".join(str(t) for t in triple),
                    spectrum.decay_rates[m - 1],
                    band_fraction(amap, 1),
                    band_fraction(amap, 2),
                    peak,
                    amap.delta,
                    amap.completeness_residual,
                    rel,
                )
            )
    columns = [
        "spacing",
        "m",
        "crossover_triple",
        "Gamma_m",
        "band_fraction_1",
        "band_fraction_2",
        "max_abs",
        "delta_F",
        "completeness_residual",
        "relative_residual",
    ]
    written.append(write_csv(cfg.out_path / "attribution_metrics.csv", "attribution-metrics", columns, metrics))
    return written


STAGES = {
    "spectrum": cmd_spectrum,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "attribute": cmd_attribute,
}


def cmd_report(cfg: cfgmod.RunConfig) -> list[Path]:
    """Run every stage in order; the manifest records which stages completed."""
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    stages: list[tuple[str, str]] = []
    error = None
    for name, fn in STAGES.items():
        if error is not None:
            stages.append((name, "skipped"))
            continue
        try:
            files += fn(cfg)
            stages.append((name, "ok"))
        except Exception as exc:
            stages.append((name, "failed"))
            error = exc
    manifest = write_manifest(cfg.out_path / "manifest.txt", stages, files)
    if error is not None:
        raise CommandError(f"report stopped: {error}") from error
    return files + [manifest]


COMMANDS = {**STAGES, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rddi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="key = value configuration file")
        for key, typ in cfgmod.field_types().items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar=typ.split("[")[0].upper())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = {
            key: cfgmod.parse_value(key, getattr(args, key))
            for key in cfgmod.field_types()
            if getattr(args, key) is not None
        }
        cfg = cfgmod.resolve(args.config, overrides)
        written = COMMANDS[args.command](cfg)
    except (CommandError, ValueError, KeyError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"rddi {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
