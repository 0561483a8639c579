"""Command-line entry point and experiment config files.

Config-driven commands (train, sweep, eval, robustness, make-backends) write
a fully resolved `config_snapshot.json` into their run directory; re-running
any command from its snapshot reproduces every artifact byte for byte.
File-to-file commands (perturb, huemap, stats, export-png) are deterministic
in their flags alone.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import backends as be
from . import datasets as ds
from .compositor import TransformConfig
from .core import (
    Patch,
    brightness_stats,
    export_png,
    import_png,
    load_patch,
    save_patch,
)
from .errors import (
    BackendError,
    BrPatchError,
    ConfigError,
    DomainError,
    InfeasibleTransformError,
    PatchIOError,
)
from .evaluate import (
    SuiteConfig,
    eval_seed_for,
    evaluate_asr,
    robustness_table,
    write_brightness_csv,
)
from .perturb import (
    DEFAULT_HUE_THRESHOLD,
    HueMapParams,
    color_drift,
    color_transfer,
    gaussian_blur3,
    hue_map,
    resize_bilinear,
)
from .trainer import DEFAULT_LAMBDA_GRID, TrainConfig, sweep_lambda, train_patch

_REQUIRED = object()


def _expect(section: dict, where: str, allowed: dict) -> dict:
    """Strict config section reader: unknown keys rejected, types enforced."""
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = [k for k in section if k not in allowed]
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    out = {}
    for key, (typ, default) in allowed.items():
        if key in section:
            val = section[key]
            if typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if isinstance(val, bool) and typ is not bool:
                raise ConfigError(f"{where}.{key} has wrong type bool")
            if typ is not None and not isinstance(val, typ):
                raise ConfigError(f"{where}.{key} has wrong type {type(val).__name__}")
            out[key] = val
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {where}.{key}")
        else:
            out[key] = default
    return out


def _pair(val, where: str) -> tuple[float, float]:
    if not (isinstance(val, list) and len(val) == 2):
        raise ConfigError(f"{where} must be a 2-element list")
    return float(val[0]), float(val[1])


def _parse_transform(section, where: str) -> TransformConfig:
    got = _expect(section, where, {
        "angle_range_deg": (list, [-22.5, 22.5]),
        "scale_range": (list, [1.0, 1.0]),
        "placement": (str, "uniform_interior"),
        "center": (list, None),
    })
    center = tuple(_pair(got["center"], f"{where}.center")) if got["center"] is not None else None
    return TransformConfig(
        angle_range_deg=_pair(got["angle_range_deg"], f"{where}.angle_range_deg"),
        scale_range=_pair(got["scale_range"], f"{where}.scale_range"),
        placement=got["placement"],
        center=center,
    )


def _parse_dataset(section, where: str) -> ds.DatasetSpec:
    got = _expect(section, where, {
        "kind": (str, "synthetic"),
        "path": (str, None),
        "seed": (int, 0),
        "n_train": (int, 3200),
        "n_test": (int, 1600),
        "image_size": (int, 48),
    })
    if got["kind"] == "npz":
        if not got["path"]:
            raise ConfigError(f"{where}.path required for npz datasets")
        if not os.path.exists(got["path"]):
            raise ConfigError(f"{where}.path does not exist: {got['path']}")
        return ds.DatasetSpec(kind="npz", path=got["path"])
    return ds.DatasetSpec(kind="synthetic", seed=got["seed"], n_train=got["n_train"],
                          n_test=got["n_test"], image_size=got["image_size"])


def _parse_train_section(section, where: str) -> TrainConfig:
    got = _expect(section, where, {
        "patch_size": (int, 15),
        "target_class": (int, _REQUIRED),
        "lambda": (float, 0.0),
        "epochs": (int, 40),
        "step_size": (float, 0.01),
        "batch_size": (int, 64),
        "seed": (int, 0),
        "init": (str, "gray"),
        "eps_guard": (float, 1e-6),
        "transform": (dict, {}),
    })
    return TrainConfig(
        patch_size=got["patch_size"],
        target_class=got["target_class"],
        lambda_=got["lambda"],
        epochs=got["epochs"],
        step_size=got["step_size"],
        batch_size=got["batch_size"],
        seed=got["seed"],
        transform=_parse_transform(got["transform"], f"{where}.transform"),
        init=got["init"],
        eps_guard=got["eps_guard"],
    )


def _check_path(path, where: str) -> str:
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{where} must be a nonempty path")
    if not os.path.exists(path):
        raise ConfigError(f"{where} does not exist: {path}")
    return path


def _load_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _resolve_created(cfg: dict) -> str:
    created = cfg.get("created")
    if created is None:
        created = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    if not isinstance(created, str):
        raise ConfigError("created must be an ISO-8601 string")
    return created


def _write_snapshot(out_dir: str, snapshot: dict) -> None:
    with open(os.path.join(out_dir, "config_snapshot.json"), "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _patch_io_load(path) -> Patch:
    if path.endswith(".png"):
        return import_png(path)
    return load_patch(path)


def _patch_io_save(patch: Patch, path) -> None:
    if path.endswith(".png"):
        export_png(patch, path)
    else:
        save_patch(patch, path)


def _train_data(cfg: dict, where: str):
    got = _expect(cfg, where, {
        "dataset": (dict, _REQUIRED),
        "n_train": (int, 512),
        "n_val": (int, 256),
    })
    spec = _parse_dataset(got["dataset"], f"{where}.dataset")
    data = ds.load_dataset(spec)
    n_tr, n_val = got["n_train"], got["n_val"]
    if n_tr + n_val > len(data.train):
        raise ConfigError(f"{where}: n_train + n_val exceeds the dataset train split")
    train = data.train.subset(np.arange(n_tr))
    val = data.train.subset(np.arange(n_tr, n_tr + n_val))
    return got, spec, data, train, val


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    allowed = {"train": (dict, _REQUIRED), "data": (dict, _REQUIRED),
               "source_backend": (str, _REQUIRED), "created": (str, None)}
    top = _expect(cfg, "config", allowed)
    tcfg = _parse_train_section(top["train"], "train")
    data_got, spec, _, train_images, val_images = _train_data(top["data"], "data")
    backend_path = _check_path(top["source_backend"], "source_backend")
    created = _resolve_created(cfg)

    source = be.load_backend(backend_path, be.WHITE_BOX)
    os.makedirs(args.out, exist_ok=True)
    _write_snapshot(args.out, {
        "train": tcfg.to_json_dict(),
        "data": {"dataset": spec.to_json_dict(), "n_train": data_got["n_train"],
                 "n_val": data_got["n_val"]},
        "source_backend": backend_path,
        "created": created,
    })

    patch, history = train_patch(tcfg, train_images, val_images, source, log=print)
    patch = Patch(patch.pixels, _with_created(patch.meta, created))
    save_patch(patch, os.path.join(args.out, "patch.brp"))
    history.write_csv(os.path.join(args.out, "history.csv"))
    with open(os.path.join(args.out, "train_summary.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "best_epoch": patch.meta.epochs_trained,
            "brightness_range": patch.meta.brightness_range,
            "val_asr": max(r.val_asr for r in history.records),
            "patch_id": patch.ident(),
        }, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"wrote {os.path.join(args.out, 'patch.brp')} "
          f"(best epoch {patch.meta.epochs_trained}, range {patch.meta.brightness_range:.3f})")
    return 0


def _with_created(meta, created: str):
    from dataclasses import replace
    return replace(meta, created=created)


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    top = _expect(cfg, "config", {
        "train": (dict, _REQUIRED),
        "data": (dict, _REQUIRED),
        "source_backend": (str, _REQUIRED),
        "sweep": (dict, _REQUIRED),
        "created": (str, None),
    })
    sw = _expect(top["sweep"], "sweep", {
        "lambdas": (list, list(DEFAULT_LAMBDA_GRID)),
        "target_backend": (str, _REQUIRED),
        "n_eval_images": (int, 1000),
        "eval_seed": (int, 1234),
    })
    tcfg = _parse_train_section(top["train"], "train")
    data_got, spec, data, train_images, val_images = _train_data(top["data"], "data")
    src_path = _check_path(top["source_backend"], "source_backend")
    tgt_path = _check_path(sw["target_backend"], "sweep.target_backend")
    created = _resolve_created(cfg)
    lambdas = [float(v) for v in sw["lambdas"]]
    if not lambdas:
        raise ConfigError("sweep.lambdas must be nonempty")

    source = be.load_backend(src_path, be.WHITE_BOX)
    target = be.load_backend(tgt_path, be.BLACK_BOX)
    n_eval = min(sw["n_eval_images"], len(data.test))
    eval_images = data.test.subset(np.arange(n_eval))

    os.makedirs(args.out, exist_ok=True)
    _write_snapshot(args.out, {
        "train": tcfg.to_json_dict(),
        "data": {"dataset": spec.to_json_dict(), "n_train": data_got["n_train"],
                 "n_val": data_got["n_val"]},
        "source_backend": src_path,
        "sweep": {"lambdas": lambdas, "target_backend": tgt_path,
                  "n_eval_images": sw["n_eval_images"], "eval_seed": sw["eval_seed"]},
        "created": created,
    })

    report = sweep_lambda(tcfg, lambdas, train_images, val_images, eval_images,
                          source, target, sw["eval_seed"], log=print)
    report.write_csv(os.path.join(args.out, "sweep.csv"))
    for lam, patch in report.patches.items():
        patch = Patch(patch.pixels, _with_created(patch.meta, created))
        save_patch(patch, os.path.join(args.out, f"patch_lambda_{lam:g}.brp"))
    if args.plots:
        _plot_sweep(report, os.path.join(args.out, "sweep.png"))
    print(f"wrote sweep.csv with {len(report.rows)} rows to {args.out}")
    return 0


def _plot_sweep(report, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [r.brightness_range for r in report.rows]
    ys = [r.asr_target for r in report.rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, "o-")
    ax.set_xlabel("brightness range")
    ax.set_ylabel("attack success rate")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _eval_common(section, where: str):
    got = _expect(section, where, {
        "patch": (str, _REQUIRED),
        "backend": (str, _REQUIRED),
        "capability": (str, "black_box"),
        "target_class": (int, None),
        "n_images": (int, 1000),
        "seed": (int, 1234),
        "transform": (dict, {}),
    })
    patch = load_patch(_check_path(got["patch"], f"{where}.patch"))
    backend = be.load_backend(_check_path(got["backend"], f"{where}.backend"), got["capability"])
    target_class = got["target_class"]
    if target_class is None:
        target_class = patch.meta.target_class
    if target_class < 0:
        raise ConfigError(f"{where}: no target class on patch; set {where}.target_class")
    tcfg = _parse_transform(got["transform"], f"{where}.transform")
    return got, patch, backend, int(target_class), tcfg


def _eval_images(cfg_data, where: str, n_images: int):
    got = _expect(cfg_data, where, {"dataset": (dict, _REQUIRED), "split": (str, "test")})
    if got["split"] not in ("train", "test"):
        raise ConfigError(f"{where}.split must be 'train' or 'test'")
    spec = _parse_dataset(got["dataset"], f"{where}.dataset")
    data = ds.load_dataset(spec)
    split = data.test if got["split"] == "test" else data.train
    n = min(n_images, len(split))
    return got, spec, split.subset(np.arange(n))


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    top = _expect(cfg, "config", {"eval": (dict, _REQUIRED), "data": (dict, _REQUIRED),
                                  "created": (str, None)})
    got, patch, backend, target_class, tcfg = _eval_common(top["eval"], "eval")
    data_got, spec, images = _eval_images(top["data"], "data", got["n_images"])

    os.makedirs(args.out, exist_ok=True)
    _write_snapshot(args.out, {
        "eval": {**{k: got[k] for k in ("patch", "backend", "capability", "n_images", "seed")},
                 "target_class": target_class, "transform": tcfg.to_json_dict()},
        "data": {"dataset": spec.to_json_dict(), "split": data_got["split"]},
    })
    report = evaluate_asr(patch, images, target_class, backend, tcfg, got["seed"])
    report.write_json(os.path.join(args.out, "eval_report.json"))
    with open(os.path.join(args.out, "eval_summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("patch_id,target_class,n_images,n_success,asr\n")
        fh.write(f"{report.patch_id},{report.target_class},{report.n_images},"
                 f"{report.n_success},{report.asr!r}\n")
    print(f"asr {report.asr:.4f} ({report.n_success}/{report.n_images}) -> {args.out}")
    return 0


def _parse_suite(section, where: str) -> SuiteConfig:
    got = _expect(section, where, {
        "color_transfer_delta": (float, 0.05),
        "include_blur": (bool, True),
        "drift_qs": (list, [0.10, 0.15, 0.20]),
        "resize_factors": (list, [1.2, 1.4, 1.6]),
        "include_original": (bool, True),
        "include_transfer": (bool, True),
    })
    return SuiteConfig(
        color_transfer_delta=got["color_transfer_delta"],
        include_blur=got["include_blur"],
        drift_qs=tuple(float(q) for q in got["drift_qs"]),
        resize_factors=tuple(float(f) for f in got["resize_factors"]),
        include_original=got["include_original"],
        include_transfer=got["include_transfer"],
    )


def _cmd_robustness(args) -> int:
    if args.config:
        cfg = _load_config(args.config)
    else:
        for flag, name in ((args.patch, "--patch"), (args.backend, "--backend")):
            if not flag:
                raise ConfigError(f"robustness needs {name} when no --config is given")
        if args.suite != "default":
            raise ConfigError(f"unknown suite {args.suite!r}")
        cfg = {
            "robustness": {"patch": args.patch, "backend": args.backend,
                           "n_images": args.n_images, "seed": args.seed,
                           "suite": {}, "transform": {}},
            "data": {"dataset": json.loads(args.dataset) if args.dataset.startswith("{")
                     else {"kind": "npz", "path": args.dataset}},
        }
    top = _expect(cfg, "config", {"robustness": (dict, _REQUIRED), "data": (dict, _REQUIRED),
                                  "created": (str, None)})
    rb = dict(top["robustness"])
    suite_section = rb.pop("suite", {})
    got, patch, backend, target_class, tcfg = _eval_common(rb, "robustness")
    suite = _parse_suite(suite_section, "robustness.suite")
    data_got, spec, images = _eval_images(top["data"], "data", got["n_images"])

    os.makedirs(args.out, exist_ok=True)
    _write_snapshot(args.out, {
        "robustness": {**{k: got[k] for k in ("patch", "backend", "capability",
                                              "n_images", "seed")},
                       "target_class": target_class, "transform": tcfg.to_json_dict(),
                       "suite": suite.to_json_dict()},
        "data": {"dataset": spec.to_json_dict(), "split": data_got["split"]},
    })
    table = robustness_table(patch, suite, images, target_class, backend, tcfg, got["seed"])
    table.write_csv(os.path.join(args.out, "robustness.csv"))
    table.write_json(os.path.join(args.out, "robustness.json"))
    for row in table.rows:
        print(f"{row.name:>18}: asr {row.asr:.4f} ({row.n_success}/{row.n_images})")
    return 0


def _cmd_perturb(args) -> int:
    patch = _patch_io_load(args.infile)
    if args.op == "color_transfer":
        if args.delta is None:
            raise ConfigError("color_transfer needs --delta")
        out = color_transfer(patch, args.delta)
    elif args.op == "gaussian_blur3":
        out = gaussian_blur3(patch)
    elif args.op == "color_drift":
        if args.q is None:
            raise ConfigError("color_drift needs --q")
        out = color_drift(patch, args.q, args.seed)
    elif args.op == "resize_bilinear":
        if args.factor is not None:
            nh = int(round(patch.height * args.factor))
            nw = int(round(patch.width * args.factor))
        elif args.height is not None and args.width is not None:
            nh, nw = args.height, args.width
        else:
            raise ConfigError("resize_bilinear needs --factor or --height and --width")
        out = resize_bilinear(patch, nh, nw, align_corners=args.align_corners)
    else:
        raise ConfigError(f"unknown op {args.op!r}")
    _patch_io_save(out, args.outfile)
    print(f"wrote {args.outfile}")
    return 0


def _cmd_huemap(args) -> int:
    patch = _patch_io_load(args.infile)
    region = _patch_io_load(_check_path(args.region, "--region")).pixels
    params = HueMapParams(target_region=region, h_t=args.ht, literal_sign=args.literal_sign)
    _patch_io_save(hue_map(patch, params), args.outfile)
    print(f"wrote {args.outfile}")
    return 0


def _cmd_stats(args) -> int:
    patches = [_patch_io_load(p) for p in args.patches]
    stats = [brightness_stats(p, bins=args.bins) for p in patches]
    os.makedirs(args.out, exist_ok=True)
    write_brightness_csv(stats, list(args.patches), os.path.join(args.out, "brightness_stats.csv"))
    if args.plots:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        for i, (name, s) in enumerate(zip(args.patches, stats)):
            fig, ax = plt.subplots(figsize=(4, 2.5))
            centers = (s.bin_edges[:-1] + s.bin_edges[1:]) / 2
            ax.bar(centers, s.histogram, width=1.0 / args.bins)
            ax.set_xlabel("brightness")
            ax.set_title(os.path.basename(name), fontsize=8)
            fig.tight_layout()
            fig.savefig(os.path.join(args.out, f"hist_{i}.png"), dpi=120)
            plt.close(fig)
    for name, s in zip(args.patches, stats):
        print(f"{name}: min {s.min_b:.4f} max {s.max_b:.4f} range {s.range:.4f}")
    return 0


def _cmd_export_png(args) -> int:
    export_png(load_patch(args.infile), args.outfile)
    print(f"wrote {args.outfile}")
    return 0


def _cmd_make_backends(args) -> int:
    cfg = _load_config(args.config)
    top = _expect(cfg, "config", {"backends": (dict, _REQUIRED), "created": (str, None)})
    got = _expect(top["backends"], "backends", {
        "seed_source": (int, 11),
        "seed_target": (int, 22),
        "dataset": (dict, _REQUIRED),
        "epochs": (int, 10),
        "batch_size": (int, 64),
        "learning_rate": (float, 1e-3),
        "weight_decay": (float, 1e-4),
        "channels": (list, list(be.DEFAULT_CHANNELS)),
        "augment_shift": (int, 3),
        "min_accuracy": (float, 0.8),
    })
    spec = _parse_dataset(got["dataset"], "backends.dataset")
    bcfg = be.BackendTrainConfig(
        dataset=spec,
        epochs=got["epochs"],
        batch_size=got["batch_size"],
        learning_rate=got["learning_rate"],
        weight_decay=got["weight_decay"],
        channels=tuple(int(c) for c in got["channels"]),
        augment_shift=got["augment_shift"],
        min_accuracy=got["min_accuracy"],
    )
    os.makedirs(args.out, exist_ok=True)
    _write_snapshot(args.out, {"backends": {**got, "dataset": spec.to_json_dict()}})
    source, target = be.reference_backends(got["seed_source"], got["seed_target"], bcfg, log=print)
    source.save(os.path.join(args.out, "source.pt"))
    target.save(os.path.join(args.out, "target.pt"))
    with open(os.path.join(args.out, "backends.json"), "w", encoding="utf-8") as fh:
        json.dump({"source": source.metrics, "target": target.metrics},
                  fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"source acc {source.metrics['clean_test_accuracy']:.3f}, "
          f"target acc {target.metrics['clean_test_accuracy']:.3f} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brpatch",
                                 description="Brightness-restricted attack patch toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="optimize a patch against a source backend")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="train one patch per lambda and tabulate the trade-off")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="attack success rate of a saved patch")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("robustness", help="ASR table under the perturbation suite")
    p.add_argument("--config")
    p.add_argument("--patch")
    p.add_argument("--backend")
    p.add_argument("--dataset", default="", help="npz path or inline JSON dataset spec")
    p.add_argument("--suite", default="default")
    p.add_argument("--n-images", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_robustness)

    p = sub.add_parser("perturb", help="apply one perturbation to a patch file")
    p.add_argument("--op", required=True,
                   choices=["color_transfer", "gaussian_blur3", "color_drift", "resize_bilinear"])
    p.add_argument("--delta", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--factor", type=float)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--align-corners", action="store_true")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("huemap", help="shift patch color toward a scene region")
    p.add_argument("--region", required=True, help="PNG or .brp crop of the scene")
    p.add_argument("--ht", type=float, default=DEFAULT_HUE_THRESHOLD)
    p.add_argument("--literal-sign", action="store_true",
                   help="shift away from the scene mean instead of toward it")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.set_defaults(func=_cmd_huemap)

    p = sub.add_parser("stats", help="brightness statistics of patch files")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--plots", action="store_true")
    p.add_argument("patches", nargs="+")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("export-png", help="write a print-ready 8-bit PNG")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.set_defaults(func=_cmd_export_png)

    p = sub.add_parser("make-backends", help="train the twin reference classifiers")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_backends)

    return ap


_EXIT_CODES = (
    (InfeasibleTransformError, 3, "infeasible"),
    (ConfigError, 2, "config"),
    (DomainError, 2, "config"),
    (BackendError, 4, "backend"),
    (PatchIOError, 5, "io"),
    (BrPatchError, 2, "config"),
    (OSError, 5, "io"),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        for typ, code, cat in _EXIT_CODES:
            if isinstance(exc, typ):
                print(f"brpatch-error category={cat} message={str(exc)!r}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
