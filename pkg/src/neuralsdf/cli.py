"""Command line entry point: ``neuralsdf {train,render,eval,curvature,rbf,sample-stats}``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import net as netmod
from .discrete_geom import ObjParseError, load_obj, meyer_mean_curvature, vertex_geometry
from .evaluation import MeshReference, table1_metrics, write_metrics_csv
from .geometry import write_geometry_csv
from .implicit_geom import AnalyticSurface, make_surface, probe_geometry
from .loss import LossWeights
from .rbf import RbfError, RbfSingularError, fit as rbf_fit
from .render import Camera, RenderConfig, RenderError, render, write_png, write_ppm
from .sampler import BatchSpec, SamplingError, partition_by_fractions, write_partition_csv
from .train import (TrainConfig, TrainingDiverged, dataset_from_mesh, dataset_from_surface,
                    normalize_mesh, train, write_epoch_csv)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SCHEMA, EXIT_DIVERGED = 0, 2, 3, 4, 5

# analytic surfaces sized to sit inside the [-1, 1]^3 training box
SURFACES = {"sphere": {"radius": 0.6}, "torus": {"major": 0.6, "minor": 0.25}}


class SchemaError(ValueError):
    pass


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

_TRAIN_KEYS = {"layer_dims", "omega0", "epochs", "learning_rate", "partition", "max_steps",
               "checkpoint_every", "n_points", "oracle", "k_sign"}
_BATCH_KEYS = {"m", "fractions", "m_off", "domain"}
_LOSS_KEYS = {f.name for f in dataclasses.fields(LossWeights)}
_CAMERA_KEYS = {f.name for f in dataclasses.fields(Camera)}
_RENDER_KEYS = {f.name for f in dataclasses.fields(RenderConfig)} | {"camera"}
_EVAL_KEYS = {"n_surface", "repetitions", "shell", "box"}
_SECTIONS = {"train": _TRAIN_KEYS, "batch": _BATCH_KEYS, "loss": _LOSS_KEYS,
             "render": _RENDER_KEYS, "eval": _EVAL_KEYS, "surface": None, "seed": None}


@dataclasses.dataclass
class RunConfig:
    train: dict = dataclasses.field(default_factory=dict)
    batch: dict = dataclasses.field(default_factory=dict)
    loss: dict = dataclasses.field(default_factory=dict)
    render: dict = dataclasses.field(default_factory=dict)
    eval: dict = dataclasses.field(default_factory=dict)
    surface: dict = dataclasses.field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise SchemaError("configuration must be a JSON object")
        for key, value in doc.items():
            if key not in _SECTIONS:
                raise SchemaError(f"unknown configuration key {key!r}")
            allowed = _SECTIONS[key]
            if key == "seed":
                if not isinstance(value, int) or isinstance(value, bool):
                    raise SchemaError("seed must be an integer")
                continue
            if not isinstance(value, dict):
                raise SchemaError(f"section {key!r} must be an object")
            if key == "surface":
                for kind, params in value.items():
                    if kind not in SURFACES or not isinstance(params, dict):
                        raise SchemaError(f"unknown surface entry {kind!r}")
                    bad = set(params) - set(SURFACES[kind])
                    if bad:
                        raise SchemaError(f"unknown {kind} parameter {sorted(bad)[0]!r}")
                continue
            bad = set(value) - allowed
            if key == "render" and isinstance(value.get("camera"), dict):
                bad |= {f"camera.{k}" for k in set(value["camera"]) - _CAMERA_KEYS}
            if bad:
                raise SchemaError(f"unknown key {sorted(bad)[0]!r} in section {key!r}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        """Build every typed object once so bad values fail before any work."""
        self.train_config()
        self.render_config()
        self.camera()
        if "oracle" in self.train and self.train["oracle"] not in ("exact", "kdtree"):
            raise SchemaError("train.oracle must be 'exact' or 'kdtree'")
        for key in ("n_points", "k_sign"):
            v = self.train.get(key)
            if v is not None and (not isinstance(v, int) or v <= 0):
                raise SchemaError(f"train.{key} must be a positive integer")
        for key in ("n_surface", "repetitions"):
            v = self.eval.get(key)
            if v is not None and (not isinstance(v, int) or v <= 0):
                raise SchemaError(f"eval.{key} must be a positive integer")

    def surface_params(self, kind: str) -> dict:
        return {**SURFACES[kind], **self.surface.get(kind, {})}

    def train_config(self, **overrides) -> TrainConfig:
        t = {k: v for k, v in self.train.items() if k not in ("n_points", "oracle", "k_sign")}
        t.update({k: v for k, v in overrides.items() if v is not None})
        seed = t.pop("seed", self.seed)
        try:
            batch = BatchSpec(**{"m": 2500, **self.batch, "seed": seed})
            weights = LossWeights(**self.loss)
            if "partition" in t:
                t["partition"] = tuple(t["partition"])
            cfg = TrainConfig(batch=batch, weights=weights, seed=seed, **t)
            netmod.init_siren(cfg.layer_dims, cfg.omega0, 0)
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc)) from exc
        return cfg

    def render_config(self, **overrides) -> RenderConfig:
        r = {k: v for k, v in self.render.items() if k != "camera"}
        r.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("light", "curvature_range", "background", "base_color"):
            if key in r and r[key] is not None:
                r[key] = tuple(r[key])
        try:
            return RenderConfig(**r)
        except (TypeError, RenderError) as exc:
            raise SchemaError(str(exc)) from exc

    def camera(self, **overrides) -> Camera:
        c = dict(self.render.get("camera", {}))
        c.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return Camera(**{k: tuple(v) if isinstance(v, list) else v for k, v in c.items()})
        except (TypeError, RenderError) as exc:
            raise SchemaError(str(exc)) from exc


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _surface(kind: str, cfg: RunConfig) -> AnalyticSurface:
    return make_surface(kind, **cfg.surface_params(kind))


def _load_model(path):
    net, meta = netmod.read_checkpoint(path)
    center = np.array([float(x) for x in meta.get("center", "0 0 0").split()])
    scale = float(meta.get("scale", "1"))
    return net, center, scale


def _open_out(path):
    if path is None or path == "-":
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _write_rows(path, header, rows):
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow([x if isinstance(x, (str, int)) else repr(float(x)) for x in r])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def command_train(args) -> int:
    cfg = _load_config(args)
    tc = cfg.train_config(epochs=args.epochs)
    out = Path(args.out)
    tc.checkpoint_path = str(out)
    if args.mesh:
        data = dataset_from_mesh(load_obj(args.mesh), k_sign=cfg.train.get("k_sign", 8))
    else:
        surface = _surface(args.surface, cfg)
        data = dataset_from_surface(surface, cfg.train.get("n_points", 20000), seed=cfg.seed,
                                    oracle=cfg.train.get("oracle", "exact"),
                                    k_sign=cfg.train.get("k_sign", 8))
    try:
        model, logs = train(tc, data)
    except TrainingDiverged as exc:
        netmod.save_checkpoint(exc.net, out, {**data.metadata(), "diverged": "true"})
        if exc.logs:
            write_epoch_csv(exc.logs, args.csv or out.with_suffix(".epochs.csv"))
        raise
    meta = {**data.metadata(), "epochs": str(tc.epochs), "seed": str(tc.seed)}
    netmod.save_checkpoint(model, out, meta)
    write_epoch_csv(logs, args.csv or out.with_suffix(".epochs.csv"))
    return EXIT_OK


def command_render(args) -> int:
    cfg = _load_config(args)
    rc = cfg.render_config(mode=args.mode)
    cam = cfg.camera(width=args.width, height=args.height, fov=args.fov,
                     position=tuple(args.eye) if args.eye else None,
                     look_at=tuple(args.look_at) if args.look_at else None)
    if args.model:
        f, _, _ = _load_model(args.model)
    else:
        f = _surface(args.surface, cfg)
    image = render(f, cam, rc)
    if str(args.out).lower().endswith(".png"):
        write_png(image, args.out)
    else:
        write_ppm(image, args.out)
    if image.singular:
        logging.getLogger(__name__).warning("%d pixels with singular gradient", image.singular)
    return EXIT_OK


def _reference(args, cfg):
    if args.mesh:
        mesh = load_obj(args.mesh)
        return MeshReference(dataset_from_mesh(mesh)), Path(args.mesh).stem
    return _surface(args.surface, cfg), args.surface


def command_eval(args) -> int:
    cfg = _load_config(args)
    ref, name = _reference(args, cfg)
    f, _, _ = _load_model(args.model)
    e = cfg.eval
    rep = table1_metrics(f, ref, n_surface=args.n_surface or e.get("n_surface", 2500),
                         repetitions=args.repetitions or e.get("repetitions", 100),
                         seed=cfg.seed, box=tuple(e.get("box", (-1.0, 1.0))),
                         shell=e.get("shell", 0.01))
    _emit_metrics(args.out, [rep.row("ours", name)])
    return EXIT_OK


def _emit_metrics(path, rows):
    if path and path != "-":
        write_metrics_csv(rows, path)
    else:
        from .evaluation import COLUMNS
        _write_rows(None, COLUMNS, rows)


def command_rbf(args) -> int:
    cfg = _load_config(args)
    ref, name = _reference(args, cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    on = ref.sample(args.n, rng).points
    lo, hi = tuple(cfg.eval.get("box", (-1.0, 1.0)))
    off = rng.uniform(lo, hi, size=(args.n, 3))
    pts = np.vstack([on, off])
    values = np.concatenate([np.zeros(len(on)), ref.signed_distance(off)])
    model = rbf_fit(pts, values, args.kernel, args.c)
    e = cfg.eval
    rep = table1_metrics(model, ref, n_surface=args.n_surface or e.get("n_surface", 2500),
                         repetitions=args.repetitions or e.get("repetitions", 100),
                         seed=cfg.seed, box=(lo, hi), shell=e.get("shell", 0.01))
    _emit_metrics(args.out, [rep.row("rbf", name)])
    return EXIT_OK


def command_curvature(args) -> int:
    mesh = load_obj(args.mesh)
    if args.method == "discrete":
        write_geometry_csv(vertex_geometry(mesh), _target(args.out))
    elif args.method == "meyer":
        h = meyer_mean_curvature(mesh)
        _write_rows(args.out, ["index", "mean"], ([i, v] for i, v in enumerate(h)))
    else:
        net, center, scale = _load_model(args.model)
        geo = probe_geometry(net, (mesh.vertices - center) * scale)
        # curvature scales inversely with length
        geo.kappa1 *= scale
        geo.kappa2 *= scale
        geo.points = mesh.vertices.copy()
        write_geometry_csv(geo, _target(args.out))
    return EXIT_OK


def _target(path):
    return sys.stdout if path in (None, "-") else path


def command_sample_stats(args) -> int:
    mesh = load_obj(args.mesh)
    if args.normalize:
        mesh = normalize_mesh(mesh)[0]
    part = partition_by_fractions(vertex_geometry(mesh), (args.n1, args.n2, args.n3))
    write_partition_csv(part, _target(args.out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="overrides the configuration seed")
    p.add_argument("--threads", type=int, help="cap on BLAS worker threads")


def _source(p, required=True, model=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--mesh", help="Wavefront OBJ file")
    g.add_argument("--surface", choices=sorted(SURFACES), help="analytic reference surface")
    if model:
        g.add_argument("--model", help="trained checkpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neuralsdf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a sine network to a mesh or analytic surface")
    _common(p)
    _source(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--csv", help="per-epoch loss CSV (default: <out>.epochs.csv)")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=command_train)

    p = sub.add_parser("render", help="sphere trace a model or analytic surface")
    _common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--model")
    g.add_argument("--surface", choices=sorted(SURFACES))
    p.add_argument("--mode", choices=("phong", "gaussian", "mean", "ward"))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fov", type=float)
    p.add_argument("--eye", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--look-at", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--out", required=True, help=".ppm or .png")
    p.set_defaults(func=command_render)

    for name, func, helptext in (("eval", command_eval, "reconstruction metrics of a model"),
                                 ("rbf", command_rbf, "fit and score the RBF baseline")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _source(p)
        if name == "eval":
            p.add_argument("--model", required=True)
        else:
            p.add_argument("--n", type=int, default=2500, help="on- and off-surface centers each")
            p.add_argument("--kernel", default="multiquadric",
                           choices=("multiquadric", "thin-plate", "gaussian"))
            p.add_argument("--c", type=float, help="kernel shape parameter")
        p.add_argument("--n-surface", type=int)
        p.add_argument("--repetitions", type=int)
        p.add_argument("--out", help="CSV path (default stdout)")
        p.set_defaults(func=func)

    p = sub.add_parser("curvature", help="per-vertex curvature of a mesh")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--method", choices=("discrete", "neural", "meyer"), default="discrete")
    p.add_argument("--model", help="checkpoint for --method neural")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=command_curvature)

    p = sub.add_parser("sample-stats", help="feature partition of a mesh")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--n1", type=float, default=0.5)
    p.add_argument("--n2", type=float, default=0.4)
    p.add_argument("--n3", type=float, default=0.1)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=command_sample_stats)
    return parser


def _check(args, parser):
    if args.command == "curvature" and args.method == "neural" and not args.model:
        parser.error("--method neural needs --model")
    if args.command == "curvature" and args.method != "neural" and args.model:
        parser.error("--model is only used with --method neural")
    for key in ("epochs", "width", "height", "n", "n_surface", "repetitions", "threads"):
        v = getattr(args, key, None)
        if v is not None and v < (0 if key == "epochs" else 1):
            parser.error(f"--{key.replace('_', '-')} must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check(args, parser)
    except SystemExit as exc:
        return int(exc.code)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train"
                        else logging.WARNING, format="%(message)s", stream=sys.stdout)
    limit = contextlib.nullcontext()
    if getattr(args, "threads", None):
        from threadpoolctl import threadpool_limits
        limit = threadpool_limits(args.threads)
    err = sys.stderr
    try:
        with limit:
            return args.func(args)
    except (SchemaError, netmod.ConfigurationError, SamplingError) as exc:
        print(f"error: invalid configuration: {exc}", file=err)
        return EXIT_SCHEMA
    except (OSError, ObjParseError, netmod.CheckpointError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=err)
        return EXIT_DIVERGED
    except RbfSingularError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DIVERGED
    except (RbfError, RenderError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
