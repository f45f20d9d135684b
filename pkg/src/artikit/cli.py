"""``artikit`` command-line interface.

Exit codes: 0 ok, 1 usage, 2 missing input, 3 validation failure,
4 numeric failure. Failures print one JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .errors import ArtikitError, MissingInput


class UsageError(Exception):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True, default=str))


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInput(f"input not found: {p}")
    return p


def _checkpoint(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInput(f"checkpoint not found: {p}")
    return p


# --- commands ---------------------------------------------------------------

def cmd_gen(args, cfg: PipelineConfig) -> dict:
    from .artgrid import write_avox
    from .ingest import CATEGORIES, ProceduralSpec, gen_procedural, procedural_dataset, save_object

    if args.category and args.category not in CATEGORIES:
        raise UsageError(f"unknown category {args.category!r}; choose from {', '.join(CATEGORIES)}")
    if args.count is None:
        spec = ProceduralSpec(args.category or "cabinet", args.drawers, args.doors, not args.no_handles)
        try:
            spec.validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        obj = gen_procedural(cfg.seed, spec)
        save_object(obj, args.output)
        return {"command": "gen", "output": args.output, "name": obj.name, "parts": len(obj.parts)}
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cats = (args.category,) if args.category else CATEGORIES
    files = []
    for obj, grid in procedural_dataset(cfg.seed, args.count, cfg.resolution, cats):
        save_object(obj, out / f"{obj.name}.json")
        write_avox(grid, out / f"{obj.name}.avox")
        files.append({"name": obj.name, "category": obj.category, "voxels": grid.active_count})
    return {"command": "gen", "output": str(out), "objects": files}


def cmd_ingest(args, cfg) -> dict:
    from .artgrid import write_avox
    from .ingest import canonicalize, load_object, voxelize

    obj = load_object(_require(args.input))
    grid = voxelize(canonicalize(obj) if not args.no_canonicalize else obj, cfg.resolution)
    write_avox(grid, args.output)
    return {"command": "ingest", "output": args.output, "voxels": grid.active_count, "parts": len(grid.part_rows())}


def cmd_articulate(args, cfg) -> dict:
    from .artgrid import read_avox
    from .kinematics import ArticulationState, articulate_points, articulate_splats
    from .splat.splats import read_asplat, write_asplat

    grid = read_avox(_require(args.grid))
    state = ArticulationState.parse(args.state)
    if args.splats:
        moved = articulate_splats(read_asplat(_require(args.splats)), state, grid, clamp=args.clamp)
        write_asplat(moved, args.output)
        return {"command": "articulate", "output": args.output, "splats": len(moved)}
    pc = articulate_points(grid, state, clamp=args.clamp)
    if Path(args.output).suffix == ".json":
        doc = {"state": state.format(), "points": pc.points.tolist(), "part_ids": pc.part_ids.tolist(),
               "labels": pc.labels.tolist()}
        Path(args.output).write_text(json.dumps(doc) + "\n")
    else:
        rows = np.column_stack([pc.points, pc.part_ids, pc.labels])
        np.savetxt(args.output, rows, fmt=["%.9g"] * 3 + ["%d", "%d"], header="x y z part_id label", comments="")
    return {"command": "articulate", "output": args.output, "points": len(pc.points)}


def cmd_render(args, cfg) -> dict:
    from .artgrid import read_avox
    from .kinematics import ArticulationState, articulate_splats
    from .report import image_grid_figure
    from .splat.camera import fibonacci_cameras
    from .splat.image import write_ppm
    from .splat.render import render
    from .splat.splats import read_asplat

    splats = read_asplat(_require(args.splats))
    if args.state:
        if not args.grid:
            raise UsageError("--state needs --grid to know each Gaussian's part")
        splats = articulate_splats(splats, ArticulationState.parse(args.state), read_avox(_require(args.grid)))
    size = args.size or cfg.preview_size
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    images, names, skipped = [], [], 0
    for v, cam in enumerate(fibonacci_cameras(args.views, args.radius, width=size, height=size)):
        img = render(splats, cam)
        skipped += img.skipped
        names.append(f"view_{v:02d}.ppm")
        write_ppm(img.rgb, out / names[-1])
        images.append(img.rgb)
    doc = {"command": "render", "output": str(out), "views": names, "skipped_splats": skipped}
    if args.sheet:
        doc["sheet"] = str(image_grid_figure(images, out / "views.png", titles=names))
    return doc


def cmd_segment(args, cfg) -> dict:
    from .artgrid import read_avox, write_avox
    from .eval import intra_part_std
    from .segment import aggregate_params, segment_parts

    grid = read_avox(_require(args.input))
    assignment = segment_parts(grid, cfg.eps, cfg.min_pts)
    before = intra_part_std(grid, assignment.part_of)
    out = aggregate_params(grid, assignment)
    write_avox(out, args.output)
    return {
        "command": "segment", "output": args.output, "parts": assignment.n_parts, "noise": len(assignment.noise),
        "intra_part_std_before": {k: v.tolist() for k, v in before.items()},
    }


def cmd_train_vae(args, cfg) -> dict:
    from .models.vae import VaeConfig, train_vae, vae_checkpoint
    from .numerics import LossWeights, save_checkpoint
    from .pipeline import load_dataset

    data = load_dataset(args.data)
    vcfg = VaeConfig(resolution=cfg.resolution, latent_channels=cfg.latent_channels)
    steps = cfg.vae_steps if args.epochs is None else args.epochs * max(1, -(-len(data) // args.batch_size))
    res = train_vae([d.grid for d in data], vcfg, steps=steps, seed=cfg.seed, lr=cfg.vae_lr,
                    batch_size=args.batch_size, weights=LossWeights(cfg.alpha_kl),
                    log_every=args.log_every, log=lambda s: print(s, file=sys.stderr))
    tensors, meta = vae_checkpoint(res.params, vcfg)
    tensors = res.best_params
    meta["steps"] = steps
    meta["seed"] = cfg.seed
    save_checkpoint(args.output, tensors, meta)
    doc = {"command": "train-vae", "output": args.output, "steps": steps, "final": res.history[-1],
           "best_total": min(h["total"] for h in res.history)}
    if args.report:
        from .report import training_report
        doc["report"] = training_report(res.history, args.report, "vae")
    return doc


def cmd_train_prior(args, cfg) -> dict:
    from .ingest import CATEGORIES
    from .models.flow import FlowConfig, flow_checkpoint, fm_train
    from .numerics import save_checkpoint
    from .pipeline import category_index, grid_latents, load_dataset, load_vae

    data = load_dataset(args.data)
    params, vcfg = load_vae(_checkpoint(args.vae or cfg.vae))
    z = grid_latents(params, vcfg, [d.grid for d in data])
    conds = np.array([category_index(d.category) for d in data])
    fcfg = FlowConfig(steps=cfg.steps, cfg_scale=cfg.cfg_scale, cond_dim=len(CATEGORIES))
    model = fm_train(z, conds, fcfg, seed=cfg.seed, steps=cfg.prior_steps, lr=cfg.prior_lr,
                     cond_names=list(CATEGORIES), log_every=args.log_every, log=lambda s: print(s, file=sys.stderr))
    tensors, meta = flow_checkpoint(model, kind="prior", extra={"latent_shape": list(vcfg.latent_shape)})
    save_checkpoint(args.output, tensors, meta)
    doc = {"command": "train-prior", "output": args.output, "latents": len(z), "final_loss": model.history[-1]}
    if args.report:
        from .report import training_report
        doc["report"] = training_report([{"fm": h} for h in model.history], args.report, "prior")
    return doc


def cmd_finetune(args, cfg) -> dict:
    from .models.finetune import decoder_checkpoint, finetune_articulation, prepare_object, train_appearance_prior
    from .models.gaussians import DecoderConfig
    from .numerics import save_checkpoint
    from .pipeline import load_dataset

    data = load_dataset(args.data)
    objects = [prepare_object(d.grid, k=cfg.k, n=cfg.n, size=cfg.image_size) for d in data]
    dcfg = DecoderConfig()
    res = finetune_articulation(objects, cfg=dcfg, epochs=cfg.finetune_epochs, lam=cfg.lam, lr=cfg.finetune_lr,
                                seed=cfg.seed, log_every=args.log_every, log=lambda s: print(s, file=sys.stderr))
    prior = train_appearance_prior(res.params, dcfg, objects, steps=args.prior_steps, seed=cfg.seed)
    save_checkpoint(args.output, *decoder_checkpoint(res.params, dcfg, prior))
    doc = {"command": "finetune", "output": args.output, "steps": len(res.history),
           "final": res.history[-1] if res.history else None}
    if args.report and res.history:
        from .report import training_report
        doc["report"] = training_report(res.history, args.report, "finetune")
    return doc


def cmd_sample(args, cfg) -> dict:
    from .artgrid import write_avox
    from .pipeline import load_prior, load_vae, sample_grid

    params, vcfg = load_vae(_checkpoint(args.vae or cfg.vae))
    prior = load_prior(_checkpoint(args.prior or cfg.prior))
    grid = sample_grid(params, vcfg, prior, args.cond, cfg.seed, cfg.steps, cfg.cfg_scale, cfg.eps, cfg.min_pts)
    write_avox(grid, args.output)
    return {"command": "sample", "output": args.output, "voxels": grid.active_count, "parts": len(grid.part_rows())}


def cmd_generate(args, cfg) -> dict:
    from .pipeline import generate

    vae = _checkpoint(args.vae or cfg.vae)
    prior = _checkpoint(args.prior or cfg.prior)
    decoder = args.decoder
    if decoder is not None:
        _checkpoint(decoder)
    manifest = generate(args.output, args.cond, cfg.seed, vae, prior, decoder, cfg.steps, cfg.cfg_scale,
                        cfg.eps, cfg.min_pts, args.render_states, args.views, args.size or cfg.image_size)
    return {"command": "generate", "output": args.output, "manifest": manifest}


def cmd_eval(args, cfg) -> dict:
    from .artgrid import read_avox
    from .eval import param_report
    from .report import eval_report, write_json

    pred, gt = read_avox(_require(args.pred)), read_avox(_require(args.gt))
    report = param_report(pred, gt, states=cfg.eval_states)
    doc = {"command": "eval", "report": report.to_dict()}
    if args.json:
        write_json(report.to_dict(), args.json)
    if args.report:
        doc["files"] = eval_report(report, args.report)
    return doc


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="artikit", description="Articulated voxel objects: data, training, sampling and evaluation.")
    p.add_argument("--version", action="version", version=f"artikit {__version__}")
    p.add_argument("--config", help="TOML config file (default: ./artikit.toml when present)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    def seed(sp):
        sp.add_argument("--seed", type=int, help="random seed")

    sp = add("gen", cmd_gen, "Write one procedural object (.json), or a dataset of objects and grids with --count.")
    sp.add_argument("--category", help="object category (random per object with --count)")
    sp.add_argument("--drawers", type=int, default=1)
    sp.add_argument("--doors", type=int, default=0)
    sp.add_argument("--no-handles", action="store_true")
    sp.add_argument("--count", type=int, help="write COUNT objects plus .avox grids into the output directory")
    sp.add_argument("-n", "--resolution", type=int, dest="resolution", help="grid resolution for --count")
    sp.add_argument("-o", "--output", required=True, help="object file, or directory with --count")
    seed(sp)

    sp = add("ingest", cmd_ingest, "Voxelize an object description into an AVOX grid.")
    sp.add_argument("input")
    sp.add_argument("-n", "--resolution", type=int, dest="resolution")
    sp.add_argument("--no-canonicalize", action="store_true", help="skip centering and unit scaling")
    sp.add_argument("-o", "--output", required=True)

    sp = add("articulate", cmd_articulate, "Move voxel centers (or splats with --splats) to an articulation state.")
    sp.add_argument("grid")
    sp.add_argument("--state", required=True, help='part values, e.g. "1:0.5,2:0.1"')
    sp.add_argument("--splats", help="ASPLAT file to articulate instead of voxel centers")
    sp.add_argument("--clamp", action="store_true", help="clamp values into joint ranges")
    sp.add_argument("-o", "--output", required=True)

    sp = add("render", cmd_render, "Render an ASPLAT file from Fibonacci-sphere views to PPM.")
    sp.add_argument("splats")
    sp.add_argument("--grid", help="AVOX grid the splats were decoded from (needed with --state)")
    sp.add_argument("--state", help='articulation state, e.g. "1:0.5"')
    sp.add_argument("--views", type=int, default=8)
    sp.add_argument("--size", type=int, help="image width and height")
    sp.add_argument("--radius", type=float, default=2.0)
    sp.add_argument("--sheet", action="store_true", help="also write a PNG contact sheet")
    sp.add_argument("-o", "--output", required=True, help="output directory")

    sp = add("segment", cmd_segment, "Split a grid into parts and write back per-part parameters.")
    sp.add_argument("input")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--min-pts", type=int, dest="min_pts")
    sp.add_argument("-o", "--output", required=True)

    sp = add("train-vae", cmd_train_vae, "Train the articulation VAE on a directory of AVOX grids.")
    sp.add_argument("data")
    sp.add_argument("--steps", type=int, dest="vae_steps")
    sp.add_argument("--epochs", type=int, help="passes over the data (overrides --steps)")
    sp.add_argument("--lr", type=float, dest="vae_lr")
    sp.add_argument("--batch-size", type=int, default=8)
    sp.add_argument("--alpha-kl", type=float, dest="alpha_kl")
    sp.add_argument("--latent-channels", type=int, dest="latent_channels")
    sp.add_argument("-n", "--resolution", type=int, dest="resolution")
    sp.add_argument("--log-every", type=int, default=0)
    sp.add_argument("--report", help="directory for loss CSV and figure")
    sp.add_argument("-o", "--output", required=True)
    seed(sp)

    sp = add("train-prior", cmd_train_prior, "Train the flow-matching latent prior on VAE latents.")
    sp.add_argument("data")
    sp.add_argument("--vae")
    sp.add_argument("--steps", type=int, dest="prior_steps")
    sp.add_argument("--lr", type=float, dest="prior_lr")
    sp.add_argument("--log-every", type=int, default=0)
    sp.add_argument("--report", help="directory for loss CSV and figure")
    sp.add_argument("-o", "--output", required=True)
    seed(sp)

    sp = add("finetune", cmd_finetune, "Fit the Gaussian decoder with multi-state supervision.")
    sp.add_argument("data")
    sp.add_argument("-k", type=int, help="articulation states per object")
    sp.add_argument("-n", type=int, help="views per state")
    sp.add_argument("--epochs", type=int, dest="finetune_epochs")
    sp.add_argument("--lam", type=float, help="weight of the scale/opacity regularizer")
    sp.add_argument("--lr", type=float, dest="finetune_lr")
    sp.add_argument("--image-size", type=int, dest="image_size")
    sp.add_argument("--prior-steps", type=int, default=500, help="appearance prior training steps")
    sp.add_argument("--log-every", type=int, default=0)
    sp.add_argument("--report", help="directory for loss CSV and figure")
    sp.add_argument("-o", "--output", required=True)
    seed(sp)

    sp = add("sample", cmd_sample, "Sample one articulated grid from the latent prior.")
    sp.add_argument("--cond", help="category name (omit for unconditional)")
    sp.add_argument("--cfg", type=float, dest="cfg_scale", help="guidance scale")
    sp.add_argument("--steps", type=int, help="Euler steps")
    sp.add_argument("--vae")
    sp.add_argument("--prior")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--min-pts", type=int, dest="min_pts")
    sp.add_argument("-o", "--output", required=True)
    seed(sp)

    sp = add("generate", cmd_generate, "Sample, segment, decode Gaussians and render; writes a manifest.")
    sp.add_argument("--cond", help="category name (omit for unconditional)")
    sp.add_argument("--cfg", type=float, dest="cfg_scale")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--vae")
    sp.add_argument("--prior")
    sp.add_argument("--decoder", help="Gaussian decoder checkpoint; palette colours when omitted")
    sp.add_argument("--views", type=int, default=4, help="views per rendered state (0 disables)")
    sp.add_argument("--render-states", type=int, default=3, dest="render_states")
    sp.add_argument("--size", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--min-pts", type=int, dest="min_pts")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    seed(sp)

    sp = add("eval", cmd_eval, "Compare a predicted grid with ground truth.")
    sp.add_argument("pred")
    sp.add_argument("gt")
    sp.add_argument("--states", type=int, dest="eval_states")
    sp.add_argument("--json", help="write the report as JSON")
    sp.add_argument("--report", help="directory for CSV, JSON and a figure")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config).merged(vars(args))
        doc = args.fn(args, cfg)
    except UsageError as exc:
        _fail("UsageError", str(exc), 1)
        return 1
    except ArtikitError as exc:
        _fail(type(exc).__name__, str(exc), exc.exit_code)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        _fail("MissingInput", str(exc), 2)
        return 2
    except ValueError as exc:
        _fail("ValidationError", str(exc), 3)
        return 3
    except (FloatingPointError, ArithmeticError) as exc:
        _fail("NumericError", str(exc), 4)
        return 4
    _emit(doc)
    return 0


def _fail(kind: str, message: str, code: int) -> None:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
