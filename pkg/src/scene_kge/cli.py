"""``scene-kge`` command line entry point.

Option values are resolved in this order, later winning: built-in default,
``SCENE_KGE_THREADS`` (for ``--threads`` only), the JSON file given with
``--config``, then flags on the command line. Config keys are the long option
names with dashes turned into underscores (``batch_size``, ``top_k``, ...).

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .kg import ParseError, read_kg, stats, write_kg
from .modelio import ModelFormatError, load_model, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "SCENE_KGE_THREADS"

log = logging.getLogger("scene_kge")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


_UNSET = object()

# per-subcommand option defaults; options are declared with default=_UNSET so
# that explicitly passed flags can be told apart from config-file values
DEFAULTS = {
    "gen-kg": {},
    "stats": {"type_relation": "type"},
    "train": {
        "algo": "transe",
        "dim": 100,
        "epochs": 100,
        "lr": 0.01,
        "margin": 1.0,
        "seed": 0,
        "threads": 1,
        "batch_size": 128,
        "negatives": 1,
        "norm": "L2",
        "loss": "margin",
        "l2_reg": None,
        "normalize": None,
        "plot": None,
        "quiet": False,
        "type_relation": "type",
    },
    "eval": {"k": 10, "figure": None, "type_relation": "type"},
    "similar": {"scenes": None, "top_k": 10},
    "neighbors": {"entity": None, "k": 10},
    "project": {
        "method": "tsne",
        "perplexity": 30.0,
        "seed": 0,
        "iterations": 1000,
        "svg": None,
        "entities": None,
        "kg": None,
    },
}


def _opt(p, *flags, **kw):
    kw.setdefault("default", _UNSET)
    p.add_argument(*flags, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scene-kge", description="Scene knowledge graph embeddings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--manifest", help="run manifest path (default: <output>.manifest.json)")
        return p

    p = command("gen-kg", "build a scene knowledge graph TSV from annotations")
    p.add_argument("scenes", help="scene dataset JSON")
    p.add_argument("ontology", help="ontology config JSON")
    p.add_argument("-o", "--output", required=True, help="output triples TSV")

    p = command("stats", "print knowledge graph statistics")
    p.add_argument("kg", help="triples TSV")
    _opt(p, "--type-relation")
    p.add_argument("-o", "--output", help="write statistics JSON here")

    p = command("train", "train an embedding model")
    p.add_argument("kg", help="triples TSV")
    _opt(p, "--algo", choices=["transe", "rescal", "hole"], type=str.lower)
    _opt(p, "--dim", type=int)
    _opt(p, "--epochs", type=int)
    _opt(p, "--lr", type=float)
    _opt(p, "--margin", type=float)
    _opt(p, "--seed", type=int)
    _opt(p, "--threads", type=int)
    _opt(p, "--batch-size", type=int)
    _opt(p, "--negatives", type=int, help="negatives per positive")
    _opt(p, "--norm", choices=["L1", "L2"], type=str.upper, help="TransE distance norm")
    _opt(p, "--loss", choices=["margin", "logistic"])
    _opt(p, "--l2-reg", type=float)
    _opt(p, "--normalize", action=argparse.BooleanOptionalAction, help="project entity rows onto the unit ball")
    _opt(p, "--plot", help="write a training-curve figure (png/svg/pdf)")
    _opt(p, "--quiet", action="store_true")
    _opt(p, "--type-relation")
    p.add_argument("-o", "--output", required=True, help="output model file")

    p = command("eval", "intrinsic evaluation report")
    p.add_argument("model")
    p.add_argument("kg", help="triples TSV")
    _opt(p, "--k", type=int, help="coherence neighbourhood size")
    _opt(p, "--figure", help="write the per-class bar figure (png/svg/pdf)")
    _opt(p, "--type-relation")
    p.add_argument("-o", "--output", help="report JSON")

    p = command("similar", "most similar scene pairs")
    p.add_argument("model")
    _opt(p, "--scenes", help="comma-separated scene or sub-scene ids")
    _opt(p, "--top-k", type=int)
    p.add_argument("-o", "--output", help="result JSON")

    p = command("neighbors", "nearest neighbours of an entity")
    p.add_argument("model")
    _opt(p, "--entity")
    _opt(p, "--k", type=int)
    p.add_argument("-o", "--output", help="result JSON")

    p = command("project", "2D projection of entity embeddings")
    p.add_argument("model")
    _opt(p, "--method", choices=["tsne", "pca"])
    _opt(p, "--perplexity", type=float)
    _opt(p, "--seed", type=int)
    _opt(p, "--iterations", type=int)
    _opt(p, "--entities", help="comma-separated subset of entities (default: all)")
    _opt(p, "--kg", help="triples TSV used to colour points by class")
    _opt(p, "--svg", help="write a scatter plot (svg, or png/pdf by extension)")
    p.add_argument("-o", "--output", required=True, help="points CSV")
    return parser


def resolve_options(command: str, ns: argparse.Namespace) -> dict:
    defaults = dict(DEFAULTS[command])
    if command == "train" and os.environ.get(THREADS_ENV):
        try:
            defaults["threads"] = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    config = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(config) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, default in defaults.items():
        value = getattr(ns, key, _UNSET)
        if value is _UNSET:
            value = config.get(key, default)
        resolved[key] = value
    return resolved


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, options, inputs, started) -> None:
    manifest = {
        "subcommand": command,
        "config": options,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "seed": options.get("seed"),
        "tool_version": __version__,
        "wall_time": round(time.perf_counter() - started, 6),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_model_and_kg(model_path, kg_path, type_relation):
    model = load_model(model_path)
    kg = read_kg(kg_path, type_relation)
    if model.entities is not None and model.relations is not None:
        if kg.entities != model.entities or kg.relations != model.relations:
            kg = kg.reindexed(model.entities, model.relations)
    elif len(kg.entities) != model.n_entities or len(kg.relations) != model.n_relations:
        raise ValueError("model has no vocabulary sidecars and does not match the graph's sizes")
    else:
        model.entities, model.relations = kg.entities, kg.relations
    return model, kg


def _split(text):
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def cmd_gen_kg(ns, opts):
    from .scenes import emit_triples, read_dataset, read_ontology

    kg = emit_triples(read_dataset(ns.scenes), read_ontology(ns.ontology))
    write_kg(kg, ns.output)
    s = stats(kg)
    print(f"wrote {s.triple_count} triples ({s.entity_count} entities, {s.relation_count} relations) to {ns.output}")
    return [ns.scenes, ns.ontology]


def cmd_stats(ns, opts):
    s = stats(read_kg(ns.kg, opts["type_relation"]))
    print(f"triples    {s.triple_count}")
    print(f"entities   {s.entity_count}")
    print(f"relations  {s.relation_count}")
    width = max([len(r) for r in s.per_relation_counts] + [8])
    for rel, count in s.per_relation_counts.items():
        print(f"  {rel:<{width}}  {count}")
    if ns.output:
        Path(ns.output).write_text(s.to_json() + "\n", encoding="utf-8")
    return [ns.kg]


def cmd_train(ns, opts):
    from .models import ModelConfig
    from .train import TrainConfig, init_model, train

    kg = read_kg(ns.kg, opts["type_relation"])
    try:
        mcfg = ModelConfig(opts["algo"], opts["dim"], opts["norm"], opts["seed"])
        tcfg = TrainConfig(
            epochs=opts["epochs"],
            batch_size=opts["batch_size"],
            learning_rate=opts["lr"],
            margin=opts["margin"],
            negatives_per_positive=opts["negatives"],
            normalize_entities=opts["normalize"],
            l2_reg=opts["l2_reg"],
            seed=opts["seed"],
            threads=opts["threads"],
            loss=opts["loss"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def report(rec):
        if not opts["quiet"]:
            print(
                f"epoch {rec.epoch:>5}  loss {rec.mean_loss:.6f}  violations {rec.violation_rate:.4f}",
                file=sys.stderr,
            )

    model, history = train(init_model(mcfg, kg), kg, tcfg, on_epoch=report)
    save_model(model, ns.output)
    if opts["plot"]:
        from .plotting import plot_history

        plot_history(history, opts["plot"])
    last = history.epochs[-1]
    print(f"trained {mcfg.algorithm.value} d={mcfg.dim}: final loss {last.mean_loss:.6f}, saved {ns.output}")
    return [ns.kg]


def cmd_eval(ns, opts):
    from .evaluate import eval_report

    model, kg = _load_model_and_kg(ns.model, ns.kg, opts["type_relation"])
    report = eval_report(model, kg, opts["k"], timestamp=os.environ.get("SOURCE_DATE_EPOCH"))
    print(report.to_table())
    if ns.output:
        Path(ns.output).write_text(report.to_json(), encoding="utf-8")
    if opts["figure"]:
        from .plotting import plot_report

        plot_report(report, opts["figure"])
    return [ns.model, ns.kg]


def cmd_similar(ns, opts):
    from .analytics import most_similar_scene_pairs

    scenes = _split(opts["scenes"])
    if len(scenes) < 2:
        raise UsageError("--scenes needs at least two comma-separated ids")
    result = most_similar_scene_pairs(load_model(ns.model), scenes, opts["top_k"])
    print(result.to_table(), end="")
    if ns.output:
        Path(ns.output).write_text(result.to_json(), encoding="utf-8")
    return [ns.model]


def cmd_neighbors(ns, opts):
    from .analytics import nearest_neighbors

    if not opts["entity"]:
        raise UsageError("--entity is required")
    result = nearest_neighbors(load_model(ns.model), opts["entity"], opts["k"])
    width = max([len(lbl) for lbl, _ in result] + [6])
    print(f"{'rank':>4}  {'entity':<{width}}  {'cosine':>8}")
    for i, (lbl, s) in enumerate(result, 1):
        print(f"{i:>4}  {lbl:<{width}}  {s:>8.4f}")
    if ns.output:
        doc = {"entity": opts["entity"], "neighbors": [{"entity": e, "cosine": s} for e, s in result]}
        Path(ns.output).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return [ns.model]


def cmd_project(ns, opts):
    from .analytics import project_2d

    model = load_model(ns.model)
    kg = None
    inputs = [ns.model]
    if opts["kg"]:
        model, kg = _load_model_and_kg(ns.model, opts["kg"], "type")
        inputs.append(opts["kg"])
    entities = _split(opts["entities"]) or None
    params = {}
    if opts["method"] == "tsne":
        params = {"perplexity": opts["perplexity"], "seed": opts["seed"], "n_iter": opts["iterations"]}
    proj = project_2d(model, entities, opts["method"], params, kg)
    Path(ns.output).write_text(proj.to_csv(), encoding="utf-8")
    if opts["svg"]:
        from .plotting import plot_projection

        plot_projection(proj, opts["svg"])
    print(f"wrote {len(proj.points)} points to {ns.output}")
    return inputs


COMMANDS = {
    "gen-kg": cmd_gen_kg,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "similar": cmd_similar,
    "neighbors": cmd_neighbors,
    "project": cmd_project,
}


def run(argv=None) -> int:
    from .evaluate import UnsupportedModelError
    from .scenes import OntologyError, SchemaError
    from .train import TrainingDiverged

    started = time.perf_counter()
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_usage() + "scene-kge: error: a subcommand is required")
        opts = resolve_options(ns.command, ns)
        inputs = COMMANDS[ns.command](ns, opts)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"scene-kge: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, SchemaError, OntologyError, ModelFormatError, UnsupportedModelError,
            KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"scene-kge: error: {msg}", file=sys.stderr)
        return EXIT_DATA
    manifest = ns.manifest or (f"{ns.output}.manifest.json" if getattr(ns, "output", None) else None)
    if manifest:
        write_manifest(manifest, ns.command, {"args": _positional(ns), **opts}, inputs, started)
    return EXIT_OK


def _positional(ns) -> dict:
    skip = {"command", "config", "manifest"} | set(DEFAULTS.get(ns.command, {}))
    return {k: v for k, v in sorted(vars(ns).items()) if k not in skip}


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
