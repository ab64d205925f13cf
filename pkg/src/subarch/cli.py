"""Command-line entry point.

Every subcommand reads a JSON run configuration (``--config``).  Flags that
repeat a config field override it.  Relative paths inside a config are
resolved against the config file's directory.

Exit codes: 0 success, 2 invalid input or failed validation, 3 extraction
failure.

Run configuration fields::

    template      template document (object) or path to one
    dataset       CSV path
    thetas        [{"eta", "batch_size", "batch_seed", "shuffle_seed", "step_cap"}]
    epsilon, steps, loss, seed, jobs, out
    growth_vars   growth variables for abnc-check
    abnc          {"ordering_seeds", "ordering_steps", "num_pairs"}
    oracle        {"grid", "k_p", "k_i", "k_e", "k", "cap"}
    gen_data      {"kind", "n", "p", "noise"}
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

from . import report as rep
from .abnc import check_ordering, check_strong
from .arch import instantiate, load_template_document, space_to_dict, validate_search_space
from .data import gen_data, load_dataset, save_dataset
from .errors import ExtractionFailedError, SubarchError
from .extractor import extract, sort_space
from .metrics import metrics_report, param_size_poly, surrogate_inference_poly
from .oracle import (
    UNBOUNDED,
    OseDecInstance,
    WeightGrid,
    brute_force_ose_dec,
    equal_error_shortest_path,
    exhaustive_opt,
    reduce_nn_training,
)
from .poly import evaluate, leading_term
from .trainer import HyperParams, derive_seed

log = logging.getLogger("subarch")

EXIT_OK, EXIT_INVALID, EXIT_EXTRACTION = 0, 2, 3

DEFAULTS: dict[str, Any] = {
    "epsilon": 1,
    "steps": 200,
    "loss": "quadratic",
    "seed": 0,
    "jobs": 1,
    "thetas": [{"eta": 0.5}],
}


class ConfigError(SubarchError):
    """Raised for unusable run configurations."""


# -- configuration ---------------------------------------------------------------


def load_config(args: argparse.Namespace) -> tuple[dict[str, Any], Path]:
    """Merge defaults, the config file and flag overrides."""
    base = Path.cwd()
    cfg: dict[str, Any] = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        base = path.resolve().parent
    merged = {**DEFAULTS, **cfg}
    for key in ("epsilon", "steps", "seed", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.out is not None:
        merged["out"] = str(Path(args.out).resolve())
    return merged, base


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _template(cfg, base):
    doc = cfg.get("template")
    if doc is None:
        raise ConfigError("config has no template")
    if isinstance(doc, str):
        path = _resolve(base, doc)
        try:
            doc = json.loads(path.read_text())
        except OSError:
            raise ConfigError(f"template file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"template {path} is not valid JSON: {exc}") from None
    return load_template_document(doc)


def _dataset(cfg, base, required=True):
    if "dataset" not in cfg:
        if required:
            raise ConfigError("config has no dataset")
        return None
    return load_dataset(_resolve(base, cfg["dataset"]))


def _thetas(cfg, dataset) -> list[HyperParams]:
    out = []
    for t in cfg["thetas"]:
        batch = dataset.sample(int(t.get("batch_size", len(dataset))), int(t.get("batch_seed", 0)))
        out.append(HyperParams(batch, float(t["eta"]), int(t.get("shuffle_seed", 0)),
                               t.get("step_cap")))
    return out


def _echo(cfg) -> dict[str, Any]:
    return {k: v for k, v in sorted(cfg.items())}


def _write(cfg, base, payload, default_name: str) -> Path:
    out = _resolve(base, cfg.get("out") or default_name)
    payload = {**payload, "config": _echo(cfg), "config_hash": rep.config_hash(_echo(cfg))}
    path = rep.write_report(out, payload)
    print(f"wrote {path}")
    return path


# -- subcommands -------------------------------------------------------------------


def cmd_validate(cfg, base) -> int:
    template, space = _template(cfg, base)
    if "dataset" in cfg:
        data = _dataset(cfg, base)
        if data.dim != template.input_dim:
            raise ConfigError(f"dataset has {data.dim} features, template expects {template.input_dim}")
    result = validate_search_space(template, space)
    payload = {"validation": result.to_dict(), "space": space_to_dict(space),
               "space_size": len(space)}
    if cfg.get("out"):
        _write(cfg, base, payload, "validate.json")
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))
    if not result.well_posed:
        for issue in result.issues:
            print(f"invalid: {issue}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_metrics(cfg, base) -> int:
    template, space = _template(cfg, base)
    p_poly, i_poly = param_size_poly(template), surrogate_inference_poly(template)
    rows = [{"assignment": a.as_dict(), "p": evaluate(p_poly, a), "i_hat": evaluate(i_poly, a)}
            for a in space]
    payload: dict[str, Any] = {"p_poly": str(p_poly), "i_poly": str(i_poly),
                               "leading_term": str(leading_term(p_poly)), "assignments": rows}
    data = _dataset(cfg, base, required=False)
    if data is not None:
        # Untrained networks at their extractor initialisation, as a baseline.
        theta = _thetas(cfg, data)[0]
        position = {a: k for k, a in enumerate(sort_space(list(space), p_poly, i_poly))}
        for row, a in zip(rows, space):
            net = instantiate(template, a, seed=derive_seed(int(cfg["seed"]), 0, position[a], 0))
            m = metrics_report(net, theta.batch, data, cfg["loss"], p_poly, i_poly)
            row.update(e_hat=m.e_hat, e=float(m.e))
    _write(cfg, base, payload, "metrics.json")
    return EXIT_OK


def cmd_extract(cfg, base) -> int:
    template, space = _template(cfg, base)
    data = _dataset(cfg, base)
    thetas = _thetas(cfg, data)
    try:
        result = extract(template, data, space, thetas, int(cfg["epsilon"]), int(cfg["steps"]),
                         cfg["loss"], int(cfg["seed"]), int(cfg["jobs"]))
    except ExtractionFailedError as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        payload = {"status": "failed", "message": str(exc), "trace": [r.to_dict() for r in exc.trace]}
        _write(cfg, base, payload, "extract.json")
        return EXIT_EXTRACTION
    payload = result.to_dict()
    payload.pop("config")
    payload.pop("config_hash")
    payload["status"] = "ok"
    path = _write(cfg, base, payload, "extract.json")
    rep.write_weights(path, result.best_network.layers, result.best_network.weights)
    b = result.best
    print(f"best {b.assignment.as_dict()} w={b.w:.6g} p={b.metrics.p} i_hat={b.metrics.i_hat} "
          f"e_hat={b.metrics.e_hat:.6g}")
    return EXIT_OK


def cmd_abnc(cfg, base) -> int:
    template, space = _template(cfg, base)
    growth = cfg.get("growth_vars")
    if not growth:
        raise ConfigError("abnc-check needs growth_vars in the config")
    data = _dataset(cfg, base)
    theta = _thetas(cfg, data)[0]
    opts = cfg.get("abnc", {})
    report = check_strong(template, space, growth, data, cfg["loss"], theta, int(cfg["seed"]),
                          int(opts.get("num_pairs", 50)))
    seeds = int(opts.get("ordering_seeds", 0))
    if report.weak.holds and seeds > 0:
        steps = int(opts.get("ordering_steps", cfg["steps"]))
        report.ordering_concordance = check_ordering(template, space, data, theta, steps, seeds,
                                                     cfg["loss"], int(cfg["seed"]))
    _write(cfg, base, {"abnc": report.to_dict()}, "abnc.json")
    return EXIT_OK


def _threshold(value):
    return UNBOUNDED if value is None or value == "inf" else value


def cmd_oracle(cfg, base, mode: str) -> int:
    template, space = _template(cfg, base)
    opts = cfg.get("oracle", {})
    grid = WeightGrid(tuple(opts["grid"])) if "grid" in opts else WeightGrid()
    if mode == "shortest-path":
        best = equal_error_shortest_path(template, space)
        p_poly, i_poly = param_size_poly(template), surrogate_inference_poly(template)
        payload = {"assignment": best.as_dict(),
                   "cost": evaluate(p_poly, best) + evaluate(i_poly, best)}
    elif mode == "exhaustive":
        data = _dataset(cfg, base)
        idx, rec = exhaustive_opt(template, data, space, _thetas(cfg, data), int(cfg["steps"]),
                                  cfg["loss"], int(cfg["seed"]))
        payload = {"index": idx, "best": rec.to_dict()}
    elif mode in ("dec", "reduce"):
        data = _dataset(cfg, base)
        cap = int(opts.get("cap", 10**7))
        if mode == "dec":
            inst = OseDecInstance(template, data, grid, list(space), [],
                                  _threshold(opts.get("k_p")), _threshold(opts.get("k_i")),
                                  float(opts.get("k_e", 1.0)))
        else:
            inst = reduce_nn_training(template, space, data, grid, float(opts.get("k", 0.0)))
        answer = brute_force_ose_dec(inst, cap)
        payload = {"decision": answer.to_dict(),
                   "thresholds": {k: (None if math.isinf(v) else v)
                                  for k, v in (("k_p", inst.k_p), ("k_i", inst.k_i), ("k_e", inst.k_e))}}
    else:
        raise ConfigError(f"unknown oracle mode {mode!r}")
    _write(cfg, base, {"mode": mode, **payload}, f"oracle-{mode}.json")
    return EXIT_OK


def cmd_gen_data(cfg, base, args) -> int:
    opts = dict(cfg.get("gen_data", {}))
    for key in ("kind", "n", "p", "noise"):
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    data = gen_data(opts.get("kind", "blobs"), int(opts.get("n", 100)), int(opts.get("p", 2)),
                    float(opts.get("noise", 0.5)), int(cfg["seed"]))
    out = _resolve(base, cfg.get("out") or "data.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(data, out)
    print(f"wrote {len(data)} rows to {out}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--epsilon", type=int, help="stride over the sorted search space")
    common.add_argument("--steps", type=int, help="SGD steps per candidate")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output path")
    common.add_argument("--jobs", type=int, help="parallel candidate evaluations")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="subarch", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check that the search space is well posed")
    sub.add_parser("metrics", parents=[common], help="size and cost polynomials per assignment")
    sub.add_parser("extract", parents=[common], help="run the strided W-coefficient search")
    sub.add_parser("abnc-check", parents=[common], help="weak/strong AB^nC diagnostics")
    o = sub.add_parser("oracle", parents=[common], help="reference solvers")
    o.add_argument("mode", choices=["dec", "exhaustive", "reduce", "shortest-path"])
    g = sub.add_parser("gen-data", parents=[common], help="write a synthetic CSV dataset")
    g.add_argument("--kind", choices=["blobs", "linear", "xor"])
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int, help="feature count")
    g.add_argument("--noise", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, base = load_config(args)
        if args.command == "validate":
            return cmd_validate(cfg, base)
        if args.command == "metrics":
            return cmd_metrics(cfg, base)
        if args.command == "extract":
            return cmd_extract(cfg, base)
        if args.command == "abnc-check":
            return cmd_abnc(cfg, base)
        if args.command == "oracle":
            return cmd_oracle(cfg, base, args.mode)
        return cmd_gen_data(cfg, base, args)
    except ExtractionFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXTRACTION
    except (SubarchError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
