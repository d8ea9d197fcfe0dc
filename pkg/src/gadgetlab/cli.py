"""Batch driver: subcommands, config ingestion, CSV/JSON emission.

Everything written is byte-deterministic: JSON with sorted keys, CSV with a
fixed column order, floats at 12 significant digits, trailing newlines, and
atomic per-task writes.  Every error path exits nonzero after printing one
machine-parsable ``error: <code>: <message>`` line.  ``GADGETLAB_WORKERS``
caps run-config concurrency; tasks share no mutable state.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import convergence, corpus
from .efgames import equivalence_rank, duplicator_wins
from .errors import BudgetExceededError
from .gadget import BaseStructure, Gadget, gadget_construct, undirected_gadget_construct
from .logic import parse_formula, stone_pairing_exact, stone_pairing_sampled
from .relstruct import StructureError
from .sequences import SequenceSpec
from .structfile import ParseError, read_structure_file, write_structure
from .convergence import (
    ConvergenceReport,
    FormulaTask,
    SamplingMode,
    Trajectory,
    convergence_verdict,
    sequence_diagnostics,
    trajectory_compute,
    verify_continuity_bound,
    verify_fragmentation_bound,
)


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _fmt_float(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def jsonable(obj):
    """Recursively convert report objects into deterministic JSON values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, frozenset):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, dict):
        return {_key_text(k): jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: _key_text(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _key_text(k) -> str:
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def _flatten(obj, prefix=""):
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            out.extend(_flatten(obj[k], f"{prefix}{k}." if prefix or True else k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.extend(_flatten(v, f"{prefix}{i}."))
    else:
        out.append((prefix[:-1], obj))
    return out


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def trajectory_csv(traj: Trajectory) -> str:
    lines = ["n,formula_id,value_num,value_den,exact,samples"]
    for row in traj.rows:
        if row.error is not None:
            lines.append(f"{row.n},{row.formula_id},,,{row.error},")
            continue
        samples = "" if row.samples is None else str(row.samples)
        lines.append(
            f"{row.n},{row.formula_id},{row.value.numerator},{row.value.denominator},"
            f"{1 if row.exact else 0},{samples}"
        )
    return "\n".join(lines) + "\n"


def write_outputs(payload, path: str | Path) -> None:
    """Serialize by extension: .csv trajectory rows, .json sorted-key JSON,
    anything else line-oriented key:value."""
    path = Path(path)
    if path.suffix == ".csv":
        if not isinstance(payload, Trajectory):
            raise CliError("output", "csv output requires trajectory rows")
        _atomic_write(path, trajectory_csv(payload))
        return
    data = jsonable(payload)
    if path.suffix == ".json":
        _atomic_write(path, json.dumps(data, sort_keys=True, indent=2) + "\n")
        return
    lines = [f"{key}: {value}" for key, value in _flatten(data)]
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Task execution


def _load_structure(path: str):
    try:
        return read_structure_file(path)
    except FileNotFoundError:
        raise CliError("io", f"no such file {path!r}") from None
    except ParseError as exc:
        raise CliError("parse", f"{path}: {exc}") from None


def _gadget_from_file(path: str) -> Gadget:
    s = _load_structure(path)
    roots = []
    i = 1
    while f"z{i}" in s.constants:
        roots.append(s.constants[f"z{i}"])
        i += 1
    if not roots:
        raise CliError("gadget", f"{path}: gadget files name their roots with constants z1..zr")
    stripped_lang = type(s.language)(
        s.language.relations,
        tuple(c for c in s.language.constants if c not in {f"z{j}" for j in range(1, i)}),
    )
    constants = {k: v for k, v in s.constants.items() if k in stripped_lang.constants}
    stripped = type(s)(stripped_lang, s.n, s.relations, constants)
    return Gadget(stripped, tuple(roots))


def run_construct(task: dict) -> dict:
    base = BaseStructure(_load_structure(task["base"]), task.get("edge_symbol", "R"))
    g = _gadget_from_file(task["gadget"])
    build = undirected_gadget_construct if task.get("undirected", False) else gadget_construct
    kwargs = {} if task.get("undirected", False) else {
        "lifted": task.get("lifted", False),
        "restricted_rho": task.get("restricted_rho", False),
    }
    constructed = build(base, g, **kwargs)
    out = Path(task["out"])
    _atomic_write(out, write_structure(constructed.result))
    provenance = {
        "internal": list(range(constructed.internal_count)),
        "external": {
            str(v): {"edge_index": e, "gadget_vertex": gv}
            for v, (e, gv) in sorted(constructed.external_map.items())
        },
        "edges": [list(e) for e in constructed.edge_list],
    }
    _atomic_write(
        out.with_name(out.name + ".provenance.json"),
        json.dumps(jsonable(provenance), sort_keys=True, indent=2) + "\n",
    )
    return {"vertices": constructed.result.n, "edges_replaced": len(constructed.edge_list)}


def run_ef(task: dict) -> dict:
    left = _load_structure(task["left"])
    right = _load_structure(task["right"])
    k = task["k"]
    kwargs = {
        "product_budget": task.get("product_budget", 20_000),
        "node_budget": task.get("node_budget", 5_000_000),
    }
    if task.get("rank", False):
        res = equivalence_rank(left, right, k, **kwargs)
        payload = {"mode": "rank", "kmax": k, "rank": res.rank, "truncated": res.truncated,
                   "equivalent_at_k": res.rank == k}
    else:
        eq = duplicator_wins(left, right, k, **kwargs)
        payload = {"mode": "decide", "k": k, "equivalent_at_k": eq}
    write_outputs(payload, task["out"])
    return payload


def run_pairing(task: dict) -> dict:
    s = _load_structure(task["structure"])
    f = parse_formula(task["formula"], s.language)
    if task.get("samples") is not None:
        if task.get("seed") is None:
            raise CliError("seed", "sampled pairing requires an explicit seed")
        estimate, halfwidth = stone_pairing_sampled(s, f, task["samples"], task["seed"])
        payload = {
            "value": estimate,
            "exact": False,
            "samples": task["samples"],
            "seed": task["seed"],
            "halfwidth": halfwidth,
        }
    else:
        payload = {"value": stone_pairing_exact(s, f), "exact": True}
    write_outputs(payload, task["out"])
    return payload


def run_trajectory(task: dict) -> dict:
    base = SequenceSpec.from_dict(task["base"])
    gspec = SequenceSpec.from_dict(task["gadget"]) if "gadget" in task else None
    formulas = [FormulaTask.from_dict(f) for f in task["formulas"]]
    mode = task.get("mode", "exact")
    sampling = None if mode == "exact" else SamplingMode(mode["samples"], mode["seed"])
    traj = trajectory_compute(base, gspec, formulas, task["indices"], sampling)
    write_outputs(traj, task["out"])
    payload: dict = {"rows": len(traj.rows)}
    if "verdict" in task or "report_out" in task:
        settings = task.get("verdict", {})
        report = convergence_verdict(
            traj,
            window=settings.get("window", 4),
            tol=Fraction(settings.get("tol", "0.02")),
        )
        payload["verdicts"] = {v.formula_id: v.verdict for v in report.verdicts}
        if "report_out" in task:
            write_outputs(report, task["report_out"])
    return payload


def run_verify(task: dict) -> dict:
    kwargs = {
        "product_budget": task.get("product_budget", 50_000),
        "node_budget": task.get("node_budget", 5_000_000),
    }
    if task["theorem"] == "continuity":
        instances = corpus.continuity_corpus(task["corpus_seed"], task["k"])
        report = verify_continuity_bound(instances, task["k"], **kwargs)
    else:
        instances = corpus.fragmentation_corpus(task["corpus_seed"], task["k"])
        report = verify_fragmentation_bound(instances, task["k"], **kwargs)
    write_outputs(report, task["out"])
    return {"passes": report.passes, "fails": report.fails, "skips": report.skips}


def run_diagnostics(task: dict) -> dict:
    report = sequence_diagnostics(
        SequenceSpec.from_dict(task["gadget"]),
        task["indices"],
        task["radii"],
        task["threshold"],
        mass_tol=Fraction(task.get("mass_tol", "0.3")),
    )
    write_outputs(report, task["out"])
    return {"tips": {",".join(map(str, t.class_members)): t.classification for t in report.tips}}


_RUNNERS = {
    "construct": run_construct,
    "ef": run_ef,
    "pairing": run_pairing,
    "trajectory": run_trajectory,
    "verify": run_verify,
    "diagnostics": run_diagnostics,
}


def load_config(path: str) -> dict:
    import jsonschema

    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise CliError("io", f"no such file {path!r}") from None
    except json.JSONDecodeError as exc:
        raise CliError("parse", f"{path}: {exc}") from None
    schema = json.loads(resources.files("gadgetlab").joinpath("config_schema.json").read_text())
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        raise CliError("config", f"{path}: {exc.message} at {list(exc.absolute_path)}") from None
    ids = [t["id"] for t in config["tasks"]]
    if len(ids) != len(set(ids)):
        raise CliError("config", "task ids must be unique")
    outs = [t["out"] for t in config["tasks"]]
    if len(outs) != len(set(outs)):
        raise CliError("config", "output paths must be distinct per task")
    return config


def run_config(config: dict) -> tuple[int, dict]:
    """Execute all tasks; nonzero status iff any task errors or a theorem check fails."""
    workers = int(os.environ.get("GADGETLAB_WORKERS", "1"))
    results: dict[str, dict] = {}
    failed = False

    def execute(task):
        return _RUNNERS[task["kind"]](task)

    tasks = config["tasks"]
    if workers <= 1:
        outcomes = []
        for task in tasks:
            try:
                outcomes.append((task, execute(task), None))
            except Exception as exc:  # noqa: BLE001 - reported per task
                outcomes.append((task, None, exc))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(task, pool.submit(execute, task)) for task in tasks]
            outcomes = []
            for task, fut in futures:
                try:
                    outcomes.append((task, fut.result(), None))
                except Exception as exc:  # noqa: BLE001
                    outcomes.append((task, None, exc))

    for task, payload, exc in outcomes:
        if exc is not None:
            failed = True
            results[task["id"]] = {"error": str(exc)}
            print(f"error: task:{task['id']}: {exc}", file=sys.stderr)
            continue
        results[task["id"]] = payload
        if task["kind"] == "verify" and payload.get("fails", 0) > 0:
            failed = True
            print(f"error: theorem-check-failed:{task['id']}", file=sys.stderr)
    return (1 if failed else 0), results


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gadgetlab", description="Gadget construction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="apply gadget construction to structure files")
    c.add_argument("--base", required=True)
    c.add_argument("--gadget", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--edge-symbol", default="R")
    c.add_argument("--lifted", action="store_true")
    c.add_argument("--restricted-rho", action="store_true")
    c.add_argument("--undirected", action="store_true")

    e = sub.add_parser("ef", help="decide k-round game equivalence")
    e.add_argument("--left", required=True)
    e.add_argument("--right", required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--rank", action="store_true")
    e.add_argument("--budget", type=int, default=20_000, help="product budget k*n_left*n_right")
    e.add_argument("--node-budget", type=int, default=5_000_000)
    e.add_argument("--out")

    p = sub.add_parser("pairing", help="Stone pairing of a formula on a structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    t = sub.add_parser("trajectory", help="run a trajectory task from a JSON task file")
    t.add_argument("--config", required=True)

    v = sub.add_parser("verify", help="run a theorem-check suite")
    v.add_argument("theorem", choices=["continuity", "fragmentation"])
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--corpus-seed", type=int, required=True)
    v.add_argument("--out", required=True)

    d = sub.add_parser("diagnostics", help="run a diagnostics task from a JSON task file")
    d.add_argument("--config", required=True)

    r = sub.add_parser("run", help="execute a batch config")
    r.add_argument("--config", required=True)
    return parser


def _load_task_file(path: str, kind: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            task = json.load(fh)
    except FileNotFoundError:
        raise CliError("io", f"no such file {path!r}") from None
    except json.JSONDecodeError as exc:
        raise CliError("parse", f"{path}: {exc}") from None
    task.setdefault("kind", kind)
    task.setdefault("id", kind)
    config = {"tasks": [task]}
    import jsonschema

    schema = json.loads(resources.files("gadgetlab").joinpath("config_schema.json").read_text())
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        raise CliError("config", f"{path}: {exc.message}") from None
    return task


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "construct":
            payload = run_construct(
                {
                    "base": args.base,
                    "gadget": args.gadget,
                    "out": args.out,
                    "edge_symbol": args.edge_symbol,
                    "lifted": args.lifted,
                    "restricted_rho": args.restricted_rho,
                    "undirected": args.undirected,
                }
            )
            print(f"constructed {payload['vertices']} vertices ({payload['edges_replaced']} edges replaced)")
            return 0
        if args.command == "ef":
            left = _load_structure(args.left)
            right = _load_structure(args.right)
            try:
                if args.rank:
                    res = equivalence_rank(left, right, args.k,
                                           product_budget=args.budget, node_budget=args.node_budget)
                    print(f"rank {res.rank}" + (" (truncated)" if res.truncated else ""))
                    equivalent = res.rank == args.k
                else:
                    equivalent = duplicator_wins(left, right, args.k,
                                                 product_budget=args.budget,
                                                 node_budget=args.node_budget)
                    print("equivalent" if equivalent else "inequivalent")
                if args.out:
                    write_outputs({"k": args.k, "equivalent_at_k": equivalent}, args.out)
            except BudgetExceededError as exc:
                print(f"error: budget: {exc}", file=sys.stderr)
                return 2
            return 0 if equivalent else 1
        if args.command == "pairing":
            task = {
                "structure": args.structure,
                "formula": args.formula,
                "samples": args.samples,
                "seed": args.seed,
                "out": args.out or os.devnull,
            }
            s = _load_structure(args.structure)
            f = parse_formula(args.formula, s.language)
            if args.samples is not None:
                if args.seed is None:
                    raise CliError("seed", "sampled pairing requires --seed")
                estimate, halfwidth = stone_pairing_sampled(s, f, args.samples, args.seed)
                print(f"{estimate.numerator}/{estimate.denominator} halfwidth {_fmt_float(halfwidth)}")
                payload = {"value": estimate, "exact": False, "samples": args.samples,
                           "seed": args.seed, "halfwidth": halfwidth}
            else:
                value = stone_pairing_exact(s, f)
                print(f"{value.numerator}/{value.denominator}")
                payload = {"value": value, "exact": True}
            if args.out:
                write_outputs(payload, args.out)
            return 0
        if args.command == "trajectory":
            task = _load_task_file(args.config, "trajectory")
            payload = run_trajectory(task)
            print(json.dumps(jsonable(payload), sort_keys=True))
            return 0
        if args.command == "verify":
            payload = run_verify(
                {
                    "theorem": args.theorem,
                    "k": args.k,
                    "corpus_seed": args.corpus_seed,
                    "out": args.out,
                }
            )
            print(
                f"{args.theorem}: pass {payload['passes']} fail {payload['fails']} skip {payload['skips']}"
            )
            return 0 if payload["fails"] == 0 else 1
        if args.command == "diagnostics":
            task = _load_task_file(args.config, "diagnostics")
            payload = run_diagnostics(task)
            print(json.dumps(jsonable(payload), sort_keys=True))
            return 0
        if args.command == "run":
            config = load_config(args.config)
            status, results = run_config(config)
            print(json.dumps(jsonable(results), sort_keys=True))
            return status
    except CliError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 3 if args.command == "ef" else 1
    except (StructureError, ParseError, BudgetExceededError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3 if args.command == "ef" else 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
