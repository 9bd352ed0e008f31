"""Command-line interface: one executable, reproducible configuration.

Every generating subcommand honors --seed deterministically and writes a run
manifest (<out>.manifest.json) with the configuration snapshot, seed, content
hash and stage counters.  Exit codes: 0 success, 1 runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .counting import (
    CountQuery,
    catalan,
    expression_sequence,
    format_ln,
    ln_binary_expression_asymptotic,
    ln_catalan_asymptotic,
    ln_expression_asymptotic,
    ln_schroeder_asymptotic,
    schroeder_sequence,
)
from .datasets import (
    Example,
    PairStore,
    compute_stats,
    clean as clean_example,
    file_sha256,
    read_dataset,
    split_bucket,
    stats_of_examples,
    write_dataset,
    write_manifest,
)
from .expr import (
    GrammarConfig,
    UNARY_OPS,
    default_leaves,
    parse_prefix,
    to_prefix_str,
    write_vocabulary,
)
from .calculus import differentiate
from .integration import (
    GenOptions,
    gen_bwd,
    gen_fwd,
    gen_ibp,
    seed_store,
    seed_store_with_derivatives,
)
from .ode import OdeGenOptions, gen_ode1, gen_ode2
from .oracle import JsonLinesOracle, OracleUnavailableError
from .sampling import build_tables, sample_expression
from .simplify import simplify, simplify_with_report
from .verify import ProbeConfig, verify_batch

sys.setrecursionlimit(20_000)


def _load_config_file(path: str) -> dict:
    """JSON or key=value lines; values in the latter are parsed as JSON when
    possible, else taken as strings."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config file must hold an object")
        return data
    except json.JSONDecodeError:
        pass
    data = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            data[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            data[key.strip()] = value
    return data


def _grammar_from(args) -> GrammarConfig:
    cfg = {}
    if getattr(args, "config", None):
        cfg = _load_config_file(args.config)
    unary_ops = tuple(cfg.get("unary_ops", UNARY_OPS))
    binary_ops = tuple(cfg.get("binary_ops", ("+", "-", "*", "/")))
    integer_range = tuple(cfg.get("integer_range", (-5, 5)))
    variables = tuple(cfg.get("variables", ("x",)))
    constants = tuple(cfg.get("constants", ()))
    max_nodes = int(cfg.get("max_internal_nodes", 15))
    if getattr(args, "max_ops", None):
        max_nodes = max(max_nodes, args.max_ops)
    return GrammarConfig(
        unary_ops=unary_ops,
        binary_ops=binary_ops,
        leaves=default_leaves(integer_range, variables, constants),
        max_internal_nodes=max_nodes,
        integer_range=integer_range,
    )


def _config_snapshot(config: GrammarConfig) -> dict:
    return {
        "unary_ops": list(config.unary_ops),
        "binary_ops": list(config.binary_ops),
        "leaves": [to_prefix_str(leaf) for leaf in config.leaves],
        "max_internal_nodes": config.max_internal_nodes,
        "integer_range": list(config.integer_range),
    }


def _write_run_manifest(out_path, subcommand, args, config, counters, extra=None):
    payload = {
        "tool": "mathgen",
        "version": __version__,
        "subcommand": subcommand,
        "seed": getattr(args, "seed", None),
        "config": _config_snapshot(config) if config else None,
        "options": {k: v for k, v in vars(args).items()
                    if k not in ("func",) and not callable(v)},
        "outputs": {str(out_path): file_sha256(out_path)} if out_path else {},
        "counters": dict(counters) if counters else {},
    }
    if extra:
        payload.update(extra)
    if out_path:
        write_manifest(out_path, payload)
    return payload


def _open_out(args):
    if getattr(args, "out", None):
        return open(args.out, "w", encoding="utf-8")
    return sys.stdout


# count ------------------------------------------------------------------------

def cmd_count(args) -> int:
    n_max, p1, p2, L = args.n_max, args.p1, args.p2, args.L
    cats = [catalan(n) for n in range(n_max + 1)]
    schs = schroeder_sequence(n_max)
    exprs = expression_sequence(n_max, p1, p2, L)
    fh = _open_out(args)
    try:
        fh.write("n,catalan,schroeder,expressions,"
                 "catalan_approx,schroeder_approx,expression_approx\n")
        for n in range(n_max + 1):
            if n >= 1:
                ca = format_ln(ln_catalan_asymptotic(n))
                sa = format_ln(ln_schroeder_asymptotic(n))
                if p1 > 0:
                    ea = format_ln(ln_expression_asymptotic(n, p1, p2, L))
                else:
                    ea = format_ln(ln_binary_expression_asymptotic(n, p2, L))
            else:
                ca = sa = ea = ""
            fh.write(f"{n},{cats[n]},{schs[n]},{exprs[n]},{ca},{sa},{ea}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


# sample -----------------------------------------------------------------------

def cmd_sample(args) -> int:
    config = _grammar_from(args)
    mode = args.mode or config.mode
    if args.weights_file:
        weights = _load_config_file(args.weights_file)
        config = GrammarConfig(
            unary_ops=config.unary_ops,
            binary_ops=config.binary_ops,
            leaves=config.leaves,
            max_internal_nodes=config.max_internal_nodes,
            integer_range=config.integer_range,
            unary_weights=tuple(weights.get("unary", [])) or None,
            binary_weights=tuple(weights.get("binary", [])) or None,
            leaf_weights=tuple(weights.get("leaf", [])) or None,
        )
    table = build_tables(config, max(args.n, 1), mode=mode)
    rng = random.Random(args.seed)
    fh = _open_out(args)
    try:
        for _ in range(args.count):
            expr = sample_expression(args.n, config, table, rng)
            fh.write(to_prefix_str(expr) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.out:
        _write_run_manifest(args.out, "sample", args, config, {})
    return 0


# diff / simplify ----------------------------------------------------------------

def _each_input_line(args):
    if args.expr:
        yield args.expr
        return
    source = open(args.infile, encoding="utf-8") if args.infile else sys.stdin
    try:
        for line in source:
            if line.strip():
                yield line.strip()
    finally:
        if args.infile:
            source.close()


def cmd_diff(args) -> int:
    fh = _open_out(args)
    try:
        for line in _each_input_line(args):
            expr = parse_prefix(line)
            fh.write(to_prefix_str(differentiate(expr, args.var)) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_simplify(args) -> int:
    fh = _open_out(args)
    try:
        for line in _each_input_line(args):
            expr = parse_prefix(line)
            out, report = simplify_with_report(expr)
            fh.write(to_prefix_str(out) + "\n")
            if args.report:
                sys.stderr.write(
                    f"# {report.input_tokens} -> {report.output_tokens} tokens, "
                    f"{report.passes} passes, rules {report.rules_fired}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


# generators ----------------------------------------------------------------------

def _emit_examples(args, subcommand, examples, config, counters) -> int:
    out = Path(args.out)
    if args.split:
        fractions = tuple(float(f) for f in args.split.split(","))
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("--split fractions must sum to 1")
        names = ["train", "valid", "test"][: len(fractions)]
        paths = [out.with_name(out.name + f".{nm}") for nm in names]
        handles = [open(p, "w", encoding="utf-8") for p in paths]
        try:
            for ex in examples:
                handles[split_bucket(ex.key(), fractions)].write(ex.to_line() + "\n")
        finally:
            for h in handles:
                h.close()
        for p in paths:
            _write_run_manifest(p, subcommand, args, config, counters)
        return 0
    collected = list(examples)
    write_dataset(out, collected)
    stats = stats_of_examples(collected).as_dict() if collected else {}
    write_vocabulary(out.with_name(out.name + ".vocab"))
    _write_run_manifest(out, subcommand, args, config, counters, {"stats": stats})
    return 0


def _shard_counts(total: int, shards: int) -> list:
    base, rem = divmod(total, shards)
    return [base + (1 if i < rem else 0) for i in range(shards)]


def _run_shard(payload) -> list:
    """One independent worker: own RNG (seed = base + shard index) and, for
    integration by parts, a private pair store."""
    kind, args_d, count, seed = payload
    config = _rebuild_config(args_d)
    rng = random.Random(seed)
    if kind == "bwd":
        opts = GenOptions(min_ops=args_d["min_ops"], max_ops=args_d["max_ops"])
        stream = gen_bwd(count, config, rng, opts)
    elif kind == "ibp":
        store = PairStore()
        seed_store(store)
        if args_d.get("seed_bwd"):
            seed_store_with_derivatives(store, args_d["seed_bwd"], config,
                                        random.Random(seed + 10_000),
                                        max_ops=min(3, args_d["max_ops"]))
        opts = GenOptions(min_ops=args_d["min_ops"], max_ops=args_d["max_ops"],
                          max_consecutive_rejects=count * 10_000)
        stream = gen_ibp(count, config, rng, store, opts)
    elif kind in ("ode1", "ode2"):
        opts = OdeGenOptions(min_ops=args_d["min_ops"], max_ops=args_d["max_ops"])
        gen = gen_ode1 if kind == "ode1" else gen_ode2
        stream = gen(count, config, rng, opts)
    else:
        raise ValueError(f"gen-{kind} does not support --shards")
    return [ex.to_line() for ex in stream]


def _rebuild_config(args_d) -> GrammarConfig:
    ns = argparse.Namespace(**{"config": args_d.get("config"),
                               "max_ops": args_d.get("max_ops")})
    return _grammar_from(ns)


def cmd_gen(args) -> int:
    config = _grammar_from(args)
    rng = random.Random(args.seed)
    max_ops = args.max_ops or config.max_internal_nodes
    kind = args.kind

    if args.shards > 1:
        if kind == "fwd":
            raise ValueError("gen-fwd does not support --shards; "
                             "run one worker per oracle instead")
        args_d = {"config": getattr(args, "config", None),
                  "min_ops": args.min_ops, "max_ops": max_ops,
                  "seed_bwd": getattr(args, "seed_bwd", 0)}
        counts = _shard_counts(args.count, args.shards)
        payloads = [(kind, args_d, counts[i], args.seed + i)
                    for i in range(args.shards)]
        with ProcessPoolExecutor(max_workers=args.shards) as pool:
            chunks = list(pool.map(_run_shard, payloads))
        out = Path(args.out)
        seen = set()
        written = 0
        with open(out, "w", encoding="utf-8") as fh:
            for chunk in chunks:
                for line in chunk:
                    key = line.split("\t", 1)[0]
                    if key in seen:
                        continue  # cross-shard duplicate problem
                    seen.add(key)
                    fh.write(line + "\n")
                    written += 1
        _write_run_manifest(out, f"gen-{kind}", args, config,
                            {"shards": args.shards, "emitted": written,
                             "cross_shard_duplicates": sum(map(len, chunks)) - written})
        return 0

    if kind == "bwd":
        opts = GenOptions(min_ops=args.min_ops, max_ops=max_ops)
        examples = gen_bwd(args.count, config, rng, opts)
    elif kind == "fwd":
        if not args.oracle_cmd:
            raise OracleUnavailableError("gen-fwd needs --oracle-cmd")
        oracle = JsonLinesOracle(args.oracle_cmd)
        opts = GenOptions(min_ops=args.min_ops, max_ops=max_ops)

        def _fwd_stream():
            try:
                yield from gen_fwd(args.count, config, rng, oracle,
                                   timeout=args.timeout, opts=opts)
            finally:
                oracle.close()

        examples = _fwd_stream()
    elif kind == "ibp":
        store = PairStore()
        seed_store(store)
        if args.seed_bwd:
            seed_store_with_derivatives(store, args.seed_bwd, config,
                                        random.Random(args.seed + 10_000),
                                        max_ops=min(3, max_ops))
        opts = GenOptions(min_ops=args.min_ops, max_ops=max_ops,
                          max_consecutive_rejects=args.count * 10_000)
        examples = gen_ibp(args.count, config, rng, store, opts)
    elif kind in ("ode1", "ode2"):
        opts = OdeGenOptions(min_ops=args.min_ops, max_ops=max_ops)
        gen = gen_ode1 if kind == "ode1" else gen_ode2
        examples = gen(args.count, config, rng, opts)
    else:  # pragma: no cover
        raise ValueError(kind)

    result = _emit_examples(args, f"gen-{kind}", examples, config, opts.counters)
    return result


# clean / stats / verify ------------------------------------------------------------

def cmd_clean(args) -> int:
    kept = []
    dropped = 0
    for ex in read_dataset(args.infile, args.task):
        cleaned = clean_example(ex)
        if cleaned is None:
            dropped += 1
        else:
            kept.append(cleaned)
    write_dataset(args.out, kept)
    _write_run_manifest(args.out, "clean", args, None,
                        {"kept": len(kept), "dropped": dropped})
    return 0


def cmd_stats(args) -> int:
    stats = compute_stats(args.infile)
    json.dump(stats.as_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_verify(args) -> int:
    probes = ProbeConfig(probes=args.probes) if args.probes else None
    with open(args.infile, encoding="utf-8") as fh:
        report = verify_batch(fh, probes, default_task=args.task)
    fh_out = _open_out(args)
    try:
        fh_out.write(report.to_json_lines() + "\n")
    finally:
        if fh_out is not sys.stdout:
            fh_out.close()
    return 0


# parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathgen",
        description="Generate, count, sample, clean and verify symbolic-math "
                    "problem/solution datasets.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="CSV of tree/expression counts and estimates")
    p.add_argument("--n-max", type=int, default=30)
    p.add_argument("--p1", type=int, default=15)
    p.add_argument("--p2", type=int, default=4)
    p.add_argument("--L", type=int, default=11)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("sample", help="sample expressions, one prefix line each")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("binary", "unary-binary", "weighted"))
    p.add_argument("--weights-file")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diff", help="differentiate prefix expressions")
    p.add_argument("--expr")
    p.add_argument("--in", dest="infile")
    p.add_argument("--var", default="x")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("simplify", help="canonicalize prefix expressions")
    p.add_argument("--expr")
    p.add_argument("--in", dest="infile")
    p.add_argument("--report", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simplify)

    for kind, help_text in (
        ("bwd", "backward pairs (differentiate sampled functions)"),
        ("fwd", "forward pairs (external integrator oracle)"),
        ("ibp", "integration-by-parts pairs"),
        ("ode1", "first-order equations with solutions"),
        ("ode2", "second-order equations with solutions"),
    ):
        p = sub.add_parser(f"gen-{kind}", help=help_text)
        p.add_argument("--count", type=int, required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config")
        p.add_argument("--out", required=True)
        p.add_argument("--min-ops", type=int, default=3 if kind in ("bwd", "fwd") else 1)
        p.add_argument("--max-ops", type=int,
                       default=None if kind in ("bwd", "fwd") else 3 if kind == "ibp" else 8)
        p.add_argument("--shards", type=int, default=1)
        p.add_argument("--split", help="fractions like 0.98,0.01,0.01")
        if kind == "fwd":
            p.add_argument("--oracle-cmd")
            p.add_argument("--timeout", type=float, default=10.0)
        if kind == "ibp":
            p.add_argument("--seed-bwd", type=int, default=0)
        p.set_defaults(func=cmd_gen, kind=kind)

    p = sub.add_parser("clean", help="re-clean a dataset file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", default="bwd")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("stats", help="token-length statistics of a dataset file")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("verify", help="verify problem/hypothesis lines")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--task", default="integral",
                   help="default task for lines without a task column")
    p.add_argument("--probes", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OracleUnavailableError, OSError, ValueError, RuntimeError) as exc:
        print(f"mathgen: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
