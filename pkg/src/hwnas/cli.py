"""Command-line pipeline: fixtures -> gen-space -> fit-predictor -> search -> report.

Every command is a single synchronous invocation; all randomness flows from
--seed flags, and every written artifact carries a run manifest (embedded in
JSON outputs, sidecar ``<file>.manifest.json`` for CSV).  ``--config FILE``
loads a JSON object of flag defaults; explicit flags override file values.

Evaluation parallelism during search is capped by the HURRICANE_THREADS
environment variable (unset: serial, 0: one thread per CPU).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import backbone as bb
from . import evaluators, latency, manifest, ops, profiles, search, spacegen
from .errors import HwnasError, MissingLatencyError, UsageError

_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


def resolve_threads() -> int:
    raw = os.environ.get("HURRICANE_THREADS")
    if raw is None or raw == "":
        return 1
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of flag defaults")
    parser.add_argument("--json-errors", action="store_true",
                        help="emit runtime errors as JSON on stderr")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hwnas",
        description="hardware-aware architecture search over latency tables")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ops = sub.add_parser("ops", help="operator pool utilities")
    ops_sub = p_ops.add_subparsers(dest="ops_command", required=True)
    p_dump = ops_sub.add_parser("dump", help="pool with costs at one layer context")
    p_dump.add_argument("--layer", type=int, default=1,
                        help="1-based layer of the default backbone")
    p_dump.add_argument("--h-in", type=int)
    p_dump.add_argument("--w-in", type=int)
    p_dump.add_argument("--c-in", type=int)
    p_dump.add_argument("--c-out", type=int)
    p_dump.add_argument("--stride", type=int, default=1)
    p_dump.add_argument("--bytes-per-element", type=int, default=4)
    p_dump.add_argument("--out", help="write JSON here instead of stdout")
    _add_common(p_dump)
    _SUBPARSERS["ops dump"] = p_dump

    p_fix = sub.add_parser("fixtures", help="synthetic fixture generation")
    fix_sub = p_fix.add_subparsers(dest="fixtures_command", required=True)
    p_prof = fix_sub.add_parser("gen-profile", help="synthetic latency table CSV")
    p_prof.add_argument("--kind", choices=[k.value for k in profiles.HardwareKind])
    p_prof.add_argument("--seed", type=int, default=0)
    p_prof.add_argument("--out")
    _add_common(p_prof)
    _SUBPARSERS["fixtures gen-profile"] = p_prof

    p_gen = sub.add_parser("gen-space", help="hardware-specialized search space")
    p_gen.add_argument("--profile", help="latency table CSV")
    p_gen.add_argument("--alpha", type=float, default=1.0)
    p_gen.add_argument("--p", type=int, default=4)
    p_gen.add_argument("--explore-last", type=int, default=4)
    p_gen.add_argument("--kappa", type=float, default=2.0,
                       help="exploring-operator latency cap ratio")
    p_gen.add_argument("--out")
    _add_common(p_gen)
    _SUBPARSERS["gen-space"] = p_gen

    p_fit = sub.add_parser("fit-predictor", help="fit the latency regressor")
    p_fit.add_argument("--space")
    p_fit.add_argument("--profile", help="latency table CSV for additive targets")
    p_fit.add_argument("--dataset", help="CSV `arch_file,latency_ms` of measured targets")
    p_fit.add_argument("--n-train", type=int, default=500)
    p_fit.add_argument("--max-iters", type=int, default=300)
    p_fit.add_argument("--tol", type=float, default=1e-9)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out")
    _add_common(p_fit)
    _SUBPARSERS["fit-predictor"] = p_fit

    p_search = sub.add_parser("search", help="constrained evolutionary search")
    p_search.add_argument("--space")
    p_search.add_argument("--constraint-ms", type=float)
    p_search.add_argument("--latency", default="additive",
                          help="additive | predictor:MODEL.json")
    p_search.add_argument("--profile",
                          help="latency table CSV (required for additive; "
                               "optional audit for predictor)")
    p_search.add_argument("--evaluator", default="synth:seed=0",
                          help="synth:seed=N[,rho=R,epsilon=E] | file:PATH")
    p_search.add_argument("--two-stage", action="store_true")
    p_search.add_argument("--t", type=int, default=8)
    p_search.add_argument("--split", action="store_true",
                          help="divide one budget across the two stages")
    p_search.add_argument("--budget", type=int, default=1000,
                          help="total evaluations per stage (population x iterations)")
    p_search.add_argument("--population", type=int, default=50)
    p_search.add_argument("--topk", type=int, default=10)
    p_search.add_argument("--mutation-prob", type=float, default=0.1)
    p_search.add_argument("--seed", type=int, default=0)
    p_search.add_argument("--report")
    _add_common(p_search)
    _SUBPARSERS["search"] = p_search

    p_rep = sub.add_parser("report", help="render a search report")
    p_rep.add_argument("report_json")
    p_rep.add_argument("--format", choices=("text", "markdown", "csv"),
                       default="text")
    p_rep.add_argument("--out")
    _add_common(p_rep)
    _SUBPARSERS["report"] = p_rep

    p_ver = sub.add_parser("verify", help="built-in arithmetic checks")
    _add_common(p_ver)
    _SUBPARSERS["verify"] = p_ver

    return parser


def _command_key(args) -> str:
    if args.command == "ops":
        return f"ops {args.ops_command}"
    if args.command == "fixtures":
        return f"fixtures {args.fixtures_command}"
    return args.command


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    sp = _SUBPARSERS[_command_key(args)]
    for key, value in values.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and getattr(args, dest) == sp.get_default(dest):
            setattr(args, dest, value)


def _require(args, *dests) -> None:
    missing = [d.replace("_", "-") for d in dests if getattr(args, d) is None]
    if missing:
        raise UsageError("missing required flags: "
                         + ", ".join(f"--{m}" for m in missing))


def _config_snapshot(args) -> dict:
    skip = {"command", "ops_command", "fixtures_command", "config", "json_errors"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_space(path) -> bb.SearchSpace:
    return bb.space_from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _parse_evaluator(spec: str) -> evaluators.Evaluator:
    kind, _, rest = spec.partition(":")
    if kind == "synth":
        kwargs = {}
        if rest:
            for item in rest.split(","):
                key, _, val = item.partition("=")
                kwargs[key.strip()] = float(val) if "." in val else int(val)
        return evaluators.SynthOracle(**kwargs)
    if kind == "file":
        return evaluators.FileOracle(rest)
    raise HwnasError(f"unknown evaluator spec {spec!r}")


def _cmd_ops_dump(args) -> int:
    explicit = [args.h_in, args.w_in, args.c_in, args.c_out]
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise HwnasError("--h-in/--w-in/--c-in/--c-out must be given together")
        ctx = ops.LayerContext(args.h_in, args.w_in, args.c_in, args.c_out,
                               args.stride)
    else:
        ctx = bb.default_backbone().context(args.layer)
    rows = ops.dump_pool(ctx, bytes_per_element=args.bytes_per_element)
    rendered = json.dumps(rows, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        manifest.write_sidecar_manifest(
            args.out, manifest.build_manifest("ops dump", _config_snapshot(args), []))
    else:
        sys.stdout.write(rendered)
    return 0


def _cmd_gen_profile(args) -> int:
    _require(args, "kind", "out")
    kind = profiles.HardwareKind(args.kind)
    table = profiles.synth_profile(kind, bb.default_backbone(),
                                   ops.enumerate_pool(), args.seed)
    profiles.save_latency_table(table, args.out)
    manifest.write_sidecar_manifest(
        args.out,
        manifest.build_manifest("fixtures gen-profile", _config_snapshot(args),
                                [], seed=args.seed))
    return 0


def _cmd_gen_space(args) -> int:
    _require(args, "profile", "out")
    table = profiles.load_latency_table(args.profile)
    cfg = spacegen.SpaceGenConfig(alpha=args.alpha, p=args.p,
                                  explore_last=args.explore_last,
                                  explore_latency_cap_ratio=args.kappa)
    space = spacegen.generate_space(bb.default_backbone(), ops.enumerate_pool(),
                                    table, cfg)
    man = manifest.build_manifest("gen-space", _config_snapshot(args),
                                  [args.profile])
    manifest.write_json_artifact(args.out, bb.space_to_obj(space), man)
    return 0


def _load_dataset(path, space) -> list[tuple[bb.Architecture, float]]:
    base = Path(path).parent
    dataset = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("arch_file"):
            continue
        arch_file, _, ms = line.partition(",")
        arch_path = Path(arch_file.strip())
        if not arch_path.is_absolute():
            arch_path = base / arch_path
        obj = json.loads(arch_path.read_text(encoding="utf-8"))
        dataset.append((bb.arch_from_obj(space, obj), float(ms)))
    return dataset


def _cmd_fit_predictor(args) -> int:
    import random

    _require(args, "space", "out")
    space = _load_space(args.space)
    inputs = [args.space]
    if args.dataset:
        inputs.append(args.dataset)
        pairs = _load_dataset(args.dataset, space)
        archs = [a for a, _ in pairs]
        targets = [t for _, t in pairs]
    elif args.profile:
        inputs.append(args.profile)
        table = profiles.load_latency_table(args.profile)
        rng = random.Random(args.seed)
        archs = [search.sample_uniform(space, rng) for _ in range(args.n_train)]
        targets = [latency.additive_latency(a, space, table) for a in archs]
    else:
        raise HwnasError("fit-predictor needs --profile or --dataset")
    model = latency.fit_predictor(space, archs, targets,
                                  max_iters=args.max_iters, tol=args.tol)
    man = manifest.build_manifest("fit-predictor", _config_snapshot(args),
                                  inputs, seed=args.seed)
    manifest.write_json_artifact(args.out, latency.model_to_obj(model), man)
    return 0


def _cmd_search(args) -> int:
    _require(args, "space", "constraint_ms", "report")
    space = _load_space(args.space)
    inputs = [args.space]
    table = None
    if args.profile:
        inputs.append(args.profile)
        table = profiles.load_latency_table(args.profile)

    audit_fn = None
    if args.latency == "additive":
        if table is None:
            raise HwnasError("--latency additive requires --profile")
        latency_fn = latency.make_additive_fn(table)
        label = "additive"
    elif args.latency.startswith("predictor:"):
        model_path = args.latency.partition(":")[2]
        inputs.append(model_path)
        model = latency.model_from_obj(
            json.loads(Path(model_path).read_text(encoding="utf-8")))
        latency_fn = latency.make_predictor_fn(model, space)
        label = "predictor"
        if table is not None:
            audit_fn = latency.make_additive_fn(table)
    else:
        raise HwnasError(f"unknown latency spec {args.latency!r}")

    if args.budget < args.population:
        raise HwnasError("--budget must be at least --population")
    cfg = search.EvolutionConfig(
        population=args.population,
        iterations=max(1, args.budget // args.population),
        parents_topk=args.topk,
        n_crossover=args.population // 2,
        n_mutation=args.population - args.population // 2,
        mutation_prob=args.mutation_prob,
        seed=args.seed,
    )
    request = search.SearchRequest(
        space=space,
        tau_c=args.constraint_ms,
        latency_fn=latency_fn,
        evaluator=_parse_evaluator(args.evaluator),
        latency_label=label,
        two_stage=args.two_stage,
        t=args.t,
        split=args.split,
        audit_fn=audit_fn,
    )
    report = search.run_search(request, cfg, threads=resolve_threads())
    man = manifest.build_manifest("search", _config_snapshot(args), inputs,
                                  seed=args.seed)
    manifest.write_json_artifact(args.report, search.report_to_obj(report), man)
    return 0


def render_text(obj: dict) -> str:
    best = obj["best"]
    lines = [
        "search report",
        f"constraint_ms: {obj['constraint_ms']} (latency_fn: {obj['latency_fn']})",
        f"best accuracy: {best['accuracy']:.6f}",
        f"best latency_ms: {best['latency_ms']:.4f}",
        f"evaluations used: {obj['evaluations_used']}",
    ]
    if best.get("latency_ms_additive_audit") is not None:
        lines.append(f"additive audit latency_ms: {best['latency_ms_additive_audit']:.4f}")
    for st in obj["stages"]:
        span = st.get("active_layers")
        extra = " (degenerate single-stage)" if st.get("degenerate_single_stage") else ""
        lines.append(
            f"stage {st['stage']}: layers {span[0]}-{span[1]}, "
            f"space_size={st['space_size']}, evaluations={st['evaluations_used']}{extra}")
    lines.append("best architecture:")
    for i, op_id in enumerate(best["choices"], start=1):
        lines.append(f"  layer {i:>2}: {op_id}")
    lines.append("history (stage, iteration, best, mean):")
    for row in obj["history"]:
        lines.append(f"  {row['stage']} {row['iteration']:>3} "
                     f"{row['best_accuracy']:.6f} {row['mean_accuracy']:.6f}")
    return "\n".join(lines) + "\n"


def render_markdown(obj: dict) -> str:
    best = obj["best"]
    lines = [
        "# Search report",
        "",
        f"- constraint_ms: {obj['constraint_ms']} (latency_fn: {obj['latency_fn']})",
        f"- best accuracy: {best['accuracy']:.6f}",
        f"- best latency_ms: {best['latency_ms']:.4f}",
        f"- evaluations used: {obj['evaluations_used']}",
        "",
        "| layer | operator |",
        "| --- | --- |",
    ]
    for i, op_id in enumerate(best["choices"], start=1):
        lines.append(f"| {i} | {op_id} |")
    lines += ["", "| stage | iteration | best_accuracy | mean_accuracy |",
              "| --- | --- | --- | --- |"]
    for row in obj["history"]:
        lines.append(f"| {row['stage']} | {row['iteration']} | "
                     f"{row['best_accuracy']:.6f} | {row['mean_accuracy']:.6f} |")
    return "\n".join(lines) + "\n"


def render_csv(obj: dict) -> str:
    lines = ["stage,iteration,best_accuracy,mean_accuracy,best_latency_ms,constraint_ms"]
    for row in obj["history"]:
        lines.append(
            f"{row['stage']},{row['iteration']},{row['best_accuracy']!r},"
            f"{row['mean_accuracy']!r},{row['best_latency']!r},{obj['constraint_ms']!r}")
    return "\n".join(lines) + "\n"


_RENDERERS = {"text": render_text, "markdown": render_markdown, "csv": render_csv}


def _cmd_report(args) -> int:
    obj = json.loads(Path(args.report_json).read_text(encoding="utf-8"))
    rendered = _RENDERERS[args.format](obj)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 0


def _cmd_verify(args) -> int:
    checks = []
    pool = ops.enumerate_pool()
    checks.append(("pool=32", len(pool) == 32 and len({o.id for o in pool}) == 32))

    backbone = bb.default_backbone()
    table = profiles.synth_profile(profiles.HardwareKind.DSP, backbone, pool, seed=0)
    space = spacegen.generate_space(backbone, pool, table)
    size = bb.space_size(space)
    checks.append((f"size={size}", size == 2_684_354_560_000))

    factor = bb.reduction_factor(space, 8)
    checks.append((f"reduction(t=8)≈{round(float(factor))}",
                   65_000 <= factor <= 66_000))

    ok = True
    for label, passed in checks:
        print(f"{label} {'PASS' if passed else 'FAIL'}")
        ok = ok and passed
    return 0 if ok else 1


_HANDLERS = {
    "ops dump": _cmd_ops_dump,
    "fixtures gen-profile": _cmd_gen_profile,
    "gen-space": _cmd_gen_space,
    "fit-predictor": _cmd_fit_predictor,
    "search": _cmd_search,
    "report": _cmd_report,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return _HANDLERS[_command_key(args)](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except (HwnasError, OSError, json.JSONDecodeError) as exc:
        if getattr(args, "json_errors", False):
            payload = {"error": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, MissingLatencyError):
                payload["layer"] = exc.layer
                payload["operator"] = exc.operator
            sys.stderr.write(json.dumps(payload) + "\n")
        else:
            sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
