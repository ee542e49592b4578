"""Command-line driver: synth -> ingest -> infer -> check -> report.

Every stage reads and writes plain files under ``--out``::

    traces/manifest.json, traces/cut_<d1>_<d2>.json           (ingest)
    models/manifest.json, models/cut_<tag>/K<k>/...            (infer)
    results/cut_<tag>_K<k>.csv, results/table_K<k>.csv, ...    (check)
    report/theta_cut_<tag>_K<k>.csv, report/*.dot, index.json  (report)

Seeds: EM restart r uses ``seed + r`` for every (cut, K); synth draws theta
with ``seed`` and sessions with ``seed + 1``; separated ground-truth
patterns use ``seed + 2``.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from . import __version__
from .dtmc import pattern_dtmc
from .em import AdmixtureModel, EmConfig, infer
from .errors import InputError, NumericError, TracelensError
from .ingest import (TraceSet, apply_time_cut, load_vocabulary, parse_cuts,
                     parse_log, serialize_log)
from .properties import (DEFAULT_N, INTERPRETATION, PropertyLine, SweepSpec, TemplateInstance,
                         parse_property_lines, run_sweep, standard_suite)
from .reporting import (DEFAULT_BUCKETS, export_prism, pattern_graph, results_table, sweep_csv,
                        theta_curves_csv, to_dot)
from .synth import apptracker_patterns, ground_truth, separated_patterns, synth_records

DEFAULT_CUTS = "0:1,1:7,7:30,0:30,30:60,60:90"
HEADLINE_LABELS = ("TopApps", "Stats", "PeriodSelector", "Last7Days", "UseStop")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def _write_json(path: Path, doc) -> Path:
    return _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{path}: not found (run the previous stage first)") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad integer list {text!r}") from None
    if not values or min(values) < 1:
        raise InputError("K values must be positive integers")
    return values


def _selected_cuts(args, available: list[str]) -> list[str]:
    if not args.cuts:
        return available
    wanted = [c.tag for c in parse_cuts(args.cuts)]
    missing = [t for t in wanted if t not in available]
    if missing:
        raise InputError(f"cuts not available: {', '.join(missing)}")
    return wanted


# -- synth ----------------------------------------------------------------

def cmd_synth(args) -> int:
    vocab = load_vocabulary(args.vocab)
    out = Path(args.out)
    K = _int_list(args.K)[0] if args.K else 2
    if args.truth == "apptracker":
        if K != 2 or vocab.size != 15:
            raise InputError("the apptracker ground truth has K=2 over the 15 AppTracker views")
        phis = apptracker_patterns(vocab)
    else:
        phis = separated_patterns(vocab.size, K, seed=args.seed + 2)
    truth = ground_truth(phis, args.users, vocab, seed=args.seed, alpha=args.alpha)
    records = synth_records(truth, seed=args.seed + 1, mean_sessions=args.sessions, days=args.days)
    log_path = _write(out / "synth_log.json", serialize_log(records, vocab))
    _write(out / "ground_truth.model", truth.to_text())
    print(f"wrote {len(records)} users to {log_path}")
    return EXIT_OK


# -- ingest ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    if not args.input:
        raise InputError("ingest needs --input LOG")
    vocab = load_vocabulary(args.vocab)
    path = Path(args.input)
    try:
        document = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        records = parse_log(document, vocab)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    start = vocab.index(args.start_symbol) if args.start_symbol else vocab.start_state

    out = Path(args.out) / "traces"
    entries = []
    for cut in parse_cuts(args.cuts or DEFAULT_CUTS):
        ts = apply_time_cut(records, cut, vocab, start)
        lengths = [len(seq) - 1 for _, seq in ts.traces]
        entry = {"cut": str(cut), "tag": cut.tag, "users": len(ts), "file": None,
                 "mean_transitions": statistics.fmean(lengths) if lengths else 0.0,
                 "median_transitions": statistics.median(lengths) if lengths else 0.0}
        if len(ts):
            name = f"cut_{cut.tag}.json"
            _write(out / name, ts.to_json())
            entry["file"] = name
        entries.append(entry)
    sessions = [len(r.sessions) for r in records]
    manifest = {"input": str(path), "users": len(records),
                "mean_sessions": statistics.fmean(sessions) if sessions else 0.0,
                "median_sessions": statistics.median(sessions) if sessions else 0.0,
                "start_symbol": vocab.name(start), "cuts": entries}
    _write_json(out / "manifest.json", manifest)
    print(f"ingested {len(records)} users into {len(entries)} cuts")
    return EXIT_OK


# -- infer ----------------------------------------------------------------

def _trace_bundle(args) -> tuple[Path, dict]:
    base = Path(args.input) if args.input else Path(args.out) / "traces"
    return base, _read_json(base / "manifest.json")


def cmd_infer(args) -> int:
    base, manifest = _trace_bundle(args)
    available = [c["tag"] for c in manifest["cuts"]]
    by_tag = {c["tag"]: c for c in manifest["cuts"]}
    Ks = _int_list(args.K or "2")
    out = Path(args.out) / "models"
    done = []
    for tag in _selected_cuts(args, available):
        entry = by_tag[tag]
        if entry["file"] is None:
            print(f"cut {entry['cut']}: no users, skipped")
            continue
        traces = TraceSet.from_json((base / entry["file"]).read_text(encoding="utf-8"))
        for K in Ks:
            config = EmConfig(K=K, max_iterations=args.max_iters, max_restarts=args.max_restarts,
                              convergence_tol=args.tol, rng_seed=args.seed,
                              stop_on_plateau=args.plateau)
            result = infer(traces, config)
            mdir = out / f"cut_{tag}" / f"K{K}"
            _write(mdir / "model.txt", result.model.to_text())
            log = ["restart,iteration,loglik"]
            for r, hist in enumerate(result.histories):
                log += [f"{r},{i},{ll!r}" for i, ll in enumerate(hist)]
            _write(mdir / "loglik.csv", "\n".join(log) + "\n")
            _write_json(mdir / "summary.json", {
                "cut": entry["cut"], "K": K, "users": len(traces),
                "best_restart": result.best_restart, "restarts_used": result.restarts_used,
                "final_loglik": result.history[-1], "iterations": len(result.history) - 1})
            for k in range(K):
                dtmc = pattern_dtmc(result.model.phis[k], traces.vocabulary, traces.start_symbol)
                _write(mdir / f"AP{k + 1}.pm", export_prism(dtmc, f"AP{k + 1}"))
            done.append({"cut": entry["cut"], "tag": tag, "K": K, "dir": f"cut_{tag}/K{K}"})
            print(f"cut {entry['cut']} K={K}: loglik {result.history[-1]:.6f} "
                  f"(restart {result.best_restart} of {result.restarts_used})")
    _write_json(out / "manifest.json", {"models": done})
    return EXIT_OK


# -- check ----------------------------------------------------------------

def _models(args) -> tuple[Path, list[dict]]:
    base = Path(args.input) if args.input else Path(args.out) / "models"
    entries = _read_json(base / "manifest.json")["models"]
    tags = list(dict.fromkeys(e["tag"] for e in entries))
    keep = set(_selected_cuts(args, tags))
    Ks = set(_int_list(args.K)) if args.K else None
    entries = [e for e in entries if e["tag"] in keep and (Ks is None or e["K"] in Ks)]
    if args.cuts:
        order = {t: i for i, t in enumerate(_selected_cuts(args, tags))}
        entries.sort(key=lambda e: (order[e["tag"]], e["K"]))
    return base, entries


def _load_model(base: Path, entry: dict) -> AdmixtureModel:
    return AdmixtureModel.from_text((base / entry["dir"] / "model.txt").read_text(encoding="utf-8"))


def _property_lines(args) -> list[PropertyLine]:
    lines: list[PropertyLine] = []
    if args.props:
        path = Path(args.props)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None
        try:
            lines += parse_property_lines(text)
        except InputError as exc:
            raise InputError(f"{path}: {exc}") from None
    if args.template is not None:
        label = args.label1 or args.label
        if label is None:
            raise InputError("--template needs --label (or --label1)")
        inst = TemplateInstance(args.template, label, args.label2,
                                args.N if args.template in (1, 2, 4) else None)
        sweep = SweepSpec.parse_range(inst, args.N_range) if args.N_range else None
        lines.append(PropertyLine(0, inst.query(), inst, sweep))
    if not lines:
        lines = [PropertyLine(0, inst.query(), inst) for inst in standard_suite(HEADLINE_LABELS, args.N)]
    return lines


def cmd_check(args) -> int:
    lines = _property_lines(args)
    base, entries = _models(args)
    out = Path(args.out) / "results"
    plain = [pl.check_item() for pl in lines if pl.sweep is None]
    sweeps = [pl for pl in lines if pl.sweep is not None]
    per_k: dict[int, dict[str, list]] = {}
    written = 0
    for entry in entries:
        model = _load_model(base, entry)
        vocab = model.vocabulary
        dtmcs = [pattern_dtmc(model.phis[k], vocab, model.start_symbol) for k in range(model.K)]
        per_k.setdefault(entry["K"], {})[entry["cut"]] = dtmcs
        if plain:
            table = results_table({entry["cut"]: dtmcs}, plain)
            _write(out / f"cut_{entry['tag']}_K{entry['K']}.csv", table.to_csv())
            written += 1
        for pl in sweeps:
            series = {f"AP{k + 1}": run_sweep(pl.sweep, d) for k, d in enumerate(dtmcs)}
            name = f"sweep_L{pl.line}_T{pl.instance.template_id}_cut_{entry['tag']}_K{entry['K']}.csv"
            _write(out / name, sweep_csv(series))
            written += 1
    if plain:
        for K, models in per_k.items():
            table = results_table(models, plain)
            _write(out / f"table_K{K}.csv", table.to_wide_csv())
            _write(out / f"long_K{K}.csv", table.to_csv())
    notes = {str(t): text for t, text in INTERPRETATION.items()}
    _write_json(out / "annotations.json", {"interpretation": notes})
    print(f"wrote {written} result files")
    return EXIT_OK


# -- report ---------------------------------------------------------------

def cmd_report(args) -> int:
    base, entries = _models(args)
    out = Path(args.out) / "report"
    thresholds = ([float(x) for x in args.thresholds.split(",")] if args.thresholds
                  else list(DEFAULT_BUCKETS))
    for entry in entries:
        model = _load_model(base, entry)
        stem = f"cut_{entry['tag']}_K{entry['K']}"
        _write(out / f"theta_{stem}.csv", theta_curves_csv(model))
        for k in range(model.K):
            dtmc = pattern_dtmc(model.phis[k], model.vocabulary, model.start_symbol)
            edges = pattern_graph(dtmc, thresholds)
            dot = to_dot(edges, model.vocabulary.names, f"AP{k + 1} {entry['cut']} K={entry['K']}")
            _write(out / f"graph_{stem}_AP{k + 1}.dot", dot)
    root = Path(args.out)
    artifacts = sorted(str(p.relative_to(root)) for p in root.rglob("*")
                       if p.is_file() and p.name != "index.json")
    _write_json(out / "index.json", {"artifacts": artifacts, "thresholds": thresholds})
    print(f"indexed {len(artifacts)} artifacts")
    return EXIT_OK


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="working/output directory")
    common.add_argument("--vocab", help="vocabulary file (id<TAB>name); default: AppTracker views")
    common.add_argument("--input", help="input log (ingest) or stage directory (later stages)")
    common.add_argument("--cuts", help=f"comma-separated d1:d2 day cuts (default {DEFAULT_CUTS})")
    common.add_argument("--K", help="comma-separated pattern counts")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="tracelens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic usage log")
    p.add_argument("--truth", choices=("apptracker", "separated"), default="apptracker")
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--sessions", type=float, default=10.0, help="mean sessions per user")
    p.add_argument("--days", type=int, default=90)
    p.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration for theta rows")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="parse a log into per-cut trace sets")
    p.add_argument("--start-symbol", help="view prepended to traces (default: vocabulary start)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("infer", parents=[common], help="fit admixture models by EM")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--max-restarts", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--plateau", action="store_true",
                   help="stop restarting once the best log-likelihood is unchanged for 25 restarts")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("check", parents=[common], help="model-check properties on every pattern")
    p.add_argument("--props", help="property file: raw queries and prop1..prop5 shorthands")
    p.add_argument("--template", type=int, choices=range(1, 6))
    p.add_argument("--label")
    p.add_argument("--label1")
    p.add_argument("--label2")
    p.add_argument("--N", type=int, default=DEFAULT_N)
    p.add_argument("--N-range", dest="N_range", help="sweep as start:stop:step, e.g. 10:150:10")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", parents=[common], help="theta curves, pattern graphs, index")
    p.add_argument("--thresholds", help="comma-separated edge buckets (default 0.05,0.25,0.5,0.75)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TracelensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
