"""Command-line entry point.

Every subcommand flag can also come from an INI-style config file passed with
``--config``. Keys are flag names without the leading dashes (``bm25-k1`` or
``bm25_k1``). Keys in ``[DEFAULT]`` apply to every subcommand that has that
flag; keys in a section named after a subcommand apply to it alone and must
be valid for it. Command-line flags win over the file.

Exit status: 0 on success, 1 for usage errors, 2 for bad or missing data.
"""

import argparse
import configparser
import contextlib
import hashlib
import json
import logging
import sys
from importlib import metadata

import prfclf
from prfclf.classify import (
    ENSEMBLE,
    KINDS,
    LR,
    SVM,
    PseudoLabelConfig,
    TrainingError,
    build_training_set,
    select_pseudo_labels,
    train,
)
from prfclf.cv import CVConfig, grid_search_cv
from prfclf.evaluate import (
    TAU_CUTOFFS,
    compare_runs,
    mean_ap,
    paired_t_test,
    tau_analysis,
)
from prfclf.index import InvertedIndex, build_index, read_corpus
from prfclf.io import read_qrels, read_run, read_topics, write_run
from prfclf.rerank import ALPHA_GRID, InterpolationParams, prf_rerank_run
from prfclf.retrieval import BM25Params, RM3Params, retrieve
from prfclf.synthetic import SynthSpec, generate_synthetic

log = logging.getLogger("prfclf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _fmt_list(values):
    return ",".join(str(v) for v in values)


def _add_classifier_flags(p):
    p.add_argument("--classifier", choices=KINDS, default=LR)
    p.add_argument("--c", type=float, default=1.0, help="loss weight of both classifiers")


def build_parser():
    parser = _Parser(prog="prfclf",
                     description="Rerank retrieval runs with pseudo-relevance feedback classifiers.")
    parser.add_argument("--config", help="INI-style file mirroring the flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"prfclf {prfclf.__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("index", help="build an index from a JSONL corpus")
    p.add_argument("--corpus", help="JSON lines with 'id' and 'contents'")
    p.add_argument("--index", help="output index file")

    p = sub.add_parser("search", help="BM25 or BM25+RM3 base run")
    p.add_argument("--index")
    p.add_argument("--topics", help="qid<TAB>query lines")
    p.add_argument("--output", help="TREC run file")
    p.add_argument("--bm25-k1", type=float, default=0.9)
    p.add_argument("--bm25-b", type=float, default=0.4)
    p.add_argument("--rm3", action="store_true")
    p.add_argument("--fb-docs", type=int, default=10)
    p.add_argument("--fb-terms", type=int, default=10)
    p.add_argument("--orig-weight", type=float, default=0.5)
    p.add_argument("--hits", type=int, default=1000)

    p = sub.add_parser("rerank-prf", help="rerank a run with per-topic classifiers")
    p.add_argument("--index")
    p.add_argument("--run", help="base run file")
    p.add_argument("--output")
    _add_classifier_flags(p)
    p.add_argument("--r", type=int, default=10, help="pseudo-positives from the top")
    p.add_argument("--n", type=int, default=100, help="pseudo-negatives from the bottom")
    p.add_argument("--alpha", type=float, default=0.5, help="weight on the retrieval score")
    p.add_argument("--model-dump", help="write trained models, one line per topic and kind")

    p = sub.add_parser("cv-tune", help="cross-validate r, n and alpha, then rerank")
    p.add_argument("--index")
    p.add_argument("--run", help="base run file")
    p.add_argument("--qrels")
    p.add_argument("--output")
    _add_classifier_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--r-values", type=_int_list, default=_fmt_list(CVConfig.r_values))
    p.add_argument("--n-values", type=_int_list, default=_fmt_list(CVConfig.n_values))
    p.add_argument("--alphas", type=_float_list, default=_fmt_list(ALPHA_GRID))
    p.add_argument("--choices", help="write per-fold selections as JSON lines")

    p = sub.add_parser("evaluate", help="MAP of a run, or a full comparison against a base run")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--base", help="base run for deltas, t-test and tau")
    p.add_argument("--cutoffs", type=_int_list, default=_fmt_list(TAU_CUTOFFS))
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--format", choices=("table", "jsonl"), default="table")
    p.add_argument("--output", help="report file (default: stdout)")

    p = sub.add_parser("sigtest", help="paired two-tailed t-test between two runs")
    p.add_argument("--run-a")
    p.add_argument("--run-b")
    p.add_argument("--qrels")
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--output")

    p = sub.add_parser("tau", help="Kendall's tau between a base run and a reranked run")
    p.add_argument("--base")
    p.add_argument("--run")
    p.add_argument("--cutoffs", type=_int_list, default=_fmt_list(TAU_CUTOFFS))
    p.add_argument("--output")

    p = sub.add_parser("gen-synthetic", help="write a planted-cluster test collection")
    p.add_argument("--output-dir")
    defaults = SynthSpec()
    for name, value in defaults.__dict__.items():
        p.add_argument(f"--{name.replace('_', '-')}", type=type(value), default=value)
    return parser


REQUIRED = {
    "index": ("corpus", "index"),
    "search": ("index", "topics", "output"),
    "rerank-prf": ("index", "run", "output"),
    "cv-tune": ("index", "run", "qrels", "output"),
    "evaluate": ("run", "qrels"),
    "sigtest": ("run_a", "run_b", "qrels"),
    "tau": ("base", "run"),
    "gen-synthetic": ("output_dir",),
}


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def apply_config(parser, command, path):
    """Install values from the config file as defaults of ``command``'s parser."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as f:
            cp.read_file(f)
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from None
    except configparser.Error as e:
        raise UsageError(f"bad config file {path}: {e}") from None
    for section in cp.sections():
        if section not in REQUIRED:
            raise UsageError(f"{path}: unknown section [{section}]")
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    own = set(cp[command]) - set(cp.defaults()) if cp.has_section(command) else set()
    items = cp[command] if cp.has_section(command) else cp.defaults()
    values = {}
    for key, raw in items.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            if key in own:
                raise UsageError(f"{path}: [{command}] has no option {key!r}")
            continue
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            try:
                values[dest] = items.getboolean(key)
            except ValueError:
                raise UsageError(f"{path}: {key} must be a boolean") from None
        elif action.type is not None:
            try:
                values[dest] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError):
                raise UsageError(f"{path}: bad value for {key}: {raw!r}") from None
        else:
            values[dest] = raw
    sp.set_defaults(**values)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required; see --help")
    if args.config:
        apply_config(parser, args.command, args.config)
        args = parser.parse_args(argv)
    missing = [f"--{d.replace('_', '-')}" for d in REQUIRED[args.command]
               if getattr(args, d) is None]
    if missing:
        raise UsageError(f"{args.command}: missing {', '.join(missing)}")
    return args


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions():
    out = {"prfclf": prfclf.__version__}
    for pkg in ("numpy", "scipy", "nltk"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


# file locations stay out of manifests so a pipeline rerun elsewhere matches byte for byte
PATH_ARGS = {"corpus", "index", "topics", "output", "run", "qrels", "base", "run_a", "run_b",
             "model_dump", "choices", "output_dir"}


def manifest(args, inputs=()):
    """Parameters, input digests and library versions; no timestamps, so reruns match."""
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("command", "config", "verbose") and k not in PATH_ARGS}
    return {
        "command": args.command,
        "params": {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()},
        "inputs": {k: _sha256(getattr(args, k)) for k in inputs if getattr(args, k)},
        "versions": _versions(),
    }


def _write_manifest(path, man):
    with open(path + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(man, f, sort_keys=True, indent=2)
        f.write("\n")


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _check_positive(name, value):
    if value < 1:
        raise UsageError(f"--{name} must be >= 1")


@contextlib.contextmanager
def _flag_values():
    # parameter objects validate themselves; a rejection there is a usage error
    try:
        yield
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_index(args):
    idx = build_index(read_corpus(args.corpus))
    idx.save(args.index)
    _write_manifest(args.index, manifest(args, ("corpus",)))
    log.info("indexed %d documents, %d terms", idx.stats.n_docs, len(idx.df))


def search_tag(args):
    tag = f"prfclf-{prfclf.__version__}:bm25:k1={args.bm25_k1:g}:b={args.bm25_b:g}"
    if args.rm3:
        tag += (f"+rm3:fb_docs={args.fb_docs}:fb_terms={args.fb_terms}"
                f":orig_weight={args.orig_weight:g}")
    return tag


def cmd_search(args):
    _check_positive("hits", args.hits)
    with _flag_values():
        bm25 = BM25Params(args.bm25_k1, args.bm25_b)
        rm3 = RM3Params(args.fb_docs, args.fb_terms, args.orig_weight) if args.rm3 else None
    idx = InvertedIndex.load(args.index)
    topics = read_topics(args.topics)
    run = retrieve(idx, topics, bm25, rm3, k=args.hits, tag=search_tag(args))
    write_run(run, args.output)
    _write_manifest(args.output, manifest(args, ("index", "topics")))


def _dump_models(idx, run, cfg, kind, c, path):
    kinds = (LR, SVM) if kind == ENSEMBLE else (kind,)
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(run):
            try:
                pos, neg = select_pseudo_labels(run[qid], cfg)
                ts = build_training_set(idx, pos, neg)
                for k in kinds:
                    f.write(train(ts, k, c).dump(qid) + "\n")
            except TrainingError as e:
                log.warning("no model for topic %s: %s", qid, e)


def cmd_rerank(args):
    with _flag_values():
        cfg = PseudoLabelConfig(args.r, args.n)
        params = InterpolationParams(args.alpha)
    idx = InvertedIndex.load(args.index)
    base = read_run(args.run)
    final = prf_rerank_run(idx, base, cfg, args.classifier, params, args.c)
    write_run(final, args.output)
    _write_manifest(args.output, manifest(args, ("index", "run")))
    if args.model_dump:
        _dump_models(idx, base, cfg, args.classifier, args.c, args.model_dump)


def cmd_cv(args):
    with _flag_values():
        cfg = CVConfig(args.folds, args.r_values, args.n_values, args.alphas)
        for r, n, alpha in cfg.configurations():
            PseudoLabelConfig(r, n)
            InterpolationParams(alpha)
    idx = InvertedIndex.load(args.index)
    base = read_run(args.run)
    qrels = read_qrels(args.qrels)
    res = grid_search_cv(idx, base, qrels, cfg, args.classifier, args.c)
    write_run(res.run, args.output)
    _write_manifest(args.output, manifest(args, ("index", "run", "qrels")))
    lines = [json.dumps({"fold": c.fold_id, "r": c.r, "n": c.n, "alpha": c.alpha,
                         "train_map": c.train_map, "test_qids": list(c.test_qids)},
                        sort_keys=True) + "\n" for c in res.choices]
    if args.choices:
        _emit("".join(lines), args.choices)
    for c in res.choices:
        log.info("fold %d: r=%d n=%d alpha=%.1f train MAP %.4f",
                 c.fold_id, c.r, c.n, c.alpha, c.train_map)
    print(f"cross-validated MAP {res.map:.4f}")


def cmd_evaluate(args):
    _check_positive("depth", args.depth)
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    header = manifest(args, ("run", "qrels", "base"))
    if args.base:
        rep = compare_runs(read_run(args.base), run, qrels, args.cutoffs, args.threshold,
                           args.depth, header=_flatten(header))
        text = rep.to_jsonl() if args.format == "jsonl" else rep.to_table()
    else:
        m, aps = mean_ap(run, qrels, args.depth)
        if args.format == "jsonl":
            recs = [{"record": "header", **_flatten(header)}]
            recs += [{"record": "ap", "qid": q, "ap": v} for q, v in aps.items()]
            recs.append({"record": "summary", "map": m, "topics": len(aps)})
            text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in recs)
        else:
            lines = [f"# {k}: {v}" for k, v in sorted(_flatten(header).items())]
            lines += [f"{q:<12}{v:>10.4f}" for q, v in aps.items()]
            lines.append(f"{'MAP':<12}{m:>10.4f}")
            text = "\n".join(lines) + "\n"
    _emit(text, args.output)


def _flatten(man, prefix=""):
    out = {}
    for k, v in man.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


def cmd_sigtest(args):
    qrels = read_qrels(args.qrels)
    _, a = mean_ap(read_run(args.run_a), qrels, args.depth)
    _, b = mean_ap(read_run(args.run_b), qrels, args.depth)
    t, p = paired_t_test(a, b)
    common = len(set(a) & set(b))
    _emit(f"topics={common} t={t:.6f} p={p:.6g}\n", args.output)


def cmd_tau(args):
    out = tau_analysis(read_run(args.base), read_run(args.run), args.cutoffs)
    header = {"record": "header", **_flatten(manifest(args, ("base", "run")))}
    lines = [json.dumps(header, sort_keys=True) + "\n"]
    for k in sorted(out):
        for qid, tau in out[k].items():
            lines.append(json.dumps({"record": "tau", "k": k, "qid": qid, "tau": tau},
                                    sort_keys=True) + "\n")
    _emit("".join(lines), args.output)


def cmd_gen(args):
    with _flag_values():
        spec = SynthSpec(**{k: getattr(args, k) for k in SynthSpec().__dict__})
    coll = generate_synthetic(spec)
    coll.write(args.output_dir)
    log.info("wrote %d documents and %d topics to %s",
             len(coll.docs), len(coll.topics), args.output_dir)


COMMANDS = {
    "index": cmd_index,
    "search": cmd_search,
    "rerank-prf": cmd_rerank,
    "cv-tune": cmd_cv,
    "evaluate": cmd_evaluate,
    "sigtest": cmd_sigtest,
    "tau": cmd_tau,
    "gen-synthetic": cmd_gen,
}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
