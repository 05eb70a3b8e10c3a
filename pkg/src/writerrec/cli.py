"""Command-line front end: ``writerrec synth|train-catalogue|eval|stats``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

from . import atdr, protocol
from .dtw import DtwConfig
from .errors import AllZeroDifferences, DataError, InvalidParams, LengthMismatch, TooFewSamples, ZeroVariance
from .ink import PHASES, Phase, load_dataset, save_dataset
from .stats import lilliefors_test, wilcoxon_signed_rank
from .synth import SynthParams, synth_dataset

log = logging.getLogger("writerrec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _phases(text: str) -> tuple:
    try:
        return tuple(Phase(v.strip().upper()) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown phase in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="writerrec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="key=value file; explicit flags take precedence")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output path (default: stdout for reports)")

    p = sub.add_parser("synth", help="generate a synthetic corpus on disk")
    common(p)
    p.add_argument("--root", help="dataset directory to create")
    p.add_argument("--writers", type=int, default=20)
    p.add_argument("--fatigue", type=_floats, default=(0.0, 0.2, 0.8, 0.5),
                   help="fatigue level per phase: BASE,MEIF,SEIF,POST_SEIF")
    p.add_argument("--jitter", type=float, default=SynthParams.jitter_scale,
                   help="per-sample coordinate jitter at fatigue 1, fraction of height")
    p.add_argument("--intra-noise", type=float, default=SynthParams.intra_noise)

    p = sub.add_parser("train-catalogue", help="train SOM stroke catalogues from enrolment words")
    common(p)
    p.add_argument("--root", help="dataset directory")
    p.add_argument("--grid", type=int, default=atdr.SomParams.grid)
    p.add_argument("--resample", type=int, default=atdr.SomParams.resample)
    p.add_argument("--epochs", type=int, default=atdr.SomParams.epochs)

    p = sub.add_parser("eval", help="enrol from BASE and evaluate test phases")
    common(p)
    p.add_argument("--root", help="dataset directory")
    p.add_argument("--method", choices=protocol.METHODS, default="dtw")
    p.add_argument("--agg", choices=("min", "mean"), default="min")
    p.add_argument("--metric", choices=("euclidean", "manhattan"), default="euclidean")
    p.add_argument("--sections", type=int, default=3)
    p.add_argument("--bits", type=int, default=3)
    p.add_argument("--grid", type=int, help="expected catalogue grid size (atdr)")
    p.add_argument("--resample", type=int, help="expected catalogue resample count (atdr)")
    p.add_argument("--w-air", type=float, default=0.5)
    p.add_argument("--phases", type=_phases, default=protocol.TEST_PHASES)
    p.add_argument("--catalogues", help="catalogue directory (default: <root>/catalogues)")
    p.add_argument("--distances", help="also write per-phase intra-user distance files here")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("stats", help="normality and signed-rank tests on distance files")
    common(p)
    p.add_argument("inputs", nargs="+", help="distance files written by eval --distances")
    p.add_argument("--replicates", type=int, default=10_000)
    return parser


def read_config(path) -> dict:
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        # string defaults go through each option's type converter, and flags still win
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
    if hasattr(args, "root") and not args.root:
        raise UsageError("--root is required (as a flag or in the config file)")
    return args


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Subcommands

def cmd_synth(args) -> int:
    params = SynthParams(n_writers=args.writers, seed=args.seed, fatigue=args.fatigue,
                         jitter_scale=args.jitter, intra_noise=args.intra_noise)
    root = Path(args.root)
    records = synth_dataset(params)
    save_dataset(records, root)
    log.info("wrote %d records under %s", len(records), root)
    return EXIT_OK


def cmd_train_catalogue(args) -> int:
    records = load_dataset(args.root, phases=[Phase.BASE])
    cfg = protocol.RunConfig(method="atdr", seed=args.seed,
                             som=atdr.SomParams(grid=args.grid, resample=args.resample,
                                                epochs=args.epochs, radius_initial=args.grid / 2,
                                                seed=args.seed))
    cats = protocol.train_corpus_catalogues(protocol.Corpus(records), cfg)
    out = Path(args.out) if args.out else Path(args.root) / "catalogues"
    out.mkdir(parents=True, exist_ok=True)
    for cat in cats.values():
        atdr.save_catalogue(cat, out)
    log.info("wrote %d catalogues to %s", len(cats), out)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = load_dataset(args.root)
    for phase in (Phase.BASE,) + tuple(args.phases):
        if not any(r.phase.phase is phase for r in records):
            raise DataError(f"phase {phase.value} is absent from {args.root}")
    catalogues = None
    som = None
    if args.method == "atdr":
        cat_dir = Path(args.catalogues) if args.catalogues else Path(args.root) / "catalogues"
        catalogues = atdr.load_catalogues(cat_dir)
        any_cat = next(iter(catalogues.values()))
        for flag, have in (("grid", any_cat.grid), ("resample", any_cat.resample)):
            want = getattr(args, flag)
            if want is not None and int(want) != have:
                raise DataError(f"--{flag} {want} does not match the catalogues ({have})")
        som = atdr.SomParams(grid=any_cat.grid, resample=any_cat.resample,
                             radius_initial=any_cat.grid / 2, seed=args.seed)
    cfg = protocol.RunConfig(method=args.method, agg=args.agg, dtw=DtwConfig(args.metric),
                             sections=args.sections, bits=args.bits, som=som, w_air=args.w_air,
                             phases=args.phases, seed=args.seed, jobs=args.jobs)
    report, matrices = protocol.run_protocol(records, cfg, catalogues)
    if args.distances:
        protocol.write_distance_files(matrices, args.method, args.distances)
    _emit(report, args.out)
    return EXIT_OK


def _test_entry(fn, *samples):
    try:
        return {"result": fn(*samples).to_dict()}
    except (AllZeroDifferences, TooFewSamples, ZeroVariance) as exc:
        return {"error": type(exc).__name__, "message": str(exc)}


def stats_report(files: list, replicates: int = 10_000, seed: int = 0) -> dict:
    """Normality per file and signed-rank tests for every pair of same-method files."""
    loaded = []
    for path in files:
        header, values = protocol.loads_distances(Path(path).read_text(encoding="utf-8"))
        loaded.append((header.get("method", ""), header.get("phase", Path(path).stem), values))
    order = {p.value: i for i, p in enumerate(PHASES)}
    loaded.sort(key=lambda item: (item[0], order.get(item[1], len(order)), item[1]))
    normality = []
    for method, phase, values in loaded:
        entry = {"method": method, "phase": phase}
        entry.update(_test_entry(lambda v: lilliefors_test(v, replicates, seed), list(values.values())))
        normality.append(entry)
    comparisons = []
    for (ma, pa, va), (mb, pb, vb) in itertools.combinations(loaded, 2):
        if ma != mb:
            continue
        if set(va) != set(vb):
            raise LengthMismatch(f"{pa} and {pb} distance files cover different probes")
        keys = list(va)
        entry = {"method": ma, "a": pa, "b": pb}
        entry.update(_test_entry(wilcoxon_signed_rank, [va[k] for k in keys], [vb[k] for k in keys]))
        comparisons.append(entry)
    return {"normality": normality, "comparisons": comparisons}


def cmd_stats(args) -> int:
    _emit(stats_report(args.inputs, args.replicates, args.seed), args.out)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train-catalogue": cmd_train_catalogue, "eval": cmd_eval, "stats": cmd_stats}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, OSError) as exc:
        print(f"writerrec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InvalidParams, UsageError) as exc:
        print(f"writerrec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"writerrec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("internal error")
        print(f"writerrec: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
