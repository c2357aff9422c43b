"""Command-line interface: ``discmc {solve,bench,synth}``.

Any long flag may also come from a ``--config`` file of ``key = value``
lines (``#`` starts a comment); flags given on the command line win.

Exit status: 0 success, 1 usage error, 2 runtime failure.
"""
import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DiscMCError
from .regularizers import Alphabet
from .solvers import ALGORITHMS

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
DEFAULT_RATIOS = (0.2, 0.3, 0.4, 0.5, 0.6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    command: str
    data: str | None = None
    algorithms: list = field(default_factory=lambda: ["discrete_apg"])
    lam: float | None = None
    xi: float = 0.05
    theta: float = 1.0
    ratios: list = field(default_factory=lambda: [0.2])
    seeds: list = field(default_factory=lambda: [0])
    max_iter: int = 500
    rel_tol: float = 1e-4
    alphabet: Alphabet = field(default_factory=lambda: Alphabet.integers(1, 5))
    output: str | None = None
    format: str | None = None
    canonical: bool = False
    m: int = 100
    n: int = 80
    rank: int = 5
    jobs: int = 1
    verbose: int = 0

    @property
    def algorithm(self):
        return self.algorithms[0]

    @property
    def observed_ratio(self):
        return self.ratios[0]

    @property
    def seed(self):
        return self.seeds[0]


# ---- argument types -------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def _real(text, lo=None, lo_open=False):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if v != v:
        raise argparse.ArgumentTypeError("NaN is not allowed")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        op = ">" if lo_open else ">="
        raise argparse.ArgumentTypeError(f"must be {op} {lo:g}, got {text}")
    return v


def _nonneg(text):
    return _real(text, 0.0)


def _positive(text):
    return _real(text, 0.0, lo_open=True)


def _lambda(text):
    return None if text.strip().lower() == "auto" else _nonneg(text)


def _ratio(text, upper_open=False):
    v = _real(text)
    if not 0 < v <= 1 or (upper_open and v == 1):
        bound = "(0, 1)" if upper_open else "(0, 1]"
        raise argparse.ArgumentTypeError(f"must be in {bound}, got {text}")
    return v


def _ratio_list(text):
    return [_ratio(t, upper_open=True) for t in text.split(",") if t.strip()]


def _int_list(text):
    return [_int(t) for t in text.split(",") if t.strip()]


def _algo(text):
    if text not in ALGORITHMS:
        raise argparse.ArgumentTypeError(f"unknown algorithm {text!r}; choose from {', '.join(ALGORITHMS)}")
    return text


def _algo_list(text):
    return [_algo(t.strip()) for t in text.split(",") if t.strip()]


def _alphabet(text):
    try:
        return Alphabet.parse(text)
    except (ValueError, DiscMCError) as err:
        raise argparse.ArgumentTypeError(str(err)) from None


# ---- parser ---------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=_lambda, default=None, metavar="LAM",
                   help="low-rank weight, or 'auto' = sigma_max(P_Omega(O))/50 (default)")
    p.add_argument("--xi", type=_nonneg, default=0.05, help="discrete weight (default 0.05)")
    p.add_argument("--theta", type=_positive, default=1.0, help="log-sum penalty shape (default 1.0)")
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--rel-tol", type=_positive, default=1e-4)
    p.add_argument("--alphabet", type=_alphabet, default=Alphabet.integers(1, 5),
                   help="admissible values, 'lo:hi' or comma list (default 1:5)")
    p.add_argument("--canonical", action="store_true",
                   help="verify the file is the canonical MovieLens-100k")


def build_parser():
    parser = _Parser(prog="discmc", description="Discrete-aware matrix completion")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value file supplying defaults")
    common.add_argument("-v", "--verbose", action="count", default=0)

    solve = sub.add_parser("solve", parents=[common], help="complete one split and report NMSE")
    solve.add_argument("--data", required=True, help="u.data ratings file")
    solve.add_argument("--algo", dest="algorithms", type=lambda t: [_algo(t)], default=["discrete_apg"],
                       metavar="ALGO", help=f"one of {', '.join(ALGORITHMS)} (default discrete_apg)")
    solve.add_argument("--ratio", dest="ratios", type=lambda t: [_ratio(t)], default=[0.2],
                       metavar="RATIO", help="observed fraction in (0, 1] (default 0.2)")
    solve.add_argument("--seed", dest="seeds", type=lambda t: [_int(t)], default=[0], metavar="SEED")
    _solver_flags(solve)
    solve.add_argument("--output", help="trace file")
    solve.add_argument("--format", choices=("csv", "json"), help="trace format (default: from suffix, else csv)")

    bench = sub.add_parser("bench", parents=[common], help="run an algorithm x ratio x seed grid")
    bench.add_argument("--data", required=True, help="u.data ratings file")
    bench.add_argument("--algos", dest="algorithms", type=_algo_list, default=list(ALGORITHMS),
                       metavar="LIST", help="comma-separated algorithms (default all)")
    bench.add_argument("--ratios", type=_ratio_list, default=list(DEFAULT_RATIOS), metavar="LIST",
                       help="comma-separated ratios in (0, 1) (default 0.2,...,0.6)")
    bench.add_argument("--seeds", type=_int_list, default=[0], metavar="LIST", help="comma-separated seeds")
    _solver_flags(bench)
    bench.add_argument("--jobs", type=_positive_int, default=1)
    bench.add_argument("--output", help="results CSV (default: stdout)")

    synth = sub.add_parser("synth", parents=[common], help="write a synthetic discrete low-rank dataset")
    synth.add_argument("--m", type=_positive_int, default=100)
    synth.add_argument("--n", type=_positive_int, default=80)
    synth.add_argument("--rank", type=_positive_int, default=5)
    synth.add_argument("--alphabet", type=_alphabet, default=Alphabet.integers(1, 5))
    synth.add_argument("--seed", dest="seeds", type=lambda t: [_int(t)], default=[0], metavar="SEED")
    synth.add_argument("--output", help="u.data file (default: stdout)")
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(command)
    return None


def read_config_file(path):
    """``key = value`` pairs, in file order."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"argument --config: cannot read {path}: {err.strerror}") from None
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        pairs.append((key.strip().replace("_", "-"), value.strip()))
    return pairs


def _config_tokens(sub, pairs, path):
    flags = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = action
    tokens = []
    for key, value in pairs:
        action = flags.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"{path}: unknown config key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"{path}: key {key!r} expects true/false, got {value!r}")
        else:
            tokens.extend([f"--{key}", value])
    return tokens


def _find_config(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv):
    """Parse ``argv`` (without the program name) into a :class:`CliConfig`."""
    argv = list(argv)
    parser = build_parser()
    if argv and argv[0] in ("solve", "bench", "synth"):
        cfg_path = _find_config(argv[1:])
        if cfg_path is not None:
            sub = _subparser(parser, argv[0])
            argv = [argv[0]] + _config_tokens(sub, read_config_file(cfg_path), cfg_path) + argv[1:]
    ns = parser.parse_args(argv)
    values = {k: v for k, v in vars(ns).items() if k != "config"}
    return CliConfig(**values)


# ---- commands -------------------------------------------------------------

def _solver_config(cfg, algorithm, seed):
    from .solvers import SolverConfig

    return SolverConfig.make(
        algorithm, lam=cfg.lam, xi=cfg.xi, theta=cfg.theta, alphabet=cfg.alphabet,
        max_iter=cfg.max_iter, rel_tol=cfg.rel_tol, seed=seed,
    )


def _cmd_solve(cfg, out, err):
    from .data import SplitSpec, load_movielens, split
    from .metrics import export_trace, fmt_float, nmse
    from .solvers import run

    ds = load_movielens(cfg.data, alphabet=cfg.alphabet, canonical=cfg.canonical)
    train, test = split(ds, SplitSpec(cfg.observed_ratio, cfg.seed))
    config = _solver_config(cfg, cfg.algorithm, cfg.seed)

    def log(rec):
        err.write(f"iter={rec.iter} objective={fmt_float(rec.objective)} nmse={fmt_float(rec.nmse)} "
                  f"rank={rec.rank}\n")

    X, trace = run(config, train, test, callback=log if cfg.verbose >= 1 else None)
    if cfg.output:
        fmt = cfg.format or ("json" if cfg.output.lower().endswith(".json") else "csv")
        export_trace(trace, fmt, cfg.output)
    final = nmse(X, test) if len(test) else float("nan")
    out.write(f"nmse={fmt_float(final)} iters={trace.iterations}\n")
    return EXIT_OK


def _cmd_bench(cfg, out, err):
    from .data import load_movielens
    from .metrics import ExperimentGrid, results_to_csv, run_grid, write_results

    ds = load_movielens(cfg.data, alphabet=cfg.alphabet, canonical=cfg.canonical)
    grid = ExperimentGrid(
        algorithms=[_solver_config(cfg, a, 0) for a in cfg.algorithms],
        observed_ratios=cfg.ratios,
        seeds=cfg.seeds,
        dataset=ds,
        n_jobs=cfg.jobs,
    )
    rows = run_grid(grid)
    if cfg.output:
        write_results(rows, cfg.output)
    else:
        out.write(results_to_csv(rows))
    failed = sum(r.failed for r in rows)
    if cfg.verbose >= 1 or failed:
        err.write(f"{len(rows)} rows, {failed} failed\n")
    return EXIT_OK


def _cmd_synth(cfg, out, err):
    from .data import SyntheticSpec, export_udata, format_udata, synth_discrete_lowrank

    if cfg.rank > min(cfg.m, cfg.n):
        raise UsageError(f"argument --rank: must be <= min(m, n) = {min(cfg.m, cfg.n)}")
    _, ds = synth_discrete_lowrank(SyntheticSpec(cfg.m, cfg.n, cfg.rank, cfg.alphabet, cfg.seed))
    if cfg.output:
        export_udata(ds, cfg.output)
    else:
        out.write(format_udata(ds))
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "synth": _cmd_synth}


def execute(cfg, out=None, err=None):
    """Run a parsed command; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        return COMMANDS[cfg.command](cfg, out, err)
    except UsageError as exc:
        err.write(f"discmc: error: {exc}\n")
        return EXIT_USAGE
    except (DiscMCError, OSError, ValueError, RuntimeError, MemoryError) as exc:
        err.write(f"discmc: {cfg.command} failed: {exc}\n")
        return EXIT_RUNTIME


def main(argv=None, out=None, err=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    err = err or sys.stderr
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        err.write(f"discmc: error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    return execute(cfg, out=out, err=err)


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
