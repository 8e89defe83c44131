"""Command-line front end.

Every run resolves its flags (and an optional JSON config file, which flags
override) into a :class:`RunConfig`.  Outputs embed that config and the
library version.  Exit codes: 0 success, 2 configuration or parse error,
3 numeric or resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from . import __version__, analytics, montecarlo
from .errors import ConfigError, NumericError, TriePropertyViolated, TrieFringeError
from .motif import (
    MotifCollection,
    check_nonoverlapping,
    cousin_mass_partial_sum,
    enumerate_cousins,
    shape_functional,
)
from .shape import decode_shape, encode_shape, shape_from_words, words_from_shape
from .source import new_source

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ("analyze", "simulate", "compare", "cousins", "validate", "oracle")
DEFAULT_COUSIN_HEIGHT = 5


# -- number formatting ----------------------------------------------------------------


def fmt_real(x: float, digits: int = 12) -> str:
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if x == 0.0:
        return "0"
    return format(x, f".{digits}g")


def fmt_prob(x: float) -> str:
    return fmt_real(x, 10)


# keys and CSV columns holding probabilities; everything else real gets 12 digits
PROBABILITY_KEYS = frozenset(
    {"probs", "shape_functional", "mass", "probability", "partial_sum", "mass_target", "height_partial_sum"}
)


def _json_value(obj, key: Optional[str] = None) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return fmt_prob(obj) if key in PROBABILITY_KEYS else fmt_real(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [f"{json.dumps(str(k))}: {_json_value(v, str(k))}" for k, v in obj.items()]
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_value(v, key) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _json_value(obj.item(), key)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with probabilities at 10 and other reals at 12 significant digits."""
    return _json_value(obj)


# -- configuration --------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    probs: Optional[list[float]] = None
    motifs: list[dict] = field(default_factory=list)
    seed: int = 0
    format: str = "json"
    out: Optional[str] = None
    replicates: int = 1000
    n: Optional[int] = None
    poisson: Optional[float] = None
    tol: float = analytics.DEFAULT_WORD_TOL
    series_tol: float = analytics.DEFAULT_SERIES_TOL
    max_word_len: int = analytics.DEFAULT_MAX_LEVELS
    kmax: int = analytics.DEFAULT_KMAX
    tau: Optional[int] = None
    m: Optional[int] = None
    max_height: Optional[int] = None
    limit: Optional[int] = None
    n_max: int = montecarlo.DEFAULT_N_MAX
    words: Optional[list[str]] = None
    workers: int = 1
    backend: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        return cls(**data)


def _parse_probs(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse probabilities {text!r}") from None


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None


def _read_text(path: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _motif_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(_read_text(args.config))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config JSON: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    base["command"] = args.command

    if args.probs is not None:
        base["probs"] = _parse_probs(args.probs)
    motifs: list[dict] = []
    if args.collection:
        try:
            records = json.loads(_read_text(args.collection))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"collection JSON: {exc}") from None
        if not isinstance(records, list):
            raise ConfigError("collection must be a JSON list")
        for rec in records:
            if not isinstance(rec, dict) or "motif" not in rec:
                raise ConfigError("collection entries need a 'motif' key")
            motifs.append({"motif": str(rec["motif"]), "alpha": rec.get("alpha", 1.0)})
    texts = list(args.motif or [])
    for path in args.motif_file or []:
        texts.extend(_motif_lines(_read_text(path)))
    alphas = _parse_floats(args.alpha, "weights") if args.alpha else [1.0] * len(texts)
    if len(alphas) != len(texts):
        raise ConfigError(f"{len(texts)} motifs but {len(alphas)} weights")
    motifs.extend({"motif": t, "alpha": a} for t, a in zip(texts, alphas))
    if motifs:
        base["motifs"] = motifs

    for name in (
        "seed", "format", "out", "replicates", "n", "poisson", "tol", "series_tol",
        "max_word_len", "kmax", "tau", "m", "max_height", "limit", "n_max", "workers", "backend",
    ):
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    if getattr(args, "words", None):
        base["words"] = [w.strip() for w in args.words.split(",")]
    cfg = RunConfig.from_dict(base)
    for rec in cfg.motifs:
        alpha = rec.get("alpha", 1.0)
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
            raise ConfigError(f"weight {alpha!r} is not a number")
        rec["alpha"] = float(alpha)
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    return cfg


def _source(cfg: RunConfig):
    if cfg.probs is None:
        raise ConfigError("--probs is required")
    return new_source(cfg.probs)


def _collection(cfg: RunConfig, m: Optional[int]) -> MotifCollection:
    if not cfg.motifs:
        raise ConfigError("no motifs given (use --motif, --motif-file or --collection)")
    return MotifCollection.from_records(cfg.motifs, m)


def _population(cfg: RunConfig):
    if cfg.poisson is not None and cfg.n is not None:
        raise ConfigError("give either --n or --poisson, not both")
    if cfg.poisson is not None:
        return montecarlo.Poisson(float(cfg.poisson))
    if cfg.n is None:
        raise ConfigError("--n or --poisson is required")
    return montecarlo.Fixed(int(cfg.n))


# -- output -------------------------------------------------------------------------


def _csv_cell(v, probability: bool = False) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
    if isinstance(v, float):
        return fmt_prob(v) if probability else fmt_real(v)
    if v is None:
        return ""
    return str(v)


def render(cfg: RunConfig, result: dict, header: list[str], rows: list[list]) -> str:
    if cfg.format == "json":
        doc = {"version": __version__, "config": cfg.to_dict(), "result": result}
        return dumps(doc) + "\n"
    buf = io.StringIO()
    buf.write(f"# version: {__version__}\n")
    buf.write(f"# config: {dumps(cfg.to_dict())}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    prob_cols = {k for k, name in enumerate(header) if name in PROBABILITY_KEYS}
    for row in rows:
        writer.writerow([_csv_cell(v, k in prob_cols) for k, v in enumerate(row)])
    return buf.getvalue()


# -- commands -------------------------------------------------------------------------


def cmd_analyze(cfg: RunConfig) -> tuple[int, str]:
    source = _source(cfg)
    coll = _collection(cfg, source.m)
    report = analytics.analyze(source, coll, cfg.tol, cfg.series_tol, cfg.max_word_len, cfg.kmax)
    header = ["kind", "i", "j", "motif", "other", "tau", "alpha", "shape_functional",
              "mean_coeff", "var_coeff", "cov_coeff", "probs", "entropy"]
    probs = ",".join(fmt_prob(p) for p in source.probs)
    rows = [["source"] + [""] * 10 + [probs, source.entropy]]
    for i, m in enumerate(report.motifs):
        rows.append(["motif", i, "", m["motif"], "", m["tau"], m["alpha"], m["shape_functional"],
                     report.mean_coeff[i], report.var_coeff[i], "", "", ""])
    for c in report.cov_coeff:
        rows.append(["pair", c["i"], c["j"], report.motifs[c["i"]]["motif"], report.motifs[c["j"]]["motif"],
                     "", "", "", "", "", c["value"], "", ""])
    rows.append(["combo", "", "", "", "", "", "", "", report.mean_derivative_coeff, report.combo_var_coeff,
                 "", "", ""])
    return EXIT_OK, render(cfg, report.to_dict(), header, rows)


def _run_simulation(cfg: RunConfig):
    source = _source(cfg)
    coll = _collection(cfg, source.m)
    summary = montecarlo.simulate(
        source, coll, _population(cfg), int(cfg.replicates), int(cfg.seed),
        backend=cfg.backend, workers=int(cfg.workers),
    )
    return source, coll, summary


def cmd_simulate(cfg: RunConfig) -> tuple[int, str]:
    _, coll, summary = _run_simulation(cfg)
    header = ["replicate", "n"] + [f"count_{k}" for k in range(len(coll))] + ["combo"]
    rows = []
    for i in range(summary.replicates):
        rows.append([i, int(summary.sizes[i])] + [int(c) for c in summary.counts[i]] + [float(summary.combo[i])])
    return EXIT_OK, render(cfg, summary.to_dict(include_samples=True), header, rows)


def cmd_compare(cfg: RunConfig) -> tuple[int, str]:
    source, coll, summary = _run_simulation(cfg)
    report = analytics.analyze(source, coll, cfg.tol, cfg.series_tol, cfg.max_word_len, cfg.kmax)
    table = montecarlo.compare(report, summary)
    header = ["quantity", "empirical", "analytic", "std_error", "z", "flagged"]
    rows = [[r.quantity, r.empirical, r.analytic, r.std_error, r.z, r.flagged] for r in table]
    result = {
        "rows": [r.to_dict() for r in table],
        "any_flagged": any(r.flagged for r in table),
        "simulation": summary.to_dict(),
    }
    return EXIT_OK, render(cfg, result, header, rows)


def cmd_cousins(cfg: RunConfig) -> tuple[int, str]:
    if cfg.tau is None:
        raise ConfigError("--tau is required")
    source = new_source(cfg.probs) if cfg.probs is not None else None
    m = cfg.m if cfg.m is not None else (source.m if source else None)
    if m is None:
        raise ConfigError("--m or --probs is required")
    if source is not None and source.m != m:
        raise ConfigError(f"--m {m} disagrees with {source.m} probabilities")
    if cfg.max_height is None and cfg.limit is None:
        cfg.max_height = DEFAULT_COUSIN_HEIGHT
    shapes = list(enumerate_cousins(cfg.tau, m, cfg.max_height, cfg.limit))
    listing = []
    running = []
    for k, s in enumerate(shapes):
        q = shape_functional(source, s) if source else None
        running.append(q)
        listing.append({
            "index": k,
            "height": s.height,
            "motif": encode_shape(s),
            "shape_functional": q,
            "partial_sum": math.fsum(running) if source else None,
        })
    result: dict = {"tau": cfg.tau, "m": m, "count": len(shapes), "cousins": listing}
    if source is not None:
        target = 1.0 - source.power_sum(cfg.tau)
        result["mass_target"] = target
        if cfg.max_height is not None:
            partial, tail = cousin_mass_partial_sum(source, cfg.tau, cfg.max_height)
            result["height_partial_sum"] = partial
            result["tail_bound"] = tail
    header = ["index", "height", "motif", "shape_functional", "partial_sum"]
    rows = [[c["index"], c["height"], c["motif"], c["shape_functional"], c["partial_sum"]] for c in listing]
    return EXIT_OK, render(cfg, result, header, rows)


def cmd_validate(cfg: RunConfig) -> tuple[int, str]:
    m = cfg.m if cfg.m is not None else (len(cfg.probs) if cfg.probs else None)
    checks = []
    shapes = []
    for rec in cfg.motifs:
        shape = decode_shape(rec["motif"], m)
        if m is None:
            m = shape.arity
        shapes.append(shape)
        ok = shape_from_words(words_from_shape(shape), shape.arity) == shape
        checks.append({"check": "trie_property", "subject": rec["motif"], "pass": ok, "detail": ""})
        if shape.size < 2:
            checks.append({"check": "motif_size", "subject": rec["motif"], "pass": False, "detail": "size < 2"})
    if len(shapes) >= 1:
        bad = check_nonoverlapping(shapes)
        detail = "; ".join(f"{encode_shape(shapes[i])} <-> {encode_shape(shapes[j])}" for i, j in bad)
        checks.append({"check": "nonoverlapping", "subject": "collection", "pass": not bad,
                       "detail": detail, "pairs": [list(p) for p in bad]})
    if cfg.words is not None:
        if m is None:
            raise ConfigError("--m or --probs is required to check words")
        try:
            shape_from_words(cfg.words, m)
            checks.append({"check": "trie_property", "subject": ",".join(cfg.words), "pass": True, "detail": ""})
        except TriePropertyViolated as exc:
            checks.append({"check": "trie_property", "subject": ",".join(cfg.words), "pass": False,
                           "detail": str(exc), "pairs": [list(exc.indices)]})
    if not checks:
        raise ConfigError("nothing to validate")
    passed = all(c["pass"] for c in checks)
    header = ["check", "subject", "pass", "detail"]
    rows = [[c["check"], c["subject"], c["pass"], c["detail"]] for c in checks]
    code = EXIT_OK if passed else EXIT_CONFIG
    return code, render(cfg, {"pass": passed, "checks": checks}, header, rows)


def cmd_oracle(cfg: RunConfig) -> tuple[int, str]:
    source = _source(cfg)
    coll = _collection(cfg, source.m)
    if cfg.n is None:
        raise ConfigError("--n is required")
    pmf = montecarlo.exact_distribution(source, coll, int(cfg.n), n_max=int(cfg.n_max))
    result = {
        "n": cfg.n,
        "support": list(pmf.support),
        "mass": list(pmf.probs),
        "mean": pmf.mean,
        "variance": pmf.variance,
    }
    header = ["value", "probability"]
    rows = [[y, p] for y, p in zip(pmf.support, pmf.probs)]
    return EXIT_OK, render(cfg, result, header, rows)


HANDLERS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "cousins": cmd_cousins,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
}


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--probs", help="comma-separated symbol probabilities")
    g.add_argument("--collection", help="JSON list of {motif, alpha} records")
    g.add_argument("--motif", action="append", help="motif text; repeatable")
    g.add_argument("--motif-file", action="append", help="file with one motif per line, '#' comments")
    g.add_argument("--alpha", help="comma-separated weights for the --motif/--motif-file motifs")
    g.add_argument("--seed", type=int)
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--out", help="write output here instead of stdout")
    g.add_argument("--replicates", type=int)
    g.add_argument("--poisson", type=float, metavar="Z", help="Poisson(Z) population")
    g.add_argument("--n", type=int, help="fixed population size")
    g.add_argument("--m", type=int, help="alphabet size when no probabilities are given")

    ana = argparse.ArgumentParser(add_help=False)
    a = ana.add_argument_group("analysis")
    a.add_argument("--tol", type=float, help="word tail tolerance")
    a.add_argument("--series-tol", type=float, dest="series_tol")
    a.add_argument("--max-word-len", type=int, dest="max_word_len")
    a.add_argument("--kmax", type=int)

    sim = argparse.ArgumentParser(add_help=False)
    s = sim.add_argument_group("simulation")
    s.add_argument("--workers", type=int)
    s.add_argument("--backend", choices=("cython", "python"))

    parser = argparse.ArgumentParser(prog="triefringe", description="Fringe motif counts in random tries.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common, ana], help="analytic moment coefficients")
    sub.add_parser("simulate", parents=[common, sim], help="simulate tries and count motifs")
    sub.add_parser("compare", parents=[common, ana, sim], help="simulation against analytic moments")
    cz = sub.add_parser("cousins", parents=[common], help="enumerate root-branching shapes")
    cz.add_argument("--tau", type=int)
    cz.add_argument("--max-height", type=int, dest="max_height")
    cz.add_argument("--limit", type=int)
    val = sub.add_parser("validate", parents=[common], help="nonoverlap and trie-property checks")
    val.add_argument("--words", help="comma-separated words to test for the trie property")
    orc = sub.add_parser("oracle", parents=[common], help="exact small-n distribution")
    orc.add_argument("--n-max", type=int, dest="n_max")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve_config(args)
        code, text = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TrieFringeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
