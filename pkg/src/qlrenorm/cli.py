"""Command line front-end.

    qlrenorm [global options] trees enumerate [--max-noises N] [--negative] [--no-x]
    qlrenorm [global options] renorm identities [--name NAME ...]
    qlrenorm [global options] expand [--max-noises N]
    qlrenorm [global options] reduce run [--disable NAME ...]
    qlrenorm [global options] numeric check --identity i [--order L] [--eps LIST] [--c C]
    qlrenorm [global options] verify-all [--only NAME ...]

Every command prints a report and writes it to the output directory
(``--out``, overridden by ``$QLRENORM_OUT``).  ``--format jsonl`` writes one
JSON object per line instead; the record kinds are listed in the README.
Exit status: 0 success, 1 a check failed, 2 usage or configuration error.
Written files contain no timings, so identical configurations give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

OUT_ENV = "QLRENORM_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kappa: Fraction = Fraction(1, 100)
    truncation: int = 4
    nulls: dict[str, bool] = field(default_factory=lambda: {
        "positive_degree": True, "odd_noise_count": True, "x_parity": True, "explicit": True})
    registry_path: str | None = None
    glyph_path: str | None = None
    script_path: str | None = None
    eps: tuple[float, ...] = (0.1, 0.05, 0.025)
    c: float = 1.0
    radius: float = 1.0
    out: str = "qlrenorm-out"
    fmt: str = "text"

    def validate(self) -> None:
        for p in (self.registry_path, self.glyph_path, self.script_path):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"no such file: {p}")
        if not 0 <= self.truncation <= 4:
            raise ConfigError(f"truncation must be in 0..4, got {self.truncation}")
        if not isinstance(self.kappa, Fraction) or not 0 < self.kappa < 1:
            raise ConfigError(f"kappa must be a rational in (0, 1), got {self.kappa}")
        if self.fmt not in ("text", "jsonl"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be positive")

    def apply(self) -> None:
        """Point the data tables at the configured files."""
        from . import glyphs, reduce, registry

        registry.use_registry(self.registry_path)
        glyphs.use_glyphs(self.glyph_path)
        reduce.tree_names.cache_clear()


class Report:
    """Collects text lines and structured records for one command."""

    def __init__(self, cfg: RunConfig, name: str):
        self.cfg, self.name = cfg, name
        self.lines: list[str] = []
        self.records: list[dict[str, Any]] = []

    def text(self, line: str = "") -> None:
        self.lines.append(line)

    def record(self, rec: dict[str, Any]) -> None:
        self.records.append(rec)

    def write(self, extra: dict[str, str] | None = None) -> Path:
        out = Path(os.environ.get(OUT_ENV) or self.cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if self.cfg.fmt == "jsonl":
            path = out / f"{self.name}.jsonl"
            path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records))
        else:
            path = out / f"{self.name}.txt"
            path.write_text("\n".join(self.lines) + "\n")
        for fname, body in (extra or {}).items():
            (out / fname).write_text(body)
        return path

    def emit(self) -> None:
        if self.cfg.fmt == "jsonl":
            for r in self.records:
                print(json.dumps(r, sort_keys=True))
        else:
            print("\n".join(self.lines))


# ---------------------------------------------------------------------------
# commands


def cmd_trees(cfg: RunConfig, args) -> int:
    from .renorm import NullPredicate
    from .trees import DegreeConfig, degree, enumerate_trees

    deg = DegreeConfig(kappa=cfg.kappa)
    n = cfg.truncation if args.max_noises is None else args.max_noises
    if not 1 <= n <= 4:
        raise ConfigError(f"--max-noises must be in 1..4, got {n}")
    trees = enumerate_trees(n, deg, negative_only=args.negative)
    if args.no_x:
        trees = [t for t in trees if t.x_total == (0, 0)]
    nulls = NullPredicate(cfg.nulls["positive_degree"], cfg.nulls["odd_noise_count"], cfg.nulls["x_parity"],
                          **({} if cfg.nulls["explicit"] else {"explicit": frozenset()}), degrees=deg)
    rep = Report(cfg, "trees")
    rep.text(f"{'noises':>6} {'count':>5}")
    for k in range(1, n + 1):
        cnt = sum(1 for t in trees if t.noises == k)
        rep.text(f"{k:>6} {cnt:>5}")
        rep.record({"kind": "count", "noises": k, "count": cnt})
    rep.text()
    for t in trees:
        why = nulls.reason(t) or "-"
        rep.text(f"{t.noises}  {str(degree(t, deg)):>10}  {why:<22} {t.key}")
        rep.record({"kind": "tree", "noises": t.noises, "degree": str(degree(t, deg)), "null": why, "tree": t.key})
    rep.write()
    rep.emit()
    return 0


def cmd_identities(cfg: RunConfig, args) -> int:
    from .registry import certify_all, registry

    names = args.name or list(registry())
    unknown = [n for n in names if n not in registry()]
    if unknown:
        raise ConfigError(f"unknown identities: {', '.join(unknown)}")
    rep = Report(cfg, "identities")
    fails = 0
    for name, b, ok, msg in certify_all(names):
        fails += not ok
        bind = ", ".join(f"{k}={v}" for k, v in b.items())
        rep.text(f"{'ok  ' if ok else 'FAIL'} {name}({bind}){'  ' + msg if msg else ''}")
        rep.record({"kind": "identity", "name": name, "bindings": {k: str(v) for k, v in b.items()},
                    "certified": ok, "message": msg})
    rep.text(f"{fails} failures")
    rep.write()
    rep.emit()
    return 1 if fails else 0


def cmd_expand(cfg: RunConfig, args) -> int:
    from .expansion import cross_check, fixed_point_expand, golden_table, v_normal, write_table
    from .reduce import initial_tables

    n = cfg.truncation if args.max_noises is None else args.max_noises
    if not 0 <= n <= 4:
        raise ConfigError(f"--max-noises must be in 0..4, got {n}")
    rep = Report(cfg, "expansion")
    tables = {k: c for k, c in initial_tables().items() if c.skeletons()[0].noises <= n}
    bad = 0
    if tables:
        engine = fixed_point_expand(n)
        gold = golden_table()
        for name in sorted(tables):
            ok = cross_check(tables[name], engine).agree
            golden = v_normal(tables[name]) == gold.get(name)
            bad += not (ok and golden)
            rep.text(f"{'ok  ' if ok and golden else 'FAIL'} {name:<4} engine={'match' if ok else 'differ'} "
                     f"golden={'match' if golden else 'differ'}")
            rep.record({"kind": "cross_check", "tree": name, "engine_match": ok, "golden_match": golden})
    rep.text(f"{len(tables)} trees, {bad} mismatches")
    rep.write({"expansion_table.txt": write_table(tables)})
    rep.emit()
    return 1 if bad else 0


def cmd_reduce(cfg: RunConfig, args) -> int:
    from .coeff import render_coeff, render_poly
    from .reduce import PipelineError, load_script, run_pipeline, tree_name

    script = None
    if cfg.script_path is not None:
        script = load_script(Path(cfg.script_path).read_text())
    rep = Report(cfg, "reduce")
    try:
        led, summary = run_pipeline(script=script, disable=args.disable or ())
        status = 0
    except PipelineError as exc:
        led, summary, status = exc.ledger, None, 1
        rep.text(f"pipeline failed: {exc}")
        rep.record({"kind": "error", "message": str(exc)})
    if led is not None:
        for n, s in enumerate(led.steps, 1):
            rep.record({"kind": "step", "index": n, "identity": s.identity,
                        "bindings": {k: str(v) for k, v in s.bindings.items()}, "h": render_poly(s.h),
                        "step_kind": s.kind, "pivot": s.pivot.key if s.pivot else None,
                        "trees": [tree_name(t) for t in s.affected],
                        "carried_to": [tree_name(t) for t in s.postponed]})
        for t, p in led.dropped:
            rep.record({"kind": "dropped", "tree": t.key, "coefficient": render_poly(p)})
        for sk, c in led.residual.by_skeleton().items():
            rep.record({"kind": "residual", "tree": tree_name(sk), "coefficient": render_coeff(c)})
        rep.text(f"{len(led.steps)} steps, {len(led.dropped)} dropped terms, "
                 f"residual on {', '.join(led.nonzero()) or 'no tree'}")
    extra = {"ledger.txt": led.render()} if led is not None else {}
    if summary is not None:
        for fam, ch in summary.families.items():
            for t, w in ch:
                rep.record({"kind": "counterterm", "family": fam, "tree": t.key, "weight": render_poly(w)})
        rep.text("counterterms:")
        rep.text(summary.render().rstrip("\n"))
        extra["counterterms.txt"] = summary.render()
    rep.write(extra)
    rep.emit()
    return status


def cmd_numeric(cfg: RunConfig, args) -> int:
    from .numeric import Mollifier, identity_residual

    order = args.order
    try:
        table = identity_residual(args.identity, {"l": order}, cfg.c, Mollifier(cfg.eps[0]), cfg.eps, cfg.radius)
    except (ValueError, KeyError) as exc:  # unknown or unsupported identity
        raise ConfigError(str(exc)) from None
    rep = Report(cfg, "numeric")
    rep.text(table.render())
    for r in table.records():
        rep.record(r)
    ok = table.cauchy_decreasing()
    rep.record({"kind": "numeric_summary", "cauchy_decreasing": ok})
    rep.write()
    rep.emit()
    return 0 if ok else 1


def cmd_verify(cfg: RunConfig, args) -> int:
    from .acceptance import CRITERIA, run_all

    names = args.only or list(CRITERIA)
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise ConfigError(f"unknown criteria: {', '.join(unknown)}")
    results = run_all(names)
    rep = Report(cfg, "verify")
    for c in results:
        # the file keeps pass/fail and the detail; timings go to the terminal
        rep.text(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        rec = c.record()
        rec.pop("seconds")
        rep.record(rec)
    rep.write()
    if cfg.fmt == "jsonl":
        for c in results:
            print(json.dumps(c.record(), sort_keys=True))
    else:
        for c in results:
            print(c.line())
    return 0 if all(c.passed for c in results) else 1


# ---------------------------------------------------------------------------


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qlrenorm", description="Renormalisation checks for the quasilinear equation.")
    p.add_argument("--out", default="qlrenorm-out", help=f"output directory (overridden by ${OUT_ENV})")
    p.add_argument("--format", dest="fmt", choices=("text", "jsonl"), default="text")
    p.add_argument("--kappa", type=_fraction, default=Fraction(1, 100))
    p.add_argument("--truncation", type=int, default=4, help="maximal noise count")
    p.add_argument("--registry", dest="registry_path")
    p.add_argument("--glyphs", dest="glyph_path")
    p.add_argument("--script", dest="script_path")
    p.add_argument("--null-off", action="append", default=[],
                   choices=("positive_degree", "odd_noise_count", "x_parity", "explicit"),
                   help="switch off one nullity rule (repeatable)")
    sub = p.add_subparsers(dest="group", required=True)

    tr = sub.add_parser("trees").add_subparsers(dest="action", required=True)
    e = tr.add_parser("enumerate")
    e.add_argument("--max-noises", type=int)
    e.add_argument("--negative", action="store_true", help="negative degree only")
    e.add_argument("--no-x", action="store_true", help="drop trees with polynomial factors")
    e.set_defaults(fn=cmd_trees)

    rn = sub.add_parser("renorm").add_subparsers(dest="action", required=True)
    i = rn.add_parser("identities")
    i.add_argument("--name", action="append")
    i.set_defaults(fn=cmd_identities)

    x = sub.add_parser("expand")
    x.add_argument("--max-noises", type=int)
    x.set_defaults(fn=cmd_expand)

    rd = sub.add_parser("reduce").add_subparsers(dest="action", required=True)
    r = rd.add_parser("run")
    r.add_argument("--disable", action="append", help="skip every step using this identity")
    r.set_defaults(fn=cmd_reduce)

    nm = sub.add_parser("numeric").add_subparsers(dest="action", required=True)
    n = nm.add_parser("check")
    n.add_argument("--identity", default="i")
    n.add_argument("--order", type=int, default=0)
    n.add_argument("--eps", type=_eps_list, default=(0.1, 0.05, 0.025))
    n.add_argument("--c", type=float, default=1.0)
    n.add_argument("--radius", type=float, default=1.0)
    n.set_defaults(fn=cmd_numeric)

    v = sub.add_parser("verify-all")
    v.add_argument("--only", action="append")
    v.set_defaults(fn=cmd_verify)
    return p


def config_from(args) -> RunConfig:
    cfg = RunConfig(kappa=args.kappa, truncation=args.truncation, registry_path=args.registry_path,
                    glyph_path=args.glyph_path, script_path=args.script_path, out=args.out, fmt=args.fmt)
    for flag in args.null_off:
        cfg.nulls[flag] = False
    if getattr(args, "eps", None) is not None:
        cfg.eps = tuple(args.eps)
    for name in ("c", "radius"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from(args)
        cfg.validate()
        cfg.apply()
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"qlrenorm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
