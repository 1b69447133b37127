"""Command-line driver: ``nnjscc {analyze,psi,simulate,sweep,rcu} --config FILE``.

Configuration is TOML (or JSON, which is what summaries embed) with four
tables, validated against :data:`CONFIG_SCHEMA` before anything runs:

``[source]``   kind, sigma2 (source-symbol^2), params
``[channel]``  noise, params, P (input power per channel use, noise power 1)
``[code]``     D (source-symbol^2), k or eta, n, src_codebook, ch_codebook,
               xi_mode, xi, M
``[sim]``      trials, master_seed, workers, codeword_cap, fixed_ensemble,
               truncate_types, sampler, block_size

plus optional ``[psi]``, ``[sweep]``, ``[rcu]`` and ``[analyze]`` tables for
the matching subcommands.  Exit status is 0 on success, 1 for configuration
errors and 2 for numerical or resource errors; the output file is written
atomically and only on success.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analytic, nonexcess
from .ensemble import DEFAULT_CODEWORD_CAP, codeword_cap_from_env, xi_moderate, xi_second_order
from .errors import ConfigurationError, DomainError, NumericalError, ResourceError
from .model import KINDS, make_noise, make_source, SystemConfig
from .montecarlo import block_rng, estimate_pe, md_schedule, prepare_scheme, rcu_bounds, SAMPLERS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_LAW = {"enum": ["spherical", "iid", "cross"]}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["source", "channel", "code"],
    "properties": {
        "source": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": list(KINDS)}, "sigma2": _POS, "params": {"type": "object"}},
        },
        "channel": {
            "type": "object", "additionalProperties": False, "required": ["P"],
            "properties": {"noise": {"enum": list(KINDS)}, "params": {"type": "object"}, "P": _POS},
        },
        "code": {
            "type": "object", "additionalProperties": False, "required": ["D"],
            "properties": {
                "D": _POS, "k": _POS_INT, "n": _POS_INT, "eta": _POS,
                "src_codebook": _LAW, "ch_codebook": _LAW,
                "xi_mode": {"enum": ["second_order", "moderate", "fixed"]},
                "xi": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "M": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
        "sim": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "trials": _POS_INT,
                "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "workers": _POS_INT, "codeword_cap": _POS_INT,
                "fixed_ensemble": {"type": "boolean"}, "truncate_types": {"type": "boolean"},
                "sampler": {"enum": list(SAMPLERS)}, "block_size": _POS_INT,
            },
        },
        "analyze": {
            "type": "object", "additionalProperties": False,
            "properties": {"eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                                "exclusiveMaximum": 1}}},
        },
        "psi": {
            "type": "object", "additionalProperties": False, "required": ["p_min", "p_max"],
            "properties": {"k": _POS_INT, "p_min": _POS, "p_max": _POS,
                           "points": {"type": "integer", "minimum": 2}},
        },
        "sweep": {
            "type": "object", "additionalProperties": False, "required": ["k"],
            "properties": {"k": {"type": "array", "items": _POS_INT, "minItems": 1}},
        },
        "rcu": {
            "type": "object", "additionalProperties": False,
            "properties": {"type": _POS_INT, "samples": {"type": "integer", "minimum": 2},
                           "inner": {"enum": ["analytic", "sample"]}, "inner_samples": _POS_INT},
        },
    },
}

SIM_DEFAULTS = {
    "trials": 10000, "master_seed": 0, "workers": 1, "codeword_cap": DEFAULT_CODEWORD_CAP,
    "fixed_ensemble": False, "truncate_types": False, "sampler": "explicit", "block_size": 4096,
}
PSI_HEADER = ["k", "p", "psi_sp", "g_lower", "g_upper", "psi_iid", "r_sp", "r_iid", "s_star"]
SWEEP_HEADER = ["k", "n", "trials", "p_e_hat", "ci_lo", "ci_hi", "predicted_eps"]


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".json":
            cfg = json.loads(raw)
        else:
            cfg = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config error at {where}: {exc.message}") from None


def resolve(cfg: dict, args) -> dict:
    """Fill defaults and apply command-line overrides; the result is what gets echoed."""
    cfg = copy.deepcopy(cfg)
    cfg.setdefault("channel", {}).setdefault("noise", "gaussian")
    code = cfg["code"]
    code.setdefault("src_codebook", "spherical")
    code.setdefault("ch_codebook", "spherical")
    code.setdefault("xi_mode", "second_order")
    sim = {**SIM_DEFAULTS, **cfg.get("sim", {})}
    if "codeword_cap" not in cfg.get("sim", {}):
        sim["codeword_cap"] = codeword_cap_from_env()
    for flag, key in (("seed", "master_seed"), ("trials", "trials"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            sim[key] = value
    if getattr(args, "fixed_ensemble", False):
        sim["fixed_ensemble"] = True
    if getattr(args, "truncate_types", False):
        sim["truncate_types"] = True
    cfg["sim"] = sim
    validate_config(cfg)
    return cfg


def _models(cfg):
    src_cfg = cfg["source"]
    params = dict(src_cfg.get("params", {}))
    if "sigma2" in src_cfg:
        if "sigma2" in params and params["sigma2"] != src_cfg["sigma2"]:
            raise ConfigurationError("source sigma2 given twice with different values")
        params["sigma2"] = src_cfg["sigma2"]
    source = make_source(src_cfg["kind"], params)
    noise = make_noise(cfg["channel"]["noise"], cfg["channel"].get("params", {}))
    return source, noise


def _report(cfg, source, noise):
    return analytic.dispersion_report(source.zeta_s, source.sigma2, noise.zeta_c,
                                      cfg["channel"]["P"], cfg["code"]["D"])


def _xi(code, k):
    mode = code["xi_mode"]
    if mode == "fixed":
        if "xi" not in code:
            raise ConfigurationError("xi_mode = 'fixed' needs code.xi")
        return code["xi"], None
    if mode == "moderate":
        if "eta" not in code:
            raise ConfigurationError("xi_mode = 'moderate' needs code.eta")
        return xi_moderate(code["eta"]), None
    return xi_second_order(k), xi_second_order


def _k(cfg, report):
    code = cfg["code"]
    if "k" in code:
        return code["k"]
    if "eta" in code and "n" in code:
        return md_schedule(code["n"], code["eta"], report).k_n
    raise ConfigurationError("code needs k, or eta together with n")


def build_scheme(cfg, k=None):
    source, noise = _models(cfg)
    report = _report(cfg, source, noise)
    code, sim = cfg["code"], cfg["sim"]
    if "n" not in code:
        raise ConfigurationError("code.n is required for simulation")
    k = _k(cfg, report) if k is None else k
    system = SystemConfig(P=cfg["channel"]["P"], D=code["D"], k=k, n=code["n"], sigma2=source.sigma2,
                          src_codebook=code["src_codebook"], ch_codebook=code["ch_codebook"])
    xi, rule = _xi(code, k)
    scheme = prepare_scheme(system, source, noise, xi, M=code.get("M"), truncate_types=sim["truncate_types"],
                            xi_rule=rule, sampler=sim["sampler"], fixed_ensemble=sim["fixed_ensemble"],
                            codeword_cap=sim["codeword_cap"], block_size=sim["block_size"])
    return scheme, report


def _echo(cfg):
    out = copy.deepcopy(cfg)
    out["sim"].pop("workers", None)
    return out


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def cmd_analyze(cfg) -> str:
    source, noise = _models(cfg)
    report = _report(cfg, source, noise)
    out = report.as_dict()
    out["md_constant_sp"] = analytic.md_constant(report, "spherical")
    out["md_constant_iid"] = analytic.md_constant(report, "iid")
    out["separate_md_sp"] = analytic.separate_md(report, "spherical")
    out["separate_md_iid"] = analytic.separate_md(report, "iid")
    n = cfg["code"].get("n")
    rows = []
    for eps in cfg.get("analyze", {}).get("eps", [0.1]):
        row = {"eps": eps}
        for kind, tag in (("spherical", "sp"), ("iid", "iid")):
            row[f"joint_backoff_{tag}"] = math.sqrt(report.v_joint(kind)) * analytic.qfunc_inv(eps)
            if eps < 0.5:
                row[f"separate_backoff_{tag}"] = analytic.separate_second_order(eps, report, kind)
            if n is not None:
                row[f"k_star_{tag}"] = analytic.second_order_k(n, eps, report, kind)
        rows.append(row)
    out["predictions"] = rows
    out["n"] = n
    out["config"] = cfg
    return _json(out)


def cmd_psi(cfg) -> str:
    source, _ = _models(cfg)
    grid = cfg.get("psi")
    if grid is None:
        raise ConfigurationError("psi needs a [psi] table with p_min and p_max")
    k = grid.get("k", cfg["code"].get("k"))
    if k is None:
        raise ConfigurationError("psi needs k in [psi] or [code]")
    ctx = nonexcess.PsiContext(source.sigma2, cfg["code"]["D"])
    rows = []
    for p in np.linspace(grid["p_min"], grid["p_max"], grid.get("points", 50)):
        p = float(p)
        inside = ctx.inside(p)
        lower = upper = None
        if inside:
            lower = nonexcess.psi_sp_lower(k, p, ctx)
            if k >= 2 and p + ctx.sigma2 - 2 * ctx.D >= 0:
                upper = nonexcess.psi_sp_upper(k, p, ctx)
        rows.append([k, p, nonexcess.psi_sp(k, p, ctx), lower, upper, nonexcess.psi_iid(k, p, ctx),
                     nonexcess.r_sp(p, ctx) if inside else None, nonexcess.r_iid(p, ctx),
                     nonexcess.s_star(p, ctx)])
    return _csv(PSI_HEADER, rows)


def cmd_simulate(cfg, records: bool = False) -> tuple[str, str | None]:
    scheme, _ = build_scheme(cfg)
    sim = cfg["sim"]
    summary = estimate_pe(scheme, sim["trials"], sim["master_seed"], sim["workers"],
                          config_echo=_echo(cfg), keep_records=records)
    out = summary.to_dict()
    out["M"] = [int(m) for m in scheme.M]
    out["k"], out["n"], out["xi"], out["N"] = scheme.system.k, scheme.system.n, scheme.partition.xi, scheme.partition.N
    return _json(out), (summary.records_csv() if records else None)


def cmd_sweep(cfg) -> str:
    if "sweep" not in cfg:
        raise ConfigurationError("sweep needs a [sweep] table with a list of k")
    sim = cfg["sim"]
    rows = []
    for k in sorted(set(cfg["sweep"]["k"])):
        scheme, report = build_scheme(cfg, k=k)
        s = estimate_pe(scheme, sim["trials"], sim["master_seed"], sim["workers"])
        pred = analytic.predicted_eps(scheme.system.n, k, report, scheme.system.ch_codebook
                                      if scheme.system.ch_codebook != "cross" else "spherical")
        rows.append([k, scheme.system.n, sim["trials"], s.p_e_hat, s.wilson_ci[0], s.wilson_ci[1], pred])
    return _csv(SWEEP_HEADER, rows)


def cmd_rcu(cfg) -> str:
    scheme, _ = build_scheme(cfg)
    opts = cfg.get("rcu", {})
    samples = opts.get("samples", 10000)
    types = [opts["type"]] if "type" in opts else [i + 1 for i, m in enumerate(scheme.M) if m > 0]
    rng = block_rng(cfg["sim"]["master_seed"], 0)
    rows = []
    for i in types:
        up, lo = rcu_bounds(scheme, i, samples, rng, inner=opts.get("inner", "analytic"),
                            inner_samples=opts.get("inner_samples", 1000))
        rows.append({"type": i, "M": int(scheme.M[i - 1]), "upper": up.value, "upper_stderr": up.stderr,
                     "lower": lo.value, "lower_stderr": lo.stderr})
    return _json({"bounds": rows, "samples": samples, "config": _echo(cfg)})


def _write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnjscc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("analyze", "dispersions and second-order predictions (JSON)"),
                        ("psi", "covering probabilities and exponents over a grid of p (CSV)"),
                        ("simulate", "Monte Carlo excess-distortion probability (JSON)"),
                        ("sweep", "Monte Carlo over a list of k with predictions (CSV)"),
                        ("rcu", "decoder error bounds per type (JSON)")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML or JSON configuration file")
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--seed", type=int, help="master seed, overrides sim.master_seed")
        p.add_argument("--workers", type=int, help="worker processes, overrides sim.workers")
        p.add_argument("--trials", type=int, help="trial count, overrides sim.trials")
        p.add_argument("--fixed-ensemble", action="store_true", help="draw one codebook for all trials")
        p.add_argument("--truncate-types", action="store_true",
                       help="give uncoverable types an empty subcodebook instead of failing")
        if name == "simulate":
            p.add_argument("--records", help="also write per-trial CSV records to this path")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(load_config(args.config), args)
        if args.command == "simulate":
            text, records = cmd_simulate(cfg, records=bool(args.records))
            if args.records:
                _write_atomic(args.records, records)
        else:
            text = {"analyze": cmd_analyze, "psi": cmd_psi, "sweep": cmd_sweep, "rcu": cmd_rcu}[args.command](cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"nnjscc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ResourceError) as exc:
        print(f"nnjscc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))
