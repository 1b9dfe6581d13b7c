"""Command-line front end: ``weylwalk <subcommand> [flags]``.

Subcommands: walk, spherical, moments, dispersion, lln, clt, oracle,
lemma-suite.  Every artifact embeds the validated configuration and seed.
Exit codes: 0 ok, 2 configuration error, 3 numeric-domain error,
4 statistical-test failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import asdict, dataclass, field as dc_field
from datetime import datetime
from pathlib import Path

import numpy as np

from .algebra import ChamberPoint, Field, NumericDomainError
from .hypergroup import DiscreteMeasure, emit_csv, walk, walk_endpoints
from .lemmas import format_table, run_lemma_suite
from .limits import clt_experiment, group_oracle_A, group_oracle_BC, lln_experiment
from .sampling import AParams, BcParams, RngStream
from .spectral import DEFAULT_N_MC, local_moments, measure_moments, rho_A, rho_BC

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_STAT = 4

SUBCOMMANDS = ("walk", "spherical", "moments", "dispersion", "lln", "clt", "oracle", "lemma-suite")
WEIGHT_RENORM_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid configuration; ``reason`` is a short machine-readable tag."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass
class RunConfig:
    subcommand: str
    case: str | None = None
    q: int | None = None
    field: str | None = None
    p: float | None = None
    nu: dict | None = None
    t: list | None = None
    s: list | None = None
    lam: list | None = None
    k: int | None = None
    R: int | None = None
    N: int | None = None
    n_mc: int = DEFAULT_N_MC
    seed: int = 0
    out: str | None = None
    format: str = "json"
    workers: int = 1
    timing: bool = False
    extra: dict = dc_field(default_factory=dict)

    def params(self):
        if self.case == "bc":
            return BcParams(self.q, Field.parse(self.field), self.p)
        return AParams(self.q, Field.parse(self.field))

    def measure(self) -> DiscreteMeasure:
        chamber = "B" if self.case == "bc" else "A"
        return DiscreteMeasure.from_lists(chamber, self.nu["atoms"], self.nu["weights"])

    def to_record(self) -> dict:
        d = asdict(self)
        for key in ("out", "timing", "workers"):
            d.pop(key)
        return {k: v for k, v in d.items() if v is not None}


# ---------------------------------------------------------------------------
# parsing

_ATOM = re.compile(r"^\s*\(([^()]*)\)\s*:\s*([^;]+?)\s*$")


def parse_vector(text: str, name: str) -> list[float]:
    body = text.strip()
    if body.startswith("(") and body.endswith(")"):
        body = body[1:-1]
    try:
        return [float(x) for x in body.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError("bad_vector", f"{name}: cannot parse {text!r} as a vector") from exc


def parse_complex_vector(text: str, name: str) -> list[complex]:
    body = text.strip()
    if body.startswith("(") and body.endswith(")"):
        body = body[1:-1]
    try:
        return [complex(x.strip().replace(" ", "")) for x in body.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError("bad_vector", f"{name}: cannot parse {text!r} as a complex vector") from exc


def parse_measure(text: str) -> dict:
    """Parse "(t1,...,tq):w;(..):w" into atoms and weights."""
    atoms, weights = [], []
    for part in text.split(";"):
        if not part.strip():
            continue
        m = _ATOM.match(part)
        if not m:
            raise ConfigError("bad_measure", f"nu: cannot parse atom {part.strip()!r}; expected (t1,...,tq):w")
        atoms.append(parse_vector(m.group(1), "nu atom"))
        try:
            weights.append(float(m.group(2)))
        except ValueError as exc:
            raise ConfigError("bad_measure", f"nu: bad weight {m.group(2)!r}") from exc
    if not atoms:
        raise ConfigError("bad_measure", "nu: no atoms given")
    return {"atoms": atoms, "weights": weights}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--case", choices=["a", "bc", "A", "BC"])
    p.add_argument("--q", type=int)
    p.add_argument("--d", type=int, choices=[1, 2, 4])
    p.add_argument("--field", choices=["R", "C", "H"])
    p.add_argument("--p", type=float)
    p.add_argument("--nu", help='measure "(t1,...,tq):w;..."')
    p.add_argument("--k", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--n-mc", dest="n_mc", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", default=None,
                   help="include wall-clock time (breaks byte-identical reruns)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weylwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "walk": "simulate a trajectory (or R endpoints with --R)",
        "spherical": "spherical function at (lambda, t) by Monte Carlo",
        "moments": "m_1, m_2 and Sigma^2 at a chamber point",
        "dispersion": "dispersion m_1(nu) and covariance Sigma^2(nu)",
        "lln": "law of large numbers experiment",
        "clt": "central limit theorem experiment",
        "oracle": "matrix-group oracle against the chamber kernels",
        "lemma-suite": "matrix-analysis spot checks",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        _common(sp)
        if name in ("spherical", "moments", "oracle"):
            sp.add_argument("--t", help="chamber point (t1,...,tq)")
        if name == "oracle":
            sp.add_argument("--s", help="chamber point (s1,...,sq) for the BC one-step oracle")
            sp.add_argument("--N", type=int, help="samples per arm")
        if name == "spherical":
            sp.add_argument("--lambda", dest="lam", help="spectral parameter, complex entries")
            sp.add_argument("--shift-rho", action="store_true", default=None,
                            help="evaluate at -i rho + lambda")
        if name in ("lln", "clt", "walk"):
            sp.add_argument("--dump", action="store_true", default=None,
                            help="also write endpoint samples and histogram bins as CSV")
    return parser


_DEFAULTS = {"n_mc": DEFAULT_N_MC, "format": None, "workers": 1, "timing": False,
             "shift_rho": False, "dump": False}
_CONFIG_KEYS = {"case", "q", "d", "field", "p", "nu", "k", "R", "n_mc", "seed", "out", "format",
                "workers", "timing", "t", "s", "N", "lam", "shift_rho", "dump"}


def _merge_config_file(ns: argparse.Namespace) -> dict:
    values = {k: v for k, v in vars(ns).items() if k not in ("config", "subcommand")}
    if not ns.config:
        return values
    try:
        with open(ns.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("bad_config_file", f"config: cannot read {ns.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("bad_config_file", "config: top level must be an object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - _CONFIG_KEYS - {"subcommand"}
    if unknown:
        raise ConfigError("unknown_key", f"config: unknown keys {sorted(unknown)}")
    if "subcommand" in data and data["subcommand"] != ns.subcommand:
        raise ConfigError("conflict", f"config: subcommand {data['subcommand']!r} differs from {ns.subcommand!r}")
    for key, v in data.items():
        if key == "subcommand":
            continue
        if key not in values:
            raise ConfigError("unknown_key", f"config: key {key!r} does not apply to {ns.subcommand}")
        if values[key] is not None:
            raise ConfigError("conflict", f"{key}: given both on the command line and in {ns.config}")
        values[key] = v
    return values


def _as_vector(v, name):
    if v is None:
        return None
    if isinstance(v, str):
        return parse_vector(v, name)
    return [float(x) for x in v]


def parse_config(argv=None) -> RunConfig:
    """Parse and fully validate a command line (plus optional JSON config)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    vals = _merge_config_file(ns)
    for key, dflt in _DEFAULTS.items():
        if key in vals and vals[key] is None:
            vals[key] = dflt
    cfg = RunConfig(ns.subcommand)

    if vals.get("seed") is None:
        env = os.environ.get("WEYLWALK_SEED")
        if env is not None:
            try:
                vals["seed"] = int(env)
            except ValueError as exc:
                raise ConfigError("bad_seed", f"WEYLWALK_SEED={env!r} is not an integer") from exc
        else:
            vals["seed"] = 0
    cfg.seed = int(vals["seed"])
    cfg.n_mc = int(vals.get("n_mc") or DEFAULT_N_MC)
    cfg.workers = int(vals.get("workers") or 1)
    cfg.timing = bool(vals.get("timing"))
    cfg.out = vals.get("out")
    cfg.extra = {"shift_rho": bool(vals.get("shift_rho")), "dump": bool(vals.get("dump"))}
    if cfg.n_mc < 2:
        raise ConfigError("bad_n_mc", "n_mc: must be at least 2")
    if cfg.workers < 1:
        raise ConfigError("bad_workers", "workers: must be positive")

    if ns.subcommand == "lemma-suite":
        if vals.get("format") == "csv":
            raise ConfigError("bad_format", "format: lemma-suite writes JSON")
        cfg.format = "json"
        if vals.get("q") is not None:
            cfg.q = int(vals["q"])
        return cfg

    case = vals.get("case")
    if case is None:
        raise ConfigError("missing", "case: required (a or bc)")
    cfg.case = case.lower()
    if vals.get("q") is None or int(vals["q"]) < 1:
        raise ConfigError("missing", "q: required positive integer")
    cfg.q = int(vals["q"])
    d, fld = vals.get("d"), vals.get("field")
    if d is not None and fld is not None and Field.from_d(int(d)) is not Field.parse(fld):
        raise ConfigError("conflict", f"field: --d {d} disagrees with --field {fld}")
    if d is None and fld is None:
        raise ConfigError("missing", "field: give --d or --field")
    cfg.field = (Field.parse(fld) if fld is not None else Field.from_d(int(d))).name
    if cfg.case == "bc":
        if vals.get("p") is None:
            raise ConfigError("missing", "p: required for case bc")
        cfg.p = float(vals["p"])
        try:
            BcParams(cfg.q, Field.parse(cfg.field), cfg.p)
        except ValueError as exc:
            raise ConfigError("invalid_p", f"p: {exc}") from exc
    elif vals.get("p") is not None:
        raise ConfigError("conflict", "p: only meaningful for case bc")

    chamber = "B" if cfg.case == "bc" else "A"
    nu = vals.get("nu")
    if nu is not None:
        nu = parse_measure(nu) if isinstance(nu, str) else {"atoms": nu["atoms"], "weights": nu["weights"]}
        w = np.asarray(nu["weights"], dtype=float)
        if np.any(w <= 0):
            raise ConfigError("bad_weights", "nu: weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_RENORM_TOL:
            raise ConfigError("bad_weights", f"nu: weights sum to {w.sum():.12g}, not 1 within 1e-9")
        nu["weights"] = (w / w.sum()).tolist()
        for a in nu["atoms"]:
            _check_point(a, chamber, cfg.q, "nu atom")
        cfg.nu = nu
    for key in ("t", "s"):
        v = _as_vector(vals.get(key), key)
        if v is not None:
            _check_point(v, chamber, cfg.q, key)
        setattr(cfg, key, v)
    lam = vals.get("lam")
    if lam is not None:
        lam = parse_complex_vector(lam, "lambda") if isinstance(lam, str) else [complex(*x) if isinstance(x, list) else complex(x) for x in lam]
        if len(lam) != cfg.q:
            raise ConfigError("bad_vector", f"lambda: needs {cfg.q} entries")
        cfg.lam = [[z.real, z.imag] for z in lam]
    for key in ("k", "R", "N"):
        if vals.get(key) is not None:
            if int(vals[key]) < 0:
                raise ConfigError("bad_count", f"{key}: must be nonnegative")
            setattr(cfg, key, int(vals[key]))

    fmt = vals.get("format")
    if fmt == "csv" and ns.subcommand != "walk":
        raise ConfigError("bad_format", f"format: {ns.subcommand} writes JSON reports; use --dump for sample CSVs")
    cfg.format = fmt or ("csv" if ns.subcommand == "walk" else "json")
    _require(cfg)
    return cfg


def _check_point(v, chamber, q, name):
    if len(v) != q:
        raise ConfigError("bad_point", f"{name} {tuple(v)}: expected {q} coordinates")
    try:
        ChamberPoint(chamber, v)
    except ValueError as exc:
        raise ConfigError("non_chamber_point", f"{name} {tuple(v)}: {exc}") from exc


def _require(cfg: RunConfig):
    need = {
        "walk": ("nu", "k"),
        "spherical": ("t", "lam"),
        "moments": ("t",),
        "dispersion": ("nu",),
        "lln": ("nu", "k", "R"),
        "clt": ("nu", "k", "R"),
    }.get(cfg.subcommand, ())
    if cfg.subcommand == "oracle":
        need = ("nu", "k") if cfg.case == "a" else ("s", "t")
        if cfg.case == "bc" and float(cfg.p) != int(cfg.p):
            raise ConfigError("invalid_p", "p: the group oracle needs an integer p")
    for key in need:
        if getattr(cfg, key) is None:
            raise ConfigError("missing", f"{key}: required for {cfg.subcommand}")


# ---------------------------------------------------------------------------
# running


def default_out(cfg: RunConfig) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    return Path("runs") / cfg.subcommand / f"{stamp}.{cfg.format}"


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def _write_samples(path: Path, cfg: RunConfig, rows: np.ndarray, header):
    emit_csv(rows, path, header=header)
    _write_json(path.with_name(path.name + ".meta.json"), {"config": cfg.to_record(), "seed": cfg.seed})


def _write_histogram(path: Path, cfg: RunConfig, samples: np.ndarray, bins: int = 50):
    rows = []
    for i in range(samples.shape[1]):
        counts, edges = np.histogram(samples[:, i], bins=bins)
        for b in range(bins):
            rows.append([i + 1, edges[b], edges[b + 1], counts[b]])
    _write_samples(path, cfg, np.array(rows, dtype=float).reshape(-1, 4),
                   ["row", "coord", "left", "right", "count"])


def _emit(cfg: RunConfig, payload: dict, out: Path) -> None:
    payload = dict(payload)
    payload["config"] = cfg.to_record()
    payload["seed"] = cfg.seed
    _write_json(out, payload)


def _cmd_walk(cfg, out, rng):
    params, nu = cfg.params(), cfg.measure()
    if cfg.R:
        S = walk_endpoints(nu, cfg.k, params, cfg.R, rng, cfg.workers)
        header = ["rep"] + [f"coord_{i + 1}" for i in range(cfg.q)]
        data, payload = S, {"endpoints": S}
    else:
        tr = walk(nu, cfg.k, params, rng)
        header = None
        data, payload = tr.points, {"trajectory": tr.points}
    if cfg.format == "csv":
        _write_samples(out, cfg, data, header)
    else:
        _emit(cfg, payload, out)
    if cfg.extra.get("dump") and cfg.R:
        _write_histogram(out.with_name(out.stem + ".hist.csv"), cfg, data)
    return EXIT_OK


def _rho(cfg):
    params = cfg.params()
    return rho_BC(params) if cfg.case == "bc" else rho_A(cfg.q, params.d)


def _cmd_spherical(cfg, out, rng):
    lam = np.array([complex(*z) for z in cfg.lam])
    if cfg.extra.get("shift_rho"):
        lam = lam - 1j * _rho(cfg)
    est = local_moments(cfg.t, cfg.params(), cfg.n_mc, rng).spherical(lam)
    _emit(cfg, {"input": {"t": cfg.t, "lambda": [[z.real, z.imag] for z in lam]},
                "value": {"re": est.value.real, "im": est.value.imag}, "stderr": est.stderr, "n": est.n}, out)
    return EXIT_OK


def _cmd_moments(cfg, out, rng):
    lm = local_moments(cfg.t, cfg.params(), cfg.n_mc, rng)
    m1, m2, s2 = lm.m1(), lm.m2(), lm.sigma2()
    _emit(cfg, {"input": {"t": cfg.t}, "m1": m1.to_record(), "m2": m2.to_record(),
                "sigma2": s2.to_record()}, out)
    return EXIT_OK


def _cmd_dispersion(cfg, out, rng):
    mm = measure_moments(cfg.measure(), cfg.params(), cfg.n_mc, rng)
    _emit(cfg, {"dispersion": mm.dispersion().to_record(), "covariance": mm.covariance().to_record()}, out)
    return EXIT_OK


def _report_exit(rep, cfg, out):
    d = rep.to_dict(timing=cfg.timing)
    d["config"] = {**cfg.to_record(), "experiment": d["config"]}
    _write_json(out, d)
    return EXIT_OK if rep.passed else EXIT_STAT


def _cmd_limit(cfg, out, rng):
    fn = lln_experiment if cfg.subcommand == "lln" else clt_experiment
    kw = {"n_mc": cfg.n_mc, "workers": cfg.workers}
    rep = fn(cfg.measure(), cfg.params(), cfg.k, cfg.R, rng, **kw)
    code = _report_exit(rep, cfg, out)
    if cfg.extra.get("dump"):
        S = rep.samples
        header = ["rep"] + [f"coord_{i + 1}" for i in range(cfg.q)]
        _write_samples(out.with_name(out.stem + ".endpoints.csv"), cfg, S, header)
        _write_histogram(out.with_name(out.stem + ".hist.csv"), cfg, S)
    return code


def _cmd_oracle(cfg, out, rng):
    if cfg.case == "a":
        N = cfg.N or 10_000
        rep = group_oracle_A(cfg.q, cfg.field, cfg.measure(), cfg.k, N, rng)
    else:
        N = cfg.N or 20_000
        rep = group_oracle_BC(cfg.q, cfg.field, int(cfg.p), cfg.s, cfg.t, N, rng)
    return _report_exit(rep, cfg, out)


def _cmd_lemmas(cfg, out, rng):
    qs = (cfg.q,) if cfg.q else (2, 3)
    res = run_lemma_suite(qs=qs, rng=rng)
    print(format_table(res))
    ok = all(r.passed for r in res)
    _emit(cfg, {"results": [r.to_record() for r in res], "passed": ok}, out)
    return EXIT_OK if ok else EXIT_STAT


_COMMANDS = {
    "walk": _cmd_walk,
    "spherical": _cmd_spherical,
    "moments": _cmd_moments,
    "dispersion": _cmd_dispersion,
    "lln": _cmd_limit,
    "clt": _cmd_limit,
    "oracle": _cmd_oracle,
    "lemma-suite": _cmd_lemmas,
}


def run(cfg: RunConfig) -> int:
    """Dispatch a validated configuration; returns the exit code."""
    out = Path(cfg.out) if cfg.out else default_out(cfg)
    rng = RngStream(cfg.seed)
    code = _COMMANDS[cfg.subcommand](cfg, out, rng)
    print(json.dumps({"status": "ok" if code == EXIT_OK else "statistical_failure", "out": str(out)}))
    return code


def _fail(code: int, reason: str, message: str) -> int:
    print(json.dumps({"status": "error", "reason": reason, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc.reason, str(exc))
    except SystemExit as exc:  # argparse: unknown flags, bad choices, --help
        return int(exc.code or 0)
    try:
        return run(cfg)
    except NumericDomainError as exc:
        return _fail(EXIT_NUMERIC, "numeric_domain", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "invalid_input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
