"""Command-line entry point: ``arwlab <subcommand> [--config run.json] [flags]``.

Configuration comes from an optional JSON file; command-line flags override
it. Every run writes its resolved configuration and a hash of it next to the
results, as ``{experiment}-{hash}.{csv,json}``.

Exit codes: 0 ok, 1 bad configuration, 2 engine did not stabilize within
budget, 3 refused certificate.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import rng as _rng
from .engine import FixedTapes, InstructionTapes, NonStabilized, TapeExhausted, poisson_particles, stabilize
from .experiments import EscapeSpec, driven_dissipation, estimate_escape, fixation_tail
from .kernels import write_kernel_table
from .lattice import Box, dyadic_annuli, kernel_triple
from .multiscale import RecursionParams, decay_certificate, scale_table
from .slt import couple_walks_to_cloud
from .ssm import DirectionTapes, FixedDirections, stabilize_ssm

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_REFUSED = 0, 1, 2, 3

# Keys that do not change results and are left out of the config hash.
_PLUMBING = {"out", "format", "jobs", "config", "timing", "command"}


class ConfigError(ValueError):
    pass


def config_hash(cfg: dict) -> str:
    blob = json.dumps({k: v for k, v in cfg.items() if k not in _PLUMBING}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, tuple):
        return list(x)
    if hasattr(x, "__float__") and not isinstance(x, (int, float)):
        return float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _embedded_hash(path: Path) -> str | None:
    with open(path) as fh:
        if path.suffix == ".json":
            try:
                return json.load(fh).get("config_hash")
            except (json.JSONDecodeError, AttributeError):
                return None
        first = fh.readline()
    return first.split("=", 1)[1].strip() if first.startswith("# config_hash=") else None


def _check_target(path: Path, h: str) -> None:
    if path.exists() and _embedded_hash(path) != h:
        raise ConfigError(f"refusing to overwrite {path}: it was written by a different configuration")


def write_outputs(name: str, cfg: dict, payload: dict, rows: list[dict] | None = None) -> list[Path]:
    """Write the JSON sidecar (always) and the CSV table (``--format csv`` with rows)."""
    h = config_hash(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"{name}-{h}"
    targets = [stem.with_suffix(".json")]
    want_csv = cfg.get("format", "csv") == "csv" and rows is not None
    if want_csv:
        targets.append(stem.with_suffix(".csv"))
    for p in targets:
        _check_target(p, h)
    resolved = {k: v for k, v in cfg.items() if k not in _PLUMBING}
    doc = {"experiment": name, "config_hash": h, "config": resolved, **payload}
    if rows is not None and not want_csv:
        doc["rows"] = rows
    targets[0].write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    if want_csv:
        buf = io.StringIO()
        buf.write(f"# config_hash={h}\n")
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows({k: _cell(v) for k, v in r.items()} for r in rows)
        targets[1].write_text(buf.getvalue())
    return targets


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (int, str)):
        return v
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


# -- subcommands -------------------------------------------------------------------


def _box(obj, d: int | None = None) -> Box:
    if isinstance(obj, int):
        return Box.cube(obj, d or 1)
    return Box.from_json(obj)


def cmd_geometry(cfg: dict):
    d, L, R = int(cfg["d"]), int(cfg["L"]), int(cfg["R"])
    kt = kernel_triple(L, R, int(cfg.get("index", 0)), d)
    ann = dyadic_annuli(int(cfg.get("i0", 0)), int(cfg.get("i_max", 4)), d)
    payload = {"kernel": kt.to_json(), "annuli": ann.describe()}
    rows = [{"box": n, "lower": " ".join(map(str, b.lower)), "side": " ".join(map(str, b.side))}
            for n, b in (("C0", kt.outer), ("C1", kt.middle), ("C2", kt.inner))]
    return "geometry", payload, rows, EXIT_OK


def _initial(cfg: dict, d: int) -> list:
    init = cfg.get("particles", [])
    if isinstance(init, dict):
        region = _box(init["box"], d)
        g = _rng.generator(cfg["seed"], _rng.TAG_START)
        return poisson_particles(region.sites(), float(init["zeta"]), g)
    out = []
    for p in init:
        if isinstance(p, dict):
            out.append((tuple(p["site"]), p.get("state", "a")))
        elif isinstance(p, list) and len(p) == 2 and isinstance(p[1], str):
            out.append((tuple(p[0]) if isinstance(p[0], list) else (p[0],), p[1]))
        else:
            out.append(tuple(p) if isinstance(p, list) else (p,))
    return out


def cmd_stabilize(cfg: dict):
    d = int(cfg.get("d", 1))
    model = cfg.get("model", "arw")
    domain = _box(cfg["domain"], d) if cfg.get("domain") is not None else None
    budget = cfg.get("budget", 10**6)
    particles = _initial(cfg, d)
    seed = cfg["seed"]
    try:
        if model == "arw":
            tapes = FixedTapes(d, cfg["tapes"]) if cfg.get("tapes") else InstructionTapes(d, float(cfg.get("lam", 1.0)), seed)
            res = stabilize(particles, tapes, cfg.get("policy", "fifo"), domain, budget, seed)
        elif model == "ssm":
            kappa = int(cfg["kappa"])
            tapes = FixedDirections(d, cfg["tapes"]) if cfg.get("tapes") else DirectionTapes(d, seed)
            pairs = [p if isinstance(p[0], tuple) else (p, "o") for p in particles]
            msgs = [x for x, kind in pairs if kind not in ("act", "activation")]
            acts = [x for x, kind in pairs if kind in ("act", "activation")]
            res = stabilize_ssm(msgs, tapes, kappa, cfg.get("policy", "fifo"), domain, budget, seed, acts)
        else:
            raise ConfigError(f"unknown model {model!r}")
    except NonStabilized as exc:
        return "stabilize", {"stabilized": False, "snapshot": exc.snapshot}, None, EXIT_UNSTABLE
    except TapeExhausted as exc:
        raise ConfigError(f"fixed tape too short: {exc}") from None
    return "stabilize", {"stabilized": True, "snapshot": res.snapshot(seed)}, None, EXIT_OK


def cmd_estimate_escape(cfg: dict):
    d = int(cfg.get("d", 1))
    if "L" in cfg:
        kt = kernel_triple(int(cfg["L"]), int(cfg["R"]), 0, d)
        box = kt.outer
        start = {"C0": Box(tuple(c + 1 for c in box.lower), tuple(s - 2 for s in box.side)),
                 "C1": kt.middle, "C2": kt.inner}[cfg.get("start", "C2")]
    else:
        box = _box(cfg["box"], d)
        start = cfg["start"]
        start = _box(start, d) if isinstance(start, dict) else [tuple(x) for x in start]
    spec = EscapeSpec(box, start, cfg.get("model", "arw"), float(cfg.get("lam", 1.0)), int(cfg.get("kappa", 3)),
                      cfg.get("law", "poisson"), float(cfg.get("zeta", 0.0)), int(cfg["trials"]), cfg["seed"],
                      cfg.get("policy", "fifo"), int(cfg.get("budget", 10**7)))
    rep = estimate_escape(spec, cfg["jobs"])
    rows = [{"trial": i, "seed": s, "outcome": "" if o is None else int(o)}
            for i, (s, o) in enumerate(zip(rep.seeds, rep.outcomes))]
    payload = {"spec": spec.to_json(), "report": rep.to_json(cfg.get("timing", False)), "seeds": rep.seeds}
    return "escape", payload, rows, EXIT_OK


def cmd_fixation(cfg: dict):
    tab = fixation_tail(float(cfg["zeta"]), float(cfg.get("lam", 1.0)), [int(m) for m in cfg["ladder"]],
                        float(cfg.get("horizon", 10.0)), [int(l) for l in cfg["l_grid"]], int(cfg["trials"]),
                        cfg["seed"], int(cfg.get("d", 1)), cfg.get("observable", "changes"),
                        int(cfg.get("budget", 10**6)), cfg["jobs"])
    rows = tab.rows()
    flagged = {str(M): sum(v is None for v in tab.values[M]) for M in tab.ladder}
    return "fixation", {"flagged": flagged}, rows, EXIT_OK


def cmd_dd(cfg: dict):
    model = cfg.get("model", "ssm")
    if model == "ssm" and "kappa" not in cfg:
        raise ConfigError("dd with the ssm model needs --kappa")
    try:
        st = driven_dissipation(int(cfg["n"]), model, int(cfg.get("insertions", 100)), cfg["seed"],
                                int(cfg.get("d", 2)), int(cfg.get("kappa", 3)), float(cfg.get("lam", 1.0)),
                                cfg.get("policy", "fifo"), int(cfg.get("budget", 10**8)))
    except NonStabilized as exc:
        curve = exc.snapshot.get("curve", [])
        rows = [{"inserted": a, "remaining": b, "dissipated": c} for a, b, c in curve]
        return "dd", {"stabilized": False}, rows, EXIT_UNSTABLE
    rows = [{"inserted": a, "remaining": b, "dissipated": c} for a, b, c in st.curve]
    return "dd", {"stabilized": True, "remaining": st.remaining, "dissipated": st.dissipated}, rows, EXIT_OK


def cmd_recursion(cfg: dict):
    gamma = Fraction(str(cfg.get("gamma", "1/10")))
    k_max = int(cfg.get("k_max", 20))
    kbar = int(cfg.get("kbar", 0))
    if k_max < kbar:
        raise ConfigError(f"k_max = {k_max} is below kbar = {kbar}")
    params = RecursionParams(int(cfg.get("d", 1)), float(cfg.get("c3", 1.0)), float(cfg.get("c4", 1.0)), kbar,
                             cfg.get("p_kbar"))
    table = scale_table(int(cfg.get("L0", 10000)), gamma, k_max + 1)
    zeta0 = Fraction(str(cfg["zeta0"])) if cfg.get("zeta0") is not None else None
    cert = decay_certificate(params, table, k_max, zeta0)
    rows = [{"k": r["k"], "L_k": r["L_k"], "R_k": r["R_k"], "zeta_k": r["zeta_k"],
             "p_bound": float(r["p_bound"]), "margin": float(r["margin"])} for r in cert.rows]
    payload = {"granted": cert.granted, "failing_k": cert.failing_k, "reason": cert.reason}
    return "recursion", payload, rows, EXIT_OK if cert.granted else EXIT_REFUSED


def cmd_slt_demo(cfg: dict):
    d = int(cfg.get("d", 1))
    L = int(cfg.get("L", 10))
    t = float(cfg.get("t", L * L))
    kt = kernel_triple(L, int(cfg.get("R", 2)), 0, d)
    starts = [x for x in kt.inner.sites()][: int(cfg.get("walkers", 4))]
    rep = couple_walks_to_cloud(starts, t, float(cfg.get("zeta_prime", 1.0)), kt.outer.sites(), seed=cfg["seed"],
                                L=L, c_couple=float(cfg.get("c_couple", 1.0)))
    rows = [{"walker": j, "pick": " ".join(map(str, p)), "height": h}
            for j, (p, h) in enumerate(zip(rep.picks, rep.pick_heights))]
    return "slt", {"report": rep.to_json()}, rows, EXIT_OK


def cmd_kernel_table(cfg: dict):
    ts = [float(t) for t in cfg.get("t", [1.0])]
    d, radius = int(cfg.get("d", 1)), int(cfg.get("radius", 5))
    buf = io.StringIO()
    write_kernel_table(ts, d, radius, buf, float(cfg.get("eps", 1e-12)))
    rd = csv.DictReader(io.StringIO(buf.getvalue()))
    rows = list(rd)
    return "kernel", {}, rows, EXIT_OK


COMMANDS = {
    "geometry": cmd_geometry,
    "stabilize": cmd_stabilize,
    "estimate-escape": cmd_estimate_escape,
    "fixation": cmd_fixation,
    "dd": cmd_dd,
    "recursion": cmd_recursion,
    "slt-demo": cmd_slt_demo,
    "kernel-table": cmd_kernel_table,
}

# flag name -> type; applied on top of the JSON config when given.
_FLAGS = {
    "geometry": {"d": int, "L": int, "R": int, "index": int, "i0": int, "i_max": int},
    "stabilize": {"model": str, "d": int, "lam": float, "kappa": int, "policy": str, "budget": int,
                  "particles": json.loads, "tapes": json.loads, "domain": json.loads},
    "estimate-escape": {"model": str, "d": int, "lam": float, "kappa": int, "L": int, "R": int, "start": str,
                        "zeta": float, "law": str, "policy": str, "budget": int},
    "fixation": {"zeta": float, "lam": float, "d": int, "horizon": float, "ladder": json.loads,
                 "l_grid": json.loads, "observable": str, "budget": int},
    "dd": {"n": int, "model": str, "d": int, "kappa": int, "lam": float, "insertions": int, "policy": str,
           "budget": int},
    "recursion": {"L0": int, "gamma": str, "d": int, "c3": float, "c4": float, "kbar": int, "p_kbar": float,
                  "k_max": int, "zeta0": str},
    "slt-demo": {"d": int, "L": int, "R": int, "t": float, "walkers": int, "zeta_prime": float,
                 "c_couple": float},
    "kernel-table": {"d": int, "t": json.loads, "radius": int, "eps": float},
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="arwlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, flags in _FLAGS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with run parameters; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--timing", action="store_true", help="record wall time in the JSON sidecar")
        for flag, typ in flags.items():
            p.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ)
    return ap


def resolve(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg.update({k: v for k, v in vars(args).items() if v is not None and k not in ("config", "timing")})
    cfg["timing"] = bool(args.timing or cfg.get("timing", False))
    cfg.setdefault("seed", 0)
    cfg.setdefault("format", "csv")
    cfg.setdefault("jobs", os.cpu_count() or 1)
    if args.out is None and os.environ.get("ARWLAB_OUT"):
        cfg["out"] = os.environ["ARWLAB_OUT"]
    cfg.setdefault("out", "out")
    if "trials" in cfg and int(cfg["trials"]) <= 0:
        raise ConfigError("trials must be positive")
    if args.command in ("estimate-escape", "fixation"):
        cfg.setdefault("trials", 100)
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        name, payload, rows, code = COMMANDS[args.command](cfg)
        if cfg["timing"]:
            payload = {**payload, "runtime": time.perf_counter() - t0}
        paths = write_outputs(name, cfg, payload, rows)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        msg = f"missing parameter {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"arwlab {args.command}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    if code == EXIT_REFUSED:
        print(f"certificate refused: {payload.get('reason')}", file=sys.stderr)
    elif code == EXIT_UNSTABLE:
        print("budget exhausted before stabilization", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
