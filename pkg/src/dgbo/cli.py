"""Command-line driver: simulation runs, verification suites and reports.

Exit status: 0 when every asserted check passes, 1 when a check fails,
2 for an invalid configuration and 3 for a numerical blow-up.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import commutators as cm
from . import kernel as kn
from .cutoffs import build_family, verify_properties
from .diagnostics import DiagnosticsRecord, Recorder
from .solver import SCHEMA_VERSION, BlowUpError, SimConfig, richardson_order, run, soliton_error
from .spectral import bessel_potential, make_grid

log = logging.getLogger("dgbo")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3

DEFAULTS = {
    "run": {
        "sim": {},
        "diagnostics": {"eps": 1.0, "b": 5.0, "v": 1.0, "js": [1, 2, 3], "ms": [2], "delta": 1.0,
                        "decay_js": [2], "R": None, "r": 1.0},
    },
    "verify-cutoffs": {"pairs": [[1, 5], [0.5, 3], [2, 10]], "samples": 10000, "tol": 1e-10},
    "verify-identity": {"alphas": [0.25, 0.5, 0.75, 1.0], "L": 30.0, "Ns": [1024, 2048], "eps": 1.0,
                        "b": 5.0, "profile": {"A": 1.0, "x_c": 0.0, "w": 1.0}, "rel_tol": 1e-8,
                        "shrink": 10.0},
    "verify-commutator-bound": {"alpha": 0.5, "n": 0, "sigma": 0.0, "trials": 100, "eps": 1.0, "b": 5.0,
                                "L": 30.0, "N": 1024, "member": "chi2"},
    "soliton-test": {"N": 512, "L": 30.0, "dt": 1e-3, "T": 1.0, "c": 1.0, "tol": 1e-4,
                     "richardson_dts": [0.01, 0.005, 0.0025], "min_order": 3.7},
    "kernel-bound": {"alphas": [0.25, 0.75], "ks": [3, 4, 5], "count": 50, "lattice_ks": [3, 4, 5, 6],
                     "factor": 2.0},
    "propagation-demo": {"alpha": 0.5, "v": 1.0, "eps": 1.0, "b": 5.0, "T": 1.0, "L": 30.0, "N": 1024,
                         "dt": 1e-3, "stride": 10, "absorb": 1000.0, "j": 3, "factor": 10.0,
                         "initial": {"kind": "one_sided", "m": 2, "x0": 0.0, "gamma": 2.4, "A": 1.0}},
}


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


# configuration -----------------------------------------------------------

def _merge(base: dict, new: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in new.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(block: dict, item: str) -> dict:
    """``a.b=value`` sets ``block["a"]["b"]``; the value is read as JSON when possible."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, text = item.split("=", 1)
    parts = key.split(".")
    node = block
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot descend into a non-object value")
    node[parts[-1]] = _parse_value(text)
    return block


def load_config(command: str, path: str | None, overrides=()) -> dict:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("--config", f"no such file {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"line {e.lineno}: {e.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError("--config", "top level must be a JSON object")
        schema = raw.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError("schema", f"unsupported version {schema}, expected {SCHEMA_VERSION}")
        raw = raw.get(command, raw)
    block = _merge(DEFAULTS.get(command, {}), raw)
    for item in overrides:
        apply_override(block, item)
    validate(command, block)
    return block


def _pairs_of(command, block):
    if command == "verify-cutoffs":
        return [tuple(p) for p in block["pairs"]]
    if command == "run":
        d = block.get("diagnostics")
        return [(d["eps"], d["b"])] if d else []
    if "eps" in block and "b" in block:
        return [(block["eps"], block["b"])]
    return []


def validate(command: str, block: dict):
    for eps, b in _pairs_of(command, block):
        if not (eps > 0 and b >= 5 * eps * (1 - 1e-12)):
            raise ConfigError("eps,b", f"need eps > 0 and b >= 5 eps, got ({eps}, {b})")
    v = block.get("v", (block.get("diagnostics") or {}).get("v", 0.0))
    if v < 0:
        raise ConfigError("v", f"must be non-negative, got {v}")
    if command == "run":
        try:
            SimConfig.from_dict(block["sim"])
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError("sim", str(e)) from None


# helpers -----------------------------------------------------------------

def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def output_root(out: str | None, command: str) -> Path:
    if out is not None:
        return Path(out)
    return Path(os.environ.get("DGBO_OUT", "dgbo_out")) / command


# suites ------------------------------------------------------------------

def suite_run(block: dict, out: Path, seed: int, jobs: int) -> tuple[dict, bool]:
    cfg = SimConfig.from_dict(block["sim"])
    d = block.get("diagnostics")
    hooks, rec = [], None
    if d:
        fam = build_family(d["eps"], d["b"])
        run_id = hashlib.sha256(f"{cfg.to_json()}|{json.dumps(d, sort_keys=True)}|{seed}".encode()).hexdigest()[:12]
        rec = DiagnosticsRecord(run_id, fam, d["v"], cfg.alpha, tuple(d["js"]), tuple(d["ms"]),
                                d["delta"], tuple(d["decay_js"]), d.get("R"), d.get("r", 1.0))
        hooks.append(Recorder(rec))
    traj = run(cfg, hooks=hooks, out_dir=out)
    extra = {"seed": seed, "drift": traj.drift(), "drift_flags": traj.drift_flags, "snapshots": len(traj.times)}
    if rec is not None:
        rec.write(out, extra)
    else:
        _write_json(out / "summary.json", extra)
    return extra, True


def _cutoff_item(args):
    (eps, b), samples, tol = args
    rep = verify_properties(build_family(eps, b), samples=samples, tol=tol)
    return json.loads(rep.to_json())


def suite_cutoffs(block, out, seed, jobs):
    items = [(tuple(p), block["samples"], block["tol"]) for p in block["pairs"]]
    reports = _pmap(_cutoff_item, items, jobs)
    ok = all(r["pass"] for r in reports)
    return {"families": reports, "pass": ok}, ok


def _identity_item(args):
    alpha, N, block = args
    grid = make_grid(block["L"], N)
    p = block["profile"]
    f = grid.sample(lambda x: p["A"] * np.exp(-(((x - p["x_c"]) / p["w"]) ** 2)))
    fam = build_family(block["eps"], block["b"])
    res = cm.localization_identity_residual(f, fam, alpha)
    h2 = bessel_potential(f, 2).norm() ** 2
    return {"alpha": alpha, "N": N, "residual": res, "h2_norm_sq": h2}


def suite_identity(block, out, seed, jobs):
    items = [(a, N, block) for a in block["alphas"] for N in block["Ns"]]
    rows = _pmap(_identity_item, items, jobs)
    per_alpha = []
    ok = True
    for a in block["alphas"]:
        rs = [r for r in rows if r["alpha"] == a]
        within = all(r["residual"] <= block["rel_tol"] * r["h2_norm_sq"] for r in rs)
        shrink = [r0["residual"] / r1["residual"] if r1["residual"] > 0 else float("inf")
                  for r0, r1 in zip(rs, rs[1:])]
        ok &= within
        per_alpha.append({"alpha": a, "runs": rs, "within_tolerance": within, "shrink_factors": shrink,
                          "shrink_at_least": block["shrink"],
                          "shrinks": all(s >= block["shrink"] for s in shrink)})
        for r in rs:
            print(f"alpha={a:g} N={r['N']} residual={r['residual']:.3e} "
                  f"threshold={block['rel_tol'] * r['h2_norm_sq']:.3e}")
    return {"identity": per_alpha, "pass": ok}, ok


def suite_commutator(block, out, seed, jobs):
    grid = make_grid(block["L"], block["N"])
    fam = build_family(block["eps"], block["b"])
    exp = cm.expansion_from_cutoff(fam, grid, block["alpha"] + 2, block["n"], member=block["member"])
    rep = cm.bound_check_Rn(exp, block["sigma"], block["trials"], seed)
    d = json.loads(rep.to_json())
    d["seed"] = seed
    print(f"max ratio {rep.max_ratio:.6g} over {rep.trials} fields")
    return d, rep.passed


def suite_soliton(block, out, seed, jobs):
    err = soliton_error(block["N"], block["L"], block["dt"], block["T"], block["c"])
    base = SimConfig(alpha=1.0, L=block["L"], N=block["N"], dt=block["dt"], T=block["T"],
                     initial={"kind": "kdv_soliton", "c": block["c"]})
    orders = richardson_order(base, block["richardson_dts"])
    ok = err <= block["tol"] and min(orders) >= block["min_order"]
    print(f"soliton L2 error {err:.3e}; observed orders {', '.join(f'{o:.3f}' for o in orders)}")
    return {"l2_error": err, "tol": block["tol"], "orders": orders, "min_order": block["min_order"],
            "pass": ok}, ok


def _kernel_item(args):
    alpha, block, seed = args
    rep = kn.oscillatory_kernel_check(tuple(block["ks"]), alpha, block["count"], seed)
    lat = kn.lattice_sum_check(tuple(block["lattice_ks"]), alpha)
    return {"pointwise": json.loads(rep.to_json()), "stable": rep.stable(block["factor"]),
            "lattice": {**lat, "ratios": {str(k): float(v) for k, v in lat["ratios"].items()},
                        "spread": float(lat["spread"]), "bounded_within_2": bool(lat["bounded_within_2"])}}


def suite_kernel(block, out, seed, jobs):
    rows = _pmap(_kernel_item, [(a, block, seed) for a in block["alphas"]], jobs)
    for r in rows:
        p, lat = r["pointwise"], r["lattice"]
        print(f"alpha={p['alpha']:g} fitted C {p['fitted_C']} spread {p['spread']:.3f}; "
              f"lattice spread {lat['spread']:.3f}")
    ok = all(r["stable"] and r["lattice"]["bounded_within_2"] for r in rows)
    return {"alphas": rows, "seed": seed, "pass": ok}, ok


def _propagation_item(args):
    reflected, block, out = args
    cfg = SimConfig(alpha=block["alpha"], L=block["L"], N=block["N"], dt=block["dt"], T=block["T"],
                    stride=block["stride"], absorb=block["absorb"],
                    initial={**block["initial"], "reflected": reflected})
    fam = build_family(block["eps"], block["b"])
    j = block["j"]
    rec = DiagnosticsRecord("reflected" if reflected else "right", fam, block["v"], block["alpha"],
                            js=(j,), ms=(2,), decay_js=(2,))
    path = out / rec.run_id
    run(cfg, hooks=[Recorder(rec)], out_dir=path, keep_snapshots=False)
    w = rec.column(f"W_{j}")
    growth = float(np.max(w) / max(w[0], 1.0))
    rec.write(path, {"growth": growth})
    return {"run": rec.run_id, "W0": float(w[0]), "Wmax": float(np.max(w)), "growth": growth}


def suite_propagation(block, out, seed, jobs):
    from .plots import plot_comparison

    rows = _pmap(_propagation_item, [(False, block, out), (True, block, out)], jobs)
    right, refl = rows
    f = block["factor"]
    bounded = right["growth"] <= f
    grows = refl["Wmax"] / max(refl["W0"], 1e-300) > f
    plot_comparison({"right-regular": out / "right", "reflected": out / "reflected"}, f"W_{block['j']}",
                    out / "propagation.png")
    print(f"right-regular growth {right['growth']:.3g} (<= {f:g}: {bounded}); "
          f"reflected growth {refl['Wmax'] / max(refl['W0'], 1e-300):.3g} (> {f:g}: {grows})")
    return {"right": right, "reflected": refl, "right_bounded": bounded, "reflected_grows": grows,
            "pass": bounded and grows}, bounded and grows


def suite_report(block, out, seed, jobs):
    from .plots import emit_plots

    root = out
    found = {}
    for rep in sorted(root.rglob("report.json")):
        if rep.parent == root:
            continue
        found[str(rep.parent.relative_to(root))] = json.loads(rep.read_text()).get("pass")
    plots = []
    for series in sorted(root.rglob("series.csv")):
        plots += [str(p.relative_to(root)) for p in emit_plots(series.parent)]
    ok = all(v is not False for v in found.values())
    for name, v in found.items():
        print(f"{'PASS' if v else 'FAIL'} {name}")
    return {"suites": found, "plots": plots, "pass": ok}, ok


SUITES = {
    "run": suite_run,
    "verify-cutoffs": suite_cutoffs,
    "verify-identity": suite_identity,
    "verify-commutator-bound": suite_commutator,
    "soliton-test": suite_soliton,
    "kernel-bound": suite_kernel,
    "propagation-demo": suite_propagation,
    "report": suite_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgbo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUITES:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--out", help="output directory (default $DGBO_OUT/<command>)")
        s.add_argument("--seed", type=int, default=0, help="random seed (u64)")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for independent items")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2**64:
        print("error: config: --seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        block = load_config(args.command, args.config, args.override)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = output_root(args.out, args.command)
    out.mkdir(parents=True, exist_ok=True)
    if args.command != "run":
        _write_json(out / "config.json", {"schema": SCHEMA_VERSION, args.command: block, "seed": args.seed})
    try:
        report, ok = SUITES[args.command](block, out, args.seed, max(1, args.jobs))
    except BlowUpError as e:
        print(f"error: blow-up: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {args.command}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "run":
        _write_json(out / "report.json", report)
    print(f"{'PASS' if ok else 'FAIL'} {args.command} -> {out}")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
