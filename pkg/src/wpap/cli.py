"""Command-line entry point ``wpap``.

Each subcommand reads an INI configuration, runs one experiment and writes
CSV/JSON artifacts to the output directory.  ``manifest.json`` is written
last; it records the configuration hash, library versions, per-operation
timing and the produced files.  Exit status: 0 on success, 2 for invalid
configuration, 3 for numerical failure, 4 for a violated precondition and
1 for anything else.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import platform
import sys
import time
import warnings
from itertools import combinations

import numpy as np
import scipy

from . import __version__
from .ap import APSignal
from .config import (SUBCOMMANDS, ConfigError, forcing_function, parse_config,
                     scalar_function)
from .errors import ConvergenceError, PreconditionError, WpapError
from .evolution import (EvolutionFamily, LinearFamily, check_AT, check_exponents,
                        decay_curve, dichotomy, fit_estimate, TARGETS)
from .heat import HeatDemoConfig, run_demo, write_demo
from .mild import MildProblem, mild_identity_residual, solve, verify_wpap
from .pap import equivalence_transfers_pap0, is_pap0
from .weights import Weight, classify_weight, weights_equivalent

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 1, 2, 3, 4


# -- serialisation ------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    """Write rows with floats at full round-trip precision; returns ``path``."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def to_jsonable(obj):
    """Convert dataclasses, numpy values and non-finite floats for JSON."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if obj is None or isinstance(obj, str):
        return obj
    if callable(obj):
        return getattr(obj, "text", getattr(obj, "__name__", repr(obj)))
    return repr(obj)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- builders -----------------------------------------------------------------

def build_weight(entry, name):
    kind = entry["kind"]
    if kind == "constant":
        return Weight.constant(entry["value"], name=name)
    if kind == "polynomial":
        return Weight.polynomial(entry["exponent"], name=name)
    func = scalar_function(entry["expression"])
    if kind == "expression":
        return Weight.expression(func, name=name)
    lo, hi = entry["table_range"]
    nodes = np.linspace(lo, hi, entry["table_points"])
    return Weight.tabulated(nodes, func(nodes), name=name)


def build_family(sec):
    A = sec["A"]
    kw = {} if sec.get("omega") is None else {"omega": sec["omega"]}
    if sec["form"] == "constant":
        return LinearFamily.constant(A, **kw)
    if "signal" in sec:
        d = APSignal.from_terms(sec["signal"], real=True)
    else:
        d = scalar_function(sec["expression"])
    return LinearFamily.modulated(A, d, offset=sec["offset"], **kw)


def _exponents(cfg):
    e = cfg.sections.get("exponents", {"alpha": 0.6, "beta": 0.8, "mu": 0.1})
    check_exponents(e["alpha"], e["beta"], e["mu"])
    return e


def build_problem(cfg):
    fam_sec = cfg.sections["family"]
    family = build_family(fam_sec)
    prob = cfg.sections["problem"]
    ex = _exponents(cfg)
    dim = family.dim
    fns = {k: forcing_function(prob[k], dim) if k in prob else None
           for k in ("f", "g", "f_ap", "g_ap")}
    weight = None
    if prob.get("weight"):
        weight = build_weight(cfg.weights[prob["weight"]], prob["weight"])
    # the couplings default to the identity on the command line
    eye = np.eye(dim)
    p = MildProblem(family, f=fns["f"], g=fns["g"], B=prob.get("B", eye),
                    C=prob.get("C", eye),
                    K=prob["K"], alpha=ex["alpha"], beta=ex["beta"], mu=ex["mu"],
                    weight=weight, f_ap=fns["f_ap"], g_ap=fns["g_ap"],
                    dichotomy_options={"fit_window": tuple(fam_sec["fit_window"])})
    return p


def random_corpus(n, seed):
    """``n`` random trigonometric polynomials and ``n`` decaying bumps."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(n):
        freqs = rng.uniform(0.5, 3.0, 3)
        amps = rng.normal(size=3)
        out[f"random_ap_{i}"] = (lambda t, f=freqs, a=amps:
                                 np.sum(a[:, None] * np.sin(np.outer(f, np.ravel(t))),
                                        axis=0).reshape(np.shape(t)))
        a, b, c = rng.normal(), rng.uniform(0.2, 2.0), rng.uniform(-5.0, 5.0)
        out[f"random_decay_{i}"] = (lambda t, a=a, b=b, c=c:
                                    a * np.exp(-b * np.abs(np.asarray(t) - c)))
    return out


# -- subcommands --------------------------------------------------------------

class _Timer:
    def __init__(self):
        self.timing = {}

    def __call__(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timing[name] = self.timing.get(name, 0.0) + time.perf_counter() - t0


def cmd_classify_weight(cfg, out, timer):
    run = cfg.run
    weights = {k: build_weight(v, k) for k, v in cfg.weights.items()}
    records = []
    for name, w in weights.items():
        wc = timer("classify_weight", classify_weight, w, run["classify_horizons"],
                   tau_probe=run["tau_probe"], cap=run["cap"])
        records.append({"weight_id": name, **to_jsonable(wc)})
    pairs = []
    for (n1, w1), (n2, w2) in combinations(weights.items(), 2):
        v = timer("weights_equivalent", weights_equivalent, w1, w2,
                  run["equivalence_horizons"], cap=run["cap"])
        pairs.append({"weights": [n1, n2], **to_jsonable(v)})
    files = [write_json(os.path.join(out, "classification.json"),
                        {"weights": records, "equivalence": pairs})]
    files.append(write_csv(os.path.join(out, "classification.csv"),
                           ["weight_id", "in_U_infinity", "in_U_B", "translation_invariant"],
                           [(r["weight_id"], r["in_U_infinity"], r["in_U_B"],
                             r["translation_invariant"]) for r in records]))
    return files, {"weights": len(records), "pairs": len(pairs)}


def cmd_test_pap0(cfg, out, timer):
    run = cfg.run
    weights = {k: build_weight(v, k) for k, v in cfg.weights.items()}
    corpus = dict(cfg.corpus)
    corpus.update(random_corpus(run["random_members"], cfg.seed))
    rows, decisions = [], {}
    for fname, fn in corpus.items():
        decisions[fname] = {}
        for wname, w in weights.items():
            dev = timer("is_pap0", is_pap0, fn, w, run["horizons"], run["tol"],
                        run["decay_threshold"])
            decisions[fname][wname] = {"is_pap0": dev.decays_to_zero,
                                       "fitted_rate": dev.fitted_rate,
                                       "ratios": dev.ratios}
            rows.extend((fname, wname, T, v) for T, v in zip(dev.horizons, dev.values))
    transfers = []
    for (n1, w1), (n2, w2) in combinations(weights.items(), 2):
        v = weights_equivalent(w1, w2, run["equivalence_horizons"], cap=run["cap"])
        if v.equivalent:
            rep = timer("equivalence_transfer", equivalence_transfers_pap0, w1, w2,
                        corpus, run["horizons"], run["equivalence_horizons"],
                        run["tol"], run["decay_threshold"])
            transfers.append({"weights": [n1, n2], "agree": rep.agree,
                              "falsifications": rep.falsifications})
    files = [write_csv(os.path.join(out, "deviations.csv"),
                       ["function", "weight", "T", "value"], rows),
             write_json(os.path.join(out, "decisions.json"),
                        {"decisions": decisions, "transfers": transfers})]
    return files, {"functions": len(corpus), "weights": len(weights)}


def _dichotomy_for(cfg, timer):
    sec = cfg.sections["family"]
    family = build_family(sec)
    ef = EvolutionFamily(family)
    dd = timer("dichotomy", dichotomy, ef, fit_window=tuple(sec["fit_window"]))
    return family, ef, dd


def cmd_verify_dichotomy(cfg, out, timer):
    family, ef, dd = _dichotomy_for(cfg, timer)
    at = timer("check_AT", check_AT, family)
    lo, hi = cfg.sections["family"]["fit_window"]
    taus = np.geomspace(lo, hi, 40)
    stable = decay_curve(ef, dd, taus)
    unstable = np.array([max(np.linalg.norm(ef.propagator(s - tau, s) @ dd.Q, 2)
                             for s in np.linspace(-20.0, 20.0, 9)) for tau in taus])
    checks = {k: v for k, v in dd.checks.items() if k != "curves"}
    files = [write_json(os.path.join(out, "dichotomy.json"),
                        {"P": dd.P, "N": dd.N, "delta": dd.delta,
                         "delta_stable": dd.delta_stable,
                         "delta_unstable": dd.delta_unstable,
                         "checks": checks, "AT": at}),
             write_csv(os.path.join(out, "decay.csv"),
                       ["tau", "stable_norm", "unstable_norm"],
                       zip(taus, stable, unstable))]
    return files, {"N": dd.N, "delta": dd.delta, "AT_passed": at.passed}


def cmd_fit_estimates(cfg, out, timer):
    _, ef, dd = _dichotomy_for(cfg, timer)
    ex = _exponents(cfg)
    window = tuple(cfg.sections["family"]["fit_window"])
    fits, rows = {}, []
    for target in TARGETS:
        fit = timer("fit_estimate", fit_estimate, ef, dd, target, ex["alpha"],
                    ex["beta"], ex["mu"], fit_window=window)
        fits[target] = {k: v for k, v in to_jsonable(fit).items()
                        if k not in ("taus", "bounds", "residuals")}
        rows.extend((target, tau, b) for tau, b in zip(fit.taus, fit.bounds))
    files = [write_json(os.path.join(out, "estimates.json"),
                        {"exponents": ex, "delta": dd.delta, "N": dd.N, "fits": fits}),
             write_csv(os.path.join(out, "estimates.csv"),
                       ["target", "tau", "bound"], rows)]
    return files, {t: f["rate_ok"] for t, f in fits.items()}


def cmd_solve_mild(cfg, out, timer):
    p = timer("build_problem", build_problem, cfg)
    sv = cfg.sections.get("solver") or {"T_out": 10.0, "step": 0.02, "solve_tol": 1e-10,
                                        "max_iters": 200, "quad_tol": 1e-10}
    u, report = timer("solve", solve, p, sv["T_out"], step=sv["step"],
                      solve_tol=sv["solve_tol"], max_iters=sv["max_iters"],
                      quad_tol=sv["quad_tol"], override_gate=cfg.override_gate)
    vals = u.values.reshape(len(u.t), -1)
    files = [write_csv(os.path.join(out, "solution.csv"),
                       ["t"] + [f"u{i}" for i in range(vals.shape[1])],
                       [(t, *row) for t, row in zip(u.t, vals)])]
    payload = {"fixed_point": report, "delta": p.dd.delta, "N": p.dd.N}
    ver = cfg.sections.get("verify")
    if ver is not None:
        pairs = np.asarray(ver["identity_pairs"], dtype=float).reshape(-1, 2)
        payload["mild_identity_residual"] = timer(
            "mild_identity_residual", mild_identity_residual, u, p, pairs)
        if p.weight is not None:
            wp = timer("verify_wpap", verify_wpap, u, p, horizons=ver.get("horizons"),
                       eps=ver["eps"], window_length=ver["window_length"],
                       solve_kwargs={"override_gate": cfg.override_gate},
                       tol=cfg.run["tol"], decay_threshold=cfg.run["decay_threshold"])
            payload["wpap"] = {"passed": wp.passed, "deviation": wp.deviation,
                               "certificate": wp.certificate}
    files.append(write_json(os.path.join(out, "report.json"), payload))
    return files, {"iterates": report.iterates, "converged": report.converged,
                   "contraction_estimate": report.contraction_estimate}


def cmd_heat_demo(cfg, out, timer):
    sec = cfg.sections.get("heat", {})
    hc = HeatDemoConfig(**sec, override_gate=cfg.override_gate)
    res = timer("heat_demo", run_demo, hc)
    files = timer("write", write_demo, res, out)
    summary = {"iterates": res.report.iterates,
               "contraction_estimate": res.report.contraction_estimate}
    if res.wpap is not None:
        summary["wpap_passed"] = res.wpap.passed
    summary.update(res.benchmark or {})
    return files, summary


COMMANDS = {
    "classify-weight": cmd_classify_weight,
    "test-pap0": cmd_test_pap0,
    "verify-dichotomy": cmd_verify_dichotomy,
    "fit-estimates": cmd_fit_estimates,
    "solve-mild": cmd_solve_mild,
    "heat-demo": cmd_heat_demo,
}


def run(cfg):
    """Run a validated configuration and write its artifacts.

    Returns the summary dictionary that is also stored in the manifest.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    np.random.seed(cfg.seed)  # legacy global state, for user expressions
    timer = _Timer()
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        files, summary = COMMANDS[cfg.subcommand](cfg, cfg.out_dir, timer)
    manifest = {
        "subcommand": cfg.subcommand,
        "config": os.path.basename(cfg.config_path),
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "override_contraction_gate": cfg.override_gate,
        "versions": {"wpap": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timing_seconds": {**timer.timing, "total": time.perf_counter() - t0},
        "warnings": sorted({str(w.message) for w in caught}),
        "summary": summary,
        "files": [{"path": os.path.relpath(f, cfg.out_dir), "sha256": _sha256(f)}
                  for f in files],
    }
    write_json(os.path.join(cfg.out_dir, "manifest.json"), manifest)
    return manifest


def main(argv=None):
    ap = argparse.ArgumentParser(prog="wpap", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default="wpap-out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override run.seed")
    ap.add_argument("--override-contraction-gate", action="store_true",
                    help="iterate even when the contraction estimate exceeds the gate")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.subcommand, args.out, args.seed)
        cfg.override_gate = args.override_contraction_gate
        manifest = run(cfg)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (WpapError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001 - reported with a category
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    print(json.dumps(to_jsonable(manifest["summary"]), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
