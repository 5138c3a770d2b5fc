"""Run configuration: INI parsing, validation and safe expressions.

A configuration is an INI file.  Every section and key is checked against a
schema; unknown names are rejected and all violations are reported together.
Signals and forcings are written as numpy-style expressions in ``t`` (and
``u``, ``x`` where relevant), evaluated by a small AST interpreter that
admits only arithmetic and a fixed set of functions.
"""

import ast
import configparser
import hashlib
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# -- safe expressions ---------------------------------------------------------

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "sinh": np.sinh,
    "cosh": np.cosh, "arctan": np.arctan, "sign": np.sign,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow, ast.Mod: operator.mod}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_COMPARE = {ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt,
            ast.GtE: operator.ge}


class Expression:
    """Compiled expression over a fixed set of variable names."""

    def __init__(self, text, variables=("t",)):
        self.text = text
        self.variables = tuple(variables)
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse {text!r}: {exc.msg}") from None
        self._check(tree.body)
        self.tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ValueError(f"literal {node.value!r} not allowed")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTS:
                raise ValueError(f"unknown name {node.id!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ValueError("operator not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ValueError("operator not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Compare):
            if len(node.ops) != 1 or type(node.ops[0]) not in _COMPARE:
                raise ValueError("only single comparisons are allowed")
            self._check(node.left)
            self._check(node.comparators[0])
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ValueError("function not allowed")
            if node.keywords:
                raise ValueError("keyword arguments not allowed")
            for arg in node.args:
                self._check(arg)
        elif isinstance(node, (ast.List, ast.Tuple)):
            for elt in node.elts:
                self._check(elt)
        elif isinstance(node, ast.Subscript):
            if not (isinstance(node.value, ast.Name) and node.value.id == "u"):
                raise ValueError("only u may be indexed")
            if not (isinstance(node.slice, ast.Constant)
                    and isinstance(node.slice.value, int)):
                raise ValueError("index must be an integer literal")
        else:
            raise ValueError(f"syntax {type(node).__name__} not allowed")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env),
                                          self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Compare):
            return _COMPARE[type(node.ops[0])](self._eval(node.left, env),
                                               self._eval(node.comparators[0], env))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*(self._eval(a, env) for a in node.args))
        if isinstance(node, (ast.List, ast.Tuple)):
            # one entry per component, stacked along the last axis
            parts = np.broadcast_arrays(*(np.asarray(self._eval(e, env), dtype=float)
                                          for e in node.elts))
            if parts[0].ndim >= 2:
                return np.concatenate(parts, axis=-1)
            return np.stack(parts, axis=-1)
        # u[k]: column k of the state, kept two-dimensional for broadcasting
        k = node.slice.value
        return env["u"][:, k:k + 1]

    def __call__(self, **env):
        return self._eval(self.tree, env)


def scalar_function(text):
    """``t -> value`` from an expression in ``t``."""
    expr = Expression(text, ("t",))

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(expr(t=t), dtype=float), t.shape).copy()
    f.text = text
    return f


def forcing_function(text, dim):
    """``(t, V) -> (n, dim)`` from an expression in ``t`` and ``u``.

    ``t`` enters as a column so that ``sin(t) + 0.1 * u`` broadcasts over
    components; a list literal gives one entry per component.
    """
    expr = Expression(text, ("t", "u"))

    def f(t, V):
        t = np.asarray(t, dtype=float)
        n = t.size
        val = expr(t=t[:, None], u=V)
        return np.broadcast_to(np.asarray(val, dtype=float), (n, dim)).copy()
    f.text = text
    return f


# -- schema -------------------------------------------------------------------

def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _floats(s):
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _matrix(s):
    val = np.asarray(ast.literal_eval(s), dtype=float)
    return np.atleast_2d(val)


def _terms(s):
    """``freq re im; freq re im; ...`` triples for an AP signal."""
    out = []
    for chunk in s.split(";"):
        if chunk.strip():
            parts = [float(v) for v in chunk.replace(",", " ").split()]
            if len(parts) != 3:
                raise ValueError("each term needs frequency, real and imaginary part")
            out.append(tuple(parts))
    return out


def _choice(*opts):
    def parse(s):
        s = s.strip()
        if s not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
        return s
    return parse


def _text(s):
    return s.strip()


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


# key -> (parser, default); default None means optional and absent
SCHEMA = {
    "run": {
        "seed": (_int, 0),
        "horizons": (_floats, [20.0, 40.0, 80.0, 160.0, 320.0]),
        "equivalence_horizons": (_floats, [500.0, 1000.0, 2000.0]),
        "classify_horizons": (_floats, [100.0, 200.0, 400.0]),
        "tol": (_float, 1e-2),
        "decay_threshold": (_float, 0.75),
        "cap": (_float, 1e6),
        "tau_probe": (_floats, [1.0, 5.0, -5.0]),
        "random_members": (_int, 0),
    },
    "weight": {
        "kind": (_choice("constant", "polynomial", "expression", "tabulated"), "constant"),
        "value": (_float, 1.0),
        "exponent": (_int, 0),
        "expression": (_text, None),
        "table_range": (_floats, [-8.0, 8.0]),
        "table_points": (_int, 1601),
    },
    "family": {
        "form": (_choice("constant", "modulated"), "constant"),
        "A": (_matrix, None),
        "signal": (_terms, None),
        "expression": (_text, None),
        "offset": (_float, 0.0),
        "omega": (_float, None),
        "fit_window": (_floats, [0.5, 20.0]),
    },
    "exponents": {
        "alpha": (_float, 0.6),
        "beta": (_float, 0.8),
        "mu": (_float, 0.1),
    },
    "problem": {
        "K": (_float, 0.0),
        "B": (_matrix, None),
        "C": (_matrix, None),
        "f": (_text, None),
        "g": (_text, None),
        "f_ap": (_text, None),
        "g_ap": (_text, None),
        "weight": (_text, None),
    },
    "solver": {
        "T_out": (_float, 10.0),
        "step": (_float, 0.02),
        "solve_tol": (_float, 1e-10),
        "max_iters": (_int, 200),
        "quad_tol": (_float, 1e-10),
    },
    "verify": {
        "eps": (_float, 1e-2),
        "window_length": (_float, 2 * math.pi),
        "horizons": (_floats, None),
        "identity_pairs": (_floats, [-5.0, -4.0, 0.0, 1.0]),
    },
    "heat": {
        "n": (_int, 15),
        "length": (_float, 1.0),
        "m": (_int, 2),
        "gamma": (_float, 1393.0 / 985.0),
        "K_nl": (_float, 1e-4),
        "alpha": (_float, 0.6),
        "beta": (_float, 0.8),
        "mu": (_float, 0.1),
        "T_out": (_float, 40.0),
        "step": (_float, 0.05),
        "solve_tol": (_float, 1e-10),
        "forcing": (_choice("wpap", "zero", "single-mode"), "wpap"),
        "horizons": (_floats, [5.0, 10.0, 20.0, 40.0]),
    },
}

# keys that must be strictly positive wherever they appear
POSITIVE = {"tol", "cap", "value", "step", "solve_tol", "quad_tol", "eps",
            "window_length", "T_out", "length", "max_iters", "table_points"}
NON_NEGATIVE = {"K", "K_nl", "exponent", "m", "random_members"}
SCHEDULES = {"horizons", "equivalence_horizons", "classify_horizons"}

REQUIRED = {
    "classify-weight": ["weight:*"],
    "test-pap0": ["weight:*", "corpus"],
    "verify-dichotomy": ["family"],
    "fit-estimates": ["family"],
    "solve-mild": ["family", "problem"],
    "heat-demo": [],
}
SUBCOMMANDS = tuple(REQUIRED)
MIN_SCHEDULE_RATIO = 1.5


@dataclass
class RunConfig:
    subcommand: str
    config_path: str
    out_dir: str
    seed: int
    run: dict
    weights: dict = field(default_factory=dict)
    corpus: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    config_hash: str = ""
    override_gate: bool = False


def _check_schedule(key, values, where, violations):
    h = np.asarray(values, dtype=float)
    if h.size < 2 or np.any(h <= 0):
        violations.append(f"{where}.{key}: need at least two positive horizons")
        return
    ratios = h[1:] / h[:-1]
    if np.any(ratios < MIN_SCHEDULE_RATIO):
        violations.append(f"{where}.{key}: horizon ratio {ratios.min():g} "
                          f"below {MIN_SCHEDULE_RATIO}")
    elif np.ptp(ratios) > 1e-9 * ratios.mean():
        violations.append(f"{where}.{key}: schedule must be geometric")


def _parse_section(name, schema, items, violations):
    out = {}
    for key, raw in items:
        if key not in schema:
            violations.append(f"{name}.{key}: unknown key")
            continue
        parser = schema[key][0]
        try:
            val = parser(raw)
        except (ValueError, SyntaxError, TypeError) as exc:
            violations.append(f"{name}.{key}: {exc}")
            continue
        if key in POSITIVE and not val > 0:
            violations.append(f"{name}.{key}: must be positive")
        if key in NON_NEGATIVE and val < 0:
            violations.append(f"{name}.{key}: must be non-negative")
        if key in SCHEDULES:
            _check_schedule(key, val, name, violations)
        out[key] = val
    for key, (_, default) in schema.items():
        if key not in out and default is not None:
            out[key] = default
    return out


def parse_config(path, subcommand, out_dir=".", seed=None):
    """Read and validate ``path`` for ``subcommand``.

    Raises
    ------
    ConfigError
        With every violation found (unknown sections or keys, bad values,
        missing sections).
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    violations = []
    try:
        parser.read_string(raw.decode("utf-8"), source=path)
    except configparser.Error as exc:
        raise ConfigError([f"malformed file: {exc}"]) from None

    run, weights, corpus, sections = None, {}, {}, {}
    for name in parser.sections():
        items = list(parser.items(name, raw=True))
        if name == "run":
            run = _parse_section(name, SCHEMA["run"], items, violations)
        elif name.startswith("weight:"):
            wid = name.split(":", 1)[1].strip()
            if not wid:
                violations.append(f"{name}: weight needs a name")
                continue
            weights[wid] = _parse_section(name, SCHEMA["weight"], items, violations)
            kind = weights[wid]["kind"]
            if kind in ("expression", "tabulated") and "expression" not in weights[wid]:
                violations.append(f"{name}.expression: required for kind {kind}")
        elif name == "corpus":
            for key, text in items:
                try:
                    corpus[key] = scalar_function(text)
                except ValueError as exc:
                    violations.append(f"corpus.{key}: {exc}")
        elif name in SCHEMA:
            sections[name] = _parse_section(name, SCHEMA[name], items, violations)
        else:
            violations.append(f"{name}: unknown section")
    if run is None:
        run = _parse_section("run", SCHEMA["run"], [], violations)
    if not 0 < run["decay_threshold"] < 1:
        violations.append("run.decay_threshold: must lie in (0, 1)")

    for req in REQUIRED[subcommand]:
        if req == "weight:*":
            if not weights:
                violations.append("missing a [weight:NAME] section")
        elif req == "corpus":
            if not corpus:
                violations.append("missing or empty [corpus] section")
        elif req not in sections:
            violations.append(f"missing [{req}] section")

    fam = sections.get("family")
    if fam is not None:
        if "A" not in fam:
            violations.append("family.A: required")
        if fam["form"] == "modulated" and "signal" not in fam and "expression" not in fam:
            violations.append("family: modulated form needs signal or expression")
        if len(fam["fit_window"]) != 2 or not 0 < fam["fit_window"][0] < fam["fit_window"][1]:
            violations.append("family.fit_window: need 0 < start < end")
    prob = sections.get("problem")
    if prob is not None:
        for key in ("f", "g", "f_ap", "g_ap"):
            if key in prob:
                try:
                    Expression(prob[key], ("t", "u"))
                except ValueError as exc:
                    violations.append(f"problem.{key}: {exc}")
        if prob.get("weight") and prob["weight"] not in weights:
            violations.append(f"problem.weight: no [weight:{prob['weight']}] section")
    for key in ("expression",):
        if fam is not None and key in fam:
            try:
                Expression(fam[key])
            except ValueError as exc:
                violations.append(f"family.{key}: {exc}")
    for wid, w in weights.items():
        if "expression" in w:
            try:
                Expression(w["expression"])
            except ValueError as exc:
                violations.append(f"weight:{wid}.expression: {exc}")
    reach = max(max(run["horizons"] + run["classify_horizons"]
                    + run["equivalence_horizons"]), 0.0) + max(map(abs, run["tau_probe"]), default=0.0)
    for wid, w in weights.items():
        if w["kind"] == "tabulated":
            lo, hi = (w["table_range"] + [0.0, 0.0])[:2]
            if len(w["table_range"]) != 2 or lo >= hi:
                violations.append(f"weight:{wid}.table_range: need start < end")
            elif subcommand in ("classify-weight", "test-pap0") and (lo > -reach or hi < reach):
                violations.append(f"weight:{wid}.table_range: must cover "
                                  f"[-{reach:g}, {reach:g}] (largest horizon plus shift)")
    ver = sections.get("verify")
    if ver is not None and "horizons" in ver:
        if len(ver["horizons"]) < 4:
            violations.append("verify.horizons: need at least 4 horizons")
        t_out = sections.get("solver", {}).get("T_out", SCHEMA["solver"]["T_out"][1])
        if ver["horizons"] and max(ver["horizons"]) > t_out:
            violations.append("verify.horizons: largest horizon exceeds solver.T_out")
    if violations:
        raise ConfigError(violations)
    return RunConfig(subcommand, path, out_dir,
                     run["seed"] if seed is None else int(seed), run, weights,
                     corpus, sections, hashlib.sha256(raw).hexdigest())
