"""Experiment registry and command line: run, report, list, validate.

A run writes three artifacts into its output directory:

* ``events.jsonl``: one JSON object ``{stage, module, op, data}`` per engine
  action or invariant check, in engine order;
* ``summary.csv``: pass/fail counts per invariant;
* ``state.json``: parameters, measured constants and the final state.

Outputs contain no timestamps or absolute paths, so identical specs give
byte-identical files.  A seed only shapes scripted inputs, never engine order.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .constructions import (
    ConstructionRun,
    blr_script_from,
    build_blr_pi_class,
    build_jump_traceable_tree,
    build_ktrivial_point_trees,
    build_weakly_ktrivial,
    functionals_from_script,
    load_script,
    random_functionals,
)
from .core_numeric import ContractViolation, as_fraction
from .derivative import denjoy_probe, oscillating_oracle
from .machines import UniversalMachine, solovay_audit, standard_registry
from .martingale import debt_free_convert, exact_oracle, slope_table
from .metric import (
    SPACES,
    CauchyName,
    cantor_embedding_map,
    cantor_index,
    cantor_space,
    get_space,
    identity_map,
)
from .randtests import (
    difference_test_omega,
    nested_union_failures,
    omega_change_test,
    porosity_difference_test,
    sample_porous_classes,
)
from .triviality import description_ml_test, lipschitz_transfer_check

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    """Unknown experiment, ill-typed parameter or malformed script."""


# ---------------------------------------------------------------- recording


def _jsonable(x):
    if isinstance(x, Fraction):
        return format_fraction(x)
    if isinstance(x, float):
        if x == float("inf"):
            return "inf"
        if x == float("-inf"):
            return "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return [_jsonable(v) for v in sorted(x)]
    if hasattr(x, "to_json"):
        return _jsonable(x.to_json())
    return x


def format_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


@dataclass
class Tally:
    module: str
    name: str
    total: int = 0
    failed: int = 0
    first_stage: Optional[int] = None
    first_line: Optional[int] = None


class Recorder:
    def __init__(self):
        self.lines: list[str] = []
        self.tallies: dict[tuple[str, str], Tally] = {}

    def event(self, stage: int, module: str, op: str, **data) -> int:
        self.lines.append(_dumps({"stage": stage, "module": module, "op": op, "data": data}))
        return len(self.lines)

    def check(self, stage: int, module: str, name: str, ok: bool, **detail) -> bool:
        line = self.event(stage, module, "check", name=name, ok=bool(ok), **detail)
        t = self.tallies.setdefault((module, name), Tally(module, name))
        t.total += 1
        if not ok:
            t.failed += 1
            if t.first_line is None:
                t.first_stage, t.first_line = stage, line
        return bool(ok)

    def absorb(self, run: ConstructionRun, module: str = "constructions") -> None:
        """Merge a construction's events and checks in stage order, events first."""
        items = [(e["stage"], 0, i, e) for i, e in enumerate(run.events)]
        items += [(c["stage"], 1, i, c) for i, c in enumerate(run.checks)]
        for stage, kind, _, rec in sorted(items, key=lambda t: t[:3]):
            if kind == 0:
                self.event(stage, module, rec["action"], **rec["data"])
            else:
                self.check(stage, module, rec["check"], rec["ok"], **rec.get("detail", {}))

    @property
    def violations(self) -> int:
        return sum(t.failed for t in self.tallies.values())

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["module", "invariant", "checks", "passed", "failed",
                         "first_failure_stage", "first_failure_line"])
        for (module, name), t in sorted(self.tallies.items()):
            writer.writerow([module, name, t.total, t.total - t.failed, t.failed,
                             "" if t.first_stage is None else t.first_stage,
                             "" if t.first_line is None else t.first_line])
        return buf.getvalue()


# ---------------------------------------------------------------- experiments


@dataclass
class ExperimentSpec:
    id: str
    params: dict = field(default_factory=dict)
    stages: Optional[int] = None
    seed: int = 0
    script: Optional[str] = None
    out: str = "runs"

    def to_json(self) -> dict:
        return {"id": self.id, "params": {k: str(v) for k, v in sorted(self.params.items())},
                "stages": self.stages, "seed": self.seed, "script": self.script}


@dataclass(frozen=True)
class Experiment:
    id: str
    description: str
    stages: int
    defaults: dict
    runner: Callable[["Context"], dict]
    takes_script: bool = False


@dataclass
class Context:
    stages: int
    params: dict
    seed: int
    script: Optional[dict]
    rec: Recorder


def _machine_constants(U: UniversalMachine) -> dict:
    return {m.name: m.reserved_constant for m in U.registry}


def _weakly_ktrivial(ctx: Context) -> dict:
    U = UniversalMachine()
    standard_registry(U, per_stage=ctx.params["per_stage"])
    run = build_weakly_ktrivial(ctx.stages, U, check_lag=ctx.params["lag"])
    ctx.rec.absorb(run)
    return {"constants": {**_machine_constants(U), "c_M": run.state["c_M"]}, "state": run.state}


def _denjoy_martingale(ctx: Context) -> dict:
    p = ctx.params
    rec = ctx.rec
    depth = p["depth"]
    a = p["slope"]
    g = exact_oracle(lambda x: a * x + x * x, f"{a}x+x^2")
    for label, shift in (("slope", Fraction(0)), ("shifted", Fraction(1, 3))):
        M = slope_table(g, shift, depth)
        bad = M.fairness_violations()
        rec.check(0, "martingale", f"fairness[{label}]", not bad, nodes=bad[:5])
    M = debt_free_convert(g, "", depth)
    rec.check(0, "martingale", "fairness[debt_free]", not M.fairness_violations())
    rec.check(0, "martingale", "nonnegative[debt_free]", not M.negative_nodes(),
              nodes=M.negative_nodes()[:5])
    for node, case in sorted(M.cases.items(), key=lambda t: (len(t[0]), t[0])):
        if len(node) < 4:
            rec.event(len(node), "martingale", "bet", node=node, case=list(case),
                      capital=M.values[node])
    z = p["z"]
    scales = [Fraction(1, 1 << k) for k in range(2, 2 + p["scales"])]
    report = denjoy_probe(oscillating_oracle(z), z, scales)
    rec.event(0, "derivative", "denjoy_probe", **report.to_json())
    rec.check(0, "derivative", "oscillator_two_sided",
              report.classification == "two-sided diverging", label=report.classification)
    return {"constants": {"threshold": 4}, "state": {"root": M.values[""], "flags": len(M.flags)}}


def _porosity_test(ctx: Context) -> dict:
    p = ctx.params
    classes = sample_porous_classes()
    names = sorted(classes) if p["class"] == "all" else [p["class"]]
    if any(n not in classes for n in names):
        raise UsageError(f"unknown class {p['class']!r}; choose from {sorted(classes)} or all")
    c, n_max, t, max_len = p["c"], p["n_max"], p["t"], p["max_len"]
    state = {}
    for name in names:
        C = classes[name]
        for n in range(1, n_max + 1):
            r = porosity_difference_test(C, c, n, t, max_len, check=False)
            bound = (1 - Fraction(1, 1 << (c + 2))) ** n
            node_ok = all(x["ok"] for x in r.node_checks)
            ctx.rec.check(t, "randtests", "porosity_node_bound", node_ok, cls=name, n=n)
            ctx.rec.check(t, "randtests", "porosity_level_bound", r.measure_stage <= bound,
                          cls=name, n=n, measure=r.measure_stage, bound=bound)
            state[f"{name}:{n}"] = r.measure_stage
        for s in range(t):
            bad = nested_union_failures(C, c, 1, s, max_len)
            ctx.rec.check(s, "randtests", "nested_union", not bad, cls=name, strings=bad[:5])
    return {"constants": {"c": c}, "state": state}


def _ktrivial_point_trees(ctx: Context) -> dict:
    p = ctx.params
    U = UniversalMachine()
    standard_registry(U)
    space = get_space(p["space"])
    run = build_ktrivial_point_trees(space, p["b"], p["n_star"], p["p_tilde"], ctx.stages, U,
                                     max_level=p["max_level"])
    ctx.rec.absorb(run)
    return {"constants": {**_machine_constants(U), "c_L": run.state["c_L"]}, "state": run.state}


def _omega_difference(ctx: Context) -> dict:
    p = ctx.params
    U = UniversalMachine()
    standard_registry(U)
    step = max(1, ctx.stages // p["probes"])
    for s in range(0, ctx.stages + 1, step):
        U.run_universal_stage(s)
        for n in range(p["n_max"] + 1):
            r = difference_test_omega(U, n, s)
            ctx.rec.check(s, "randtests", "difference_measure", r.measure <= Fraction(1, 1 << n),
                          n=n, measure=r.measure)
            ctx.rec.check(s, "randtests", "omega_in_P_and_U", r.alpha_inside, n=n,
                          on_dyadic_boundary=r.alpha == r.right)
    ledger = omega_change_test(U, ctx.stages)
    for e in ledger.entries:
        ctx.rec.event(e.stage, "randtests", "solovay_interval", position=e.position, string=e.string,
                      weight=e.weight)
        omega = U.omega_at(e.stage)
        ctx.rec.check(e.stage, "randtests", "interval_contains_omega",
                      _cylinder_contains(e.string, omega), string=e.string)
    for pos, w in sorted(ledger.weight_by_position().items()):
        flips = sum(1 for e in ledger.entries if e.position == pos)
        ctx.rec.check(ctx.stages, "randtests", "position_weight",
                      w == flips * Fraction(1, 1 << (pos + 1)), position=pos, weight=w)
    return {"constants": _machine_constants(U),
            "state": {"omega": U.omega_at(ctx.stages), "ledger_weight": ledger.total_weight,
                      "intervals": len(ledger.entries)}}


def _cylinder_contains(sigma: str, x: Fraction) -> bool:
    lo = Fraction(int(sigma, 2) if sigma else 0, 1 << len(sigma))
    return lo <= x < lo + Fraction(1, 1 << len(sigma))


def _jump_traceable_tree(ctx: Context) -> dict:
    p = ctx.params
    if ctx.script is not None:
        functionals = functionals_from_script(ctx.script)
    else:
        functionals = random_functionals(ctx.seed, p["functionals"], p["per_functional"], ctx.stages)
    run = build_jump_traceable_tree(p["eps"], functionals, ctx.stages, depth=p["depth"])
    ctx.rec.absorb(run)
    return {"constants": {"eps": p["eps"]}, "state": run.state}


DEFAULT_BLR_SCRIPT = {
    "i_max": 3,
    "phi": {"0": [[None, 1, 4]], "1": [[None, 0, 9]], "2": [[None, 1, 15]]},
    "q": [[0, 1, 3], [1, 2, 7], [0, 3, 12]],
    "gamma": {"0": [["0", 1, 2, 1], ["1", 1, 5, 0], ["01", 3, 13, 1]],
              "1": [["1", 2, 8, 1], ["", 2, 10, 0]]},
}


def _blr_class(ctx: Context) -> dict:
    script = blr_script_from(ctx.script if ctx.script is not None else DEFAULT_BLR_SCRIPT)
    run = build_blr_pi_class(script, ctx.stages)
    ctx.rec.absorb(run)
    return {"constants": {"i_max": script.i_max}, "state": run.state}


def _solovay_audit(ctx: Context) -> dict:
    p = ctx.params
    U = UniversalMachine()
    if p["registry"] == "standard":
        standard_registry(U, per_stage=p["per_stage"])
    elif p["registry"] != "empty":
        raise UsageError("registry must be standard or empty")
    audit = solovay_audit(U, p["r_max"], ctx.stages)
    ctx.rec.check(ctx.stages, "machines", "solovay_dominates", audit.passed,
                  violations=audit.violations[:5], pending=len(audit.pending))
    for n in sorted(audit.equality_hits)[:20]:
        ctx.rec.event(ctx.stages, "machines", "equality_hit", n=n, K=audit.equality_hits[n])
    prev = Fraction(0)
    for s in range(ctx.stages + 1):
        omega = U.omega_at(s)
        ctx.rec.check(s, "machines", "kraft", omega <= 1, omega=omega)
        ctx.rec.check(s, "machines", "omega_monotone", omega >= prev)
        prev = omega
    return {"constants": {**_machine_constants(U), "c_M": audit.c_M},
            "state": {"equality_hits": len(audit.equality_hits), "pending": len(audit.pending),
                      "omega": U.omega_at(ctx.stages)}}


def _triviality_suite(ctx: Context) -> dict:
    p = ctx.params
    b, s = p["b"], ctx.stages
    U = UniversalMachine()
    standard_registry(U)
    U.run_universal_stage(s)
    C = cantor_space()
    for b_probe in range(b + 1):
        t = description_ml_test(C, b_probe, s, U)
        ctx.rec.check(s, "triviality", "description_weight", t.within_bound, b=b_probe,
                      weight=t.weight, bound=t.bound)
    bits = p["bits"]
    z = CauchyName(tuple(cantor_index(bits[:k]) for k in range(len(bits))), C)
    maps = {"identity": (identity_map(C), range(1, 9))}
    F = cantor_embedding_map()
    maps["cantor_embed"] = (F, range(F.inverse_lipschitz_exponent + 1, F.inverse_lipschitz_exponent + 5))
    constants = _machine_constants(U)
    for name, (G, n_range) in maps.items():
        rep = lipschitz_transfer_check(G, z, n_range, s, search_bound=1 << 10)
        for row in rep.rows:
            ctx.rec.check(s, "triviality", f"lipschitz_transfer[{name}]", row["status"] != "fails", **row)
        constants[f"c_L[{name}]"] = rep.c_L
    return {"constants": constants, "state": {"bits": bits}}


def _int(x):
    return int(x)


REGISTRY: dict[str, Experiment] = {}


def _register(exp: Experiment) -> None:
    REGISTRY[exp.id] = exp


_register(Experiment("weakly-ktrivial", "marker construction of a weakly K-trivial co-c.e. set",
                     300, {"per_stage": 4, "lag": 2}, _weakly_ktrivial))
_register(Experiment("denjoy-martingale", "slope martingales, debt-free conversion and a Denjoy probe",
                     0, {"depth": 10, "slope": Fraction(5), "z": Fraction(1, 3), "scales": 8},
                     _denjoy_martingale))
_register(Experiment("porosity-test", "difference test from porosity on hand-built classes",
                     0, {"class": "all", "c": 2, "n_max": 4, "t": 7, "max_len": 10}, _porosity_test))
_register(Experiment("ktrivial-point-trees", "trees of compressible names and the machine L",
                     200, {"space": "TreeSpace", "b": 8, "n_star": 2, "p_tilde": 4, "max_level": 12},
                     _ktrivial_point_trees))
_register(Experiment("omega-difference", "difference test and Solovay test ledger for Omega",
                     200, {"n_max": 10, "probes": 50}, _omega_difference))
_register(Experiment("jump-traceable-tree", "tree collapses tracing scripted functionals",
                     300, {"eps": Fraction(1), "functionals": 3, "per_functional": 20, "depth": 10},
                     _jump_traceable_tree, takes_script=True))
_register(Experiment("blr-class", "R and Q strategies building a Pi-0-1 class with traces",
                     20, {}, _blr_class, takes_script=True))
_register(Experiment("solovay-function-audit", "Solovay function domination and Kraft audit",
                     300, {"registry": "standard", "r_max": 1000, "per_stage": 4}, _solovay_audit))
_register(Experiment("triviality-suite", "description test weights and Lipschitz transfer",
                     60, {"b": 4, "bits": "011010011001011011001011"}, _triviality_suite))


def _coerce(default, text: str):
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes"):
                return True
            if text.lower() in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, Fraction):
            return as_fraction(text)
        return str(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot read {text!r} as {type(default).__name__}") from exc


def resolve(spec: ExperimentSpec) -> tuple[Experiment, dict, Optional[dict]]:
    """Validate a spec against the registry; returns the experiment, typed params and script."""
    if spec.id not in REGISTRY:
        raise UsageError(f"unknown experiment {spec.id!r}; known: {', '.join(sorted(REGISTRY))}")
    exp = REGISTRY[spec.id]
    params = dict(exp.defaults)
    for key, value in spec.params.items():
        if key not in exp.defaults:
            raise UsageError(f"{spec.id}: unknown parameter {key!r}")
        params[key] = value if not isinstance(value, str) else _coerce(exp.defaults[key], value)
    if "space" in params and params["space"] not in SPACES:
        raise UsageError(f"unknown space {params['space']!r}; known: {', '.join(sorted(SPACES))}")
    if "eps" in params and params["eps"] <= 0:
        raise UsageError("eps must be positive")
    script = None
    if spec.script is not None:
        if not exp.takes_script:
            raise UsageError(f"{spec.id} takes no script")
        try:
            script = load_script(spec.script)
            if exp.id == "blr-class":
                blr_script_from(script)
            else:
                functionals_from_script(script)
        except (OSError, ValueError, TypeError, KeyError, IndexError, ContractViolation) as exc:
            raise UsageError(f"malformed script: {exc}") from exc
    if spec.stages is not None and spec.stages < 0:
        raise UsageError("stages must be nonnegative")
    return exp, params, script


@dataclass
class RunResult:
    status: int
    events: str
    summary: str
    state: dict
    first_violation: Optional[dict] = None


def execute(spec: ExperimentSpec) -> RunResult:
    """Run a spec in memory.  Raises UsageError for invalid specs."""
    exp, params, script = resolve(spec)
    stages = exp.stages if spec.stages is None else spec.stages
    rec = Recorder()
    ctx = Context(stages, params, spec.seed, script, rec)
    try:
        out = exp.runner(ctx)
        error = None
    except ContractViolation as exc:
        line = rec.event(stages, "engine", "contract_violation", message=str(exc),
                         context=_jsonable(exc.context))
        rec.tallies[("engine", "contract")] = Tally("engine", "contract", 1, 1, stages, line)
        out, error = {"constants": {}, "state": {}}, str(exc)
    first = None
    failing = [t for t in rec.tallies.values() if t.failed]
    if failing:
        t = min(failing, key=lambda t: t.first_line)
        first = {"module": t.module, "invariant": t.name, "stage": t.first_stage,
                 "line": t.first_line}
    state = {
        "spec": spec.to_json(),
        "stages": stages,
        "constants": out.get("constants", {}),
        "state": out.get("state", {}),
        "violations": rec.violations,
        "first_violation": first,
        "error": error,
        "status": "pass" if rec.violations == 0 else "fail",
    }
    events = "".join(line + "\n" for line in rec.lines)
    status = EXIT_OK if rec.violations == 0 else EXIT_VIOLATION
    return RunResult(status, events, rec.summary_csv(), _jsonable(state), first)


def run_experiment(spec: ExperimentSpec) -> int:
    """Execute a spec and write events.jsonl, summary.csv and state.json to spec.out."""
    result = execute(spec)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(result.events)
    (out / "summary.csv").write_text(result.summary)
    (out / "state.json").write_text(json.dumps(result.state, sort_keys=True, indent=2) + "\n")
    return result.status


# ---------------------------------------------------------------- report


def emit_report(directory) -> str:
    """Human-readable digest of a run directory."""
    d = Path(directory)
    missing = [n for n in ("events.jsonl", "summary.csv", "state.json") if not (d / n).exists()]
    if missing:
        raise FileNotFoundError(f"missing artifacts in {d}: {', '.join(missing)}")
    state = json.loads((d / "state.json").read_text())
    rows = list(csv.DictReader((d / "summary.csv").read_text().splitlines()))
    events = [json.loads(line) for line in (d / "events.jsonl").read_text().splitlines() if line]
    out = [f"experiment {state['spec']['id']}  stages {state['stages']}  status {state['status']}"]
    out.append(f"events {len(events)}  stages with events "
               f"{len({e['stage'] for e in events})}  violations {state['violations']}")
    out.append("")
    out.append("invariants")
    width = max([len(f"{r['module']}.{r['invariant']}") for r in rows] + [9])
    for r in rows:
        label = f"{r['module']}.{r['invariant']}"
        out.append(f"  {label:<{width}}  pass {r['passed']:>6}  fail {r['failed']:>4}")
    out.append("")
    out.append("constants")
    for name, value in sorted(state["constants"].items()):
        out.append(f"  {name} = {value}")
    bad = [(i + 1, e) for i, e in enumerate(events)
           if e["op"] == "check" and not e["data"].get("ok", True)
           or e["op"] == "contract_violation"]
    if bad:
        out.append("")
        out.append("violations")
        for line, e in bad[:20]:
            name = e["data"].get("name", e["op"])
            out.append(f"  events.jsonl:{line}  module {e['module']}  op {name}  stage {e['stage']}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- command line


def _read_config(path: str) -> dict:
    """key = value lines; section headers and # comments allowed."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text()
    parser.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text)
    out = {}
    for section in parser.sections():
        out.update(parser[section])
    return out


def _spec_from_args(args) -> ExperimentSpec:
    values: dict = {}
    if args.config:
        values = _read_config(args.config)
    params = {k: v for k, v in values.items() if k not in ("stages", "out", "seed", "script", "id")}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    exp_id = args.experiment or values.get("id")
    if not exp_id:
        raise UsageError("no experiment id given")
    try:
        stages = args.stages if args.stages is not None else (
            int(values["stages"]) if "stages" in values else None)
        seed = args.seed if args.seed is not None else int(values.get("seed", 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return ExperimentSpec(exp_id, params, stages, seed, args.script or values.get("script"),
                          args.out or values.get("out", f"runs/{exp_id}"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskrand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name, help=f"{name} an experiment")
        p.add_argument("experiment", nargs="?", help="experiment id (see list)")
        p.add_argument("--stages", type=int)
        p.add_argument("--out")
        p.add_argument("--param", action="append", metavar="K=V")
        p.add_argument("--script")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="key = value file; flags override it")
    p = sub.add_parser("report", help="digest of a run directory")
    p.add_argument("directory")
    sub.add_parser("list", help="list experiments")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "list":
            for exp in REGISTRY.values():
                defaults = " ".join(f"{k}={format_fraction(v) if isinstance(v, Fraction) else v}"
                                    for k, v in exp.defaults.items())
                print(f"{exp.id:<24} stages={exp.stages:<5} {defaults}")
                print(f"{'':<24} {exp.description}")
            return EXIT_OK
        if args.command == "report":
            try:
                sys.stdout.write(emit_report(args.directory))
            except FileNotFoundError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_USAGE
            return EXIT_OK
        spec = _spec_from_args(args)
        if args.command == "validate":
            exp, params, _ = resolve(spec)
            print(f"{exp.id}: ok ({', '.join(f'{k}={v}' for k, v in params.items())})")
            return EXIT_OK
        status = run_experiment(spec)
        state = json.loads((Path(spec.out) / "state.json").read_text())
        print(f"{spec.id}: {state['status']} ({state['violations']} violations) -> {spec.out}")
        if state["first_violation"]:
            fv = state["first_violation"]
            print(f"first violation: {fv['module']}.{fv['invariant']} at stage {fv['stage']} "
                  f"(events.jsonl line {fv['line']})", file=sys.stderr)
        return status
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
