"""Command-line front end.

Every report embeds the fully resolved run configuration; ``dpgeom replay
REPORT`` re-executes it and, given unchanged input files, reproduces the
report byte for byte.  Floats are written with 17 significant digits in
both JSON and CSV output.

Exit codes: 0 success, 2 malformed input, 3 domain error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import analysis, geometry, mechanisms
from .errors import ConvergenceError, DomainError, InputError
from .geometry import ConvexBody
from .mechanisms import PrivacyParams, derive_seed
from .workload import Database, Workload, caratheodory_decompose, evaluate, sensitivity_polytope

COMMANDS = ("width", "mechanism", "compare", "bounds", "samplecomplexity", "reduce")
MECHS = ("gaussian", "projection", "qr-from-meanpoint", "meanpoint-from-qr")
INNER = ("exact", "gaussian", "projection")


@dataclass
class RunConfig:
    command: str
    seed: int
    body: Optional[str] = None
    workload: Optional[str] = None
    db: Optional[str] = None
    eps: float = 1.0
    delta: float = 1e-6
    alpha: float = 0.1
    n: Optional[int] = None
    n_grid: Optional[str] = None
    trials: int = 1
    samples: int = 100_000
    tol: float = 1e-10
    mech: str = "gaussian"
    inner: str = "gaussian"
    adversary: str = "single-vertex"
    bound: Optional[float] = None
    format: str = "json"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise InputError(f"format must be json or csv, got {self.format!r}")
        if self.mech not in MECHS:
            raise InputError(f"unknown mechanism {self.mech!r}")
        if self.inner not in INNER:
            raise InputError(f"unknown inner algorithm {self.inner!r}")
        if self.adversary not in mechanisms.ADVERSARIES:
            raise InputError(f"unknown adversary {self.adversary!r}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not (0 < self.delta < 1):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not (0 < self.alpha < 1):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.samples < 2:
            raise DomainError("samples must be at least 2")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.n is not None and self.n < 1:
            raise DomainError("n must be at least 1")
        if self.bound is not None and not self.bound > 0:
            raise DomainError("bound must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InputError(f"unknown config keys {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise InputError(f"bad config: {exc}") from None
        cfg.validate()
        return cfg


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    obj = _plain(obj)
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt_float(v).strip('"').replace("null", "nan")
    return str(v)


def _render(report: dict, cfg: RunConfig) -> str:
    if cfg.format == "json":
        return dumps(report) + "\n"
    table = report["table"]
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(json.loads(dumps(report["config"])), sort_keys=False) + "\n")
    for key, value in report["results"].items():
        value = _plain(value)
        if not isinstance(value, (dict, list)):
            buf.write(f"# {key}={_csv_cell(value)}\n")
    buf.write(",".join(table["columns"]) + "\n")
    for row in table["rows"]:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dpgeom-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# inputs


def _load_json(path: Optional[str], what: str):
    if path is None:
        raise InputError(f"--{what} is required for this command")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from None


def _body(cfg: RunConfig) -> ConvexBody:
    return ConvexBody.from_dict(_load_json(cfg.body, "body"))


def _workload(cfg: RunConfig) -> Workload:
    return Workload.from_dict(_load_json(cfg.workload, "workload"))


def _db(cfg: RunConfig) -> Database:
    return Database.from_dict(_load_json(cfg.db, "db"))


def _n_grid(spec: Optional[str]) -> list:
    if not spec:
        raise InputError("--n-grid a:b:step is required")
    try:
        a, b, step = (int(s) for s in spec.split(":"))
    except ValueError:
        raise InputError(f"--n-grid must look like a:b:step, got {spec!r}") from None
    if a < 1 or step < 1:
        raise InputError("--n-grid needs a >= 1 and step >= 1")
    grid = list(range(a, b + 1, step))
    if not grid:
        raise InputError(f"--n-grid {spec!r} is empty")
    return grid


def _estimate(w: geometry.WidthEstimate) -> dict:
    return {"value": w.value, "stderr": w.stderr, "samples": w.samples, "seed": w.seed}


def _params(cfg: RunConfig) -> PrivacyParams:
    return PrivacyParams(cfg.eps, cfg.delta)


# ---------------------------------------------------------------------------
# commands


def cmd_width(cfg: RunConfig) -> dict:
    body = _body(cfg)
    ell_star = geometry.gaussian_width(body, cfg.samples, cfg.seed)
    ell = None
    if body.is_full_dimensional():
        ell = geometry.gaussian_norm_mean(body, cfg.samples, cfg.seed)
    rows = [["ell_star", ell_star.value, ell_star.stderr, ell_star.samples, ell_star.seed]]
    if ell is not None:
        rows.append(["ell", ell.value, ell.stderr, ell.samples, ell.seed])
    results = {
        "kind": body.kind,
        "dim": body.dim,
        "full_dimensional": ell is not None,
        "ell_star": _estimate(ell_star),
        "ell": None if ell is None else _estimate(ell),
    }
    return {"results": results, "table": {"columns": ["quantity", "value", "stderr", "samples", "seed"], "rows": rows}}


def _inner_meanpoint(cfg: RunConfig, body: ConvexBody):
    p = _params(cfg)
    if cfg.inner == "exact":
        return mechanisms.exact_mean
    if cfg.inner == "gaussian":
        return mechanisms.gaussian_meanpoint(p, 1.0)
    return mechanisms.projection_meanpoint(body, p, cfg.tol)


def _inner_query_release(cfg: RunConfig, workload: Workload):
    if cfg.inner == "exact":
        return mechanisms.exact_answers(workload)
    if cfg.inner == "gaussian":
        return mechanisms.gaussian_query_release(workload, _params(cfg))
    return mechanisms.projection_query_release(workload, _params(cfg), cfg.tol)


def _mechanism_setup(cfg: RunConfig):
    """Return ``(run(seed) -> vector, truth, error_scale, declared (eps, delta), noise_scale)``."""
    p = _params(cfg)
    db = _db(cfg)
    if cfg.mech in ("gaussian", "projection") and cfg.body is not None:
        body = _body(cfg)
        if db.points is None or db.points.shape[1] != body.dim:
            raise InputError(f"--db must hold points of dimension {body.dim}")
        for x in db.points:
            if geometry.minkowski_norm(body, x) > 1.0 + 1e-9:
                raise DomainError("database point lies outside the body")
        truth = db.mean()
        if cfg.mech == "gaussian":
            bound = body.diameter() if cfg.bound is None else cfg.bound

            def run(s):
                return mechanisms.gaussian_mechanism(db, p, bound, s)

        else:

            def run(s):
                return mechanisms.projection_mechanism(body, db, p, s, cfg.tol, check_points=False)

        return run, truth, 1.0, (cfg.eps, cfg.delta)
    if cfg.mech in ("gaussian", "projection", "qr-from-meanpoint"):
        workload = _workload(cfg)
        if not db.is_elements:
            raise InputError("query release needs an element database")
        truth = evaluate(workload, db)
        if cfg.mech == "qr-from-meanpoint":
            inner = _inner_meanpoint(cfg, sensitivity_polytope(workload, scaled=True))
        elif cfg.mech == "gaussian":
            inner = mechanisms.gaussian_meanpoint(p, 1.0)
        else:
            inner = mechanisms.projection_meanpoint(sensitivity_polytope(workload, scaled=True), p, cfg.tol)

        def run(s):
            return mechanisms.query_release_from_meanpoint(workload, inner, db, s)

        declared = (0.0, 0.0) if cfg.mech == "qr-from-meanpoint" and cfg.inner == "exact" else (cfg.eps, cfg.delta)
        return run, truth, 1.0 / math.sqrt(workload.m), declared
    # meanpoint-from-qr
    workload = _workload(cfg)
    if db.points is None or db.points.shape[1] != workload.m:
        raise InputError(f"--db must hold points of dimension {workload.m}")
    combos = [caratheodory_decompose(workload, x) for x in db.points]
    qr = _inner_query_release(cfg, workload)
    truth = db.mean()

    def run(s):
        return mechanisms.meanpoint_from_query_release(workload, qr, db, s, combos)

    declared = (0.0, 0.0) if cfg.inner == "exact" else (2 * cfg.eps, 2 * cfg.delta)
    return run, truth, 1.0, declared


def cmd_mechanism(cfg: RunConfig) -> dict:
    run, truth, err_scale, declared = _mechanism_setup(cfg)
    outputs, errors, noise_scale = [], [], None
    for t in range(cfg.trials):
        res = run(derive_seed(cfg.seed, t))
        if isinstance(res, mechanisms.MechanismResult):
            noise_scale = res.noise_scale
            res = res.output
        out = np.asarray(res, dtype=float)
        outputs.append(out)
        errors.append(err_scale * float(np.linalg.norm(out - truth)))
    errs = np.array(errors)
    rms = math.sqrt(float(np.mean(errs**2)))
    m = truth.size
    results = {
        "mech": cfg.mech,
        "trials": cfg.trials,
        "rms_error": rms,
        "noise_scale": noise_scale,
        "declared_eps": declared[0],
        "declared_delta": declared[1],
        "truth": truth,
        "errors": errs,
        "outputs": [o for o in outputs],
    }
    cols = ["trial", "error"] + [f"output_{i}" for i in range(m)]
    rows = [[t, errors[t], *outputs[t].tolist()] for t in range(cfg.trials)]
    return {"results": results, "table": {"columns": cols, "rows": rows}}


def cmd_compare(cfg: RunConfig) -> dict:
    grid = _n_grid(cfg.n_grid)
    body = _body(cfg)
    if body.diameter() > 1.0 + 1e-9:
        raise DomainError("compare needs a body inside the unit ball")
    p = _params(cfg)
    ws = geometry.gaussian_width(body, cfg.samples, cfg.seed)
    gauss = mechanisms.gaussian_meanpoint(p, 1.0)
    proj = mechanisms.projection_meanpoint(body, p, cfg.tol)
    rows, fitted = [], 0.0
    for n in grid:
        g = mechanisms.measure_error(body, gauss, n, cfg.trials, cfg.adversary, cfg.seed)
        q = mechanisms.measure_error(body, proj, n, cfg.trials, cfg.adversary, cfg.seed)
        gauss_bound = p.sigma * math.sqrt(body.dim) / n
        proj_bound = math.sqrt(p.sigma * ws.value / n)
        fitted = max(fitted, q.rms_error**2 * n / (p.sigma * ws.value))
        rows.append([n, g.rms_error, g.stderr, q.rms_error, q.stderr, gauss_bound, proj_bound])
    ratio = ws.value / math.sqrt(body.dim)
    results = {
        "sigma": p.sigma,
        "ell_star": _estimate(ws),
        "regime_ratio": ratio,
        "regime": analysis.GAUSSIAN_OPTIMAL if ratio >= 0.5 else analysis.PROJECTION_FAVORED,
        "fitted_projection_constant": fitted,
        "adversary": cfg.adversary,
        "constants": "unit",
    }
    cols = ["n", "gauss_rms", "gauss_stderr", "proj_rms", "proj_stderr", "gauss_bound", "proj_bound"]
    return {"results": results, "table": {"columns": cols, "rows": rows}}


def cmd_bounds(cfg: RunConfig) -> dict:
    if cfg.body is not None:
        rep = analysis.bound_report(_body(cfg), cfg.eps, cfg.delta, cfg.alpha, cfg.samples, cfg.seed)
    else:
        rep = analysis.query_release_bounds(_workload(cfg), cfg.eps, cfg.delta, cfg.alpha, cfg.samples, cfg.seed)
    d = rep.to_dict()
    rows = [[k, v] for k, v in d.items() if not isinstance(v, dict)]
    rows += [["ell_star_" + k, v] for k, v in d["ell_star"].items()]
    return {"results": d, "table": {"columns": ["field", "value"], "rows": rows}}


def cmd_samplecomplexity(cfg: RunConfig) -> dict:
    p = _params(cfg)
    if cfg.body is not None:
        target = _body(cfg)
        if cfg.mech == "gaussian":
            mech = mechanisms.gaussian_meanpoint(p, 1.0)
        elif cfg.mech == "projection":
            mech = mechanisms.projection_meanpoint(target, p, cfg.tol)
        else:
            raise InputError("samplecomplexity supports --mech gaussian or projection")
        m = target.dim
    else:
        target = _workload(cfg)
        if cfg.mech == "gaussian":
            mech = mechanisms.gaussian_query_release(target, p)
        elif cfg.mech == "projection":
            mech = mechanisms.projection_query_release(target, p, cfg.tol)
        else:
            raise InputError("samplecomplexity supports --mech gaussian or projection")
        m = target.m
    res = mechanisms.sample_complexity_search(target, mech, cfg.alpha, cfg.trials, cfg.seed, cfg.adversary)
    results = {
        "n": res.n,
        "unbounded": res.unbounded,
        "error_at_n": res.error_at_n,
        "error_below": res.error_below,
        "gauss_formula": p.sigma * math.sqrt(m) / cfg.alpha,
    }
    rows = [[n, e] for n, e in res.probes]
    return {"results": results, "table": {"columns": ["n", "rms_error"], "rows": rows}}


def cmd_reduce(cfg: RunConfig) -> dict:
    workload = _workload(cfg)
    db = _db(cfg)
    m = workload.m
    outs = []
    if db.is_elements:
        direction = "qr-from-meanpoint"
        truth = evaluate(workload, db)
        inner = _inner_meanpoint(cfg, sensitivity_polytope(workload, scaled=True))
        for t in range(cfg.trials):
            outs.append(mechanisms.query_release_from_meanpoint(workload, inner, db, derive_seed(cfg.seed, t)))
        scale = 1.0 / math.sqrt(m)
        declared = (cfg.eps, cfg.delta)
        extra = {}
    else:
        direction = "meanpoint-from-qr"
        if db.points.shape[1] != m:
            raise InputError(f"--db must hold points of dimension {m}")
        truth = db.mean()
        combos = [caratheodory_decompose(workload, x) for x in db.points]
        qr = _inner_query_release(cfg, workload)
        for t in range(cfg.trials):
            outs.append(mechanisms.meanpoint_from_query_release(workload, qr, db, derive_seed(cfg.seed, t), combos))
        scale = 1.0
        declared = (2 * cfg.eps, 2 * cfg.delta)
        R = sensitivity_polytope(workload, scaled=True).diameter()
        extra = {"sampling_bound_4R2_over_n": 4 * R**2 / db.size, "max_support": max(c.support for c in combos)}
    if cfg.inner == "exact":
        declared = (0.0, 0.0)
    outs = np.array(outs)
    sq = scale**2 * np.sum((outs - truth) ** 2, axis=1)
    results = {
        "direction": direction,
        "inner": cfg.inner,
        "trials": cfg.trials,
        "declared_eps": declared[0],
        "declared_delta": declared[1],
        "truth": truth,
        "mean_output": outs.mean(axis=0),
        "rms_error": math.sqrt(float(sq.mean())),
        "second_moment": float(sq.mean()),
        **extra,
    }
    cols = ["trial", "sq_error"] + [f"output_{i}" for i in range(m)]
    rows = [[t, sq[t], *outs[t].tolist()] for t in range(cfg.trials)]
    return {"results": results, "table": {"columns": cols, "rows": rows}}


_DISPATCH = {
    "width": cmd_width,
    "mechanism": cmd_mechanism,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
    "samplecomplexity": cmd_samplecomplexity,
    "reduce": cmd_reduce,
}


def execute(cfg: RunConfig) -> str:
    """Run a resolved configuration and return the rendered report."""
    cfg.validate()
    out = _DISPATCH[cfg.command](cfg)
    report = {"config": asdict(cfg), "results": out["results"], "table": out["table"]}
    return _render(report, cfg)


# ---------------------------------------------------------------------------
# argument parsing

_DEFAULT_TRIALS = {"mechanism": 1, "reduce": 1000, "compare": 1000, "samplecomplexity": 1000}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 as well; keep the message format
        self.print_usage(sys.stderr)
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpgeom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--body")
        sp.add_argument("--workload")
        sp.add_argument("--db")
        sp.add_argument("--eps", type=float, default=1.0)
        sp.add_argument("--delta", type=float, default=1e-6)
        sp.add_argument("--alpha", type=float, default=0.1)
        sp.add_argument("--n", type=int)
        sp.add_argument("--n-grid", dest="n_grid")
        sp.add_argument("--trials", type=int, default=_DEFAULT_TRIALS.get(name, 1))
        sp.add_argument("--samples", type=int, default=100_000)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--mech", choices=MECHS, default="gaussian")
        sp.add_argument("--inner", choices=INNER, default="gaussian")
        sp.add_argument("--adversary", choices=mechanisms.ADVERSARIES, default="single-vertex")
        sp.add_argument("--bound", type=float)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
    rp = sub.add_parser("replay", help="re-run the configuration embedded in a report")
    rp.add_argument("report")
    rp.add_argument("--out")
    return parser


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    data = {f.name: getattr(ns, f.name) for f in fields(RunConfig) if hasattr(ns, f.name)}
    for key in ("body", "workload", "db"):
        if data.get(key) is not None:
            data[key] = os.path.abspath(data[key])
    return RunConfig(**data)


def _replay_config(path: str) -> RunConfig:
    """Config embedded in a JSON report or on the first line of a CSV report."""
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as exc:
        raise InputError(f"cannot read report file {path}: {exc.strerror}") from None
    if first.startswith("# config: "):
        try:
            return RunConfig.from_dict(json.loads(first[len("# config: "):]))
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed config line in {path}: {exc}") from None
    data = _load_json(path, "report")
    if not isinstance(data, dict) or "config" not in data:
        raise InputError(f"{path} carries no embedded config")
    return RunConfig.from_dict(data["config"])


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.command == "replay":
            cfg = _replay_config(ns.report)
        else:
            cfg = _config_from_args(ns)
        text = execute(cfg)
        _write(text, ns.out)
    except InputError as exc:
        print(f"dpgeom: input error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"dpgeom: domain error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"dpgeom: numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
