"""Batch front end: configure a problem, run solve/verify/develop pipelines,
and emit machine-readable reports plus field/mesh artifacts.

Invocation:
    vortexlab run <config.json>
    vortexlab compare <a.json> <b.json>

Exit codes: 0 all requested checks passed; 2 config or precondition error;
3 solver non-convergence; 4 invariant failure (report still written).

A config is a single JSON document:

    {
      "phi": {"p": [[0.0, 0.0], [1.0, 0.0]], "q": [[0.0, 0.0]]},
      "k": 3,
      "R": 6.0,
      "n": 161,
      "mode": "EQ1",
      "pipeline": ["solve-complete", "verify"],
      "output_dir": "out",
      "tolerances": {"no_gap_delta": 0.5, "develop_restrict": 1}
    }

Coefficients are [re, im] pairs, ascending degree.  In the geometric modes
(WANG_K3, HARMONIC_K2) "phi" holds the differential (U resp. q) and the
solver runs on the matching base-equation problem.  Determinism: identical
configs produce byte-identical artifacts; report.json carries wall-clock
data only inside the isolated "timing" block.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .entire import EntireFunction
from .grid import GridDomain, VortexProblem, write_field_csv
from . import solve as solver
from . import invariants as verify
from . import surfaces as develop

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

STAGES = (
    "solve-complete",
    "solve-incomplete",
    "two-solutions",
    "verify",
    "develop",
    "export",
)
MODES = ("EQ1", "WANG_K3", "HARMONIC_K2")
RAY_ANGLES = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


class ConfigError(ValueError):
    pass


def _coeffs(raw, what: str) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("%s must be a non-empty list of [re, im] pairs" % what)
    out = []
    for item in raw:
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError("%s entries must be [re, im] pairs" % what)
        out.append(complex(float(item[0]), float(item[1])))
    return tuple(out)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("phi", "k", "R", "n", "mode", "pipeline", "output_dir"):
        if key not in raw:
            raise ConfigError("config is missing %r" % key)
    if not isinstance(raw["phi"], dict) or "p" not in raw["phi"]:
        raise ConfigError("phi must be an object with coefficient array p")
    _coeffs(raw["phi"]["p"], "phi.p")
    if "q" in raw["phi"]:
        _coeffs(raw["phi"]["q"], "phi.q")
    k = raw["k"]
    if not isinstance(k, int) or k < 2:
        raise ConfigError("k must be an integer >= 2")
    n = raw["n"]
    if not isinstance(n, int) or n < 5 or n % 2 == 0:
        raise ConfigError("n must be an odd integer >= 5 (the origin must be a node)")
    if not (isinstance(raw["R"], (int, float)) and raw["R"] > 0):
        raise ConfigError("R must be a positive number")
    mode = raw["mode"]
    if mode not in MODES:
        raise ConfigError("mode must be one of %s" % (MODES,))
    if mode == "WANG_K3" and k != 3:
        raise ConfigError("mode WANG_K3 requires k = 3")
    if mode == "HARMONIC_K2" and k != 2:
        raise ConfigError("mode HARMONIC_K2 requires k = 2")
    stages = raw["pipeline"]
    if not isinstance(stages, list) or not stages:
        raise ConfigError("pipeline must be a non-empty list of stages")
    for st in stages:
        if st not in STAGES:
            raise ConfigError("unknown stage %r (choose from %s)" % (st, STAGES))
    solve_stages = {"solve-complete", "solve-incomplete", "two-solutions"}
    seen_solve = False
    seen_develop = False
    for st in stages:
        if st in solve_stages:
            seen_solve = True
        elif st in ("verify", "develop"):
            if not seen_solve:
                raise ConfigError("stage %r needs a solve stage earlier in the pipeline" % st)
            if st == "develop":
                if mode == "EQ1":
                    raise ConfigError("stage develop needs a geometric mode")
                seen_develop = True
        elif st == "export" and not seen_develop:
            raise ConfigError("stage export needs develop earlier in the pipeline")
    tol = raw.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("tolerances must be an object")
    return raw


def _problem(cfg: dict) -> tuple[VortexProblem, EntireFunction]:
    p = _coeffs(cfg["phi"]["p"], "phi.p")
    q = _coeffs(cfg["phi"].get("q", [[0.0, 0.0]]), "phi.q")
    fn = EntireFunction(p, q)
    domain = GridDomain(float(cfg["R"]), int(cfg["n"]))
    if cfg["mode"] == "EQ1":
        return VortexProblem(fn, int(cfg["k"]), domain), fn
    mode = develop.SurfaceMode(cfg["mode"])
    return develop.geometric_problem(fn, mode, domain), fn


def _solve_report_json(rep) -> dict:
    """Pinned report schema shared by all solve branches."""
    out = {
        "iterations": 0,
        "converged": True,
        "final_residual": None,
        "residual_history": [],
        "boundary_kind": None,
        "monotone_violations": 0,
        "continuation_trace": [],
    }
    if isinstance(rep, solver.ContinuationReport):
        out["iterations"] = rep.newton.iterations
        out["final_residual"] = rep.newton.residual
        out["residual_history"] = list(rep.newton.residual_history)
        out["boundary_kind"] = rep.newton.boundary_kind
        out["continuation_trace"] = [dict(entry) for entry in rep.trace]
    elif isinstance(rep, solver.MonotoneReport):
        out["iterations"] = rep.iterations
        out["final_residual"] = rep.residual
        out["residual_history"] = list(rep.residual_history)
        out["boundary_kind"] = rep.boundary_kind
        out["monotone_violations"] = rep.band_violations
    elif rep is not None:  # NewtonReport
        out["iterations"] = rep.iterations
        out["final_residual"] = rep.residual
        out["residual_history"] = list(rep.residual_history)
        out["boundary_kind"] = rep.boundary_kind
    return out


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError("cannot serialize %r" % type(obj))


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


class _Run:
    """State threaded through the pipeline stages of one `run` invocation."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.problem, self.fn = _problem(cfg)
        self.tol = cfg.get("tolerances", {})
        self.out = cfg["output_dir"]
        os.makedirs(self.out, exist_ok=True)
        self.w_complete = None
        self.w_incomplete = None
        self.reports: dict = {}
        self.checks: list = []
        self.rays: dict = {}
        self.develop_info: dict = {}
        self.failures: list = []

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    # stages -----------------------------------------------------------
    def solve_complete(self) -> None:
        w, rep = solver.solve_complete(self.problem)
        self.w_complete = w
        self.reports["complete"] = _solve_report_json(rep)
        write_field_csv(self.path("w_complete.csv"), self.problem.domain, w)

    def solve_incomplete(self) -> None:
        boundary = solver.make_boundary_subsolution(self.problem)
        w0 = solver.profile_field(self.problem, clip=solver.PROFILE_CLIP)
        w, rep = solver.solve_newton(self.problem, w0, boundary)
        self.w_incomplete = w
        self.reports["incomplete"] = _solve_report_json(rep)
        write_field_csv(self.path("w_incomplete.csv"), self.problem.domain, w)

    def two_solutions(self) -> None:
        pair = solver.two_solutions(self.problem)
        self.w_complete = pair.w_top
        self.w_incomplete = pair.w_low
        self.reports["complete"] = _solve_report_json(pair.report_top)
        self.reports["incomplete"] = _solve_report_json(pair.report_low)
        write_field_csv(self.path("w_complete.csv"), self.problem.domain, pair.w_top)
        write_field_csv(self.path("w_incomplete.csv"), self.problem.domain, pair.w_low)

    def _record(self, report) -> None:
        self.checks.append(report.to_dict())
        if not report.passed:
            self.failures.append(report.name)

    def verify(self) -> None:
        prob = self.problem
        dom = prob.domain
        fields = [("complete", self.w_complete), ("incomplete", self.w_incomplete)]
        fields = [(tag, w) for tag, w in fields if w is not None]
        for tag, w in fields:
            sub = verify.subunity_check(w, prob)
            sub.name = "subunity_%s" % tag
            self._record(sub)
            try:
                verify.curvature_field(w, prob)
            except ValueError as exc:
                self.failures.append("curvature_%s" % tag)
                self.checks.append(
                    {"name": "curvature_%s" % tag, "passed": False, "detail": str(exc)}
                )
            else:
                self.checks.append({"name": "curvature_%s" % tag, "passed": True})
            diag = verify.diagnostics(w, prob)
            self.checks.append(
                {
                    "name": "identity_%s" % tag,
                    "passed": bool(diag.identity_passed),
                    "residual": float(diag.identity_residual),
                }
            )
            if not diag.identity_passed:
                self.failures.append("identity_%s" % tag)
            profiles = verify.completeness_probe(dom, w, thetas=RAY_ANGLES)
            self.rays[tag] = [
                {
                    "theta": p.theta,
                    "length": p.total,
                    "verdict": p.verdict,
                    "limit_estimate": p.limit_estimate,
                }
                for p in profiles
            ]
        if self.w_complete is not None:
            delta = float(self.tol.get("no_gap_delta", 0.5))
            gap = verify.no_gap_check(self.w_complete, prob, delta)
            self._record(gap)
        if self.w_complete is not None and self.w_incomplete is not None:
            self._record(verify.ordering_check(self.w_complete, self.w_incomplete, dom))
        primary = self.w_complete if self.w_complete is not None else self.w_incomplete
        profiles = verify.completeness_probe(dom, primary, thetas=RAY_ANGLES)
        verify.write_rays_csv(self.path("rays.csv"), profiles)

    def develop(self) -> None:
        mode = develop.SurfaceMode(self.cfg["mode"])
        w = self.w_complete if self.w_complete is not None else self.w_incomplete
        sol = develop.normalize(w, self.problem, mode)
        for _ in range(int(self.tol.get("develop_restrict", 0))):
            sol = sol.restrict_half()
        if mode is develop.SurfaceMode.WANG_K3:
            surface = develop.develop_affine_sphere(sol)
            normals = None
        else:
            surface, normals = develop.develop_cmc(sol)
        defect = develop.holonomy_defect(surface, sol)
        rec = develop.reconstruct_metric(surface)
        target = sol.w if mode is develop.SurfaceMode.WANG_K3 else 2.0 * sol.w
        self.develop_info = {
            "mode": mode.value,
            "grid_R": sol.domain.R,
            "grid_n": sol.domain.n,
            "holonomy_defect": float(defect),
            "metric_roundtrip_error": float(np.max(np.abs(rec - target))),
            "imag_max": surface.imag_max,
            "conj_defect": surface.conj_defect,
        }
        self._surface = surface
        self._normals = normals
        self._dev_domain = sol.domain

    def export(self) -> None:
        develop.export_mesh(self._surface, self.path("surface.obj"))
        if self._normals is not None:
            develop.write_gauss_csv(self.path("gauss.csv"), self._dev_domain, self._normals)

    def report(self, status: int, error: str | None, elapsed: float) -> None:
        _write_json(
            self.path("invariants.json"),
            {"checks": self.checks, "rays": self.rays, "failures": sorted(self.failures)},
        )
        _write_json(
            self.path("report.json"),
            {
                "config": self.cfg,
                "versions": {
                    "vortexlab": __version__,
                    "numpy": np.__version__,
                    "scipy": __import__("scipy").__version__,
                    "python": "%d.%d.%d" % sys.version_info[:3],
                },
                "reports": self.reports,
                "invariants": {"checks": self.checks, "failures": sorted(self.failures)},
                "develop": self.develop_info,
                "exit_status": status,
                "error": error,
                "timing": {"wall_seconds": elapsed},
            },
        )


_STAGE_METHODS = {
    "solve-complete": _Run.solve_complete,
    "solve-incomplete": _Run.solve_incomplete,
    "two-solutions": _Run.two_solutions,
    "verify": _Run.verify,
    "develop": _Run.develop,
    "export": _Run.export,
}


def run(cfg: dict) -> int:
    t0 = time.perf_counter()
    try:
        state = _Run(cfg)
    except (ValueError, OSError) as exc:
        print("vortexlab: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    status = EXIT_OK
    error = None
    try:
        for stage in cfg["pipeline"]:
            _STAGE_METHODS[stage](state)
        if state.failures:
            status = EXIT_INVARIANT
            error = "invariant checks failed: %s" % ", ".join(sorted(state.failures))
    except solver.ConvergenceError as exc:
        status, error = EXIT_SOLVER, str(exc)
    except (ValueError, ArithmeticError) as exc:
        # precondition violations (polynomial phi in two-solutions, zeros on
        # the ring, normalization residual) are config-class errors
        status, error = EXIT_CONFIG, str(exc)
    if status != EXIT_CONFIG:
        state.report(status, error, time.perf_counter() - t0)
    if error:
        print("vortexlab: %s" % error, file=sys.stderr)
    return status


def compare(cfg_a: dict, cfg_b: dict) -> int:
    fa, fb = cfg_a["phi"], cfg_b["phi"]
    if fa != fb or cfg_a["k"] != cfg_b["k"]:
        raise ConfigError("compare needs identical phi and k")
    runs = []
    for cfg in (cfg_a, cfg_b):
        problem, _ = _problem(cfg)
        if "solve-incomplete" in cfg["pipeline"] and "solve-complete" not in cfg["pipeline"]:
            boundary = solver.make_boundary_subsolution(problem)
            w0 = solver.profile_field(problem, clip=solver.PROFILE_CLIP)
            w, _rep = solver.solve_newton(problem, w0, boundary)
            branch = "incomplete"
        else:
            w, _rep = solver.solve_complete(problem)
            branch = "complete"
        runs.append((problem.domain, w, branch))
    (dom_a, wa, br_a), (dom_b, wb, br_b) = runs
    if abs(dom_a.h - dom_b.h) > 1e-12 * max(dom_a.h, dom_b.h):
        raise ConfigError("compare needs matching grid spacing (got h=%g vs %g)" % (dom_a.h, dom_b.h))
    small, big = (dom_a, dom_b) if dom_a.R <= dom_b.R else (dom_b, dom_a)
    half = small.R / 2.0
    diffs = []
    for dom, w in ((dom_a, wa), (dom_b, wb)):
        k0 = np.searchsorted(dom.axis, -half - 1e-9)
        k1 = np.searchsorted(dom.axis, half + 1e-9)
        sub = w[k0:k1, k0:k1]
        diffs.append(sub)
    if diffs[0].shape != diffs[1].shape:
        raise ConfigError("inner squares do not align node-for-node")
    delta = float(np.max(np.abs(diffs[0] - diffs[1])))
    payload = {
        "max_difference": delta,
        "region_half_width": half,
        "nodes": int(diffs[0].size),
        "branches": [br_a, br_b],
    }
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _cap_threads() -> None:
    raw = os.environ.get("VORTEXLAB_THREADS")
    if not raw:
        return
    try:
        limit = max(1, int(raw))
    except ValueError:
        raise ConfigError("VORTEXLAB_THREADS must be an integer")
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=limit)
    except ImportError:
        os.environ.setdefault("OMP_NUM_THREADS", str(limit))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexlab", description="planar vortex equation laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a pipeline from a JSON config")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="max inner-square difference of two runs")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    args = parser.parse_args(argv)
    try:
        _cap_threads()
        if args.command == "run":
            return run(load_config(args.config))
        return compare(load_config(args.config_a), load_config(args.config_b))
    except ConfigError as exc:
        print("vortexlab: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
