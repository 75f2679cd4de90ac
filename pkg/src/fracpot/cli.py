"""Config-driven experiment runner.

One JSON document describes one reproducible experiment batch: the space,
the scale grid, the order and integrability parameters, which experiment
suites to run, tolerance overrides, and the seed. ``describe`` prints the
cost plan (point counts, scale counts, memory, rough runtime) from the
descriptor arithmetic alone, without allocating anything; ``run`` executes
the selected suites sequentially, writes one JSON report plus CSV data
files per experiment, and exits 0 only if every selected suite passed.

Exit codes: 0 all suites passed, 1 at least one suite failed (the failing
reports are listed on stdout), 2 the config did not parse or validate.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import approx_id, euclidean, kernels, norms, operators, space as space_mod
from .errors import ConfigError
from .reports import PropertyReport, format_float, write_csv

__all__ = ["ExperimentConfig", "parse_config", "load_config", "describe", "run", "main"]

EXPERIMENTS = (
    "verify-ai",
    "verify-kernels",
    "improvement",
    "embedding",
    "contraction",
    "invert",
    "tav-bounds",
    "euclid-compare",
)

_DEFAULT_TOLERANCES = {
    "calderon_residual": 0.02,
    "representation": 0.02,
    "stability_window": 0.4,
    "euclid_spread": 0.02,
    "euclid_match": 0.03,
    "q_exponent": 1.0,
}


@dataclass
class ExperimentConfig:
    space: dict
    experiments: list
    alphas: list = field(default_factory=lambda: [0.3])
    ps: list = field(default_factory=lambda: [2.0])
    scale: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "."
    beta: float = 0.2
    delta: float = 0.5
    v_list: list = field(default_factory=lambda: [0.25, 1.0, 4.0])


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document; ConfigError messages name the field."""
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    if "space" not in doc:
        raise ConfigError("space: required field is missing")
    sp = doc["space"]
    if not isinstance(sp, dict) or sp.get("kind") not in space_mod._BUILDERS:
        known = sorted(space_mod._BUILDERS)
        raise ConfigError(f"space.kind: must be one of {known}")
    params = sp.get("parameters")
    if not isinstance(params, dict):
        raise ConfigError("space.parameters: required object is missing")
    _, names = space_mod._BUILDERS[sp["kind"]]
    for nm in names:
        if nm not in params:
            raise ConfigError(f"space.parameters.{nm}: required for kind {sp['kind']!r}")

    exps = doc.get("experiments")
    if not isinstance(exps, list):
        raise ConfigError("experiments: required list is missing")
    for e in exps:
        if e not in EXPERIMENTS:
            raise ConfigError(f"experiments: unknown experiment {e!r}")

    alphas = doc.get("alphas", [0.3])
    if not isinstance(alphas, list) or not alphas:
        raise ConfigError("alphas: must be a non-empty list")
    for a in alphas:
        if not isinstance(a, (int, float)) or not 0.0 < a < 1.0:
            raise ConfigError(f"alphas: every value must lie in (0, 1), got {a!r}")

    ps = doc.get("ps", [2.0])
    if not isinstance(ps, list) or not ps:
        raise ConfigError("ps: must be a non-empty list")
    for p in ps:
        if not isinstance(p, (int, float)) or not 1.0 < p < math.inf:
            raise ConfigError(f"ps: every value must lie in (1, inf), got {p!r}")

    scale = doc.get("scale", {})
    if not isinstance(scale, dict):
        raise ConfigError("scale: must be an object")
    per_decade = scale.get("per_decade", 12)
    if not isinstance(per_decade, int) or per_decade < 2:
        raise ConfigError("scale.per_decade: must be an integer >= 2")
    for key in scale:
        if key not in ("per_decade", "t_min", "t_max"):
            raise ConfigError(f"scale.{key}: unknown key")

    tolerances = dict(_DEFAULT_TOLERANCES)
    for key, val in doc.get("tolerances", {}).items():
        if key not in _DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{key}: unknown key")
        if not isinstance(val, (int, float)) or val <= 0:
            raise ConfigError(f"tolerances.{key}: must be a positive number")
        tolerances[key] = float(val)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a nonnegative integer")

    beta = doc.get("beta", 0.2)
    if not isinstance(beta, (int, float)) or not 0.0 < beta < 1.0:
        raise ConfigError("beta: must lie in (0, 1)")

    delta = doc.get("delta", 0.5)
    if not isinstance(delta, (int, float)) or not 0.0 < delta <= 1.0:
        raise ConfigError("delta: must lie in (0, 1]")

    v_list = doc.get("v_list", [0.25, 1.0, 4.0])
    if not isinstance(v_list, list) or not v_list:
        raise ConfigError("v_list: must be a non-empty list")
    for v in v_list:
        if not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError("v_list: every value must be positive")

    output_dir = doc.get("output_dir", ".")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: must be a string")

    known = {
        "space", "experiments", "alphas", "ps", "scale", "tolerances",
        "seed", "output_dir", "beta", "delta", "v_list",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown top-level field")

    return ExperimentConfig(
        space=sp,
        experiments=list(exps),
        alphas=[float(a) for a in alphas],
        ps=[float(p) for p in ps],
        scale={"per_decade": per_decade,
               "t_min": scale.get("t_min"), "t_max": scale.get("t_max")},
        tolerances=tolerances,
        seed=seed,
        output_dir=output_dir,
        beta=float(beta),
        delta=float(delta),
        v_list=[float(v) for v in v_list],
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file: invalid JSON ({exc})") from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# describe (descriptor arithmetic only; nothing is allocated)
# ---------------------------------------------------------------------------


def _plan_counts(config: ExperimentConfig) -> dict:
    kind = config.space["kind"]
    p = config.space["parameters"]
    if kind == "line":
        n = int(p["n_points"])
        res = 2.0 * p["half_length"] / (n - 1)
        radius = float(p["half_length"])
    elif kind == "plane":
        n = int(p["n_side"]) ** 2
        res = 2.0 * p["half_length"] / (p["n_side"] - 1)
        radius = float(p["half_length"])
    elif kind == "gasket":
        l, K = int(p["subdivision_level"]), int(p["dilation_count"])
        n = 3**l + (K - 1) * 2 * 3 ** (l - 1)
        res = 2.0 ** (1 - l)
        radius = 2.0 ** (K - 1)
    else:  # cantor
        l, K = int(p["subdivision_level"]), int(p["dilation_count"])
        n = 2**l + (K - 1) * 2 ** (l - 1)
        res = 3.0 ** (1 - l)
        radius = 3.0**K / 2.0
    t_min = config.scale.get("t_min") or res / 4.0
    t_max = config.scale.get("t_max") or 4.0 * radius
    per_decade = config.scale["per_decade"]
    m = int(math.ceil(math.log10(t_max / t_min) * per_decade - 1e-9)) + 1
    kernel_kinds = 0
    if "verify-kernels" in config.experiments:
        kernel_kinds += 3
    if set(config.experiments) & {"improvement", "embedding", "contraction", "invert"}:
        kernel_kinds += 1  # bessel
    if set(config.experiments) & {"contraction", "invert", "euclid-compare"}:
        kernel_kinds += 1  # frac_deriv
    n_kernels = kernel_kinds * len(config.alphas)
    return {
        "kind": kind,
        "n_points": n,
        "resolution": res,
        "domain_radius": radius,
        "t_min": t_min,
        "t_max": t_max,
        "n_scales": m,
        "n_kernels": n_kernels,
    }


def describe(config: ExperimentConfig) -> str:
    c = _plan_counts(config)
    n, m = c["n_points"], c["n_scales"]
    bytes_per = n * n * 8
    # one-sweep assembly: ~3 working s-matrices plus one accumulator per kernel
    mem = (c["n_kernels"] + 3) * bytes_per
    # dominant cost: one symmetric rank-k update per scale
    seconds = m * (n**3 / 2.0) / 5e9
    lines = [
        f"space: {c['kind']}, {n} points "
        f"(resolution {format_float(c['resolution'])}, "
        f"radius {format_float(c['domain_radius'])})",
        f"scales: {m} from {format_float(c['t_min'])} to {format_float(c['t_max'])} "
        f"({config.scale['per_decade']}/decade)",
        f"kernels: {c['n_kernels']} dense {n}x{n} accumulators "
        f"(~{c['n_kernels'] * bytes_per / 1e6:.0f} MB) "
        f"plus ~3 working matrices; total ~{mem / 1e6:.0f} MB",
        f"runtime: ~{max(seconds, 1.0):.0f} s for the scale sweep "
        "(one symmetric rank-k update per scale), plus per-experiment fits",
        f"experiments: {', '.join(config.experiments) if config.experiments else '(none)'}",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


class _Context:
    """Lazily built shared state: space, collection, kernel cache."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._space = None
        self._ai = None
        self._kernels: dict = {}

    @property
    def space(self):
        if self._space is None:
            self._space = space_mod.space_from_descriptor(self.config.space)
        return self._space

    @property
    def ai(self):
        if self._ai is None:
            sc = self.config.scale
            if sc.get("t_min") is not None and sc.get("t_max") is not None:
                grid = approx_id.ScaleGrid.build(
                    sc["t_min"], sc["t_max"], per_decade=sc["per_decade"]
                )
            else:
                grid = approx_id.ScaleGrid.default_for(
                    self.space, per_decade=sc["per_decade"]
                )
            self._ai = approx_id.build_ai_collection(self.space, scale_grid=grid)
        return self._ai

    def kernel(self, kind: str, alpha: float):
        key = (kind, alpha)
        if key not in self._kernels:
            pending = self._pending_requests()
            want = kernels.KernelRequest(kind=kind, alpha=alpha)
            if want not in pending:
                pending.append(want)
            built = kernels.assemble_kernels(self.ai, pending)
            for req, ker in built.items():
                self._kernels[(req.kind, req.alpha)] = ker
        return self._kernels[key]

    def _pending_requests(self):
        """Everything the selected experiments will need, built in one sweep."""
        cfg = self.config
        reqs = []
        exps = set(cfg.experiments)
        for a in cfg.alphas:
            if exps & {"verify-kernels", "improvement", "embedding",
                       "contraction", "invert"}:
                reqs.append(kernels.KernelRequest("bessel", a))
            if exps & {"verify-kernels", "contraction", "invert", "euclid-compare"}:
                reqs.append(kernels.KernelRequest("frac_deriv", a))
            if "verify-kernels" in exps:
                reqs.append(kernels.KernelRequest("riesz", a))
        return [r for r in reqs if (r.kind, r.alpha) not in self._kernels]


def _run_verify_ai(ctx: _Context):
    cfg = ctx.config
    rep1 = approx_id.verify_ai_properties(
        ctx.ai, stability_window=cfg.tolerances["stability_window"]
    )
    sp = ctx.space
    rep2 = approx_id.calderon_residual(ctx.ai, norms.centered_bump(sp))
    ts = rep1.details["tested_scales"]
    upper = rep1.details["upper_constant_per_scale"]
    csv = (
        "constants",
        ["t", "upper_constant"],
        [[float(t), float(u)] for t, u in zip(ts, upper)],
    )
    return [rep1, rep2], [csv]


def _run_verify_kernels(ctx: _Context):
    reports, rows = [], []
    for a in ctx.config.alphas:
        for kind in ("bessel", "riesz", "frac_deriv"):
            ker = ctx.kernel(kind, a)
            rep = kernels.verify_kernel_lemmas(
                ker, q_exponent=ctx.config.tolerances["q_exponent"]
            )
            rep.name = f"kernel_lemmas_{kind}_alpha={format_float(a)}"
            reports.append(rep)
            rows.append([a, kind, ker.quadrature_total, ker.exact_total,
                         ker.row_sum_budget])
    csv = ("rowsums",
           ["alpha", "kind", "quadrature_total", "exact_total", "budget"], rows)
    return reports, [csv]


def _run_improvement(ctx: _Context):
    cfg = ctx.config
    a = cfg.alphas[0]
    ker = ctx.kernel("bessel", a)
    reports, rows = [], []
    for family in ("lipschitz", "besov", "hajlasz"):
        rep = norms.improvement_experiment(
            ker, family, a, cfg.beta, cfg.ps[0], seed=cfg.seed
        )
        reports.append(rep)
        for i, pf in enumerate(rep.details["per_function"]):
            rows.append([family, i, pf["source"], pf["target"], pf["ratio"]])
    csv = ("ratios", ["family", "index", "source", "target", "ratio"], rows)
    return reports, [csv]


def _run_embedding(ctx: _Context):
    cfg = ctx.config
    reports, rows = [], []
    for a in cfg.alphas:
        ker = ctx.kernel("bessel", a)
        for p in cfg.ps:
            rep = norms.sobolev_embedding_experiment(ker, p, seed=cfg.seed)
            rep.name = f"sobolev_embedding_alpha={format_float(a)}_p={format_float(p)}"
            reports.append(rep)
            for c in rep.checks:
                rows.append([a, p, c.property, c.constant])
    csv = ("ratios", ["alpha", "p", "property", "constant"], rows)
    return reports, [csv]


def _run_contraction(ctx: _Context):
    cfg = ctx.config
    report = PropertyReport(name="contraction_sweep")
    rows = []
    estimates = []
    for a in cfg.alphas:
        rep = operators.contraction_norm(
            ctx.kernel("bessel", a), ctx.kernel("frac_deriv", a), p=2.0,
            seed=cfg.seed,
        )
        estimates.append(rep.norm_estimate)
        rows.append([a, 2.0, rep.norm_estimate, rep.converged, rep.iterations])
        report.add(
            f"contractive-alpha={format_float(a)}",
            rep.norm_estimate,
            1.0,
            rep.converged and rep.norm_estimate < 1.0,
            iterations=rep.iterations,
        )
    if len(estimates) > 1:
        mono = bool(np.all(np.diff(estimates) >= -1e-12))
        report.add("estimates-nondecreasing-in-alpha", float(max(estimates)),
                   1.0, mono, alphas=list(cfg.alphas))
    csv = ("norms", ["alpha", "p", "estimate", "converged", "iterations"], rows)
    return [report], [csv]


def _run_invert(ctx: _Context):
    cfg = ctx.config
    report = PropertyReport(name="invert_round_trip")
    rows = []
    for a in cfg.alphas:
        kj = ctx.kernel("bessel", a)
        kd = ctx.kernel("frac_deriv", a)
        sp = ctx.space
        g0 = norms.centered_bump(sp, width=sp.domain_radius / 10.0)
        g0[~kj.guard.valid(1.0)] = 0.0
        f = operators.bessel_matrix(kj) @ g0
        ghat, rep = operators.invert_bessel(kj, kd, f, tol=1e-10, return_report=True)
        w = sp.weight
        rel = float(np.sqrt(((ghat - g0) ** 2) @ w / ((g0**2) @ w)))
        report.add(
            f"round-trip-alpha={format_float(a)}",
            rel,
            1e-3,
            rel < 1e-3,
            contraction_norm=rep.details["contraction_norm"],
            terms_used=rep.details["terms_used"],
        )
        rows.append([a, rep.details["contraction_norm"],
                     rep.details["terms_used"], rel])
    csv = ("residuals", ["alpha", "contraction_norm", "terms", "relative_error"], rows)
    return [report], [csv]


def _run_tav(ctx: _Context):
    cfg = ctx.config
    a = cfg.alphas[0]
    reports, rows = [], []
    consts = []
    for v in cfg.v_list:
        rep = operators.t_alpha_v_kernel(ctx.ai, a, v, delta=cfg.delta)
        rep.name = f"t_alpha_v={format_float(v)}"
        reports.append(rep)
        env = rep.check_named("envelope-constant")
        t1 = rep.check_named("annihilates-constants")
        consts.append(env.constant)
        rows.append([v, env.constant, t1.constant])
    if len(consts) > 1:
        summary = PropertyReport(name="t_alpha_v_spread")
        spread = max(consts) / min(consts) if min(consts) > 0 else math.inf
        summary.add("normalized-constant-spread", spread, 3.0, spread <= 3.0,
                    v_list=list(cfg.v_list))
        reports.append(summary)
    csv = ("constants", ["v", "normalized_constant", "t1_residual"], rows)
    return reports, [csv]


def _run_euclid(ctx: _Context):
    cfg = ctx.config
    if ctx.space.descriptor.get("kind") != "line":
        raise ValueError("euclid-compare requires a line space")
    a = cfg.alphas[0]
    ker = ctx.kernel("frac_deriv", a)
    grid = euclidean.PeriodicGrid.for_line_space(ctx.space)
    battery = euclidean.gaussian_battery(grid, seed=cfg.seed or 7)
    rep = euclidean.euclidean_consistency(
        ker, grid,
        spread_tolerance=cfg.tolerances["euclid_spread"],
        match_tolerance=cfg.tolerances["euclid_match"],
    )
    consts = rep.details["fitted_C_per_function"]
    csv = ("constants", ["index", "fitted_C"],
           [[i, c] for i, c in enumerate(consts)])
    return [rep], [csv]


_RUNNERS = {
    "verify-ai": _run_verify_ai,
    "verify-kernels": _run_verify_kernels,
    "improvement": _run_improvement,
    "embedding": _run_embedding,
    "contraction": _run_contraction,
    "invert": _run_invert,
    "tav-bounds": _run_tav,
    "euclid-compare": _run_euclid,
}


def run(config: ExperimentConfig) -> int:
    """Execute the selected experiments; 0 iff every suite passed."""
    if not config.experiments:
        return 0
    os.makedirs(config.output_dir, exist_ok=True)
    ctx = _Context(config)
    failing = []
    for exp in config.experiments:
        try:
            reports, csvs = _RUNNERS[exp](ctx)
            error = None
        except Exception as exc:  # a crashed suite is a failed suite
            reports, csvs = [], []
            error = f"{type(exc).__name__}: {exc}"
        passed = error is None and all(r.passed for r in reports)
        doc = {
            "experiment": exp,
            "passed": passed,
            "reports": [r.to_dict() for r in reports],
        }
        if error is not None:
            doc["error"] = error
        path = os.path.join(config.output_dir, f"report_{exp}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, default=str)
            fh.write("\n")
        for name, header, rows in csvs:
            write_csv(
                os.path.join(config.output_dir, f"data_{exp}_{name}.csv"),
                header,
                rows,
            )
        status = "PASS" if passed else "FAIL"
        print(f"{exp}: {status}")
        if error is not None:
            print(f"  error: {error}")
        for r in reports:
            for line in r.summary_lines():
                print(f"  {line}")
        if not passed:
            failing.append(exp)
    if failing:
        print("failing experiments: " + ", ".join(failing))
        return 1
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_THREAD_LIMITER = None


def _set_threads(count: int | None) -> None:
    """Best-effort BLAS thread cap; env hints plus threadpoolctl if present."""
    global _THREAD_LIMITER
    if count is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(count)
    try:
        from threadpoolctl import threadpool_limits

        _THREAD_LIMITER = threadpool_limits(limits=count)
    except ImportError:
        pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracpot",
        description="Run or plan potential-theory experiment suites from a JSON config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "describe"):
        p = sub.add_parser(cmd)
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument("--output-dir", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS threads (best effort)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.output_dir is not None:
            config.output_dir = args.output_dir
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: must be a nonnegative integer")
            config.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    _set_threads(args.threads)
    if args.command == "describe":
        print(describe(config))
        return 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
