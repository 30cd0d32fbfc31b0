"""Command-line front end: sumrule, coeffs, verify and spectrum subcommands.

Configuration comes from a JSON file (fail-closed: unknown keys are rejected
and every validation problem is reported in one pass) with command-line flags
overriding individual entries.  Outputs are CSV or JSON records with floats
printed to 17 significant digits; errors are single-line JSON on stderr.

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 convergence slope below threshold (verify).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import coefficients, oracle, sumrules
from .basis import (
    DensityPerturbation,
    FourierCosine,
    ModeBasis,
    Polynomial,
    Rectangle2D,
    Separable2D,
    String1D,
    Tabulated,
    build_sigma_table,
)
from .errors import (
    ConfigError,
    FactorizationError,
    InsufficientDataError,
    NumericalError,
    QuadratureError,
    ValidationError,
)
from .sumrules import CSV_FIELDS, RationalOrderSpec, SumRuleResult

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_SLOPE = 4

ROUTES = ("closed", "trace1", "trace2", "oracle", "all")

_PROFILE_KEYS = {
    "fourier-cosine": {"type", "coeffs"},
    "polynomial": {"type", "coeffs"},
    "tabulated": {"type", "x", "y"},
    "separable": {"type", "terms"},
}

_TOP_KEYS = {
    "version",
    "basis",
    "density",
    "truncation",
    "orders",
    "route",
    "diagonal_mode",
    "output",
    "cache_dir",
    "deterministic",
    "slope_threshold",
}


@dataclass
class RunConfig:
    """Validated run configuration shared by all subcommands."""

    basis: ModeBasis
    profile: object
    lam_list: list
    orders: list
    quadrature_nodes: int | None = None
    inner_discard: int | None = None
    top_discard: float = 0.25
    route: str = "all"
    diagonal_mode: str = sumrules.TRUNCATED
    out_format: str = "csv"
    out_path: str | None = None
    cache_dir: str | None = None
    deterministic: bool = False
    slope_threshold: float = 2.7

    def densities(self):
        return [DensityPerturbation(self.profile, lam) for lam in self.lam_list]

    def normalized(self) -> dict:
        """Stable dict form: parse(normalized(cfg)) reproduces cfg."""
        dom = self.basis.domain
        basis = (
            {"kind": "string", "length": dom.length}
            if isinstance(dom, String1D)
            else {"kind": "rectangle", "a": dom.a, "b": dom.b}
        )
        return {
            "version": 1,
            "basis": basis,
            "density": {
                "profile": _profile_to_dict(self.profile),
                "lambda_list": list(self.lam_list),
            },
            "truncation": {
                "modes": self.basis.mode_count,
                "quadrature_nodes": self.quadrature_nodes,
                "inner_discard": self.inner_discard,
                "top_discard_fraction": self.top_discard,
            },
            "orders": [o.label() for o in self.orders],
            "route": self.route,
            "diagonal_mode": self.diagonal_mode,
            "output": {"format": self.out_format, "path": self.out_path},
            "cache_dir": self.cache_dir,
            "deterministic": self.deterministic,
            "slope_threshold": self.slope_threshold,
        }


def _profile_to_dict(profile) -> dict:
    if isinstance(profile, FourierCosine):
        return {"type": "fourier-cosine", "coeffs": list(profile.coeffs)}
    if isinstance(profile, Polynomial):
        return {"type": "polynomial", "coeffs": list(profile.coeffs)}
    if isinstance(profile, Tabulated):
        return {"type": "tabulated", "x": list(profile.xs), "y": list(profile.ys)}
    return {
        "type": "separable",
        "terms": [
            {"x": _profile_to_dict(px), "y": _profile_to_dict(py)}
            for px, py in profile.terms
        ],
    }


def _parse_profile(node, problems, where="density.profile"):
    if not isinstance(node, dict):
        problems.append(f"{where}: expected an object")
        return None
    kind = node.get("type")
    if kind not in _PROFILE_KEYS:
        problems.append(f"{where}: unknown profile type {kind!r}")
        return None
    unknown = set(node) - _PROFILE_KEYS[kind]
    if unknown:
        problems.append(f"{where}: unknown keys {sorted(unknown)}")
        return None
    try:
        if kind == "fourier-cosine":
            return FourierCosine(tuple(node.get("coeffs", ())))
        if kind == "polynomial":
            return Polynomial(tuple(node.get("coeffs", ())))
        if kind == "tabulated":
            return Tabulated(tuple(node["x"]), tuple(node["y"]))
        terms = []
        for i, term in enumerate(node.get("terms", ())):
            if set(term) - {"x", "y"}:
                problems.append(f"{where}.terms[{i}]: unknown keys")
                return None
            px = _parse_profile(term["x"], problems, f"{where}.terms[{i}].x")
            py = _parse_profile(term["y"], problems, f"{where}.terms[{i}].y")
            if px is None or py is None:
                return None
            terms.append((px, py))
        return Separable2D(tuple(terms))
    except (KeyError, TypeError, ValidationError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def load_config(path: str | None, overrides: argparse.Namespace) -> RunConfig:
    """Parse and validate configuration; raise ConfigError listing every problem."""
    problems: list[str] = []
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"])
        if not isinstance(data, dict):
            raise ConfigError(["config root must be a JSON object"])
        unknown = set(data) - _TOP_KEYS
        if unknown:
            problems.append(f"unknown config keys {sorted(unknown)}")
        if data.get("version") not in (None, 1):
            problems.append(f"unsupported config version {data.get('version')!r}")

    # --- basis ---
    basis_node = data.get("basis", {"kind": "string", "length": 1.0})
    trunc_node = data.get("truncation", {})
    if set(trunc_node) - {"modes", "quadrature_nodes", "inner_discard", "top_discard_fraction"}:
        problems.append("truncation: unknown keys")
    modes = trunc_node.get("modes", 200)
    if getattr(overrides, "modes", None):
        modes = overrides.modes
    domain = None
    kind = basis_node.get("kind") if isinstance(basis_node, dict) else None
    if kind == "string":
        if set(basis_node) - {"kind", "length"}:
            problems.append("basis: unknown keys")
        domain = String1D(float(basis_node.get("length", 1.0)))
    elif kind == "rectangle":
        if set(basis_node) - {"kind", "a", "b"}:
            problems.append("basis: unknown keys")
        domain = Rectangle2D(float(basis_node.get("a", 1.0)), float(basis_node.get("b", 1.0)))
    else:
        problems.append(f"basis.kind must be 'string' or 'rectangle', got {kind!r}")
    basis = None
    if domain is not None:
        try:
            basis = ModeBasis(domain, int(modes))
        except (ValidationError, ValueError) as exc:
            problems.append(f"basis: {exc}")

    # --- density ---
    dens_node = data.get("density", {})
    if set(dens_node) - {"profile", "lambda", "lambda_list"}:
        problems.append("density: unknown keys")
    if "lambda" in dens_node and "lambda_list" in dens_node:
        problems.append("density: give either lambda or lambda_list, not both")
    profile_node = dens_node.get("profile")
    if profile_node is None:
        profile = FourierCosine((0.0, 0.0, 1.0))  # reference profile cos(2 pi x / L)
    else:
        profile = _parse_profile(profile_node, problems)
    lam_list = dens_node.get("lambda_list", [dens_node.get("lambda", 0.1)])
    if getattr(overrides, "lam", None) is not None:
        try:
            lam_list = [float(tok) for tok in str(overrides.lam).split(",") if tok]
        except ValueError:
            problems.append(f"--lambda: cannot parse {overrides.lam!r}")
    try:
        lam_list = [float(v) for v in lam_list]
    except (TypeError, ValueError):
        problems.append("density: lambda values must be numbers")
        lam_list = []

    # --- orders ---
    order_tokens = data.get("orders", ["3/2"])
    if getattr(overrides, "s", None):
        order_tokens = overrides.s
    orders = []
    for tok in order_tokens:
        try:
            orders.append(RationalOrderSpec.parse(str(tok)))
        except (ValidationError, ValueError, ZeroDivisionError) as exc:
            problems.append(f"order {tok!r}: {exc}")

    # --- remaining scalars ---
    route = getattr(overrides, "route", None) or data.get("route", "all")
    if route not in ROUTES:
        problems.append(f"route must be one of {ROUTES}, got {route!r}")
    diagonal_mode = data.get("diagonal_mode", sumrules.TRUNCATED)
    if getattr(overrides, "resummed", False):
        diagonal_mode = sumrules.RESUMMED
    if diagonal_mode not in (sumrules.TRUNCATED, sumrules.RESUMMED):
        problems.append(f"diagonal_mode must be truncated|resummed, got {diagonal_mode!r}")
    out_node = data.get("output", {})
    if set(out_node) - {"format", "path"}:
        problems.append("output: unknown keys")
    out_format = getattr(overrides, "format", None) or out_node.get("format", "csv")
    if out_format not in ("csv", "json"):
        problems.append(f"output format must be csv|json, got {out_format!r}")
    out_path = getattr(overrides, "out", None) or out_node.get("path")
    cache_dir = getattr(overrides, "cache_dir", None) or data.get("cache_dir")
    deterministic = bool(data.get("deterministic", False) or getattr(overrides, "deterministic", False))
    threshold = float(data.get("slope_threshold", 2.7))
    if getattr(overrides, "threshold", None) is not None:
        threshold = overrides.threshold
    top_discard = float(trunc_node.get("top_discard_fraction", 0.25))

    # --- cross validation (one pass, everything reported) ---
    if basis is not None and profile is not None:
        for lam in lam_list:
            density = DensityPerturbation(profile, lam)
            try:
                density.validate(basis.domain)
            except ValidationError as exc:
                problems.append(f"lambda={lam:g}: {exc}")
        for spec in orders:
            try:
                spec.validate_for(basis)
            except ValidationError as exc:
                problems.append(f"order {spec.label()}: {exc}")
            if route == "trace1" and spec.kind != "one_plus_inv":
                problems.append(f"order {spec.label()}: route trace1 needs a 1+1/N order")
            if route == "trace2" and spec.kind != "inv_sum":
                problems.append(f"order {spec.label()}: route trace2 needs a 1/N+1/N' order")
    if not lam_list:
        problems.append("no lambda values given")
    if problems:
        raise ConfigError(problems)
    return RunConfig(
        basis=basis,
        profile=profile,
        lam_list=lam_list,
        orders=orders,
        quadrature_nodes=trunc_node.get("quadrature_nodes"),
        inner_discard=trunc_node.get("inner_discard"),
        top_discard=top_discard,
        route=route,
        diagonal_mode=diagonal_mode,
        out_format=out_format,
        out_path=out_path,
        cache_dir=cache_dir,
        deterministic=deterministic,
        slope_threshold=threshold,
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _write_records(records: list[SumRuleResult], cfg: RunConfig, extra: dict | None = None) -> str:
    if cfg.out_format == "json":
        doc = {"results": [r.to_dict() for r in records]}
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        lines = [",".join(CSV_FIELDS)]
        lines += [r.csv_row() for r in records]
        text = "\n".join(lines) + "\n"
    if cfg.out_path:
        with open(cfg.out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _routes_for(spec: RationalOrderSpec, route: str):
    if route != "all":
        return [route]
    chosen = ["closed"]
    chosen.append("trace1" if spec.kind == "one_plus_inv" else "trace2")
    chosen.append("oracle")
    return chosen


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_sumrule(cfg: RunConfig) -> int:
    table = build_sigma_table(
        cfg.basis, cfg.profile, 2, nodes=cfg.quadrature_nodes, cache_dir=cfg.cache_dir
    )
    records: list[SumRuleResult] = []
    diffs: list[dict] = []
    for spec in cfg.orders:
        for density in cfg.densities():
            group: dict[str, SumRuleResult] = {}
            for route in _routes_for(spec, cfg.route):
                if route == "closed":
                    res = sumrules.z_closed_form(
                        spec, table, cfg.basis, density, diagonal_mode=cfg.diagonal_mode
                    )
                elif route == "trace1":
                    res = sumrules.z_via_trace_one_plus_inv(
                        spec.n_root, table, cfg.basis, density
                    )
                elif route == "trace2":
                    res = sumrules.z_via_trace_inv_sum(
                        spec.n_root, spec.n_root2, table, cfg.basis, density
                    )
                elif route == "oracle":
                    res = oracle.oracle_sum_rule(
                        spec, cfg.basis, density, table=table, top_discard=cfg.top_discard
                    )
                else:  # pragma: no cover - guarded by config validation
                    raise ValidationError(f"unknown route {route}")
                group[route] = res
                records.append(res)
            if len(group) > 1:
                names = sorted(group)
                for i, a in enumerate(names):
                    for b in names[i + 1 :]:
                        diffs.append(
                            {
                                "order": spec.label(),
                                "lambda": density.lam,
                                "pair": f"{a}-vs-{b}",
                                "abs_difference": abs(group[a].z_total - group[b].z_total),
                            }
                        )
    extra = {"differences": diffs} if diffs else None
    _write_records(records, cfg, extra)
    if diffs and (cfg.out_path or cfg.out_format == "csv"):
        sys.stdout.write("pairwise |dZ|:\n")
        for d in diffs:
            sys.stdout.write(
                f"  s={d['order']} lambda={d['lambda']:g} {d['pair']}: {d['abs_difference']:.3e}\n"
            )
    return EXIT_OK


def cmd_coeffs(cfg: RunConfig, n_root: int, max_order: int) -> int:
    table = build_sigma_table(
        cfg.basis, cfg.profile, max(max_order, 1), nodes=cfg.quadrature_nodes,
        cache_dir=cfg.cache_dir,
    )
    cset = coefficients.q_generic_recursion(n_root, max_order, table, cfg.basis)
    out_dir = Path(cfg.out_path or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"n_root": n_root, "max_order": max_order, "modes": cfg.basis.mode_count, "orders": []}
    b = cfg.inner_discard if cfg.inner_discard is not None else cfg.basis.mode_count // 4
    for k in range(max_order + 1):
        path = out_dir / f"q_N{n_root}_order{k}.csv"
        coefficients.export_coefficients_csv(cset.q_orders[k], path)
        summary["orders"].append(
            {
                "order": k,
                "file": path.name,
                "convolution_residual": coefficients.verify_convolution(cset, k, discard=b),
            }
        )
    summary_path = out_dir / f"residuals_N{n_root}.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(f"wrote {max_order + 1} coefficient files and {summary_path.name}\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, first_order_only: bool) -> int:
    if len(cfg.lam_list) < 3:
        raise ValidationError("verify needs at least 3 lambda values")
    spec = cfg.orders[0]
    fit = oracle.convergence_order_fit(
        spec,
        cfg.profile,
        cfg.lam_list,
        cfg.basis,
        drop_second_order=first_order_only,
        top_discard=cfg.top_discard,
        diagonal_mode=cfg.diagonal_mode,
        nodes=cfg.quadrature_nodes,
        cache_dir=cfg.cache_dir,
    )
    sys.stdout.write("lambda,abs_error\n")
    for lam, err in fit.pairs:
        sys.stdout.write(f"{lam:.17g},{err:.17g}\n")
    for lam, err, floor in fit.excluded:
        sys.stdout.write(f"# excluded lambda={lam:g}: error {err:.3e} below floor {floor:.3e}\n")
    sys.stdout.write(f"slope,{fit.slope:.17g}\n")
    sys.stdout.write(f"threshold,{cfg.slope_threshold:.17g}\n")
    if fit.slope < cfg.slope_threshold:
        sys.stdout.write("verdict,FAIL\n")
        return EXIT_SLOPE
    sys.stdout.write("verdict,PASS\n")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    density = cfg.densities()[0]
    table = build_sigma_table(
        cfg.basis, cfg.profile, 1, nodes=cfg.quadrature_nodes, cache_dir=cfg.cache_dir
    )
    problem = oracle.assemble(cfg.basis, density, table=table)
    values = oracle.solve_spectrum(problem)
    lines = ["index,eigenvalue"]
    lines += [f"{i + 1},{v:.17g}" for i, v in enumerate(values)]
    text = "\n".join(lines) + "\n"
    if cfg.out_path:
        with open(cfg.out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="billzeta",
        description="Spectral zeta functions of rational order for heterogeneous billiards",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON run configuration")
        p.add_argument("--s", action="append", default=None, metavar="SPEC",
                       help="rational order, e.g. 3/2, 1+1/4 or 1/2+1/3 (repeatable)")
        p.add_argument("--lambda", dest="lam", default=None, metavar="X[,X...]",
                       help="density strength(s)")
        p.add_argument("--route", choices=ROUTES, default=None)
        p.add_argument("--resummed", action="store_true", help="resummed diagonal mode")
        p.add_argument("--deterministic", action="store_true")
        p.add_argument("--cache-dir", dest="cache_dir", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--modes", type=int, default=None, help="basis truncation M")

    p_sum = sub.add_parser("sumrule", help="compute Z(s) by the requested routes")
    common(p_sum)
    p_coef = sub.add_parser("coeffs", help="dump q^(k) coefficient matrices as CSV")
    common(p_coef)
    p_coef.add_argument("--n-root", type=int, default=2, help="root order N")
    p_coef.add_argument("--max-order", type=int, default=2)
    p_ver = sub.add_parser("verify", help="lambda-scaling validation against the oracle")
    common(p_ver)
    p_ver.add_argument("--threshold", type=float, default=None, help="minimum slope")
    p_ver.add_argument("--first-order-only", action="store_true",
                       help="drop the second-order term (harness self-check)")
    p_spec = sub.add_parser("spectrum", help="export the heterogeneous spectrum as CSV")
    common(p_spec)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if args.command == "sumrule":
            return cmd_sumrule(cfg)
        if args.command == "coeffs":
            return cmd_coeffs(cfg, args.n_root, args.max_order)
        if args.command == "verify":
            return cmd_verify(cfg, args.first_order_only)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        raise ValidationError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(json.dumps({"error": "validation", "problems": exc.problems}), file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, InsufficientDataError) as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, FactorizationError, NumericalError) as exc:
        print(json.dumps({"error": "numerical", "detail": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:  # console-script wrapper
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
