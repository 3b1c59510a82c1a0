"""Command line driver: ``twisted-transfer <kind> [flags]``.

Kinds: validate, assemble, simulate, moments, limit, example6. Settings come
from defaults, then the YAML config, then command-line flags (flags win).
Every output file starts with a provenance block holding the config hash,
the master seed and the package version.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .assembly import (
    DEFAULT_ANGULAR,
    DEFAULT_L,
    DEFAULT_RADIAL,
    assemble_all,
    operator_norm_bound,
    overlap_matrix,
    quadrature_nodes,
    save_operator,
)
from .freegroup import sample_homomorphism, trial_seed
from .limit import (
    DEFAULT_PRUNE,
    Z0_EDGE,
    arcsine_count,
    arcsine_moment,
    cayley_ball_matrix,
    chebyshev_coefficients,
    delta0_closed_form,
    gram_element,
    lambda_norm_bound,
    tau,
    tau_moment,
    tau_smooth,
    z0_element,
)
from .stats import MonteCarloConfig, estimate_moments, limit_moments_L, run_monte_carlo, write_records
from .system import gauss_system, system_from_dict, system_to_dict, validate_system
from .twisted import (
    build_twisted_matrix,
    compressed_singular_values,
    counting_function,
    eigenvalues,
    singular_values,
)

KINDS = ("validate", "assemble", "simulate", "moments", "limit", "example6")
DENSE_LIMIT = 2048  # largest N*L handled by a full dense SVD in `simulate`


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "validate"
    system: object = None  # path to a system file, an inline mapping, or None for Gauss {2, 3}
    n: list = field(default_factory=lambda: [8])
    L: int = DEFAULT_L
    n_radial: int = DEFAULT_RADIAL
    n_angular: int = DEFAULT_ANGULAR
    trials: int = 20
    seed: int = 0
    threads: int = 0
    out: str = "out"
    eigenvalues: bool = False
    r0: float | None = None
    powers: list = field(default_factory=list)
    p_max: int = 4
    radius: int = 2
    bins: int = 60
    grid: list = field(default_factory=lambda: [[1.0, 12.0], [0.5, 3.0], [3.0, 6.0], [6.0, 12.96]])
    cheb_degree: int = 120
    smooth_width: float = 0.3

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("L", "n_radial", "n_angular", "trials", "p_max", "radius", "bins", "cheb_degree"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.n or any(int(v) < 1 for v in self.n):
            raise ConfigError("every N must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def resolved_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def hash(self) -> str:
        blob = json.dumps(asdict(self) | {"threads": None, "out": None}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    if isinstance(data.get("system"), str):
        data["system"] = str((Path(path).parent / data["system"]).resolve())
    quad = data.pop("quadrature", None) or {}
    data.setdefault("n_radial", quad.get("n_radial", DEFAULT_RADIAL))
    data.setdefault("n_angular", quad.get("n_angular", DEFAULT_ANGULAR))
    if "N" in data:
        data["n"] = data.pop("N")
    if isinstance(data.get("n"), int):
        data["n"] = [data["n"]]
    unknown = set(data) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return data


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    overrides = {
        "kind": args.kind, "seed": args.seed, "trials": args.trials, "n": args.n,
        "L": args.L, "threads": args.threads, "out": args.out,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**data)
    cfg.validate()
    return cfg


# --- output helpers ------------------------------------------------------------

def provenance(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "version": __version__, "kind": cfg.kind}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, cfg: ExperimentConfig, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in provenance(cfg).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, cfg: ExperimentConfig, payload: dict) -> None:
    body = {"provenance": provenance(cfg), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


# --- experiment kinds ------------------------------------------------------------

def _system(cfg: ExperimentConfig):
    if cfg.system is None:
        s = gauss_system([2, 3])
    elif isinstance(cfg.system, dict):
        s = system_from_dict(cfg.system)
    else:
        with open(cfg.system) as fh:
            s = system_from_dict(yaml.safe_load(fh))
    validate_system(s)
    return s


def _assembled(cfg):
    s = _system(cfg)
    quad = quadrature_nodes(s.domain, cfg.n_radial, cfg.n_angular)
    return s, assemble_all(s, cfg.L, quad), overlap_matrix(s, quad)


def run_validate(cfg, out: Path) -> dict:
    s = _system(cfg)
    payload = {"system": system_to_dict(s), "validation": s.validation.to_dict()}
    write_json(out / "validation.json", cfg, payload)
    return payload


def run_assemble(cfg, out: Path) -> dict:
    s, ops, H = _assembled(cfg)
    for op in ops:
        save_operator(out / f"operator_{op.branch}.bin", op, {"provenance": provenance(cfg)})
    rows = [(i, j, H.H[i, j].real, H.H[i, j].imag) for i in range(H.d) for j in range(H.d)]
    write_csv(out / "H.csv", cfg, ["i", "j", "re", "im"], rows)
    payload = {
        "L1": limit_moments_L(H, 1),
        "tail_bounds": [op.tail_bound for op in ops],
        "operator_norm_bound": operator_norm_bound(s),
    }
    write_json(out / "assemble.json", cfg, payload)
    return payload


def run_simulate(cfg, out: Path) -> dict:
    s, ops, H = _assembled(cfg)
    L1 = limit_moments_L(H, 1)
    summary = {"L1": L1, "runs": {}}
    for N in cfg.n:
        def one(i, N=N):
            seed = trial_seed(cfg.seed, i)
            hom = sample_homomorphism(s.d, N, seed)
            if N * cfg.L <= DENSE_LIMIT:
                m = build_twisted_matrix(ops, hom)
                sv, err = singular_values(m), 0.0
                ev = eigenvalues(m) if cfg.eigenvalues else None
            else:
                rep = compressed_singular_values(ops, hom)
                sv, err, ev = rep.singular_values, rep.error_bound, None
            return seed, sv, err, ev

        with ThreadPoolExecutor(cfg.resolved_threads()) as pool:
            results = list(pool.map(one, range(cfg.trials)))
        rows = []
        for seed, sv, _, ev in results:
            for k, v in enumerate(sv):
                row = [seed, N, cfg.L, k, v]
                if cfg.eigenvalues:
                    lam = ev[k] if ev is not None and k < len(ev) else complex("nan")
                    row += [lam.real, lam.imag]
                rows.append(row)
        header = ["seed", "N", "L", "index", "singular_value"] + (["re_lambda", "im_lambda"] if cfg.eigenvalues else [])
        write_csv(out / f"spectrum_N{N}.csv", cfg, header, rows)
        c3 = max(float(np.sum(sv)) / N for _, sv, _, _ in results)
        r0 = cfg.r0 if cfg.r0 is not None else 10 * c3 / L1
        ratios = [counting_function(sv, r0) / N for _, sv, _, _ in results]
        summary["runs"][str(N)] = {
            "r0": r0, "trace_norm_per_N_max": c3, "count_ratio_min": min(ratios),
            "count_ratio_max": max(ratios), "count_ratio_mean": float(np.mean(ratios)),
            "max_error_bound": max(e for _, _, e, _ in results),
        }
    write_json(out / "weyl_summary.json", cfg, summary)
    return summary


def run_moments(cfg, out: Path) -> dict:
    s, ops, H = _assembled(cfg)
    X = gram_element(ops) if cfg.powers else None
    reports = {}
    rows = []
    for N in cfg.n:
        mc = MonteCarloConfig(H=H, N=N, trials=cfg.trials, master_seed=cfg.seed, L=cfg.L,
                              algebra_element=X, powers=list(cfg.powers), threads=cfg.resolved_threads())
        records = run_monte_carlo(mc)
        write_records(out / f"records_N{N}.jsonl", records, provenance(cfg))
        rep = estimate_moments(records, H)
        reports[str(N)] = rep.to_dict()
        for r in rep.rows:
            rows.append([N, r.k, r.empirical, r.se, r.target, r.z_score if r.z_score is not None else float("nan")])
    write_csv(out / "moments.csv", cfg, ["N", "k", "empirical", "se", "target", "z_score"], rows)
    payload = {"reports": reports, "L1": limit_moments_L(H, 1)}
    write_json(out / "moment_report.json", cfg, payload)
    return payload


def run_limit(cfg, out: Path) -> dict:
    s, ops, H = _assembled(cfg)
    X = gram_element(ops)
    moments = [{"p": p, "tau_moment": tau_moment(X, p, cap=None), "method": "word-algebra",
                "pruning_threshold": DEFAULT_PRUNE, "remainder_bound": 0.0}
               for p in range(1, cfg.p_max + 1)]
    mat, words = cayley_ball_matrix(X, cfg.radius, s.d)
    ev = np.linalg.eigvalsh((mat + mat.conj().T) / 2)
    edges = np.linspace(min(0.0, ev.min()), ev.max() * (1 + 1e-12), cfg.bins + 1)
    hist, _ = np.histogram(ev, bins=edges)
    write_csv(out / "cayley_histogram.csv", cfg, ["bin_left", "bin_right", "count"],
              zip(edges[:-1], edges[1:], hist))
    payload = {"moments": moments, "tau": tau(X).real, "norm_bound": lambda_norm_bound(X),
               "cayley_radius": cfg.radius, "cayley_words": len(words)}
    write_json(out / "tau_moments.json", cfg, payload)
    return payload


def _smooth_window(a: float, b: float, width: float):
    from scipy.special import erf

    def f(x):
        x = np.asarray(x, dtype=float)
        step = 0.5 * (erf((x - a) / width) - erf((x - b) / width))
        return step / np.maximum(x, a / 2)
    return f


def run_example6(cfg, out: Path) -> dict:
    s = _system(cfg)
    Z = z0_element(delta0_closed_form(s.domain, cfg.L))
    rows = [[p, tau_moment(Z, p, cap=None), arcsine_moment(p)] for p in range(1, cfg.p_max + 1)]
    write_csv(out / "example6_moments.csv", cfg, ["p", "tau_moment_Z0", "arcsine_moment"], rows)
    K = lambda_norm_bound(Z)
    count_rows = []
    for a, b in cfg.grid:
        # interpolate at twice the degree so the discarded tail gives a remainder estimate
        coeffs = chebyshev_coefficients(_smooth_window(a, b, cfg.smooth_width), K, 2 * cfg.cheb_degree)
        sm = tau_smooth(Z, coeffs, K, cfg.cheb_degree)
        count_rows.append([a, b, arcsine_count(a, b), sm.value, sm.remainder])
    write_csv(out / "example6_counts.csv", cfg,
              ["a", "b", "arcsine_count", "tau_smooth_count", "chebyshev_remainder"], count_rows)
    payload = {"support_edge": Z0_EDGE, "moments": rows, "counts": count_rows}
    write_json(out / "example6.json", cfg, payload)
    return payload


RUNNERS = {
    "validate": run_validate, "assemble": run_assemble, "simulate": run_simulate,
    "moments": run_moments, "limit": run_limit, "example6": run_example6,
}


def run(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.kind](cfg, out)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twisted-transfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--trials", type=int)
    common.add_argument("--n", type=int, action="append", help="matrix size N (repeatable)")
    common.add_argument("--L", type=int, help="truncation order")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run the {kind} experiment")
    p_run = sub.add_parser("run", parents=[common], help="run the experiment named by --kind")
    p_run.add_argument("--kind", choices=KINDS)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.command != "run":
        args.kind = args.command
    out = Path(args.out or "out")
    try:
        cfg = build_config(args)
        out = Path(cfg.out)
        result = run(cfg)
    except Exception as exc:  # reported as machine-readable JSON, nonzero exit
        err = {"error": type(exc).__name__, "message": str(exc), "kind": args.kind,
               "version": __version__, "traceback": traceback.format_exc(limit=3)}
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(err, indent=2) + "\n")
        except OSError:
            pass
        print(json.dumps(err), file=sys.stderr)
        return 2
    print(json.dumps({"status": "ok", "kind": cfg.kind, "out": str(out)}, default=_json_default))
    return 0 if result is not None else 1


if __name__ == "__main__":
    sys.exit(main())
