"""Command-line entry point: runs the model checks and emits deterministic reports.

Every report carries a ``checks`` mapping of asserted bounds; the process
exits 0 iff all of them pass.  Floats are written as 17-significant-digit
strings and keys are sorted, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import joinings as jn
from .finsets import subsets_of_window
from .hilbert import check_unitary, permutation_unitary, unitarity_defect
from .model import checks
from .model import operators as ops
from .model.basis import empty_sector, safe_columns
from .model.config import ModelConfig
from .spectral import max_spectral_multiplicity, spectral_profile
from .weights import ConvergenceError, WeightSequence, fourier_coefficients, normalized_weights

DEFAULT_TOLERANCES = {
    "intertwine": 1e-10,
    "markov": 1e-12,
    "norm": 1e-10,
    "identity": 1e-12,
    "counterexample": 1e-12,
    "margin": 0.0,
    "adjoint": 1e-12,
}
MODEL_KEYS = ("N", "s", "phi", "M", "K", "safe_margin")
CONFIG_KEYS = set(MODEL_KEYS) | {"K_weights", "tolerances", "seed", "weights", "resolution"}


# ------------------------------------------------------------------ config


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    K_weights: int = 8  # geometric-weight horizon of the counterexample
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    weights: WeightSequence | None = None
    resolution: int = 1 << 12

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        model = ModelConfig(**{k: d[k] for k in MODEL_KEYS if k in d})
        tol = dict(DEFAULT_TOLERANCES)
        extra = set(d.get("tolerances", {})) - set(tol)
        if extra:
            raise ValueError(f"unknown tolerances: {sorted(extra)}")
        tol.update({k: float(v) for k, v in d.get("tolerances", {}).items()})
        weights = None
        if "weights" in d:
            weights = WeightSequence(np.array([float(v) for v in d["weights"]]), normalized=True)
            if weights.K > model.K:
                raise ValueError(f"weights reach |n| = {weights.K} > K = {model.K}")
            if abs(weights.total() - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {weights.total()!r}, not 1")
            if np.any(weights.values < 0):
                raise ValueError("weights must be nonnegative")
        seed = int(d.get("seed", 0))
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        K_weights = int(d.get("K_weights", 8))
        if K_weights < 0:
            raise ValueError("K_weights must be nonnegative")
        return cls(model, K_weights, tol, seed, weights, int(d.get("resolution", 1 << 12)))

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out.update(K_weights=self.K_weights, tolerances=self.tolerances, seed=self.seed, resolution=self.resolution)
        if self.weights is not None:
            out["weights"] = [float(v) for v in self.weights.values]
        return out

    def markov_weights(self) -> WeightSequence:
        if self.weights is not None:
            return self.weights
        return normalized_weights(self.model.K, self.resolution)


def load_config(path: str | None, seed: int | None = None) -> RunConfig:
    d = {} if path is None else json.loads(Path(path).read_text())
    if seed is not None:
        d["seed"] = seed
    return RunConfig.from_dict(d)


# ------------------------------------------------------------ serialization


def _num(x: float) -> str:
    return format(float(x), ".17g")


def to_jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _num(obj.real), "im": _num(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"


def finish(report: dict, checks_: dict[str, bool]) -> dict:
    report["checks"] = {k: bool(v) for k, v in checks_.items()}
    report["passed"] = all(report["checks"].values())
    return report


# ----------------------------------------------------------------- commands


def coeffs_rows(K: int, resolution: int) -> list[tuple[int, float, float]]:
    a = fourier_coefficients(K, resolution)
    rows, running = [], 0.0
    terms = []
    for n, v in zip(a.indices, a.values):
        terms.append(float(v))
        running = math.fsum(terms)
        rows.append((int(n), float(v), running))
    return rows


def cmd_coeffs(K: int, resolution: int, fmt: str = "csv") -> tuple[str, bool]:
    rows = coeffs_rows(K, resolution)
    if fmt == "json":
        report = {"K": K, "resolution": resolution, "rows": [{"n": n, "a_n": v, "running_sum": s} for n, v, s in rows]}
        return dumps(finish(report, {"nonnegative": all(v >= -1e-9 for _, v, _ in rows)})), True
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "a_n", "running_sum"])
    for n, v, s in rows:
        w.writerow([n, _num(v), _num(s)])
    return buf.getvalue(), True


def cmd_construct(rc: RunConfig) -> dict:
    cfg, a = rc.model, rc.markov_weights()
    J, Js = ops.markov_J(a, cfg), ops.markov_J_adjoint(a, cfg)
    adj_dev = float(abs(Js - J.conj().T).max()) if (Js - J.conj().T).nnz else 0.0
    report = {
        "config_echo": rc.to_dict(),
        "weights": {str(n): v for n, v in zip(a.indices.tolist(), a.values.tolist())},
        "dim": cfg.dim,
        "safe_dim": int(safe_columns(cfg).sum()),
        "J_nnz": int(J.nnz),
        "J_adjoint_nnz": int(Js.nnz),
        "J_domain": int(ops.domain_J(a, cfg).sum()),
        "J_adjoint_domain": int(ops.domain_J_adjoint(a, cfg).sum()),
        "adjoint_deviation": adj_dev,
        "skew_ergodic": checks.skew_ergodic(cfg),
    }
    return finish(report, {"adjoint_deviation": adj_dev <= rc.tolerances["adjoint"]})


def _intertwine(rc: RunConfig, a: WeightSequence) -> tuple[float, dict[str, float]]:
    cfg = rc.model
    U1, U2 = ops.koopman_T1(cfg), ops.koopman_T2(cfg)
    J = ops.markov_J(a, cfg)
    total = checks.verify_intertwining(J, cfg, U1, U2).residual
    parts = {
        str(n): checks.verify_intertwining(ops.isometry_In(n, cfg), cfg, U1, U2).residual
        for n in range(-cfg.K, cfg.K + 1)
    }
    return total, parts


def cmd_verify_intertwine(rc: RunConfig) -> dict:
    a = rc.markov_weights()
    total, parts = _intertwine(rc, a)
    tol = rc.tolerances["intertwine"]
    report = {
        "config_echo": rc.to_dict(),
        "intertwine_residual": total,
        "In_residuals": parts,
        "safe_dim": int(safe_columns(rc.model).sum()),
    }
    return finish(report, {"J": total <= tol, **{f"I_{n}": r <= tol for n, r in parts.items()}})


def kernel_margins(rc: RunConfig, a: WeightSequence) -> dict[str, float]:
    cfg = rc.model
    J, Js = ops.markov_J(a, cfg), ops.markov_J_adjoint(a, cfg)
    safe = safe_columns(cfg, include_empty=False)
    empty = empty_sector(cfg)
    return {
        "J": checks.kernel_margin(J, safe),
        "J_adjoint": checks.kernel_margin(Js, safe),
        "empty_sector": min(checks.kernel_margin(J, empty), checks.kernel_margin(Js, empty)),
    }


def cmd_kernel_scan(rc: RunConfig) -> dict:
    cfg, a = rc.model, rc.markov_weights()
    margins = kernel_margins(rc, a)
    J, Js = ops.markov_J(a, cfg), ops.markov_J_adjoint(a, cfg)
    full = {
        "J": checks.kernel_margin(J, ops.domain_J(a, cfg)),
        "J_adjoint": checks.kernel_margin(Js, ops.domain_J_adjoint(a, cfg)),
    }
    report = {"config_echo": rc.to_dict(), "kernel_margins": margins, "full_domain_margins": full}
    tol = rc.tolerances["margin"]
    return finish(report, {k: v > tol for k, v in margins.items()})


def identity_deviations(rc: RunConfig, a: WeightSequence, sets: int = 3, vectors: int = 2) -> tuple[float, float]:
    """Worst ``xi``/``zeta`` deviation over canonical sets with max below ``sets``.

    Test vectors carry every character with at most three points, so each
    identity compares nonzero coefficients.
    """
    cfg = rc.model
    rng = np.random.default_rng(rc.seed)
    canon = [B for B in subsets_of_window(0, sets - 1) if B.min == 0]
    xi = zeta = 0.0
    for _ in range(vectors):
        F = checks.dense_small_vector(cfg, rng)
        for B in canon:
            xi = max(xi, checks.xi_identity_check(F, B, a, cfg))
            zeta = max(zeta, checks.zeta_identity_check(F, B, a, cfg))
    return xi, zeta


def cmd_verify(rc: RunConfig) -> dict:
    cfg, a = rc.model, rc.markov_weights()
    tol = rc.tolerances
    residual, parts = _intertwine(rc, a)
    mk = checks.verify_markov(ops.grid_markov_J(a, cfg), cfg, seed=rc.seed)
    mk_ok = (
        mk.constants_deviation <= tol["markov"]
        and mk.adjoint_constants_deviation <= tol["markov"]
        and mk.min_output >= -tol["markov"]
        and mk.norm <= 1.0 + tol["norm"]
    )
    margins = kernel_margins(rc, a)
    xi, zeta = identity_deviations(rc, a)
    report = {
        "config_echo": rc.to_dict(),
        "intertwine_residual": residual,
        "In_residuals": parts,
        "markov_flags": mk.to_dict(),
        "kernel_margins": margins,
        "xi_max_dev": xi,
        "zeta_max_dev": zeta,
    }
    return finish(
        report,
        {
            "intertwine": residual <= tol["intertwine"] and all(r <= tol["intertwine"] for r in parts.values()),
            "markov": mk_ok,
            **{f"kernel_{k}": v > tol["margin"] for k, v in margins.items()},
            "xi": xi <= tol["identity"],
            "zeta": zeta <= tol["identity"],
        },
    )


def counterexample_config(rc: RunConfig, K: int) -> ModelConfig:
    """The model config widened so that ``K + 1`` shifts of the test vector stay in the window."""
    base = rc.model
    return ModelConfig(N=base.N, s=base.s, phi=base.phi, M=max(base.M, K + 1), K=base.K)


def cmd_counterexample(rc: RunConfig, Ks: list[int] | None = None) -> dict:
    Ks = [rc.K_weights] if not Ks else Ks
    tol = rc.tolerances["counterexample"]
    runs = []
    for K in Ks:
        r = checks.counterexample_o7(K, counterexample_config(rc, K))
        runs.append(r)
    report = {"config_echo": rc.to_dict(), "runs": [r.to_dict() for r in runs]}
    flags = {}
    for r in runs:
        flags[f"K{r.K}_bound"] = r.JstarF_norm <= r.bound + tol
        flags[f"K{r.K}_nonzero"] = r.nonzero_ok
    for r0, r1 in zip(runs, runs[1:]):
        expected = r0.JstarF_norm * 0.5 ** (r1.K - r0.K)
        flags[f"K{r0.K}_to_K{r1.K}_scaling"] = abs(r1.JstarF_norm - expected) <= tol
    return finish(report, flags)


def parse_operator(desc, rc: RunConfig | None = None) -> np.ndarray:
    """Operator from a JSON description: permutation, diagonal_angles, matrix or model (T1/T2)."""
    if isinstance(desc, str):
        p = Path(desc)
        desc = json.loads(p.read_text()) if p.exists() else json.loads(desc)
    if "permutation" in desc:
        return permutation_unitary(desc["permutation"])
    if "diagonal_angles" in desc:
        return np.diag(np.exp(2j * np.pi * np.array([float(t) for t in desc["diagonal_angles"]])))
    if "matrix" in desc:
        rows = desc["matrix"]
        return np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in rows])
    if "model" in desc:
        cfg = (rc or RunConfig()).model
        which = {"T1": 1, "T2": 2}.get(desc["model"])
        if which is None:
            raise ValueError(f"unknown model operator {desc['model']!r}")
        return ops.koopman_skew(cfg, which).toarray()
    raise ValueError("operator description needs one of permutation, diagonal_angles, matrix, model")


def cmd_spectral(U1, U2, seed: int = 0) -> dict:
    side = {}
    for name, U in (("left", U1), ("right", U2)):
        check_unitary(U)
        mult = max_spectral_multiplicity(U, seed=seed)
        side[name] = {
            "dim": U.shape[0],
            "unitarity_defect": unitarity_defect(U),
            "profile": spectral_profile(U).to_dict(),
            "max_multiplicity": mult.value,
            "multiplicity_certified": mult.certified,
        }
    p1, p2 = spectral_profile(U1), spectral_profile(U2)
    report = {**side, "equivalent": U1.shape == U2.shape and p1.matches(p2)}
    return finish(report, {f"{k}_multiplicity_certified": v["multiplicity_certified"] for k, v in side.items()})


def load_system(desc) -> jn.FiniteMPS:
    if isinstance(desc, str):
        p = Path(desc)
        desc = json.loads(p.read_text()) if p.exists() else json.loads(desc)
    return jn.FiniteMPS.from_dict(desc)


def cmd_joinings(sys1: jn.FiniteMPS, sys2: jn.FiniteMPS, markov: bool = False) -> dict:
    space = jn.joining_space(sys1, sys2)
    report = {
        "left": sys1.to_dict(),
        "right": sys2.to_dict(),
        "d": space.dim,
        "disjoint": space.dim == 0,
        "basis": [[[str(v) for v in B.row(i)] for i in range(B.rows)] for B in space.exact_basis],
    }
    flags = {}
    if markov:
        Phi = jn.markov_from_joining(space.particular, sys1, sys2)
        mk = jn.markov_check(Phi, sys1, sys2)
        report["product_markov"] = Phi
        report["product_markov_flags"] = mk.to_dict()
        flags["product_markov"] = mk.passed
        flags["product_equivariant"] = jn.equivariance_deviation(Phi, sys1, sys2) <= jn.TOL
    return finish(report, flags)


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    p = argparse.ArgumentParser(prog="markovqs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("coeffs", parents=[common], help="Fourier weights as CSV")
    c.add_argument("--K", type=int, default=16)
    c.add_argument("--resolution", type=int, default=1 << 12)
    sub.add_parser("construct", parents=[common], help="build J and J* and summarize them")
    sub.add_parser("verify-intertwine", parents=[common], help="intertwining residuals")
    sub.add_parser("kernel-scan", parents=[common], help="kernel margins of J and J*")
    sub.add_parser("verify", parents=[common], help="all model checks in one report")
    ce = sub.add_parser("counterexample", parents=[common], help="geometric-weight counterexample")
    ce.add_argument("--K", type=int, nargs="*", help="weight horizons (default: K_weights)")
    sc = sub.add_parser("spectral-compare", parents=[common], help="compare two unitary operators")
    sc.add_argument("left", help="operator description (JSON text or file)")
    sc.add_argument("right", help="operator description (JSON text or file)")
    jo = sub.add_parser("joinings", parents=[common], help="joining space of two finite systems")
    jo.add_argument("left", help="system description (JSON text or file)")
    jo.add_argument("right", help="system description (JSON text or file)")
    jo.add_argument("--markov", action="store_true", help="include the product Markov operator")
    return p


def run(argv: list[str] | None = None) -> tuple[str, int]:
    args = build_parser().parse_args(argv)
    if args.command == "coeffs":
        try:
            text, ok = cmd_coeffs(args.K, args.resolution, args.format or "csv")
        except ConvergenceError as e:
            return f"convergence failure: {e}\n", 1
        return text, 0 if ok else 1
    if args.format == "csv":
        raise SystemExit(f"{args.command} only writes json")
    rc = load_config(args.config, args.seed)
    if args.command == "construct":
        report = cmd_construct(rc)
    elif args.command == "verify-intertwine":
        report = cmd_verify_intertwine(rc)
    elif args.command == "kernel-scan":
        report = cmd_kernel_scan(rc)
    elif args.command == "verify":
        report = cmd_verify(rc)
    elif args.command == "counterexample":
        report = cmd_counterexample(rc, args.K)
    elif args.command == "spectral-compare":
        report = cmd_spectral(parse_operator(args.left, rc), parse_operator(args.right, rc), rc.seed)
    else:
        report = cmd_joinings(load_system(args.left), load_system(args.right), args.markov)
    return dumps(report), 0 if report["passed"] else 1


def main(argv: list[str] | None = None) -> int:
    try:
        text, code = run(argv)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    args = build_parser().parse_args(argv)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
