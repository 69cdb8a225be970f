"""Command-line front end: eval, optimize, sweep, plan.

Configuration resolves in three layers: built-in defaults, then a
key=value config file (--config), then explicit flags.  Every run
echoes its fully resolved configuration and a hash of it; the hash
excludes plumbing (output directory, worker count, checkpoint path,
seed) so it identifies the computation, not the machine layout.

Machine-readable results append to results.jsonl in the output
directory as line-delimited records carrying a schema version, a
timestamp (informational only; everything else is deterministic for a
fixed seed), the config hash, and the payload.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .channel import (
    DEFAULT_EPS_KRAUS,
    NoisePoint,
    deph_count,
    estimate_memory,
    loss_count,
)
from .codes import (
    FAMILY_GKP,
    FAMILY_NP,
    FAMILY_TRIVIAL,
    GkpParams,
    NpParams,
    build_gkp,
    build_np,
    build_trivial_fock,
    gkp_truncation,
    np_truncation,
)
from .errors import BosonBenchError, ConfigError, exit_code_for
from .optimizer import (
    DESK_DIM_CAP,
    PAPER_DIM_CAP,
    PILOT_EPS,
    optimize_code,
)
from .qec import (
    DEFAULT_EPS_TOL,
    EvalOptions,
    evaluate_pair,
    resolve_tolerances,
)
from .sweep import (
    SCHEMA_VERSION,
    SweepBudget,
    config_hash,
    desk_grid,
    run_sweep,
    write_sweep_outputs,
    _fidelity_payload,
    _record_payload,
)

OUT_ENV_VAR = "BOSONBENCH_OUT"
FAMILY_ALIASES = {
    "gkp": FAMILY_GKP,
    "np": FAMILY_NP,
    "number-phase": FAMILY_NP,
    "trivial": FAMILY_TRIVIAL,
}
HASH_EXCLUDED_KEYS = {"out", "workers", "config", "checkpoint", "seed"}


@dataclass(frozen=True)
class ResultRecord:
    schema_version: str
    timestamp: str
    command: str
    config_hash: str
    seed: int
    payload: dict


def _coerce(key: str, raw: str, kind: type):
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: cannot parse {raw!r} as {kind.__name__}") from exc


def load_config_file(path: str | Path) -> dict[str, str]:
    """Plain key=value lines; # starts a comment, blank lines ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config file {path} line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


# (type, default) per key and command; None default means the key is
# required or conditionally derived
_COMMON_KEYS: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "workers": (int, 1),
    "out": (str, None),  # derived: env var, then current directory
    "paper_scale": (bool, False),
}
_COMMAND_KEYS: dict[str, dict[str, tuple[type, object]]] = {
    "eval": {
        "family": (str, None),
        "alpha": (float, None),
        "beta_real": (float, None),
        "delta": (float, None),
        "f": (float, None),
        "s": (int, None),
        "r": (float, 0.0),
        "n": (float, None),
        "dim": (int, 4),
        "gamma_t": (float, None),
        "kappa_t": (float, None),
        "eps_tol": (float, DEFAULT_EPS_TOL),
        "eps_kraus": (float, DEFAULT_EPS_KRAUS),
        "support": (str, "quantile"),
        "auto_tol": (bool, False),
        "max_dim": (int, None),  # derived from paper_scale when unset
    },
    "optimize": {
        "family": (str, None),
        "gamma_t": (float, None),
        "kappa_t": (float, None),
        "budget": (int, 3000),
        "popsize": (int, 50),
        "restarts": (int, 1),
        "sigma0": (float, 0.3),
        "max_dim": (int, None),
    },
    "sweep": {
        "preset": (str, "smoke"),
        "popsize": (int, 20),
        "generations": (int, 14),
        "restarts": (int, 1),
        "baseline_dim": (int, 4),
        "checkpoint": (str, None),  # derived: <out>/sweep-checkpoint.jsonl
        "max_dim": (int, None),
    },
    "plan": {
        "family": (str, None),
        "alpha": (float, None),
        "beta_real": (float, None),
        "delta": (float, None),
        "f": (float, None),
        "s": (int, None),
        "r": (float, 0.0),
        "n": (float, None),
        "gamma_t": (float, None),
        "kappa_t": (float, None),
        "eps_tol": (float, DEFAULT_EPS_TOL),
        "eps_kraus": (float, DEFAULT_EPS_KRAUS),
        "mem_budget_gib": (float, 8.0),
        "alpha_factor": (float, 3.0),
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bosonbench",
        description="Benchmark GKP and number-phase bosonic codes under loss and dephasing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, keys in _COMMAND_KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="key=value config file; flags override it")
        for key, (kind, _default) in {**_COMMON_KEYS, **keys}.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                p.add_argument(flag, action="store_true", default=None, dest=key)
            else:
                p.add_argument(flag, type=kind, default=None, dest=key)
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Layer defaults, config file, then flags into one dict."""
    keys = {**_COMMON_KEYS, **_COMMAND_KEYS[command]}
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        raw = load_config_file(args.config)
        unknown = set(raw) - set(keys)
        if unknown:
            raise ConfigError(f"config file sets unknown keys for {command}: {sorted(unknown)}")
        file_values = raw
    resolved: dict[str, object] = {}
    for key, (kind, default) in keys.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in file_values:
            resolved[key] = _coerce(key, file_values[key], kind)
        else:
            resolved[key] = default
    if resolved["out"] is None:
        resolved["out"] = os.environ.get(OUT_ENV_VAR, ".")
    if "max_dim" in resolved and resolved["max_dim"] is None:
        resolved["max_dim"] = PAPER_DIM_CAP if resolved["paper_scale"] else DESK_DIM_CAP
    if command == "sweep" and resolved["checkpoint"] is None:
        resolved["checkpoint"] = str(Path(str(resolved["out"])) / "sweep-checkpoint.jsonl")
    resolved["command"] = command
    return resolved


def effective_config_hash(config: dict) -> str:
    payload = {
        k: v for k, v in sorted(config.items()) if k not in HASH_EXCLUDED_KEYS and k != "command"
    }
    payload["command"] = config["command"]
    payload["schema_version"] = SCHEMA_VERSION
    return config_hash(payload)


def _echo_config(config: dict, digest: str, stream) -> None:
    print("effective-config:", file=stream)
    for key in sorted(k for k in config if k != "command"):
        print(f"  {key} = {config[key]}", file=stream)
    print(f"config-hash: {digest}", file=stream)


def _family(config: dict) -> str:
    raw = config.get("family")
    if not raw:
        raise ConfigError("missing required key: family")
    family = FAMILY_ALIASES.get(str(raw).lower())
    if family is None:
        raise ConfigError(f"unknown family {raw!r}; expected gkp, np or trivial")
    return family


def _require(config: dict, *names: str) -> None:
    missing = [name for name in names if config.get(name) is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")


def _build_code(family: str, config: dict, eps_tol: float, max_dim: int | None):
    if family == FAMILY_GKP:
        _require(config, "alpha", "beta_real", "delta")
        params = GkpParams(
            alpha=float(config["alpha"]),
            beta_real=float(config["beta_real"]),
            delta=float(config["delta"]),
        )
        return build_gkp(params, eps_tol=eps_tol, max_dim=max_dim)
    if family == FAMILY_NP:
        _require(config, "f", "s", "n")
        params = NpParams(
            f=float(config["f"]), s=int(config["s"]), r=float(config["r"]), n=float(config["n"])
        )
        return build_np(params, eps_tol=eps_tol, max_dim=max_dim)
    return build_trivial_fock(int(config.get("dim") or 4))


def _write_record(config: dict, record: ResultRecord) -> Path:
    out = Path(str(config["out"]))
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.jsonl"
    line = json.dumps(
        {
            "schema_version": record.schema_version,
            "timestamp": record.timestamp,
            "command": record.command,
            "config_hash": record.config_hash,
            "seed": record.seed,
            "payload": record.payload,
        },
        sort_keys=True,
    )
    with path.open("a", encoding="utf-8") as fh:
        fh.write(line + "\n")
    return path


def _record(command: str, config: dict, digest: str, payload: dict) -> ResultRecord:
    return ResultRecord(
        schema_version=SCHEMA_VERSION,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        command=command,
        config_hash=digest,
        seed=int(config["seed"]),
        payload=payload,
    )


def cmd_eval(config: dict) -> ResultRecord:
    """Evaluate one explicitly parameterized code at one noise point."""
    _require(config, "gamma_t", "kappa_t")
    family = _family(config)
    noise = NoisePoint(float(config["gamma_t"]), float(config["kappa_t"]))
    digest = effective_config_hash(config)
    support = str(config["support"])
    if support not in ("quantile", "strict"):
        raise ConfigError(f"support must be quantile or strict, got {support!r}")
    eps_tol = float(config["eps_tol"])
    eps_kraus = float(config["eps_kraus"])
    max_dim = config["max_dim"]
    if config["auto_tol"]:
        coarse_code = _build_code(family, config, PILOT_EPS, max_dim)
        coarse = evaluate_pair(coarse_code, noise, EvalOptions(eps_tol=PILOT_EPS, eps_kraus=PILOT_EPS))
        eps_tol, eps_kraus = resolve_tolerances(1.0 - coarse.f_tilde, eps_tol, eps_kraus)
    code = _build_code(family, config, eps_tol, max_dim)
    options = EvalOptions(eps_tol=eps_tol, eps_kraus=eps_kraus, support_mode=support)
    result = evaluate_pair(code, noise, options)
    payload = {
        "family": family,
        "gamma_t": noise.gamma_t,
        "kappa_t": noise.kappa_t,
        "eps_tol": eps_tol,
        "eps_kraus": eps_kraus,
        "code": {
            "dim": code.dim,
            "mean_photon": code.mean_photon,
            "photon_variance": code.photon_variance,
            "raw_overlap_abs": abs(code.raw_overlap),
            "tail_mass": code.tail_mass,
        },
        "fidelity": _fidelity_payload(result),
    }
    return _record("eval", config, digest, payload)


def cmd_optimize(config: dict) -> ResultRecord:
    """Optimize one family's parameters at one noise point."""
    _require(config, "gamma_t", "kappa_t")
    family = _family(config)
    if family == FAMILY_TRIVIAL:
        raise ConfigError("the trivial family has no parameters to optimize")
    noise = NoisePoint(float(config["gamma_t"]), float(config["kappa_t"]))
    digest = effective_config_hash(config)
    record = optimize_code(
        family,
        noise,
        budget=int(config["budget"]),
        seed=int(config["seed"]),
        restarts=int(config["restarts"]),
        popsize=int(config["popsize"]),
        sigma0=float(config["sigma0"]),
        max_dim=config["max_dim"],
        workers=int(config["workers"]),
        paper_scale=bool(config["paper_scale"]),
    )
    out = Path(str(config["out"]))
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    lines = ["generation,best,mean,sigma,condition"]
    for generation, best, mean, sigma, condition in record.trace:
        lines.append(
            f"{generation},{'%.17g' % best},{'%.17g' % mean},{'%.17g' % sigma},{'%.17g' % condition}"
        )
    trace_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    payload = {
        "noise": {"gamma_t": noise.gamma_t, "kappa_t": noise.kappa_t},
        "record": _record_payload(record),
        "trace_path": str(trace_path),
    }
    return _record("optimize", config, digest, payload)


def cmd_sweep(config: dict) -> ResultRecord:
    """Run the grid sweep and emit cells, regions and boundary files."""
    digest = effective_config_hash(config)
    Path(str(config["out"])).mkdir(parents=True, exist_ok=True)
    Path(str(config["checkpoint"])).parent.mkdir(parents=True, exist_ok=True)
    grid = desk_grid(str(config["preset"]))
    budget = SweepBudget(
        popsize=int(config["popsize"]),
        generations=int(config["generations"]),
        restarts=int(config["restarts"]),
    )
    result = run_sweep(
        grid,
        budget,
        seeds=int(config["seed"]),
        resume=str(config["checkpoint"]),
        workers=int(config["workers"]),
        paper_scale=bool(config["paper_scale"]),
        max_dim=config["max_dim"],
        baseline_dim=int(config["baseline_dim"]),
    )
    paths = write_sweep_outputs(str(config["out"]), result)
    label_counts: dict[str, int] = {}
    for row in result.regions:
        for label in row:
            label_counts[label] = label_counts.get(label, 0) + 1
    payload = {
        "preset": grid.spec_tag,
        "sweep_config_hash": result.config_hash,
        "outputs": {name: str(path) for name, path in paths.items()},
        "labels": label_counts,
        "boundary_polylines": len(result.boundary),
        "boundary_vertices": sum(len(p) for p in result.boundary),
        "flagged_cells": int(result.flagged.sum()),
        "baseline_violations": len(result.baseline_violations),
        "shape": None
        if result.shape is None
        else {
            entry.family: {
                "loss_violation_fraction": entry.loss_violation_fraction,
                "deph_violation_fraction": entry.deph_violation_fraction,
            }
            for entry in result.shape.entries
        },
    }
    return _record("sweep", config, digest, payload)


def cmd_plan(config: dict) -> ResultRecord:
    """Predict truncation dimension, operator counts and peak memory for
    one configuration without running it."""
    _require(config, "gamma_t", "kappa_t")
    family = _family(config)
    noise = NoisePoint(float(config["gamma_t"]), float(config["kappa_t"]))
    digest = effective_config_hash(config)
    eps_tol = float(config["eps_tol"])
    eps_kraus = float(config["eps_kraus"])
    if family == FAMILY_GKP:
        _require(config, "delta")
        dim = gkp_truncation(float(config["delta"]), eps_tol)
    elif family == FAMILY_NP:
        _require(config, "f", "s", "n")
        params = NpParams(
            f=float(config["f"]), s=int(config["s"]), r=float(config["r"]), n=float(config["n"])
        )
        dim = np_truncation(params, eps_tol)
    else:
        dim = int(config.get("dim") or 4)
    n_max = dim - 1
    k_loss = loss_count(noise.gamma_t, n_max, eps_kraus)
    k_deph = deph_count(noise.kappa_t, n_max, eps_kraus)
    n_kraus = k_loss * k_deph
    alpha_factor = float(config["alpha_factor"])
    mem_bytes = estimate_memory(2, n_kraus, alpha_factor=alpha_factor)
    budget_bytes = float(config["mem_budget_gib"]) * 2**30
    payload = {
        "family": family,
        "gamma_t": noise.gamma_t,
        "kappa_t": noise.kappa_t,
        "dim": dim,
        "loss_count": k_loss,
        "deph_count": k_deph,
        "n_kraus": n_kraus,
        "memory_bytes": mem_bytes,
        "memory_gib": mem_bytes / 2**30,
        "mem_budget_gib": float(config["mem_budget_gib"]),
        "over_budget": mem_bytes > budget_bytes,
    }
    return _record("plan", config, digest, payload)


_COMMANDS = {"eval": cmd_eval, "optimize": cmd_optimize, "sweep": cmd_sweep, "plan": cmd_plan}


def _print_eval(payload: dict, stream) -> None:
    fid = payload["fidelity"]
    diag = fid["diagnostics"]
    print(f"f_tilde = {fid['f_tilde']:.12g}", file=stream)
    print(f"f_lower = {fid['f_lower']:.12g}", file=stream)
    print(f"f_upper = {fid['f_upper']:.12g}", file=stream)
    print(
        "diagnostics: "
        f"eps_trunc={diag['eps_trunc']:.3g} tail_mass={diag['tail_mass']:.3g} "
        f"herm_defect={diag['herm_defect']:.3g} trace_defect={diag['trace_defect']:.3g} "
        f"clamp_mass={diag['clamp_mass']:.3g} n_kraus={diag['n_kraus']} dim={diag['dim']}",
        file=stream,
    )
    print(f"flagged = {str(diag['flagged']).lower()}", file=stream)


def _print_optimize(payload: dict, stream) -> None:
    record = payload["record"]
    fid = record["fidelity"]
    params = " ".join(f"{k}={v:.10g}" for k, v in sorted(record["best_params"].items()))
    print(f"best_params: {params}", file=stream)
    print(f"f_tilde = {fid['f_tilde']:.12g}", file=stream)
    print(f"evaluations = {record['evaluations']}", file=stream)
    print(f"flagged = {str(fid['diagnostics']['flagged']).lower()}", file=stream)
    print(f"trace: {payload['trace_path']}", file=stream)


def _print_sweep(payload: dict, stream) -> None:
    print(f"cells: {payload['outputs']['cells']}", file=stream)
    print(f"regions: {payload['outputs']['regions']}", file=stream)
    print(f"boundary: {payload['outputs']['boundary']}", file=stream)
    print(f"labels: {payload['labels']}", file=stream)
    print(
        f"boundary polylines = {payload['boundary_polylines']} "
        f"vertices = {payload['boundary_vertices']}",
        file=stream,
    )
    print(f"flagged cells = {payload['flagged_cells']}", file=stream)
    if payload["shape"] is not None:
        for family, fractions in payload["shape"].items():
            print(
                f"shape[{family}]: loss violations {fractions['loss_violation_fraction']:.3f}, "
                f"dephasing violations {fractions['deph_violation_fraction']:.3f}",
                file=stream,
            )


def _print_plan(payload: dict, stream) -> None:
    print(f"dim = {payload['dim']}", file=stream)
    print(f"loss_count = {payload['loss_count']}", file=stream)
    print(f"deph_count = {payload['deph_count']}", file=stream)
    print(f"n_kraus = {payload['n_kraus']}", file=stream)
    print(f"memory estimate = {payload['memory_gib']:.6g} GiB", file=stream)
    if payload["over_budget"]:
        print(
            f"warning: estimated memory exceeds the budget of {payload['mem_budget_gib']:.6g} GiB",
            file=stream,
        )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args.command, args)
        digest = effective_config_hash(config)
        _echo_config(config, digest, sys.stdout)
        record = _COMMANDS[args.command](config)
        path = _write_record(config, record)
        printer = {
            "eval": _print_eval,
            "optimize": _print_optimize,
            "sweep": _print_sweep,
            "plan": _print_plan,
        }[args.command]
        printer(record.payload, sys.stdout)
        print(f"result-record: {path}", file=sys.stdout)
        return 0
    except BosonBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
