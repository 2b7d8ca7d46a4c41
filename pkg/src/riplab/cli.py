"""riplab command-line interface.

Every subcommand reads its parameters from flags and, optionally, an
INI-style ``key=value`` config file (flags win).  Runs are deterministic:
the same config and seed produce byte-identical output bodies; a timestamp
is added to the header only when --stamp is passed.  Results are written
atomically (temp file + rename) as CSV curves and/or JSON summaries, with
the fully resolved configuration echoed into every output.

Exit codes: 0 success, 2 invalid configuration, 3 capacity exceeded,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .group_ops import gaussian_ensemble, isotropy_defect, rosenthal_deviation, sample_ensemble
from .infdim import (
    BlockScheme,
    from_bumps,
    make_block_instrument,
    rip_experiment,
    truncation_level,
)
from .instruments import (
    Instrument,
    make_decaying_window,
    make_flat,
    make_scaled_identity,
    make_schatten_decay,
)
from .numerics import CapacityError, NumericalError, SeededRng
from .rip import (
    calibrate_mrip_distortion,
    classify_separation,
    Close,
    distance_bound_check,
    empirical_rip,
    exact_rip_canonical,
    gaussian_width,
    mrip_check,
    predict_m,
    Separated,
)
from .sparsity import Canonical, LqCap, optimize_sparsity_parameter, sample_sparse

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


# -- option schema -----------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    name: str
    kind: str  # int | float | str | bool | int_list
    default: object = None
    required: bool = False
    choices: tuple = ()
    help: str = ""


_COMMON = (
    Opt("seed", "int", default=0, help="master RNG seed"),
    Opt("out", "str", default=None, help="output path prefix (default riplab_<command>)"),
    Opt("config", "str", default=None, help="INI-style key=value file; flags override"),
    Opt("stamp", "bool", default=False, help="add a timestamp header to outputs"),
    Opt("validate-only", "bool", default=False, help="check the configuration and exit"),
)

_ETA_OPTS = (
    Opt("eta", "str", default="flat",
        choices=("flat", "decaying", "scaled-identity", "schatten-decay"),
        help="instrument family"),
    Opt("N", "int", default=None, help="vector dimension"),
    Opt("n", "int", default=None, help="matrix side (matrix instruments)"),
    Opt("Neta", "int", default=None, help="window length for decaying instruments"),
    Opt("alpha", "float", default=None, help="decay exponent in (0, 1/2)"),
)

SCHEMAS: dict[str, tuple] = {
    "sp-opt": _ETA_OPTS + (
        Opt("r", "float", required=True, help="model cardinality parameter"),
        Opt("qmin", "float", default=2.001),
        Opt("qmax", "float", default=128.0),
        Opt("points", "int", default=200),
    ),
    "isotropy": _ETA_OPTS + (
        Opt("variant", "str", default=None,
            choices=("shiftmod", "doubleqft", "signshift"),
            help="group (defaults to shiftmod for vectors, doubleqft for matrices)"),
    ),
    "rip-exact": _ETA_OPTS + (
        Opt("ensemble", "str", default="shiftmod",
            choices=("shiftmod", "signshift", "doubleqft", "gaussian")),
        Opt("sign", "str", default="none", choices=("none", "random", "absorbed")),
        Opt("k", "int", required=True),
        Opt("m", "int", required=True),
    ),
    "rip-scan": _ETA_OPTS + (
        Opt("ensemble", "str", default="shiftmod",
            choices=("shiftmod", "signshift", "doubleqft", "gaussian")),
        Opt("sign", "str", default="none", choices=("none", "random", "absorbed")),
        Opt("k", "int", required=True),
        Opt("m", "int_list", required=True, help="comma-separated row counts"),
        Opt("trials", "int", default=200),
        Opt("ascent", "int", default=50),
        Opt("seeds", "int", default=1, help="number of consecutive seeds"),
    ),
    "mrip": (
        Opt("N", "int", required=True),
        Opt("m", "int", required=True),
        Opt("q", "float", default=1.0),
        Opt("s", "float", required=True),
        Opt("delta", "float", required=True),
        Opt("trials", "int", default=50),
        Opt("ascent", "int", default=50),
        Opt("extra-factor", "bool", default=False,
            help="use the looser definitional threshold"),
    ),
    "distance": (
        Opt("N", "int", required=True),
        Opt("m", "int", required=True),
        Opt("q", "float", default=1.0),
        Opt("s", "float", required=True),
        Opt("pairs", "int", default=100),
        Opt("trials", "int", default=50, help="per-level calibration trials"),
        Opt("ascent", "int", default=50),
        Opt("eps", "float", default=1.0),
    ),
    "weakdiff": (
        Opt("N", "int", required=True),
        Opt("m", "int", required=True),
        Opt("q", "float", default=1.0),
        Opt("s", "float", required=True),
        Opt("pairs", "int", default=100),
        Opt("trials", "int", default=50),
        Opt("ascent", "int", default=50),
        Opt("alpha", "float", default=None, help="custom separation threshold factor"),
    ),
    "gordon": (
        Opt("N", "int", required=True),
        Opt("k", "int", required=True),
        Opt("delta", "float", default=0.5),
        Opt("zeta", "float", default=0.1),
        Opt("width-trials", "int", default=10000),
        Opt("draws", "int", default=100),
        Opt("trials", "int", default=200, help="defect trials per draw"),
    ),
    "rosenthal": (
        Opt("N", "int", required=True),
        Opt("d", "int", required=True),
        Opt("M", "int_list", required=True),
        Opt("trials", "int", default=50),
        Opt("variant", "str", default="shiftmod",
            choices=("shiftmod", "signshift", "doubleqft")),
    ),
    "table1": (
        Opt("s", "int", required=True),
        Opt("n", "int", required=True),
        Opt("d", "int", required=True),
    ),
    "infdim-scan": (
        Opt("N", "int", required=True),
        Opt("L", "int", required=True),
        Opt("mode", "str", default="both",
            choices=("deterministic", "rademacher", "both")),
        Opt("gamma", "float", required=True, help="bump support measure (1/T)"),
        Opt("rho", "float", default=None, help="nominal smoothness label for the report"),
        Opt("m", "int_list", required=True),
        Opt("trials", "int", default=20),
        Opt("nbig", "int", default=None, help="carrier band (default 4N)"),
    ),
    "bump-check": (
        Opt("configs", "int", default=20),
        Opt("tol", "float", default=1e-6),
    ),
    "truncation": (
        Opt("q", "float", required=True),
        Opt("s", "float", required=True),
        Opt("delta", "float", required=True),
        Opt("C2", "float", required=True),
    ),
}


def _coerce(opt: Opt, raw):
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if opt.kind == "int":
            return int(raw)
        if opt.kind == "float":
            return float(raw)
        if opt.kind == "bool":
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if opt.kind == "int_list":
            if isinstance(raw, list):
                return [int(v) for v in raw]
            return [int(part) for part in str(raw).split(",") if part.strip()]
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{opt.name}: {exc}") from None


def parse_config_file(path: str) -> dict:
    """Read key=value lines; '#' or ';' starts a comment, blanks are skipped."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line.startswith(";"):
                continue
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                continue  # tolerate INI section headers
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


def resolve_config(command: str, cli_values: dict) -> tuple:
    """Merge defaults <- config file <- CLI flags.  Returns (config, diagnostics)."""
    schema = {o.name.replace("-", "_"): o for o in SCHEMAS[command] + _COMMON}
    diagnostics: list[str] = []

    file_values: dict = {}
    config_path = cli_values.get("config")
    if config_path:
        try:
            file_values = parse_config_file(config_path)
        except OSError as exc:
            return None, [f"cannot read config file: {exc}"]
        except ValueError as exc:
            return None, [str(exc)]
        for key in file_values:
            if key not in schema:
                diagnostics.append(f"unknown config key: {key}")

    params = {}
    for key, opt in schema.items():
        raw = cli_values.get(key)
        if raw is None and key in file_values:
            raw = file_values[key]
        try:
            value = _coerce(opt, raw)
        except ValueError as exc:
            diagnostics.append(str(exc))
            continue
        if value is None:
            value = opt.default
        if value is None and opt.required:
            diagnostics.append(f"missing required key {opt.name}")
            continue
        if opt.choices and value is not None and value not in opt.choices:
            diagnostics.append(
                f"{opt.name}: must be one of {', '.join(map(str, opt.choices))}; got {value}"
            )
            continue
        params[key] = value
    return ExperimentConfig(command, params), diagnostics


def validate(config: ExperimentConfig) -> list[str]:
    """Cross-field checks beyond per-option coercion."""
    p = config.params
    diags: list[str] = []
    cmd = config.command

    def need_positive(*names):
        for name in names:
            v = p.get(name)
            if v is not None and v <= 0:
                diags.append(f"{name} must be positive; got {v}")

    if cmd in ("sp-opt", "isotropy", "rip-exact", "rip-scan"):
        eta = p.get("eta")
        if eta in ("flat", "decaying") and not p.get("N"):
            diags.append(f"--N is required for the {eta} instrument")
        if eta in ("scaled-identity", "schatten-decay") and not p.get("n"):
            diags.append(f"--n is required for the {eta} instrument")
        if eta == "decaying":
            if not p.get("Neta"):
                diags.append("--Neta is required for the decaying instrument")
            if p.get("alpha") is None:
                diags.append("--alpha is required for the decaying instrument")
            elif not (0 < p["alpha"] < 0.5):
                diags.append("alpha must be in (0, 0.5)")
            if p.get("N") and p.get("Neta") and p["Neta"] > p["N"]:
                diags.append("Neta cannot exceed N")

    if cmd in ("rip-exact", "rip-scan"):
        ens = p.get("ensemble")
        eta = p.get("eta")
        matrix_eta = eta in ("scaled-identity", "schatten-decay")
        if ens == "doubleqft" and not matrix_eta:
            diags.append("doubleqft requires a matrix instrument (--eta scaled-identity or schatten-decay)")
        if ens in ("shiftmod", "signshift") and matrix_eta:
            diags.append(f"{ens} requires a vector instrument")
        need_positive("k")

    if cmd == "rip-scan":
        need_positive("trials", "seeds")
        for mv in p.get("m") or []:
            if mv <= 0:
                diags.append(f"m values must be positive; got {mv}")

    if cmd == "rip-exact":
        need_positive("m")

    if cmd in ("mrip", "distance", "weakdiff"):
        need_positive("N", "m", "s", "trials")
        q = p.get("q")
        if q is not None and not (1.0 <= q <= 2.0):
            diags.append(f"q must lie in [1, 2]; got {q}")
        if p.get("s") is not None and p["s"] < 1:
            diags.append(f"s must be >= 1; got {p['s']}")
    if cmd == "mrip":
        need_positive("delta")
    if cmd == "distance":
        need_positive("pairs", "eps")
    if cmd == "weakdiff":
        need_positive("pairs")
        alpha = p.get("alpha")
        if alpha is not None and alpha * (alpha - 2 * math.sqrt(2)) <= 8:
            diags.append(
                f"alpha={alpha} is rejected: need alpha (alpha - 2 sqrt(2)) > 8"
            )

    if cmd == "gordon":
        need_positive("N", "k", "delta", "draws", "trials")
        if p.get("width_trials") is not None and p["width_trials"] < 2:
            diags.append("width-trials must be >= 2")
        zeta = p.get("zeta")
        if zeta is not None and not (0 < zeta <= 2):
            diags.append(f"zeta must lie in (0, 2]; got {zeta}")
        if p.get("k") and p.get("N") and p["k"] > p["N"]:
            diags.append("k cannot exceed N")

    if cmd == "rosenthal":
        need_positive("N", "d", "trials")
        if p.get("d") and p.get("N") and p["d"] > p["N"]:
            diags.append("d cannot exceed N")
        for mv in p.get("M") or []:
            if mv <= 0:
                diags.append(f"M values must be positive; got {mv}")

    if cmd == "table1":
        need_positive("s", "n", "d")

    if cmd == "infdim-scan":
        need_positive("N", "L", "trials")
        gamma = p.get("gamma")
        if gamma is not None and not (0 < gamma < 0.5):
            diags.append(f"gamma must lie in (0, 1/2); got {gamma}")
        if p.get("N") and p.get("L") and (2 * p["N"]) % p["L"] != 0:
            diags.append("L must divide 2N")
        for mv in p.get("m") or []:
            if mv <= 0:
                diags.append(f"m values must be positive; got {mv}")
        nbig = p.get("nbig")
        if nbig is not None and p.get("N") and nbig < 4 * p["N"]:
            diags.append("nbig must be at least 4N")

    if cmd == "bump-check":
        need_positive("configs", "tol")

    if cmd == "truncation":
        q = p.get("q")
        if q is not None and not (1.0 < q <= 2.0):
            diags.append(f"q must lie in (1, 2]; got {q}")
        need_positive("s", "delta", "C2")

    return diags


# -- execution helpers --------------------------------------------------------


def _build_instrument(p: dict, rng: SeededRng) -> Instrument:
    eta = p["eta"]
    if eta == "flat":
        return make_flat(p["N"])
    if eta == "decaying":
        return make_decaying_window(p["N"], p["Neta"], p["alpha"])
    if eta == "scaled-identity":
        return make_scaled_identity(p["n"])
    return make_schatten_decay(p["n"], p["alpha"] if p["alpha"] is not None else 0.25, rng)


_SIGN_MAP = {"none": "none", "random": "random_sign", "absorbed": "absorbed"}


def _build_ensemble(p: dict, m: int, rng: SeededRng):
    if p["ensemble"] == "gaussian":
        dim = p["N"] if p.get("N") else p["n"] ** 2
        return gaussian_ensemble(dim, m, rng)
    inst = _build_instrument(p, rng)
    return sample_ensemble(inst, p["ensemble"], m, _SIGN_MAP[p["sign"]], rng)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".12g")
    return str(value)


@dataclass
class RunResult:
    csv_rows: list | None = None
    csv_fields: list | None = None
    json_doc: dict | None = None
    summary: str = ""


# -- subcommand bodies ---------------------------------------------------------


def _run_sp_opt(p: dict) -> RunResult:
    rng = SeededRng(p["seed"])
    inst = _build_instrument(p, rng)
    curve = optimize_sparsity_parameter(
        inst, p["r"], q_min=p["qmin"], q_max=p["qmax"], points=p["points"]
    )
    rows = [
        {"q_prime": _fmt(q), "value": _fmt(v)}
        for q, v in zip(curve.q_grid, curve.values)
    ]
    doc = {"q_opt": curve.q_opt if math.isfinite(curve.q_opt) else "inf",
           "value": curve.value, "eta": inst.kind, "r": p["r"]}
    return RunResult(rows, ["q_prime", "value"], doc,
                     f"q_opt={_fmt(curve.q_opt)} value={_fmt(curve.value)}")


def _run_isotropy(p: dict) -> RunResult:
    rng = SeededRng(p["seed"])
    inst = _build_instrument(p, rng)
    variant = p["variant"] or ("doubleqft" if inst.is_matrix else "shiftmod")
    defect = isotropy_defect(inst, variant)
    doc = {"defect": defect, "eta": inst.kind, "variant": variant}
    return RunResult(None, None, doc, f"defect={_fmt(defect)}")


def _run_rip_exact(p: dict) -> RunResult:
    rng = SeededRng(p["seed"])
    ens = _build_ensemble(p, p["m"], rng)
    report = exact_rip_canonical(ens, p["k"])
    doc = {"delta_hat": report.delta_hat, "method": report.method,
           "model": report.model, "m": report.m}
    return RunResult(None, None, doc, f"delta_hat={_fmt(report.delta_hat)}")


def _run_rip_scan(p: dict) -> RunResult:
    rows = []
    for m in p["m"]:
        for offset in range(p["seeds"]):
            seed = p["seed"] + offset
            ens = _build_ensemble(p, m, SeededRng(seed))
            report = empirical_rip(
                ens, Canonical(p["k"]), p["trials"], p["ascent"], SeededRng(seed, 1)
            )
            rows.append({
                "m": m,
                "delta_hat": _fmt(report.delta_hat),
                "model": f"canonical_k{p['k']}",
                "seed": seed,
            })
    return RunResult(rows, ["m", "delta_hat", "model", "seed"], None,
                     f"{len(rows)} rows")


def _run_mrip(p: dict) -> RunResult:
    ens = gaussian_ensemble(p["N"], p["m"], SeededRng(p["seed"]))
    report = mrip_check(
        ens, p["q"], p["s"], p["delta"], p["trials"], p["ascent"],
        SeededRng(p["seed"], 1), extra_level_factor=p["extra_factor"],
    )
    rows = [
        {
            "level": lv["level"],
            "sparsity": _fmt(lv["sparsity"]),
            "observed": _fmt(lv["observed"]),
            "threshold": _fmt(lv["threshold"]),
            "passed": _fmt(lv["passed"]),
        }
        for lv in report.levels
    ]
    doc = {"all_pass": report.details["all_pass"], "delta": p["delta"],
           "q": p["q"], "s": p["s"], "levels": report.levels}
    return RunResult(rows, ["level", "sparsity", "observed", "threshold", "passed"],
                     doc, f"all_pass={report.details['all_pass']}")


def _run_distance(p: dict) -> RunResult:
    ens = gaussian_ensemble(p["N"], p["m"], SeededRng(p["seed"]))
    delta, _ = calibrate_mrip_distortion(
        ens, p["q"], p["s"], p["trials"], p["ascent"], SeededRng(p["seed"], 1)
    )
    model = LqCap(p["q"], p["s"])
    rows = []
    violations = 0
    pair_rng = SeededRng(p["seed"], 2)
    for i in range(p["pairs"]):
        stream = pair_rng.stream(i)
        x = sample_sparse(model, p["N"], stream)
        y = sample_sparse(model, p["N"], stream)
        res = distance_bound_check(ens, x, y, p["s"], delta, p["q"], p["eps"])
        violations += 0 if res["passed"] else 1
        rows.append({
            "pair": i,
            "observed": _fmt(res["observed"]),
            "bound": _fmt(res["bound"]),
            "passed": _fmt(res["passed"]),
        })
    doc = {"delta_calibrated": delta, "pairs": p["pairs"], "violations": violations,
           "pass_rate": 1.0 - violations / p["pairs"]}
    return RunResult(rows, ["pair", "observed", "bound", "passed"], doc,
                     f"violations={violations}/{p['pairs']} delta={_fmt(delta)}")


def _run_weakdiff(p: dict) -> RunResult:
    ens = gaussian_ensemble(p["N"], p["m"], SeededRng(p["seed"]))
    delta, _ = calibrate_mrip_distortion(
        ens, p["q"], p["s"], p["trials"], p["ascent"], SeededRng(p["seed"], 1)
    )
    model = LqCap(p["q"], p["s"])
    rows = []
    counts = {"separated": 0, "close": 0}
    violations = 0
    pair_rng = SeededRng(p["seed"], 2)
    for i in range(p["pairs"]):
        stream = pair_rng.stream(i)
        x = sample_sparse(model, p["N"], stream)
        y = sample_sparse(model, p["N"], stream)
        verdict = classify_separation(ens, x, y, delta, alpha=p["alpha"])
        true_sq = float(np.linalg.norm(x - y) ** 2)
        if isinstance(verdict, Separated):
            counts["separated"] += 1
            ok = verdict.lower <= true_sq <= verdict.upper
            row = {"pair": i, "verdict": "separated",
                   "lower": _fmt(verdict.lower), "upper": _fmt(verdict.upper),
                   "true_sq": _fmt(true_sq), "ok": _fmt(bool(ok))}
        else:
            counts["close"] += 1
            ok = math.sqrt(true_sq) <= verdict.radius
            row = {"pair": i, "verdict": "close",
                   "lower": "", "upper": _fmt(verdict.radius),
                   "true_sq": _fmt(true_sq), "ok": _fmt(bool(ok))}
        violations += 0 if ok else 1
        rows.append(row)
    doc = {"delta_calibrated": delta, "pairs": p["pairs"], "violations": violations,
           **counts}
    return RunResult(rows, ["pair", "verdict", "lower", "upper", "true_sq", "ok"], doc,
                     f"separated={counts['separated']} close={counts['close']} "
                     f"violations={violations}")


def _run_gordon(p: dict) -> RunResult:
    width = gaussian_width(Canonical(p["k"]), p["N"], p["width_trials"],
                           SeededRng(p["seed"]))
    m = predict_m("gordon", width=width["mean"], delta=p["delta"], zeta=p["zeta"])
    hits = 0
    for draw in range(p["draws"]):
        ens = gaussian_ensemble(p["N"], m, SeededRng(p["seed"], 1 + draw))
        rep = empirical_rip(ens, Canonical(p["k"]), p["trials"],
                            rng=SeededRng(p["seed"], 100000 + draw))
        hits += 1 if rep.delta_hat <= p["delta"] else 0
    doc = {"width_mean": width["mean"], "width_stderr": width["stderr"],
           "predicted_m": m, "draws": p["draws"], "achieving": hits,
           "fraction": hits / p["draws"]}
    return RunResult(None, None, doc,
                     f"m={m} achieving={hits}/{p['draws']}")


def _run_rosenthal(p: dict) -> RunResult:
    n, d = p["N"], p["d"]
    u = np.zeros((d, n), dtype=complex)
    u[np.arange(d), np.arange(d)] = math.sqrt(n / d)
    records = rosenthal_deviation(u, p["variant"], p["M"], p["trials"],
                                  SeededRng(p["seed"]))
    rows = [{"M": r["M"], "median": _fmt(r["median"]), "mean": _fmt(r["mean"])}
            for r in records]
    logm = np.log([r["M"] for r in records])
    logdev = np.log([r["median"] for r in records])
    slope = float(np.polyfit(logm, logdev, 1)[0]) if len(records) > 1 else float("nan")
    doc = {"slope": slope,
           "records": [{k: r[k] for k in ("M", "median", "mean")} for r in records]}
    return RunResult(rows, ["M", "median", "mean"], doc, f"slope={_fmt(slope)}")


def _run_table1(p: dict) -> RunResult:
    counts = predict_m("table1", s=p["s"], n=p["n"], d=p["d"])
    doc = dict(counts)
    doc["ratio_group_over_gauss"] = counts["group"] / counts["gauss"]
    doc["ratio_sign_over_gauss"] = counts["group_sign"] / counts["gauss"]
    return RunResult(None, None, doc,
                     f"gauss={counts['gauss']} group={counts['group']} "
                     f"group_sign={counts['group_sign']}")


def _run_infdim_scan(p: dict) -> RunResult:
    n_cut, block_len = p["N"], p["L"]
    nbig = p["nbig"] if p["nbig"] else 4 * n_cut
    t_scale = 1.0 / p["gamma"]
    modes = ("deterministic", "rademacher") if p["mode"] == "both" else (p["mode"],)
    rho_label = p["rho"] if p["rho"] is not None else float("nan")
    rows = []
    for mode in modes:
        inst = make_block_instrument(n_cut, block_len, mode, SeededRng(p["seed"], 9999))
        scheme = BlockScheme(inst)
        for m in p["m"]:

            def sampler(stream: SeededRng):
                center = float(stream.uniform())
                return from_bumps(t_scale, [center], [1.0], nbig)

            report = rip_experiment(sampler, scheme, m, p["trials"],
                                    SeededRng(p["seed"]))
            for trial, dev in enumerate(report.details["deviations"]):
                rows.append({
                    "scheme": mode,
                    "N": n_cut,
                    "L": block_len,
                    "d": inst.n_blocks,
                    "gamma": _fmt(p["gamma"]),
                    "rho": _fmt(rho_label),
                    "m": m,
                    "trial": trial,
                    "deviation": _fmt(dev),
                })
    fields = ["scheme", "N", "L", "d", "gamma", "rho", "m", "trial", "deviation"]
    return RunResult(rows, fields, None, f"{len(rows)} rows")


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _bump_quad_norm(power_of_profile, p_exp: float, nodes: int = 1 << 15) -> float:
    x = np.linspace(-0.5, 0.5, nodes)
    y = power_of_profile(x) ** p_exp
    return float(_trapezoid(y, x) ** (1.0 / p_exp))


def _run_bump_check(p: dict) -> RunResult:
    from .infdim import differentiate, lq_norm_function, standard_bump, values_on_grid

    def dbump(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 0.5
        xi = x[inside]
        with np.errstate(over="ignore"):
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - 4.0 * xi**2)) * (
                -8.0 * xi / (1.0 - 4.0 * xi**2) ** 2
            )
        return out

    ref_lp = {pp: _bump_quad_norm(standard_bump, pp) for pp in (1.0, 2.0, 4.0)}
    ref_dl2 = _bump_quad_norm(lambda x: np.abs(dbump(x)), 2.0)

    rng = SeededRng(p["seed"])
    rows = []
    worst = 0.0
    all_ok = True
    for cfg in range(p["configs"]):
        stream = rng.stream(cfg)
        t_scale = float(stream.generator.choice([8.0, 16.0, 32.0]))
        count = int(stream.generator.choice([1, 2, 4]))
        centers = []
        guard = 0
        while len(centers) < count:
            guard += 1
            if guard > 10000:
                raise NumericalError("could not place bump centers")
            c = float(stream.uniform())
            if all(min(abs(c - o) % 1, 1 - abs(c - o) % 1) > 1.2 / t_scale
                   for o in centers):
                centers.append(c)
        amps = stream.complex_normal(count)
        nbig = int(128 * t_scale)
        f = from_bumps(t_scale, centers, amps, nbig)

        grid_abs = np.abs(values_on_grid(f, 8 * nbig))
        support = float(np.mean(grid_abs > 1e-8 * grid_abs.max()))
        support_ok = support <= count / t_scale * (1 + 1e-6) + 1.0 / (8 * nbig)

        rel_lp = 0.0
        for pp in (1.0, 2.0, 4.0):
            closed = ref_lp[pp] * t_scale ** (1 - 1 / pp) * (
                float(np.sum(np.abs(amps) ** pp)) ** (1 / pp))
            got = lq_norm_function(f, pp)
            rel_lp = max(rel_lp, abs(got - closed) / closed)

        deriv = 2 * math.pi * differentiate(f).l2_norm()
        closed_d = ref_dl2 / ref_lp[2.0] * t_scale * lq_norm_function(f, 2.0)
        rel_d = abs(deriv - closed_d) / closed_d

        ok = support_ok and rel_lp <= p["tol"] and rel_d <= p["tol"]
        all_ok &= ok
        worst = max(worst, rel_lp, rel_d)
        rows.append({
            "config": cfg, "T": _fmt(t_scale), "bumps": count,
            "support": _fmt(support), "rel_lp": _fmt(rel_lp),
            "rel_deriv": _fmt(rel_d), "ok": _fmt(bool(ok)),
        })
    doc = {"configs": p["configs"], "max_rel_error": worst, "all_pass": all_ok}
    return RunResult(rows, ["config", "T", "bumps", "support", "rel_lp", "rel_deriv", "ok"],
                     doc, f"all_pass={all_ok} max_rel={_fmt(worst)}")


def _run_truncation(p: dict) -> RunResult:
    l0 = truncation_level(p["q"], p["s"], p["delta"], p["C2"])
    q_dual = p["q"] / (p["q"] - 1.0)
    guaranteed = 2.0 * p["C2"] * p["s"] * 2.0 ** (-2.0 * l0 / q_dual)
    doc = {"l0": l0, "guaranteed_tail": guaranteed, "delta": p["delta"],
           "meets_half_delta": guaranteed <= p["delta"]}
    return RunResult(None, None, doc, f"l0={l0}")


_RUNNERS = {
    "sp-opt": _run_sp_opt,
    "isotropy": _run_isotropy,
    "rip-exact": _run_rip_exact,
    "rip-scan": _run_rip_scan,
    "mrip": _run_mrip,
    "distance": _run_distance,
    "weakdiff": _run_weakdiff,
    "gordon": _run_gordon,
    "rosenthal": _run_rosenthal,
    "table1": _run_table1,
    "infdim-scan": _run_infdim_scan,
    "bump-check": _run_bump_check,
    "truncation": _run_truncation,
}


# -- output -------------------------------------------------------------------


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".riplab_tmp_")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_echo(config: ExperimentConfig) -> list[str]:
    skip = {"out", "config", "stamp", "validate_only"}
    lines = [f"command={config.command}"]
    for key in sorted(config.params):
        if key in skip:
            continue
        value = config.params[key]
        if value is None:
            continue
        if isinstance(value, list):
            value = ",".join(map(str, value))
        lines.append(f"{key}={_fmt(value) if isinstance(value, (bool, float)) else value}")
    return lines


def write_outputs(config: ExperimentConfig, result: RunResult, out_prefix: str,
                  stamp: bool) -> list[str]:
    written = []
    echo = _config_echo(config)
    if result.csv_rows is not None:
        buf = io.StringIO()
        for line in echo:
            buf.write(f"# {line}\n")
        if stamp:
            buf.write(f"# timestamp={time.strftime('%Y-%m-%dT%H:%M:%S%z')}\n")
        writer = csv.DictWriter(buf, fieldnames=result.csv_fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(result.csv_rows)
        path = f"{out_prefix}.csv"
        _atomic_write(path, buf.getvalue())
        written.append(path)
    if result.json_doc is not None:
        doc = {"config": dict(zip([e.split("=", 1)[0] for e in echo],
                                  [e.split("=", 1)[1] for e in echo])),
               "result": result.json_doc}
        if stamp:
            doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        path = f"{out_prefix}.json"
        _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        written.append(path)
    return written


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riplab",
        description="Restricted-isometry experiments for structured random measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in SCHEMAS.items():
        sp = sub.add_parser(command)
        for opt in opts + _COMMON:
            if opt.kind == "bool":
                sp.add_argument(f"--{opt.name}", action="store_const", const="true",
                                default=None, help=opt.help)
            else:
                sp.add_argument(f"--{opt.name}", type=str, default=None, help=opt.help)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cli_values = {k.replace("-", "_"): v for k, v in vars(args).items()
                  if k != "command"}
    config, diagnostics = resolve_config(args.command, cli_values)
    if config is not None:
        diagnostics = diagnostics + validate(config)
    if diagnostics:
        for diag in diagnostics:
            print(f"config error: {diag}", file=sys.stderr)
        return EXIT_CONFIG
    if config.params.get("validate_only"):
        print("configuration ok")
        return EXIT_OK

    try:
        result = _RUNNERS[args.command](config.params)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_prefix = config.params.get("out") or f"riplab_{args.command.replace('-', '_')}"
    written = write_outputs(config, result, out_prefix, config.params.get("stamp", False))
    tail = f" -> {', '.join(written)}" if written else ""
    print(f"{args.command}: {result.summary}{tail}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
