"""Command-line front end.

    sbsguard exponents --config fig2.cfg --out fig2.csv
    sbsguard scaling   --set p=1e-6 --set k=10000 --out scaling.csv
    sbsguard estimate  --config fig4.cfg --threads 4 --format json --out fig4.json
    sbsguard segment   --set g_re=1 --set gamma=2 --set omega=5 --set omega_b=5

Configs are flat ``key=value`` files (``#`` starts a comment); ``--set`` wins
over the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .attack import AttackScenario
from .core_model import SegmentPhysical, bose_occupation, segment_channel, segment_gain_params
from .detection import (
    ScalingInputs,
    exponent_sweep,
    k_min,
    rho_min,
    scan_time,
    stolen_bits,
)
from .errors import (
    DegeneratePovmError,
    InfeasibleError,
    InvalidParameterError,
    NonPhysicalChannelError,
    TailMassError,
)
from .estimation import (
    MeasurementScheme,
    classical_fisher_info,
    crb,
    mc_estimator_variance,
    qfi,
)

SCENARIO_KEYS = (
    "L", "eta", "segment_index", "E", "kappa_re", "kappa_im",
    "nu_abs2", "n_th", "tau_E", "n_E", "convention",
)
SWEEP_DEFAULTS = {"rho_start": "0", "rho_end": "0.5", "rho_steps": "51"}
MC_DEFAULTS = {
    "schemes": "Heterodyne,PhotonCounting,SldOptimalAtTruth,AdaptiveSld(0.1)",
    "k": "1000",
    "trials": "200",
    "seed": "0",
}
SCALING_DEFAULTS = {"p": "1e-6", "lambda": "1e-9", "C": "1e11", "t_L": "5e-4"}
SEGMENT_DEFAULTS = {
    "eta": "1.0", "g_re": "0", "g_im": "0", "gamma": "1", "omega": "0",
    "omega_b": "0", "delta_z": "1", "n_th": "0",
}
OTHER_KEYS = {"dp_mean_includes_displacement", "out", "format", "temperature"}


def tool_version() -> str:
    try:
        return f"sbsguard {metadata.version('artifact')}"
    except metadata.PackageNotFoundError:
        return "sbsguard (uninstalled)"


def fmt_number(x) -> str:
    """Decimal form that parses back to the identical double."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def parse_kv_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class RunConfig:
    """Flat parameter set for one CLI run."""

    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None, overrides: list[str]) -> "RunConfig":
        values = parse_kv_text(Path(path).read_text()) if path else {}
        for item in overrides:
            if "=" not in item:
                raise InvalidParameterError(f"--set expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            values[key.strip()] = value.strip()
        return cls(values)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def check_keys(self, allowed: set[str]) -> None:
        unknown = sorted(set(self.values) - allowed)
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {', '.join(unknown)}")

    def scenario(self) -> AttackScenario:
        return AttackScenario.from_dict({k: self.values[k] for k in SCENARIO_KEYS if k in self.values})

    def rho_grid(self) -> np.ndarray:
        start = float(self.get("rho_start", SWEEP_DEFAULTS["rho_start"]))
        end = float(self.get("rho_end", SWEEP_DEFAULTS["rho_end"]))
        steps = int(self.get("rho_steps", SWEEP_DEFAULTS["rho_steps"]))
        if steps < 2:
            raise InvalidParameterError("rho_steps must be >= 2")
        if not (0 <= start < 1 and 0 <= end < 1):
            raise InvalidParameterError("rho range must lie within [0, 1)")
        return np.linspace(start, end, steps)

    def flag(self, key: str) -> bool:
        return str(self.get(key, "0")).lower() in ("1", "true", "yes", "on")


@dataclass
class Dataset:
    command: str
    provenance: dict
    columns: list[str]
    rows: list[list]
    failures: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {tool_version()}\n")
        buf.write(f"# command={self.command}\n")
        for key, value in self.provenance.items():
            buf.write(f"# {key}={fmt_number(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt_number(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        def plain(v):
            if isinstance(v, (np.floating, float)):
                return float(v)
            if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
                return int(v)
            return v

        doc = {
            "tool": tool_version(),
            "command": self.command,
            "provenance": {k: plain(v) for k, v in self.provenance.items()},
            "columns": self.columns,
            "rows": [[plain(v) for v in row] for row in self.rows],
            "failures": self.failures,
        }
        return json.dumps(doc, indent=1) + "\n"

    def write(self, path: str | None, fmt: str) -> None:
        text = self.to_json() if fmt == "json" else self.to_csv()
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)


def read_csv_dataset(text: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :meth:`Dataset.to_csv`: provenance, header, raw string rows."""
    prov, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            entry = line[1:].strip()
            if "=" in entry:
                key, value = entry.split("=", 1)
                prov[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return prov, rows[0], rows[1:]


def _provenance(cfg: RunConfig, sc: AttackScenario | None, extra: dict) -> dict:
    prov = dict(sc.to_dict()) if sc is not None else {}
    prov.update(extra)
    return prov


def cmd_exponents(cfg: RunConfig) -> Dataset:
    cfg.check_keys(set(SCENARIO_KEYS) | set(SWEEP_DEFAULTS) | OTHER_KEYS)
    sc = cfg.scenario()
    grid = cfg.rho_grid()
    variant = cfg.flag("dp_mean_includes_displacement")
    rows = []
    ln2 = math.log(2.0)
    for r in exponent_sweep(sc, grid, dp_mean_includes_displacement=variant):
        e = r.exponents
        rows.append([
            r.rho, e.d_quantum, e.d_photon, e.d_heterodyne, r.dp_ratio, r.dh_ratio,
            r.delta, r.clean.nbar, r.disturbed.nbar, r.disturbed.alpha.real, r.clean.alpha.real,
            e.d_quantum / ln2, e.d_photon / ln2, e.d_heterodyne / ln2,
        ])
    columns = [
        "rho", "D", "DP", "DH", "DP_over_D", "DH_over_D", "Delta", "M", "N",
        "beta_re", "alpha_re", "D_bits", "DP_bits", "DH_bits",
    ]
    prov = _provenance(cfg, sc, {
        "rho_start": grid[0], "rho_end": grid[-1], "rho_steps": len(grid),
        "dp_mean_includes_displacement": int(variant), "units": "nats (bits columns: *_bits)",
    })
    return Dataset("exponents", prov, columns, rows)


def cmd_scaling(cfg: RunConfig) -> Dataset:
    cfg.check_keys(set(SCENARIO_KEYS) | set(SWEEP_DEFAULTS) | set(SCALING_DEFAULTS) | {"k"} | OTHER_KEYS)
    sc = cfg.scenario()
    grid = cfg.rho_grid()
    get = lambda key: float(cfg.get(key, SCALING_DEFAULTS.get(key)))
    inputs = ScalingInputs(
        p=get("p"), lam=get("lambda"), k=int(cfg.get("k", "10000")),
        capacity=get("C"), t_L=get("t_L"),
    )
    failures = 0
    try:
        r_min = rho_min(sc, inputs.p, inputs.k)
    except InfeasibleError:
        r_min, failures = math.inf, failures + 1
    rows = []
    for rho in grid:
        try:
            row = [rho, r_min, k_min(sc, inputs.lam, rho), scan_time(sc, inputs, rho),
                   stolen_bits(sc, inputs, rho)]
        except InfeasibleError:
            failures += 1
            row = [rho, r_min, math.inf, math.inf, math.inf]
        rows.append(row)
    prov = _provenance(cfg, sc, {
        "p": inputs.p, "lambda": inputs.lam, "k": inputs.k, "C": inputs.capacity,
        "t_L": inputs.t_L, "rho_start": grid[0], "rho_end": grid[-1], "rho_steps": len(grid),
    })
    return Dataset("scaling", prov, ["rho", "rho_min", "k_min", "T_scan", "B_stolen"], rows, failures)


def cmd_estimation(cfg: RunConfig, workers: int = 1) -> Dataset:
    cfg.check_keys(set(SCENARIO_KEYS) | set(SWEEP_DEFAULTS) | set(MC_DEFAULTS) | OTHER_KEYS)
    sc = cfg.scenario()
    grid = cfg.rho_grid()
    schemes = [
        MeasurementScheme.parse(s)
        for s in _split_schemes(cfg.get("schemes", MC_DEFAULTS["schemes"]))
    ]
    k = int(cfg.get("k", MC_DEFAULTS["k"]))
    trials = int(cfg.get("trials", MC_DEFAULTS["trials"]))
    seed = int(cfg.get("seed", MC_DEFAULTS["seed"]))
    if k < 1 or trials < 1:
        raise InvalidParameterError("k and trials must be positive")
    rows, failures = [], 0
    for scheme in schemes:
        for rho in grid:
            q = qfi(sc, rho)
            try:
                fi = classical_fisher_info(sc, rho, scheme)
                res = mc_estimator_variance(sc, rho, scheme, k, trials, seed, workers=workers)
            except DegeneratePovmError as exc:
                # flagged rather than replaced by a guessed measurement
                print(f"sbsguard: {scheme.label} at rho={rho:g}: {exc}", file=sys.stderr)
                failures += trials
                rows.append([scheme.label, rho, k, trials, math.nan, math.nan,
                             crb(k, q), math.nan, q, trials])
                continue
            failures += res.failed_trials
            rows.append([scheme.label, rho, k, trials, res.variance, res.stderr,
                         crb(k, q), fi, q, res.failed_trials])
    prov = _provenance(cfg, sc, {
        "rho_start": grid[0], "rho_end": grid[-1], "rho_steps": len(grid),
        "schemes": ";".join(s.label for s in schemes), "k": k, "trials": trials, "seed": seed,
    })
    columns = ["scheme", "rho_true", "k", "trials", "variance", "stderr", "crb",
               "fi_classical", "qfi", "failed_trials"]
    return Dataset("estimate", prov, columns, rows, failures)


def _split_schemes(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in ",;" and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def cmd_segment(cfg: RunConfig) -> Dataset:
    cfg.check_keys(set(SEGMENT_DEFAULTS) | OTHER_KEYS)
    get = lambda key: float(cfg.get(key, SEGMENT_DEFAULTS[key]))
    n_th = get("n_th")
    if cfg.get("temperature") is not None:
        n_th = bose_occupation(get("omega_b"), float(cfg.get("temperature")))
    seg = SegmentPhysical(
        eta=get("eta"), g_tilde=complex(get("g_re"), get("g_im")), gamma=get("gamma"),
        omega=get("omega"), omega_b=get("omega_b"), delta_z=get("delta_z"), n_th=n_th,
    )
    mu, kappa, nu = segment_gain_params(seg)
    ch = segment_channel(seg)
    names = ["mu_re", "mu_im", "kappa_re", "kappa_im", "nu_re", "nu_im", "n_th",
             "X00", "X01", "X10", "X11", "Y00", "Y01", "Y10", "Y11"]
    row = [mu.real, mu.imag, kappa.real, kappa.imag, nu.real, nu.imag, n_th,
           *ch.X.ravel().tolist(), *ch.Y.ravel().tolist()]
    prov = {
        "eta": seg.eta, "g_re": seg.g_tilde.real, "g_im": seg.g_tilde.imag, "gamma": seg.gamma,
        "omega": seg.omega, "omega_b": seg.omega_b, "delta_z": seg.delta_z, "n_th": n_th,
    }
    return Dataset("segment", prov, names, [row])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbsguard", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=tool_version())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("exponents", "error exponents D, D_P, D_H over a rho sweep"),
        ("scaling", "rho_min, k_min, scan time and stolen bits over a rho sweep"),
        ("estimate", "Monte Carlo MLE variance per scheme and rho"),
        ("segment", "gain, noise coupling and channel matrices of one segment"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--threads", type=int, default=1, metavar="N")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.set)
        if args.seed is not None:
            cfg.values["seed"] = str(args.seed)
        out = args.out or cfg.values.pop("out", None)
        fmt = args.format or cfg.values.pop("format", "csv")
        cfg.values.pop("out", None)
        cfg.values.pop("format", None)
        if fmt not in ("csv", "json"):
            raise InvalidParameterError(f"unknown format {fmt!r}")
        if args.command == "exponents":
            ds = cmd_exponents(cfg)
        elif args.command == "scaling":
            ds = cmd_scaling(cfg)
        elif args.command == "estimate":
            ds = cmd_estimation(cfg, workers=max(1, args.threads))
        else:
            ds = cmd_segment(cfg)
        ds.write(out, fmt)
    except (InvalidParameterError, InfeasibleError, NonPhysicalChannelError, TailMassError) as exc:
        print(f"sbsguard: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sbsguard: I/O error: {exc}", file=sys.stderr)
        return 3
    if ds.failures:
        print(f"sbsguard: {ds.failures} flagged failure(s); see output", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
