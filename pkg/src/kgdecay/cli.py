"""Command-line front end: ``kgdecay {classify,simulate,fit,profile-ode,report}``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical instability,
4 every decay fit came back inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from kgdecay.analysis import (
    bracketing_record_times,
    compare_with_theorem,
    extract_alpha,
    fit_decay,
    fit_modulation,
    write_alpha_csv,
)
from kgdecay.classifier import DEFAULT_TOL, classify, predicted_decay
from kgdecay.errors import InstabilityError, InsufficientWindowError
from kgdecay.kg_solver import Grid1D, RunRecord, SolverConfig, load_run, run_simulation, save_run
from kgdecay.nonlinearity import PRESETS, CubicNonlinearity, K_F_closed, P_F_coeffs
from kgdecay.profile_ode import ProfileParams, asymptotics_deviation, integrate_profile

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INSTABILITY, EXIT_INCONCLUSIVE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _num(x) -> float:
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a number, got {x!r}")
    return float(x)


def _fmt(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


@dataclass
class ExperimentConfig:
    name: str
    nonlinearity: CubicNonlinearity
    eps: float = 0.1
    B: float = 3.0
    shape: str = "bump"
    L: float = 1100.0
    N: int = 8192
    dt: float = 0.02
    T: float = 1000.0
    scheme: str = "strang_split"
    record_stride: float = 100.0
    norm_every: float = 0.5
    p_values: tuple[float, ...] = (2.0, 4.0, math.inf)
    z_samples: tuple[float, ...] = (0.0,)
    tau_samples: tuple[float, ...] = ()
    fit_window: tuple[float, float] = (100.0, 1000.0)
    out_dir: Optional[str] = None

    def grid(self) -> Grid1D:
        try:
            return Grid1D(self.L, self.N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> SolverConfig:
        stride = self.record_stride
        n = int(math.floor(self.T / stride + 1e-9)) if stride > 0 else 0
        times = {round(k * stride / self.dt) * self.dt for k in range(n + 1)}
        if self.tau_samples:
            times.update(
                t
                for t in bracketing_record_times(self.z_samples, self.tau_samples, self.B, self.dt)
                if t <= self.T
            )
        cfg = SolverConfig(
            eps=self.eps,
            B=self.B,
            dt=self.dt,
            T=self.T,
            scheme=self.scheme,
            record_times=tuple(sorted(times)),
            norm_every=self.norm_every,
            p_values=self.p_values,
            shape=self.shape,
        )
        try:
            cfg.validate(self.grid())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg


def _nonlinearity(spec) -> tuple[str, CubicNonlinearity]:
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown preset {spec!r}; choose from {sorted(PRESETS)}")
        return spec, PRESETS[spec]
    if isinstance(spec, dict) and "gamma" in spec:
        try:
            return str(spec.get("name", "custom")), CubicNonlinearity(
                tuple(_num(g) for g in spec["gamma"])
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(spec, list):
        return "custom", CubicNonlinearity(tuple(_num(g) for g in spec))
    raise ConfigError("nonlinearity must be a preset name, a list of 10 gammas or {'gamma': [...]}")


def _tau_samples(spec) -> tuple[float, ...]:
    if spec is None:
        return ()
    if isinstance(spec, dict):
        lo, hi, n = _num(spec["min"]), _num(spec["max"]), int(spec["count"])
        if not (0 < lo < hi and n >= 2):
            raise ConfigError("tau_samples needs 0 < min < max and count >= 2")
        return tuple(float(t) for t in np.geomspace(lo, hi, n))
    return tuple(_num(t) for t in spec)


def parse_config(doc: dict, preset: Optional[str] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON document (schema_version 1)."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    spec = preset if preset is not None else doc.get("nonlinearity")
    if spec is None:
        raise ConfigError("no nonlinearity given (use --preset or the 'nonlinearity' key)")
    name, nl = _nonlinearity(spec)
    grid = doc.get("grid", {})
    time = doc.get("time", {})
    norms = doc.get("norms", {})
    ana = doc.get("analysis", {})
    outs = doc.get("outputs", {})
    base = ExperimentConfig(name=name, nonlinearity=nl)
    try:
        cfg = ExperimentConfig(
            name=name,
            nonlinearity=nl,
            eps=_num(doc.get("eps", base.eps)),
            B=_num(doc.get("B", base.B)),
            shape=str(doc.get("shape", base.shape)),
            L=_num(grid.get("L", base.L)),
            N=int(grid.get("N", base.N)),
            dt=_num(time.get("dt", base.dt)),
            T=_num(time.get("T", base.T)),
            scheme=str(time.get("scheme", base.scheme)),
            record_stride=_num(time.get("record_stride", base.record_stride)),
            norm_every=_num(time.get("norm_every", base.norm_every)),
            p_values=tuple(_num(p) for p in norms.get("p", base.p_values)),
            z_samples=tuple(_num(z) for z in ana.get("z_samples", base.z_samples)),
            tau_samples=_tau_samples(ana.get("tau_samples")),
            fit_window=tuple(_num(w) for w in ana.get("fit_window", base.fit_window)),
            out_dir=outs.get("directory"),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if len(cfg.fit_window) != 2:
        raise ConfigError("fit_window must be [t_min, t_max]")
    return cfg


def _load_doc(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _configs(args) -> list[ExperimentConfig]:
    doc = _load_doc(args.config)
    presets = args.preset or [None]
    return [parse_config(doc, p) for p in presets]


def _out_dir(args, cfg: ExperimentConfig, multi: bool) -> Optional[Path]:
    base = args.out or cfg.out_dir
    if base is None:
        return None
    return Path(base) / cfg.name if multi else Path(base)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ classify


def _norm_key(tag: str, target: str) -> str:
    # classes B0 and C bound the sum over u and its first derivatives
    if target == "du":
        return "all" if tag in ("B0", "C") else "du"
    return "u"


def classification_report(cfg: ExperimentConfig, tol: float = DEFAULT_TOL) -> dict:
    nl = cfg.nonlinearity
    poly = P_F_coeffs(nl)
    cls = classify(poly, tol)
    zs = sorted(set(cfg.z_samples) | {-2.0, -1.0, 0.0, 1.0, 2.0})
    report = {
        "name": cfg.name,
        "gamma": list(nl.gamma),
        "K_F": [
            {"z": z, "re": K_F_closed(nl, z).real, "im": K_F_closed(nl, z).imag} for z in zs
        ],
        "P_F": list(poly.coeffs),
        "class": cls.tag,
        "constants": {f"C{k}": float(v) for k, v in sorted(cls.constants.items())},
        "y0": cls.y0,
        "z0": cls.z0,
        "decay": [],
    }
    if cls.tag != "NotDissipative":
        law = predicted_decay(cls)
        for target in ("u", "du"):
            for p in cfg.p_values:
                e = law.exponents(target, p)
                report["decay"].append(
                    {
                        "target": target,
                        "norm": _norm_key(cls.tag, target),
                        "p": _fmt(p),
                        "a": e.a,
                        "q": e.q,
                        "r": e.r,
                    }
                )
    return report


def _print_classification(rep: dict, out) -> None:
    print(f"[{rep['name']}] gamma = {rep['gamma']}", file=out)
    # adding 0.0 turns -0.0 into 0.0
    print("  P_F(y) = {:+.6g} {:+.6g} y {:+.6g} y^2 {:+.6g} y^3".format(*(c + 0.0 for c in rep["P_F"])), file=out)
    for k in rep["K_F"]:
        print(f"  K_F({k['z']:+.3f}) = {k['re'] + 0.0:+.6g} {k['im'] + 0.0:+.6g}i", file=out)
    print(f"  class: {rep['class']}", file=out)
    for name, val in rep["constants"].items():
        print(f"  {name} = {val:.10g}", file=out)
    if rep["z0"] is not None:
        print(f"  z0 = {rep['z0']:.10g}", file=out)
    for d in rep["decay"]:
        print(
            f"  ||{d['norm']}||_{d['p']}: t^-{d['a']:.4g} (log t)^-{d['q']:.4g}"
            + (f" (log log t)^{d['r']:.4g}" if d["r"] else ""),
            file=out,
        )


def cmd_classify(args) -> int:
    cfgs = _configs(args)
    reports = [classification_report(c, args.tol) for c in cfgs]
    for rep in reports:
        _print_classification(rep, sys.stdout)
    if args.out:
        _write_json(Path(args.out) / "classify.json", reports if len(reports) > 1 else reports[0])
    return EXIT_OK


# ------------------------------------------------------------------ simulate


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KGD_THREADS", "1")))
    except ValueError:
        return 1


def _simulate_one(cfg: ExperimentConfig, out: Optional[Path]) -> RunRecord:
    rec = run_simulation(cfg.solver_config(), cfg.nonlinearity, cfg.grid())
    if out is not None:
        save_run(rec, out)
        _write_json(out / "experiment.json", _experiment_doc(cfg))
    return rec


def _experiment_doc(cfg: ExperimentConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "nonlinearity": {"name": cfg.name, "gamma": list(cfg.nonlinearity.gamma)},
        "eps": cfg.eps,
        "B": cfg.B,
        "shape": cfg.shape,
        "grid": {"L": cfg.L, "N": cfg.N},
        "time": {
            "dt": cfg.dt,
            "T": cfg.T,
            "scheme": cfg.scheme,
            "record_stride": cfg.record_stride,
            "norm_every": cfg.norm_every,
        },
        "norms": {"p": [_fmt(p) if math.isinf(p) else p for p in cfg.p_values]},
        "analysis": {
            "z_samples": list(cfg.z_samples),
            "tau_samples": list(cfg.tau_samples),
            "fit_window": list(cfg.fit_window),
        },
    }


def cmd_simulate(args) -> int:
    cfgs = _configs(args)
    for c in cfgs:
        c.solver_config()  # validate everything before the first run starts
    multi = len(cfgs) > 1
    outs = [_out_dir(args, c, multi) for c in cfgs]
    with ThreadPoolExecutor(max_workers=min(_threads(), len(cfgs))) as pool:
        futures = [pool.submit(_simulate_one, c, o) for c, o in zip(cfgs, outs)]
        for c, o, fut in zip(cfgs, outs, futures):
            fut.result()
            print(f"[{c.name}] done" + (f" -> {o}" if o else ""))
    return EXIT_OK


# ------------------------------------------------------------------ fit


def _cfg_from_run_dir(run_dir: Path) -> ExperimentConfig:
    doc = _load_doc(str(run_dir / "experiment.json"))
    return parse_config(doc)


def fit_run(rec: RunRecord, cfg: ExperimentConfig) -> dict:
    cls = classify(P_F_coeffs(cfg.nonlinearity))
    result = {"name": cfg.name, "class": cls.tag, "fits": []}
    if cls.tag == "NotDissipative":
        return result
    law = predicted_decay(cls)
    for target in ("u", "du"):
        for p in cfg.p_values:
            if not law.enhanced(target, p):
                continue
            norms = rec.norm_series(_norm_key(cls.tag, target), p)
            loglog = law.exponents(target, p).r != 0
            entry = {"target": target, "norm": _norm_key(cls.tag, target), "p": _fmt(p)}
            try:
                fit = fit_decay(
                    rec.norm_times, norms, p, target=target, window=cfg.fit_window, loglog=loglog
                )
            except InsufficientWindowError as exc:
                entry.update(verdict="inconclusive", diagnosis=str(exc))
            else:
                v = compare_with_theorem(fit, law)
                entry.update(fit.as_dict())
                entry["p"] = _fmt(p)
                entry.update(v.as_dict())
            result["fits"].append(entry)
    return result


def _exit_for(fits: list[dict]) -> int:
    verdicts = [f["verdict"] for f in fits]
    if verdicts and all(v == "inconclusive" for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_fit(args) -> int:
    run_dir = Path(args.run)
    rec = load_run(run_dir)
    cfg = _cfg_from_run_dir(run_dir)
    if args.config:
        window = _load_doc(args.config).get("analysis", {}).get("fit_window")
        if window is not None:
            cfg.fit_window = tuple(_num(w) for w in window)
    result = fit_run(rec, cfg)
    for f in result["fits"]:
        q = f.get("q_fit")
        qs = f"q_fit={q:.3f} " if q is not None else ""
        print(f"[{cfg.name}] ||{f['norm']}||_{f['p']}: {qs}{f['verdict']}")
    _write_json(Path(args.out or run_dir) / "fits.json", result)
    return _exit_for(result["fits"])


# ------------------------------------------------------------------ profile-ode


def cmd_profile_ode(args) -> int:
    kappa = complex(args.kappa.replace(" ", ""))
    params = ProfileParams(kappa, complex(args.beta0.replace(" ", "")), args.tau0)
    forcing = None
    if args.forcing_amp:
        amp, power = args.forcing_amp, args.forcing_power
        forcing = lambda t: amp * t ** (-power)
    traj = integrate_profile(params, forcing, args.tau_end, args.steps_per_decade)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trajectory.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "re_beta", "im_beta", "abs_beta"])
            for t, b in zip(traj.taus, traj.betas):
                w.writerow([_fmt(t), _fmt(b.real), _fmt(b.imag), _fmt(abs(b))])
    lo = max(params.tau0, min(args.tau_end / 10, 1e2))
    rep = asymptotics_deviation(params, forcing, (lo, args.tau_end), args.steps_per_decade)
    first, last = rep.decade_means()
    summary = {
        "kappa": [kappa.real, kappa.imag],
        "beta_inf": [rep.beta_inf.real, rep.beta_inf.imag],
        "max_scaled_deviation": rep.max,
        "first_decade_mean": first,
        "last_decade_mean": last,
        "final_beta": [traj.betas[-1].real, traj.betas[-1].imag],
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if out is not None:
        _write_json(out / "deviation.json", summary)
    return EXIT_OK


# ------------------------------------------------------------------ report


def _run_dirs(root: Path) -> list[Path]:
    if (root / "run.json").exists():
        return [root]
    return sorted(p for p in root.iterdir() if (p / "run.json").exists())


def cmd_report(args) -> int:
    root = Path(args.runs)
    dirs = _run_dirs(root)
    if not dirs:
        raise ConfigError(f"no run directories under {root}")
    out = Path(args.out or root)
    out.mkdir(parents=True, exist_ok=True)
    rows, md, all_fits = [], ["# Decay report", ""], []
    for d in dirs:
        rec = load_run(d)
        cfg = _cfg_from_run_dir(d)
        res = fit_run(rec, cfg)
        all_fits.extend(res["fits"])
        md.append(f"## {cfg.name} (class {res['class']}, eps={cfg.eps:g}, B={cfg.B:g}, T={cfg.T:g})")
        md.append("")
        md.append("| norm | p | q predicted | q fitted | residual | verdict |")
        md.append("|---|---|---|---|---|---|")
        for f in res["fits"]:
            qp, qf, rs = f.get("q_predicted"), f.get("q_fit"), f.get("residual")
            cells = [
                f["norm"],
                f["p"],
                "" if qp is None else f"{qp:.4f}",
                "" if qf is None else f"{qf:.4f}",
                "" if rs is None else f"{rs:.3g}",
                f["verdict"],
            ]
            md.append("| " + " | ".join(cells) + " |")
            rows.append([cfg.name, res["class"]] + cells + [f.get("diagnosis", "")])
        if cfg.tau_samples:
            for z in cfg.z_samples:
                try:
                    samples = extract_alpha(rec, [z], cfg.tau_samples)
                    mod = fit_modulation(samples)
                except (InsufficientWindowError, ValueError) as exc:
                    md.append(f"- modulation at z={z:g}: unavailable ({exc})")
                    continue
                write_alpha_csv(samples, out / f"alpha_{cfg.name}_z{z:g}.csv")
                k = K_F_closed(cfg.nonlinearity, z).real
                md.append(
                    f"- modulation at z={z:g}: Re kappa_eff = {mod.re_kappa:.4f} "
                    f"(Re K_F = {k:.4f}, R^2 = {mod.r2:.4f})"
                )
        md.append("")
    (out / "report.md").write_text("\n".join(md) + "\n")
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "class", "norm", "p", "q_predicted", "q_fit", "residual", "verdict", "diagnosis"])
        w.writerows(rows)
    print(f"report written to {out / 'report.md'}")
    return _exit_for(all_fits)


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgdecay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument(
            "--preset",
            action="append",
            choices=sorted(PRESETS),
            help="named nonlinearity; repeat to sweep",
        )
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("classify", help="classify F and print its predicted decay laws")
    common(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="run the Klein-Gordon solver")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit decay exponents to a saved run")
    p.add_argument("--run", required=True, help="directory written by 'simulate'")
    p.add_argument("--config", help="optional config overriding the fit window")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("profile-ode", help="integrate the amplitude equation")
    p.add_argument("--kappa", required=True, help="complex, e.g. 0.375 or 1+2j")
    p.add_argument("--beta0", default="1.0")
    p.add_argument("--tau0", type=float, default=3.0)
    p.add_argument("--tau-end", type=float, default=1e4)
    p.add_argument("--steps-per-decade", type=int, default=1000)
    p.add_argument("--forcing-amp", type=float, default=0.0, help="forcing amp * tau^-power")
    p.add_argument("--forcing-power", type=float, default=1.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile_ode)

    p = sub.add_parser("report", help="markdown/CSV comparison of measured and predicted decay")
    p.add_argument("--runs", required=True, help="a run directory or a directory of runs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstabilityError as exc:
        print(f"error: instability at t={exc.t:g}: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
