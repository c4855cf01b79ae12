"""Command-line harness.

    tool <weights|linear|toy|simulate|diagnose> --config FILE --out DIR [--seed N]

Exit codes: 0 ok, 1 a check failed, 2 usage or configuration error,
3 numerical abort.  Every output directory receives one ``manifest.json``,
written before the computation starts and finalized afterwards; all
timestamps live there so the CSV outputs are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import ConfigError, build, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3

# run options that live next to the WeightParams fields in the weights section
_WEIGHT_OPTIONS = ("eta_list", "ratio_samples", "g_bound_samples", "eta_max", "k_max")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    out_dir: Path
    command: str
    config_echo: dict
    seed: int | None
    code_version: str = __version__
    threads: int | None = None
    started: str = ""
    finished: str | None = None
    status: str = "running"
    exit_code: int | None = None
    artifacts: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    @property
    def path(self):
        return self.out_dir / "manifest.json"

    def write(self):
        data = {k: v for k, v in self.__dict__.items() if k != "out_dir"}
        self.path.write_text(json.dumps(data, indent=2, default=str) + "\n")

    def start(self):
        self.started = _now()
        self.write()

    def add(self, path):
        self.artifacts.append(str(Path(path).name))

    def finish(self, code, message=None):
        self.finished = _now()
        self.exit_code = code
        self.status = {EXIT_OK: "ok", EXIT_FAIL: "check-failed", EXIT_ABORT: "aborted"}.get(
            code, "error")
        if message:
            self.messages.append(message)
        self.write()
        return code


def _echo(sections):
    return {s: {k: v for k, v in vals.items()} for s, vals in sections.items() if vals}


def _weight_params(cfg):
    from .weights import WeightParams

    vals = {k: v for k, v in cfg["weights"].items() if k not in _WEIGHT_OPTIONS}
    return build(WeightParams, vals)


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_weights(cfg, out: Path, seed, man: RunManifest):
    import numpy as np

    from .lemmas import (SampleSpec, g_ode_oracle, g_product_formula, junction_sweep,
                         LemmaReport, verify_g_bound, verify_growth_lemma, verify_monotone,
                         verify_ratio_lemmas, write_reports)

    p = _weight_params(cfg)
    opts = cfg["weights"]
    etas = list(opts.get("eta_list", (10.0, 1e2, 1e3, 1e4, 1e5, 1e6)))
    if not etas:
        raise ConfigError("weights.eta_list is empty")
    if any(e <= 1 for e in etas):
        raise ConfigError("weights.eta_list entries must exceed 1")
    spec = SampleSpec(n=int(opts.get("ratio_samples", 10000)),
                      eta_max=float(opts.get("eta_max", 1e4)),
                      k_max=int(opts.get("k_max", 20)))
    man.start()
    seed = 0 if seed is None else seed
    reports = [verify_growth_lemma(etas, p)]
    errs = []
    for e in (10.0, 1e3, 1e5):
        a, b = g_product_formula(e, p), g_ode_oracle(e, p)
        errs.append(abs(a - b) / max(abs(b), 1e-300))
    reports.append(LemmaReport("g_closed_form", 3, float(max(errs)), max(errs) <= 1e-8,
                               {"eta": (10.0, 1e3, 1e5)[int(np.argmax(errs))]}))
    reports.append(verify_g_bound(int(opts.get("g_bound_samples", 10000)), p,
                                  np.random.default_rng([seed, 7])))
    reports.append(junction_sweep([e for e in etas if e <= 1e5], p))
    reports.append(verify_monotone([e for e in etas if e <= 1e4], p))
    reports.extend(verify_ratio_lemmas(spec, p, seed=seed))
    path = out / "lemma_reports.csv"
    write_reports(path, reports)
    man.add(path)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.lemma_id} C*={r.fitted_constant:.6g}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_linear(cfg, out: Path, seed, man: RunManifest):
    import numpy as np

    from .linear import (QUANTITIES, default_mode_set, expected_exponents, lin_bound_ratio,
                         write_rate_table, yang_lin_rate_scan)

    _weight_params(cfg)
    o = cfg["linear"]
    gammas = list(o.get("gamma_sq_list", (1.0, 0.16)))
    T = float(o.get("T", 1e4))
    tol = float(o.get("tolerance", 0.1))
    n_modes = int(o.get("n_modes", 16))
    bound_max = float(o.get("bound_max", 20.0))
    if not gammas or any(g < 0 for g in gammas) or T <= 10:
        raise ConfigError("linear: need non-negative gamma_sq_list and T > 10")
    man.start()
    modes = default_mode_set(n_modes, seed=0 if seed is None else seed)
    rows, ok = [], True
    for g2 in gammas:
        fits = yang_lin_rate_scan(g2, modes, T=T)
        exp = expected_exponents(g2)
        for q, e in zip(QUANTITIES, exp):
            f = fits[q]
            good = e is None or abs(f.exponent - e) <= tol
            ok &= good
            rows.append((g2, q, f"{f.exponent:.10f}", e, f"{f.residual:.3e}",
                         f"[{f.window[0]:g},{f.window[1]:g}]"))
    path = out / "rate_table.csv"
    write_rate_table(path, rows)
    man.add(path)
    # viscous linear bound over the reference sweep
    worst = 0.0
    for k in (1, 2, 3):
        for eta in range(-50, 51, 10):
            for t in np.linspace(0.0, 50.0, 101):
                worst = max(worst, lin_bound_ratio(k, float(eta), float(t)))
    _write_lines(out / "linear_bound.txt", [f"max_ratio={worst:.10f}", f"bound={bound_max}"])
    man.add(out / "linear_bound.txt")
    ok &= worst <= bound_max
    print(f"{'PASS' if ok else 'FAIL'} linear rates and bound (C={worst:.3f})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_toy(cfg, out: Path, seed, man: RunManifest):
    import numpy as np

    from .toy import (ChainState, chain_report_rows, growth_sweep, integrate_chain,
                      write_toy_csv)

    p = _weight_params(cfg)
    o = cfg["toy"]
    lo, hi = o.get("eta_range", (1e2, 1e5))
    n = int(o.get("n_eta", 13))
    k = int(o.get("k", 1))
    chain_eta = float(o.get("chain_eta", 1000.0))
    chain_L = int(o.get("chain_L", 10))
    tol = float(o.get("tolerance", 0.1))
    if not (0 < lo < hi) or n < 8:
        raise ConfigError("toy: need 0 < eta_range[0] < eta_range[1] and n_eta >= 8")
    man.start()
    rows, fit = growth_sweep(np.geomspace(lo, hi, n), k=k, kappa=p.kappa, C_theta=p.C_theta)
    ok = abs(fit.exponent - fit.expected) <= tol * fit.expected
    path = out / "toy_growth.csv"
    with open(path, "w") as fh:
        fh.write("eta_over_k3,amplification\n")
        for x, a in rows:
            fh.write(f"{x:.12e},{a:.12e}\n")
    man.add(path)
    _write_lines(out / "toy_fit.txt",
                 fit.as_text().splitlines() + [f"expected={fit.expected:.10f}"])
    man.add(out / "toy_fit.txt")
    if chain_eta > 0:
        seed_l = chain_L
        st = ChainState({seed_l: 1.0}, chain_eta, chain_L)
        res = integrate_chain(st)
        path = out / "toy_chain.csv"
        write_toy_csv(path, chain_report_rows(chain_eta, res, p))
        man.add(path)
    print(f"{'PASS' if ok else 'FAIL'} toy growth exponent {fit.exponent:.4f} "
          f"vs {fit.expected:.4f}")
    return EXIT_OK if ok else EXIT_FAIL


def _sim_config(cfg, seed):
    from .solver import SimConfig

    return build(SimConfig, cfg["simulate"], seed=seed)


def _diag_config(cfg, p=None):
    from .diagnostics import DiagnosticsConfig, run_weights
    from .weights import WeightParams

    d = dict(cfg["diagnose"])
    d.pop("snapshot_dir", None)
    wkeys = {k: v for k, v in cfg["weights"].items() if k not in _WEIGHT_OPTIONS}
    # run weights: milder delta_L, delta_B unless set explicitly
    base = run_weights()
    merged = {f: getattr(base, f) for f in ("delta_L", "delta_B")}
    merged.update(wkeys)
    weights = build(WeightParams, merged)
    return build(DiagnosticsConfig, d, weights=weights)


def _write_diagnostics(out: Path, report, man: RunManifest):
    from .diagnostics import write_records

    path = out / "diagnostics.csv"
    write_records(path, report.records)
    man.add(path)
    _write_lines(out / "summary.txt", report.summary_lines())
    man.add(out / "summary.txt")


def cmd_simulate(cfg, out: Path, seed, man: RunManifest):
    from .diagnostics import ZeroModeHistory, diagnose_run
    from .solver import run, write_snapshot

    _weight_params(cfg)
    sc = _sim_config(cfg, seed)
    dc = _diag_config(cfg)
    man.config_echo["simulate_resolved"] = sc.as_dict()
    man.start()
    grid = sc.grid
    hist = ZeroModeHistory(grid)
    snap_every = sc.snapshot_every if sc.snapshot_every else (sc.T / 50 if sc.T > 0 else 1.0)
    every = max(1, int(round(snap_every / sc.dt)))
    n_steps = int(round(sc.T / sc.dt))
    counter = {"n": 0}

    def on_step(state):
        hist.record(state)
        n = counter["n"]
        if n % every == 0 or n == n_steps:
            path = out / f"snap_{n:07d}.cblb"
            write_snapshot(path, state)
            man.add(path)
        counter["n"] += 1

    states = list(run(sc, grid, on_step=on_step))
    hist.save(out / "zero_modes.npz")
    man.add(out / "zero_modes.npz")
    if len(states) >= 2:
        report = diagnose_run(states, hist, sc.gamma_sq, sc.epsilon, dc)
        _write_diagnostics(out, report, man)
    print(f"simulated to t={states[-1].t:g} with {len(states)} samples")
    return EXIT_OK


def cmd_diagnose(cfg, out: Path, seed, man: RunManifest, snapshot_dir=None):
    from .diagnostics import ZeroModeHistory, diagnose_run
    from .solver import read_snapshot

    _weight_params(cfg)
    src = snapshot_dir or cfg["diagnose"].get("snapshot_dir")
    if not src:
        raise ConfigError("diagnose needs --snapshots DIR or diagnose.snapshot_dir")
    src = Path(src)
    files = sorted(src.glob("*.cblb")) if src.is_dir() else []
    if not files:
        raise ConfigError(f"no snapshots (*.cblb) in {src}")
    # physical parameters come from the producing run when available
    sim = dict(cfg["simulate"])
    mpath = src / "manifest.json"
    if mpath.exists():
        echo = json.loads(mpath.read_text()).get("config_echo", {})
        for k, v in echo.get("simulate_resolved", {}).items():
            sim.setdefault(k, v)
    cfg = dict(cfg, simulate=sim)
    sc = _sim_config(cfg, seed)
    dc = _diag_config(cfg)
    man.start()
    states = sorted((read_snapshot(f) for f in files), key=lambda s: s.t)
    if len(states) < 2:
        raise ConfigError("diagnose needs at least two snapshots")
    hpath = src / "zero_modes.npz"
    hist = ZeroModeHistory.load(hpath) if hpath.exists() else ZeroModeHistory.from_states(states)
    report = diagnose_run(states, hist, sc.gamma_sq, sc.epsilon, dc)
    _write_diagnostics(out, report, man)
    print(f"diagnosed {len(states)} snapshots")
    return EXIT_OK


COMMANDS = {
    "weights": cmd_weights,
    "linear": cmd_linear,
    "toy": cmd_toy,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def _parser():
    ap = argparse.ArgumentParser(prog="tool", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key=value config file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--snapshots", default=None, help="snapshot directory (diagnose)")
    return ap


def _apply_threads():
    n = os.environ.get("TOOL_THREADS")
    if not n:
        return None
    try:
        n = max(1, int(n))
    except ValueError:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    return n


def main(argv=None):
    threads = _apply_threads()
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    man = RunManifest(out, args.command, _echo(cfg), args.seed, threads=threads)
    from .diagnostics import WeightOverflow
    from .solver import CFLViolation, NumericalAbort

    try:
        kw = {"snapshot_dir": args.snapshots} if args.command == "diagnose" else {}
        code = COMMANDS[args.command](cfg, out, args.seed, man, **kw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return man.finish(EXIT_USAGE, str(exc))
    except (CFLViolation, NumericalAbort, WeightOverflow) as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return man.finish(EXIT_ABORT, str(exc))
    return man.finish(code)


if __name__ == "__main__":
    sys.exit(main())
