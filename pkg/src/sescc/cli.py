"""Command-line driver: config ingestion, dispatch, artifact output.

Commands
--------
solve     converged t / lambda / s amplitude dumps plus an energy report
flow      multi-subsystem flow with JSONL trace and final block dumps
spectral  Green's function spectra for up to three methods side by side
sweep     interaction sweep over growing subsystem sets (flow per point)

Configs are TOML documents; `--seed-paper` loads a built-in
configuration for the two-bath benchmark model.  Every artifact records
the config hash and engine version.  Exit codes: 0 success, 2 config
error, 3 convergence failure.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:      # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .ccgf import (
    FrequencyGrid,
    ccgf_matrix,
    gf_effective,
    sector_hbar,
    uniform_grid,
)
from .ccsolver import ConvergenceError, SolverConfig, solve_lambda, solve_s_ext, solve_t
from .cluster import ActiveSpace, SubsystemSpec, split
from .fockspace import (
    build_sector,
    build_spin_sector,
    det_from_string,
    det_to_string,
    to_matrix,
)
from .model import (
    SiamParams,
    build_siam,
    double_occupancy_probe,
    exact_diagonalize,
    impurity_orbitals,
    lehmann_gf,
    siam_reference,
)
from .sesflow import FLAVOR_BAR, build_heff, double_occupancy, flow_iterate

FMT = "%.9g"


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- TOML I/O

def _toml_scalar(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not np.isfinite(v):
            raise ConfigError(f"non-finite value {v} cannot be serialized")
        r = repr(float(v))
        return r if ("." in r or "e" in r or "E" in r) else r + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    raise ConfigError(f"unsupported config value {v!r}")


def _toml_value(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return _toml_scalar(v)


def toml_dumps(doc):
    """Serialize a config dict back to TOML (scalars, arrays, tables,
    arrays of tables); tomllib(toml_dumps(d)) == d for configs we read."""
    lines = []

    def emit_table(d, prefix):
        for k, v in d.items():
            if not isinstance(v, (dict, list)) or (
                    isinstance(v, list) and not any(isinstance(x, dict) for x in v)):
                lines.append(f"{k} = {_toml_value(v)}")
        for k, v in d.items():
            name = f"{prefix}.{k}" if prefix else k
            if isinstance(v, dict):
                lines.append("")
                lines.append(f"[{name}]")
                emit_table(v, name)
            elif isinstance(v, list) and v and all(isinstance(x, dict) for x in v):
                for item in v:
                    lines.append("")
                    lines.append(f"[[{name}]]")
                    emit_table(item, name)

    emit_table(doc, "")
    return "\n".join(lines).lstrip("\n") + "\n"


def config_hash(doc):
    return hashlib.sha256(toml_dumps(doc).encode()).hexdigest()[:16]


def seed_paper_config():
    """Built-in two-bath benchmark configuration."""
    return {
        "model": {
            "kind": "siam", "eps_c": -0.5, "mu": 0.0, "U": 1.0,
            "eps_d": [-1.0, 1.0], "V": [1.0, 1.0], "n_electrons": 3,
        },
        "solver": {
            "max_iter": 200, "tol": 1e-10, "mixing": 1.0,
            "diis_depth": 6, "rank_max": 2,
        },
        "active": {"R": [0], "S": [1]},
        "subsystems": [
            {"label": "h1", "R": [0, 3], "S": [1, 5]},
            {"label": "h2", "R": [0, 4], "S": [1, 5]},
            {"label": "h3", "R": [0, 3], "S": [2, 5]},
            {"label": "h4", "R": [0, 4], "S": [2, 5]},
        ],
        "grid": {"lo": -6.0, "hi": 6.0, "spacing": 0.01, "eta": 0.05},
        "spectral": {
            "probes": [0, 1, 2, 3, 4, 5],
            "methods": ["ccgf", "ses", "lehmann"],
        },
        "sweep": {
            "U": [0.5, 1.0, 2.0, 4.0],
            "eps_c": "half-U",
            "subsystem_counts": [1, 2, 3, 4],
        },
        "outputs": {"dir": "sescc-out", "format": "csv", "figures": True},
    }


@dataclass
class RunConfig:
    raw: dict
    params: SiamParams
    n_electrons: int
    reference: int
    m: int
    solver: SolverConfig
    rank_max: int
    active: object          # ActiveSpace or None
    subsystems: list
    grid_spec: dict
    spectral: dict
    sweep: dict
    outdir: Path
    format: str
    figures: bool
    hash: str

    def grid(self, eta_override=None):
        g = self.grid_spec
        eta = eta_override if eta_override is not None else g["eta"]
        return uniform_grid(g["lo"], g["hi"], g["spacing"], eta)


def _as_active(d, m, what):
    try:
        r = frozenset(int(x) for x in d["R"])
        s = frozenset(int(x) for x in d["S"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: needs integer lists R and S ({exc})")
    for x in r | s:
        if not 0 <= x < m:
            raise ConfigError(f"{what}: orbital index {x} outside [0, {m})")
    if r & s:
        raise ConfigError(f"{what}: R and S overlap on {sorted(r & s)}")
    return ActiveSpace(r, s)


def parse_config(doc):
    """Validate a raw config dict into a RunConfig."""
    if "model" not in doc:
        raise ConfigError("missing [model] section")
    md = doc["model"]
    if md.get("kind", "siam") != "siam":
        raise ConfigError(f"unsupported model kind {md.get('kind')!r}")
    try:
        params = SiamParams(eps_c=md["eps_c"], mu=md.get("mu", 0.0),
                            U=md["U"], eps_d=md["eps_d"], V=md["V"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad [model] section: {exc}")
    m = params.n_orbitals
    n_electrons = int(md.get("n_electrons", params.n_sites))
    if "reference" in md:
        ref = det_from_string(md["reference"])
        if bin(ref).count("1") != n_electrons:
            raise ConfigError(
                f"reference {md['reference']} has {bin(ref).count('1')} "
                f"electrons, config declares {n_electrons}")
        if len(md["reference"]) != m:
            raise ConfigError(
                f"reference string length {len(md['reference'])} != M={m}")
    else:
        ref = siam_reference(params, n_electrons)

    sd = doc.get("solver", {})
    try:
        solver = SolverConfig(max_iter=int(sd.get("max_iter", 200)),
                              tol=float(sd.get("tol", 1e-10)),
                              mixing=float(sd.get("mixing", 1.0)),
                              diis_depth=int(sd.get("diis_depth", 6)))
    except ValueError as exc:
        raise ConfigError(f"bad [solver] section: {exc}")
    full_rank = min(n_electrons, m - n_electrons)
    rank_max = int(sd.get("rank_max", full_rank))
    if not 1 <= rank_max <= n_electrons:
        raise ConfigError(f"rank_max {rank_max} outside [1, {n_electrons}]")

    active = _as_active(doc["active"], m, "[active]") if "active" in doc else None
    subsystems = []
    for i, sub in enumerate(doc.get("subsystems", [])):
        label = sub.get("label", f"sub{i + 1}")
        subsystems.append(SubsystemSpec(_as_active(sub, m, f"[[subsystems]] {label}"),
                                        label))

    gd = doc.get("grid", {"lo": -6.0, "hi": 6.0, "spacing": 0.01, "eta": 0.05})
    for key in ("lo", "hi", "spacing", "eta"):
        if key not in gd:
            raise ConfigError(f"[grid] missing {key}")
    if gd["eta"] <= 0 or gd["spacing"] <= 0 or gd["hi"] <= gd["lo"]:
        raise ConfigError("[grid] needs hi > lo, spacing > 0, eta > 0")

    od = doc.get("outputs", {})
    fmt = od.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"outputs.format must be csv or json, got {fmt!r}")
    return RunConfig(
        raw=doc, params=params, n_electrons=n_electrons, reference=ref, m=m,
        solver=solver, rank_max=rank_max, active=active, subsystems=subsystems,
        grid_spec=gd, spectral=doc.get("spectral", {}), sweep=doc.get("sweep", {}),
        outdir=Path(od.get("dir", "sescc-out")), format=fmt,
        figures=bool(od.get("figures", True)), hash=config_hash(doc),
    )


def load_run_config(args):
    if getattr(args, "seed_paper", False):
        doc = seed_paper_config()
    elif getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse error in {path}: {exc}")
    else:
        raise ConfigError("provide --config <path> or --seed-paper")
    cfg = parse_config(doc)
    if getattr(args, "out", None):
        cfg.outdir = Path(args.out)
    if getattr(args, "format", None):
        cfg.format = args.format
    if getattr(args, "eta", None) is not None:
        if args.eta <= 0:
            raise ConfigError(f"--eta must be positive, got {args.eta}")
        cfg.grid_spec = dict(cfg.grid_spec, eta=args.eta)
        cfg.raw.setdefault("grid", {})["eta"] = args.eta
        cfg.hash = config_hash(cfg.raw)
    return cfg


# ---------------------------------------------------------------- artifacts

def _stamp(cfg):
    return {"engine": f"sescc {__version__}", "config_hash": cfg.hash}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=1, default=_json_default) + "\n")


def dump_amplitudes(path, amps, cfg, extra=None):
    payload = {
        "schema": "sescc-amplitudes v1",
        **_stamp(cfg),
        "kind": amps.kind,
        "reference": det_to_string(amps.reference, amps.m),
        "m": amps.m,
        "entries": [
            {"holes": list(e.holes), "particles": list(e.particles), "value": v}
            for e, v in sorted(amps.amps.items(),
                               key=lambda kv: (kv[0].rank, kv[0].holes, kv[0].particles))
            if v != 0.0
        ],
    }
    if extra:
        payload.update(extra)
    _write_json(path, payload)


def _figure_context():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _exact_ground(cfg, h):
    """ED oracle energy on the reference's spin-resolved sector."""
    half = cfg.m // 2
    n_up = bin(cfg.reference & ((1 << half) - 1)).count("1")
    sec = build_spin_sector(cfg.m, n_up, cfg.n_electrons - n_up)
    return exact_diagonalize(h, sec), sec


# ---------------------------------------------------------------- commands

def cmd_solve(cfg):
    t0 = time.time()
    h = build_siam(cfg.params)
    sol = solve_t(h, cfg.reference, cfg.m, cfg.rank_max, cfg=cfg.solver)
    sec = build_sector(cfg.m, cfg.n_electrons)
    hbar = sector_hbar(h, sol.t, sec)
    lam = solve_lambda(hbar, sol.t, cfg=cfg.solver)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    dump_amplitudes(cfg.outdir / "amplitudes_t.json", sol.t, cfg,
                    extra={"energy": sol.energy})
    dump_amplitudes(cfg.outdir / "amplitudes_lambda.json", lam, cfg)
    s_path = None
    if cfg.active is not None:
        lam_int, _ = split(lam, cfg.active)
        s_ext = solve_s_ext(hbar, cfg.active, lam_int, cfg=cfg.solver)
        s_path = cfg.outdir / "amplitudes_s.json"
        dump_amplitudes(s_path, s_ext, cfg,
                        extra={"active_R": sorted(cfg.active.R),
                               "active_S": sorted(cfg.active.S)})

    ed, _ = _exact_ground(cfg, h)
    full_rank = min(cfg.n_electrons, cfg.m - cfg.n_electrons)
    imp = set(impurity_orbitals(cfg.params))
    cross = [abs(v) for e, v in sol.t.amps.items()
             if (set(e.holes) | set(e.particles)) & imp
             and (set(e.holes) | set(e.particles)) - imp]
    report = {
        "schema": "sescc-solve-report v1",
        **_stamp(cfg),
        "energy": sol.energy,
        "energy_exact": ed.ground_energy(),
        "energy_error": abs(sol.energy - ed.ground_energy()),
        "iterations": sol.iterations,
        "residual_norm": sol.residual_norm,
        "rank_max": cfg.rank_max,
        "truncated": cfg.rank_max < full_rank,
        "max_cross_amplitude": max(cross, default=0.0),
        "cross_amplitudes_zero": max(cross, default=0.0) < 1e-12,
        "seconds": time.time() - t0,
    }
    _write_json(cfg.outdir / "report.json", report)
    print(f"E = {FMT % sol.energy}  ({sol.iterations} iterations, "
          f"residual {sol.residual_norm:.3e})")
    print(f"exact E = {FMT % ed.ground_energy()}  "
          f"|error| = {report['energy_error']:.3e}"
          + ("  [truncated rank]" if report["truncated"] else ""))
    print(f"wrote {cfg.outdir}/report.json, amplitudes_t.json, "
          f"amplitudes_lambda.json" + (", amplitudes_s.json" if s_path else ""))
    return 0


def cmd_flow(cfg):
    if not cfg.subsystems:
        raise ConfigError("flow needs at least one [[subsystems]] entry")
    t0 = time.time()
    h = build_siam(cfg.params)
    state = flow_iterate(h, cfg.reference, cfg.m, cfg.subsystems,
                         cfg=cfg.solver, rank_max=cfg.rank_max)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    with open(cfg.outdir / "flow_trace.jsonl", "w") as fh:
        for rec in state.trace:
            fh.write(json.dumps(rec) + "\n")
    sec = build_sector(cfg.m, cfg.n_electrons)
    for sub in cfg.subsystems:
        _, t_ext = split(state.t, sub.active)
        heff = build_heff(FLAVOR_BAR, h, cfg.reference, cfg.m, sub.active,
                          t_ext, sector=sec)
        _write_json(cfg.outdir / f"heff_{sub.label}.json", {
            "schema": "sescc-heff v1",
            **_stamp(cfg),
            "subsystem": sub.label,
            "flavor": heff.flavor,
            "basis": [det_to_string(d, cfg.m) for d in heff.basis],
            "matrix": [[float(x) for x in row] for row in heff.matrix],
        })
    ed, _ = _exact_ground(cfg, h)
    report = {
        "schema": "sescc-flow-report v1",
        **_stamp(cfg),
        "energy": state.energy,
        "energy_exact": ed.ground_energy(),
        "energy_error": abs(state.energy - ed.ground_energy()),
        "spread": state.spread,
        "sweeps": state.iteration,
        "subsystems": [sub.label for sub in cfg.subsystems],
        "uncovered_signatures": len(state.uncovered),
        "seconds": time.time() - t0,
    }
    _write_json(cfg.outdir / "report.json", report)
    if cfg.figures:
        plt = _figure_context()
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for sub in cfg.subsystems:
            pts = [(r["iteration"], r["energy"]) for r in state.trace
                   if r["subsystem"] == sub.label]
            ax.plot([x for x, _ in pts], [y for _, y in pts],
                    marker="o", ms=3, label=sub.label)
        ax.axhline(ed.ground_energy(), color="k", lw=0.8, ls="--", label="exact")
        ax.set_xlabel("sweep")
        ax.set_ylabel("subsystem energy")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(cfg.outdir / "flow_trace.png", dpi=150)
        plt.close(fig)
    print(f"flow E = {FMT % state.energy}  spread = {state.spread:.3e}  "
          f"({state.iteration} sweeps)")
    print(f"exact E = {FMT % ed.ground_energy()}  "
          f"|error| = {report['energy_error']:.3e}")
    print(f"wrote {cfg.outdir}/report.json, flow_trace.jsonl, heff_*.json")
    return 0


def _spectral_methods(cfg):
    methods = cfg.spectral.get("methods", ["ccgf", "ses", "lehmann"])
    bad = [x for x in methods if x not in ("ccgf", "ses", "lehmann")]
    if bad:
        raise ConfigError(f"unknown spectral methods {bad}")
    if "ses" in methods and cfg.active is None:
        raise ConfigError("spectral method 'ses' needs an [active] section")
    return methods


def cmd_spectral(cfg):
    methods = _spectral_methods(cfg)
    probes = [int(x) for x in cfg.spectral.get("probes", range(cfg.m))]
    for q in probes:
        if not 0 <= q < cfg.m:
            raise ConfigError(f"spectral probe {q} outside [0, {cfg.m})")
    elements = [tuple(int(x) for x in e)
                for e in cfg.spectral.get("elements", [[q, q] for q in probes])]
    grid = cfg.grid()
    h = build_siam(cfg.params)
    t0 = time.time()

    results = {}
    sol = lam = None
    if "ccgf" in methods or "ses" in methods:
        sol = solve_t(h, cfg.reference, cfg.m, cfg.rank_max, cfg=cfg.solver)
        sec = build_sector(cfg.m, cfg.n_electrons)
        lam = solve_lambda(sector_hbar(h, sol.t, sec), sol.t, cfg=cfg.solver)
    if "ccgf" in methods:
        results["ccgf"] = ccgf_matrix(h, sol.t, lam, probes, grid)
    if "ses" in methods:
        act_orbs = sorted(cfg.active.R | cfg.active.S)
        ses_probes = [q for q in probes if q in act_orbs]
        if not ses_probes:
            raise ConfigError("no requested probe lies in the active space")
        results["ses"] = gf_effective(h, sol.t, lam, cfg.active, ses_probes, grid)
    if "lehmann" in methods:
        ed_n, _ = _exact_ground(cfg, h)
        ed_m1 = exact_diagonalize(h, build_sector(cfg.m, cfg.n_electrons - 1))
        ed_p1 = exact_diagonalize(h, build_sector(cfg.m, cfg.n_electrons + 1))
        results["lehmann"] = lehmann_gf(ed_n, ed_m1, ed_p1, probes, grid)

    cfg.outdir.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        path = cfg.outdir / "spectra.csv"
        cols = ["method", "omega"]
        cols += [f"re_{k}_{l}" for k, l in elements]
        cols += [f"im_{k}_{l}" for k, l in elements]
        cols += [f"a_{k}" for k in probes]
        with open(path, "w") as fh:
            fh.write(f"# sescc-gf-csv v1 engine=sescc-{__version__} "
                     f"config={cfg.hash} eta={FMT % grid.eta}\n")
            fh.write(",".join(cols) + "\n")
            for name, res in results.items():
                g = res.retarded()
                a = res.spectral()
                for iw, w in enumerate(grid.omegas):
                    row = [name, FMT % w]
                    for k, l in elements:
                        if k in res.orbitals and l in res.orbitals:
                            z = g[iw, res.orbitals.index(k), res.orbitals.index(l)]
                            row += [FMT % z.real]
                        else:
                            row += [""]
                    for k, l in elements:
                        if k in res.orbitals and l in res.orbitals:
                            z = g[iw, res.orbitals.index(k), res.orbitals.index(l)]
                            row += [FMT % z.imag]
                        else:
                            row += [""]
                    for k in probes:
                        row += [FMT % a[iw, res.orbitals.index(k)]
                                if k in res.orbitals else ""]
                    fh.write(",".join(row) + "\n")
    else:
        path = cfg.outdir / "spectra.json"
        payload = {"schema": "sescc-gf v1", **_stamp(cfg),
                   "eta": grid.eta, "omegas": list(grid.omegas), "methods": {}}
        for name, res in results.items():
            g = res.retarded()
            a = res.spectral()
            payload["methods"][name] = {
                "orbitals": list(res.orbitals),
                "elements": {
                    f"{k},{l}": {
                        "re": list(g[:, res.orbitals.index(k), res.orbitals.index(l)].real),
                        "im": list(g[:, res.orbitals.index(k), res.orbitals.index(l)].imag),
                    }
                    for k, l in elements
                    if k in res.orbitals and l in res.orbitals
                },
                "spectral": {str(k): list(a[:, res.orbitals.index(k)])
                             for k in probes if k in res.orbitals},
            }
        _write_json(path, payload)

    if cfg.figures:
        plt = _figure_context()
        show = [q for q in probes if all(q in r.orbitals for r in results.values())] \
            or probes[:1]
        fig, axes = plt.subplots(len(show), 1, sharex=True,
                                 figsize=(5.5, 1.8 * len(show)), squeeze=False)
        styles = {"ccgf": dict(lw=1.2), "ses": dict(lw=1.0, ls="--"),
                  "lehmann": dict(lw=0.8, ls=":")}
        for ax, q in zip(axes[:, 0], show):
            for name, res in results.items():
                if q not in res.orbitals:
                    continue
                ax.plot(grid.omegas, res.spectral()[:, res.orbitals.index(q)],
                        label=name, **styles[name])
            ax.set_ylabel(f"A_{q}")
            ax.legend(fontsize=7, loc="upper right")
        axes[-1, 0].set_xlabel("omega")
        fig.tight_layout()
        fig.savefig(cfg.outdir / "spectra.png", dpi=150)
        plt.close(fig)
    print(f"spectra over {len(grid)} frequencies, methods: {', '.join(results)} "
          f"({time.time() - t0:.1f}s)")
    print(f"wrote {path}")
    return 0


def cmd_sweep(cfg):
    if not cfg.subsystems:
        raise ConfigError("sweep needs [[subsystems]] entries")
    sw = cfg.sweep
    u_values = [float(u) for u in sw.get("U", [cfg.params.U])]
    counts = [int(c) for c in sw.get("subsystem_counts",
                                     range(1, len(cfg.subsystems) + 1))]
    for c in counts:
        if not 1 <= c <= len(cfg.subsystems):
            raise ConfigError(f"subsystem count {c} outside "
                              f"[1, {len(cfg.subsystems)}]")
    eps_rule = sw.get("eps_c", "half-U")
    rows = []
    t0 = time.time()
    for u in u_values:
        eps_c = -u / 2 if eps_rule == "half-U" else float(eps_rule)
        params = SiamParams(eps_c=eps_c, mu=cfg.params.mu, U=u,
                            eps_d=cfg.params.eps_d, V=cfg.params.V)
        h = build_siam(params)
        ref = siam_reference(params, cfg.n_electrons)
        ed, ssec = _exact_ground(cfg, h)
        probe = double_occupancy_probe(params)
        gvec = ed.ground_state().coeffs
        d_ed = float(gvec @ to_matrix(probe, ssec, ssec).toarray() @ gvec)
        for c in counts:
            state = flow_iterate(h, ref, cfg.m, cfg.subsystems[:c],
                                 cfg=cfg.solver, rank_max=cfg.rank_max)
            sec = build_sector(cfg.m, cfg.n_electrons)
            lam = solve_lambda(sector_hbar(h, state.t, sec), state.t,
                               cfg=cfg.solver)
            d_cc = double_occupancy(state.t, lam, probe, sector=sec)
            rows.append({
                "U": u, "n_subsystems": c, "energy": state.energy,
                "energy_exact": ed.ground_energy(),
                "abs_error": abs(state.energy - ed.ground_energy()),
                "double_occupancy": d_cc, "double_occupancy_exact": d_ed,
            })

    cfg.outdir.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        path = cfg.outdir / "sweep.csv"
        cols = ["U", "n_subsystems", "energy", "energy_exact", "abs_error",
                "double_occupancy", "double_occupancy_exact"]
        with open(path, "w") as fh:
            fh.write(f"# sescc-sweep-csv v1 engine=sescc-{__version__} "
                     f"config={cfg.hash}\n")
            fh.write(",".join(cols) + "\n")
            for r in rows:
                fh.write(",".join(
                    FMT % r[c] if isinstance(r[c], float) else str(r[c])
                    for c in cols) + "\n")
    else:
        path = cfg.outdir / "sweep.json"
        _write_json(path, {"schema": "sescc-sweep v1", **_stamp(cfg),
                           "rows": rows})
    if cfg.figures:
        plt = _figure_context()
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for u in u_values:
            pts = [(r["n_subsystems"], max(r["abs_error"], 1e-16))
                   for r in rows if r["U"] == u]
            ax.semilogy([x for x, _ in pts], [y for _, y in pts],
                        marker="s", ms=4, label=f"U={u:g}")
        ax.set_xlabel("number of subsystems")
        ax.set_ylabel("|E - E_exact|")
        ax.set_xticks(counts)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(cfg.outdir / "sweep.png", dpi=150)
        plt.close(fig)
    print(f"sweep: {len(rows)} points ({time.time() - t0:.1f}s)")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- dispatch

def _add_common(sub):
    sub.add_argument("--config", help="TOML config path")
    sub.add_argument("--seed-paper", action="store_true",
                     help="use the built-in benchmark configuration")
    sub.add_argument("--out", help="output directory (overrides config)")
    sub.add_argument("--format", choices=["csv", "json"],
                     help="tabular output format (overrides config)")
    sub.add_argument("--eta", type=float,
                     help="broadening override for frequency grids")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sescc",
        description="subsystem-embedding coupled-cluster engine")
    parser.add_argument("--version", action="version",
                        version=f"sescc {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("flow", cmd_flow),
                     ("spectral", cmd_spectral), ("sweep", cmd_sweep)):
        sp = subs.add_parser(name)
        _add_common(sp)
        sp.set_defaults(handler=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args)
        return args.handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
