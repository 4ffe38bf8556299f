"""Batch command-line front end: ``nolawbohm <subcommand> --config cfg.yaml``.

Exit codes: 0 success, 2 invalid configuration or physical precondition,
3 numerical failure (node guard budget, envelope, degenerate step).
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import json
import os
import shutil
import sys
import tempfile
from importlib import resources

import jsonschema
import numpy as np
import yaml

from ._validation import (
    DegenerateStepError,
    EnvelopeError,
    FailureBudgetError,
    NodeProximityError,
    PhysicsError,
)
from .dirac import DiracPacket, MultiTimeWaveFunction, PoincareTransform
from .ensemble import THREADS_ENV, cross_foliation_test, equivariance_rel, marginal_bins
from .events import event_from_dict
from .foliation import CurvedFoliation, FlatFoliation, SinShape, TanhShape
from .hbd import covariance_check, integrate_batch, overlap_check
from .invariants import run_invariant_suite
from .nolaw import DEFAULT_S_RANGE, FoliationFamily, check_capacity_properties, covariance_p_star, is_typical, p_star
from .nr import GaussianPacket, GaussianWaveFunction, marginal_histogram, nr_equivariance, nr_integrate

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

SUBCOMMANDS = (
    "simulate-nr",
    "simulate-hbd",
    "equivariance",
    "cross-foliation",
    "pstar",
    "pstar-properties",
    "covariance-check",
    "overlap-check",
    "validate",
)


class ConfigError(ValueError):
    """Configuration file does not match the schema or cannot be read."""


def _data(name):
    return resources.files("nolawbohm").joinpath("data", name)


def load_schema():
    return json.loads(_data("schema.json").read_text(encoding="utf-8"))


def default_config():
    return yaml.safe_load(_data("default_config.yaml").read_text(encoding="utf-8"))


def apply_override(config, assignment):
    """Apply ``a.b.c=value``; the value is parsed as YAML (numbers, lists, null)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key.path=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = config
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {path!r} crosses a non-mapping value")
    node[keys[-1]] = yaml.safe_load(raw)
    return config


def validate_config(config):
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = ".".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    return config


def load_config(path=None, overrides=(), seed=None, threads=None):
    config = default_config() if path is None else _read_yaml(path)
    config = copy.deepcopy(config) or {}
    for o in overrides:
        apply_override(config, o)
    if seed is not None:
        config["seed"] = seed
    if threads is not None:
        config["threads"] = threads
    return validate_config(config)


def _read_yaml(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def config_hash(config):
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _coefficient(c):
    return complex(c[0], c[1]) if isinstance(c, list) else complex(c)


def build_wavefunction(spec):
    terms = spec["terms"]
    n = len(terms[0]["packets"])
    if any(len(t["packets"]) != n for t in terms):
        raise PhysicsError("wavefunction.terms: every term needs the same number of packets")
    masses = spec.get("masses", [1.0] * n)
    if len(masses) != n:
        raise PhysicsError(f"wavefunction.masses: expected {n} entries, got {len(masses)}")
    if spec["sector"] == "nonrelativistic":
        built = [
            (_coefficient(t.get("coefficient", 1.0)),
             tuple(GaussianPacket(p["center"], p["momentum"], p["width"]) for p in t["packets"]))
            for t in terms
        ]
        return GaussianWaveFunction(tuple(built), masses=masses)
    built = [
        (_coefficient(t.get("coefficient", 1.0)),
         tuple(DiracPacket(p["center"], p["momentum"], p["width"], p.get("branch", 1)) for p in t["packets"]))
        for t in terms
    ]
    return MultiTimeWaveFunction.from_packets(
        built, masses=masses, n_modes=spec.get("n_modes", 64), cutoff=spec.get("cutoff", 6.0)
    )


def build_foliation(spec, where="foliation"):
    if spec["kind"] == "flat":
        return FlatFoliation(spec.get("v", 0.0), spec.get("offset", 0.0), label=spec.get("label"))
    shape = spec.get("shape")
    try:
        if shape == "tanh":
            s = TanhShape(spec.get("a", 0.0), spec.get("x0", 0.0), spec.get("w", 1.0))
        elif shape == "sin":
            s = SinShape(spec.get("a", 0.0), spec.get("omega", 1.0))
        else:
            raise PhysicsError("curved foliations need shape 'tanh' or 'sin'")
    except PhysicsError as exc:
        raise PhysicsError(f"{where}: {exc}") from exc
    return CurvedFoliation(s, tuple(spec.get("domain", (-20.0, 20.0))), label=spec.get("label"))


def build_transform(spec):
    v = spec.get("v", 0.0)
    a = tuple(spec.get("a", (0.0, 0.0)))
    return PoincareTransform.boost(v, a) if v else PoincareTransform.shift(*a)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


class Report:
    """Ordered key = value lines; ``timestamp`` is the only non-deterministic field."""

    def __init__(self, command, config):
        self.items = [
            ("timestamp", _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")),
            ("command", command),
            ("config_hash", config_hash(config)),
            ("seed", config.get("seed", 0)),
        ]

    def add(self, key, value):
        self.items.append((key, value))

    def text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.items)


def _write_csv(path, header, rows, config_digest):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _run_params(config):
    return config.get("run", {})


def _initial(config, wf):
    run = _run_params(config)
    if "initial" not in run:
        raise PhysicsError("run.initial: simulate commands need initial configurations")
    x0 = np.asarray(run["initial"], dtype=float)
    if x0.ndim != 2 or x0.shape[1] != wf.n_particles:
        raise PhysicsError(f"run.initial: each configuration needs {wf.n_particles} coordinates")
    return x0


def _require_sector(wf, sector, command):
    is_dirac = isinstance(wf, MultiTimeWaveFunction)
    if (sector == "dirac") != is_dirac:
        raise PhysicsError(f"wavefunction.sector: {command} needs a {sector} state")


def cmd_simulate_nr(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "nonrelativistic", "simulate-nr")
    run = _run_params(config)
    x0 = _initial(config, wf)
    t0, t1, h = run.get("t0", 0.0), run.get("t1", 2.0), run.get("h", 1e-3)
    stride = run.get("record_every", 1)
    trajs = nr_integrate(wf, x0, t0, t1, h)
    rows = []
    for m, traj in enumerate(trajs):
        keep = list(range(0, len(traj.times), stride))
        if keep[-1] != len(traj.times) - 1:
            keep.append(len(traj.times) - 1)
        for k in keep:
            for i in range(wf.n_particles):
                rows.append((m, traj.times[k], i, traj.positions[k, i]))
    _write_csv(os.path.join(out, "trajectories.csv"), ["trajectory", "t", "particle", "x"], rows, report.items[2][1])
    report.add("trajectories", len(x0))
    report.add("failures", sum(not tr.valid for tr in trajs))
    for m, traj in enumerate(trajs):
        report.add(f"final_position[{m}]", [float(v) for v in traj.positions[-1]])
    return EXIT_OK


def _trajectory_rows(s, points, valid):
    rows = []
    for m in range(points.shape[0]):
        for k in range(points.shape[1]):
            for i in range(points.shape[2]):
                rows.append((m, s[k], i, points[m, k, i, 0], points[m, k, i, 1], int(valid[m])))
    return rows


def cmd_simulate_hbd(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "simulate-hbd")
    fol = build_foliation(config.get("foliation", {"kind": "flat"}))
    run = _run_params(config)
    x0 = _initial(config, wf)
    res = integrate_batch(
        wf, fol, x0, run.get("s0", 0.0), run.get("s1", 2.0), run.get("ds", 1e-3), run.get("record_every", 1)
    )
    _write_csv(
        os.path.join(out, "trajectories.csv"),
        ["trajectory", "s", "particle", "t", "x", "valid"],
        _trajectory_rows(res.s, res.points, res.valid),
        report.items[2][1],
    )
    report.add("foliation", fol.label)
    report.add("trajectories", len(x0))
    report.add("failures", int((~res.valid).sum()))
    return EXIT_OK


def _histogram_rows(edges_probs, final):
    rows = []
    for i, (edges, probs) in enumerate(edges_probs):
        counts, _ = np.histogram(final[:, i], bins=edges)
        emp = counts / len(final)
        for k in range(len(probs)):
            rows.append((i, edges[k], edges[k + 1], emp[k], probs[k]))
    return rows


def cmd_equivariance(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    run = _run_params(config)
    m, bins, seed = run.get("samples", 1000), run.get("bins", 30), config.get("seed", 0)
    scale = run.get("current_scale", 1.0)
    if isinstance(wf, MultiTimeWaveFunction):
        fol = build_foliation(config.get("foliation", {"kind": "flat"}))
        s0, s1 = run.get("s0", 0.0), run.get("s1", 2.0)
        rep, final = equivariance_rel(
            wf, fol, s0, s1, m, bins, seed, run.get("ds", 1e-2), scale,
            joint=run.get("joint_bins"), threads=config.get("threads"), return_final=True,
        )
        leaf = fol.leaf(s1)
        hist = [marginal_bins(wf, leaf, i, bins) for i in range(wf.n_particles)]
        report.add("sector", "dirac")
        report.add("foliation", fol.label)
    else:
        t0, t1 = run.get("t0", 0.0), run.get("t1", 2.0)
        rep, final = nr_equivariance(wf, t0, t1, m, bins, seed, run.get("h", 1e-3), scale, return_final=True)
        hist = [marginal_histogram(wf, i, t1, bins) for i in range(wf.n_particles)]
        report.add("sector", "nonrelativistic")
    _write_csv(
        os.path.join(out, "histograms.csv"),
        ["particle", "bin_lo", "bin_hi", "empirical", "exact"],
        _histogram_rows(hist, final),
        report.items[2][1],
    )
    report.add("samples", m)
    report.add("bins", bins)
    report.add("current_scale", scale)
    report.add("l1_distances", list(rep.distances))
    report.add("noise_floor", rep.noise_floor)
    if rep.joint is not None:
        report.add("joint_l1", rep.joint)
        report.add("joint_noise_floor", rep.joint_noise_floor)
    report.add("within_3x_floor", rep.within(3.0))
    report.add("failures", rep.failures)
    return EXIT_OK


def cmd_cross_foliation(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "cross-foliation")
    fol = build_foliation(config.get("foliation", {"kind": "flat"}))
    other = build_foliation(config.get("other_foliation", {"kind": "flat", "v": 0.6}), "other_foliation")
    run = _run_params(config)
    res = cross_foliation_test(
        wf, fol, other, run.get("s0", 0.0), run.get("s_other", 1.0), run.get("samples", 1000),
        run.get("bins", 30), config.get("seed", 0), s1=run.get("s1"), s_baseline=run.get("s_baseline"),
        ds=run.get("ds", 1e-2), record_every=run.get("record_every", 2), joint=run.get("joint_bins", 8),
        threads=config.get("threads"),
    )
    report.add("foliation", fol.label)
    report.add("other_foliation", other.label)
    for name, r in (("baseline", res.baseline), ("cross", res.cross)):
        report.add(f"{name}_marginal_l1", list(r.distances))
        report.add(f"{name}_joint_l1", r.joint)
    report.add("joint_noise_floor", res.baseline.joint_noise_floor)
    report.add("ratio", res.ratio)
    return EXIT_OK


def _family(config):
    specs = config.get("family")
    if not specs:
        raise PhysicsError("family: pstar commands need a non-empty foliation family")
    run = _run_params(config)
    fols = tuple(build_foliation(s, f"family[{k}]") for k, s in enumerate(specs))
    return FoliationFamily(fols, tuple(run.get("family_s_range", DEFAULT_S_RANGE)))


def _family_kwargs(config):
    run = _run_params(config)
    return dict(
        ds=run.get("family_ds", 5e-2), record_every=run.get("family_record_every", 2), threads=config.get("threads")
    )


def _pstar_rows(est):
    return [(label, v, lo, hi, k, n, f) for label, v, lo, hi, k, n, f in est.table()]


def cmd_pstar(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "pstar")
    fam = _family(config)
    run = _run_params(config)
    event = event_from_dict(config.get("event", {"kind": "true"}))
    est = p_star(
        event, fam, wf, run.get("samples", 1000), config.get("seed", 0),
        **_family_kwargs(config)
    )
    verdict = is_typical(est, run.get("epsilon", 0.02))
    _write_csv(
        os.path.join(out, "pstar.csv"),
        ["foliation", "estimate", "ci_lower", "ci_upper", "successes", "count", "failures"],
        _pstar_rows(est),
        report.items[2][1],
    )
    report.add("event", event.describe())
    for label, v, lo, hi, *_ in est.table():
        report.add(f"p_F[{label}]", [v, lo, hi])
    report.add("p_star", est.value)
    report.add("p_star_argmin", est.argmin)
    report.add("p_star_lower", est.lower)
    report.add("typical", verdict.typical)
    report.add("verdict", verdict.text)
    return EXIT_OK


def cmd_pstar_properties(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "pstar-properties")
    fam = _family(config)
    run = _run_params(config)
    ev = {k: event_from_dict(v) for k, v in config.get("events", {}).items()}
    rep = check_capacity_properties(
        fam, wf, run.get("samples", 1000), config.get("seed", 0),
        a=ev.get("A"), b=ev.get("B"), c=ev.get("C"), d=ev.get("D"),
        **_family_kwargs(config)
    )
    for k, v in rep.values.items():
        report.add(f"value.{k}", v)
    for k, v in rep.checks.items():
        report.add(f"check.{k}", v)
    report.add("all_passed", rep.passed)
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def cmd_covariance_check(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "covariance-check")
    fol = build_foliation(config.get("foliation", {"kind": "flat"}))
    g = build_transform(config.get("transform", {}))
    run = _run_params(config)
    x0 = _initial(config, wf)[0]
    rep = covariance_check(wf, fol, x0, g, run.get("s0", 0.0), run.get("s1", 2.0), run.get("ds", 1e-3))
    report.add("foliation", fol.label)
    report.add("rapidity", g.rapidity)
    report.add("translation", list(g.translation))
    report.add("sup_distance", rep.distance)
    report.add("sup_distance_refined", rep.refined_distance)
    report.add("refinement_order", rep.order)
    if "event" in config and config.get("family"):
        fam = _family(config)
        cmp_ = covariance_p_star(
            event_from_dict(config["event"]), fam, wf, g, run.get("samples", 1000), config.get("seed", 0),
            **_family_kwargs(config)
        )
        report.add("p_star_original", cmp_.original.value)
        report.add("p_star_transformed", cmp_.transformed.value)
        report.add("p_star_ci_overlap", cmp_.overlap)
    return EXIT_OK


def cmd_overlap_check(config, out, report):
    wf = build_wavefunction(config["wavefunction"])
    _require_sector(wf, "dirac", "overlap-check")
    fol = build_foliation(config.get("foliation", {"kind": "flat"}))
    run = _run_params(config)
    x0 = _initial(config, wf)[0]
    rep = overlap_check(
        wf, fol, x0, run.get("margin", 1.5), run.get("bump", 0.2), run.get("s0", 0.0), run.get("s1", 2.0),
        run.get("ds", 1e-3),
    )
    report.add("foliation", fol.label)
    report.add("margin", rep.margin)
    report.add("bump", rep.bump)
    report.add("sup_distance", rep.distance)
    report.add("tolerance", rep.tolerance)
    report.add("passed", rep.passed)
    return EXIT_OK


def cmd_validate(config, out, report):
    results = run_invariant_suite(config.get("seed", 0))
    for r in results:
        report.add(f"invariant.{r.name}", f"{'pass' if r.passed else 'FAIL'} ({r.value!r} <= {r.threshold!r})")
    ok = all(r.passed for r in results)
    report.add("all_passed", ok)
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {
    "simulate-nr": cmd_simulate_nr,
    "simulate-hbd": cmd_simulate_hbd,
    "equivariance": cmd_equivariance,
    "cross-foliation": cmd_cross_foliation,
    "pstar": cmd_pstar,
    "pstar-properties": cmd_pstar_properties,
    "covariance-check": cmd_covariance_check,
    "overlap-check": cmd_overlap_check,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="nolawbohm", description="Bohmian trajectories without a preferred foliation.")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="YAML configuration (defaults to the shipped default_config.yaml)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dot-path override, e.g. run.samples=2000 (repeatable)")
    parser.add_argument("--out", default="nolawbohm-out", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--threads", type=int,
                        help=f"worker threads for ensemble chunks (default: ${THREADS_ENV} or 1)")
    return parser


def run(command, config_path=None, overrides=(), out="nolawbohm-out", seed=None, threads=None, stderr=None):
    """Execute one subcommand; returns the exit code. Outputs appear in ``out`` only on success."""
    stderr = sys.stderr if stderr is None else stderr
    try:
        config = load_config(config_path, overrides, seed, threads)
    except (ConfigError, PhysicsError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    os.makedirs(out, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".partial-", dir=out)
    report = Report(command, config)
    try:
        code = COMMANDS[command](config, staging, report)
        with open(os.path.join(staging, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.text())
        for name in os.listdir(staging):
            os.replace(os.path.join(staging, name), os.path.join(out, name))
        return code
    except (PhysicsError, ConfigError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except (NodeProximityError, FailureBudgetError, EnvelopeError, DegenerateStepError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERICAL
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.overrides, args.out, args.seed, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
