"""Command-line front end.

    attractlab <command> CONFIG [--set key=value ...] [--out DIR] [--quiet]

Exit codes: 0 success, 1 a mathematical check failed (the region does not
trap, the census is unstable, an acceptance criterion missed, ...), 2 usage
or configuration error.  Every run writes resolved_config.json; wall times go
to timing.json only, so all other artifacts are reproducible byte for byte.
"""
import argparse
import math
import os
import sys
import time

import numpy as np

from . import acceptance
from . import attractor as at
from . import bifurcation as bf
from . import config as cf
from . import currents as cu
from . import endo
from . import ergodic as eg
from . import green
from . import io
from . import projgeom as pg
from . import trapping as tr
from .errors import AttractLabError, ConfigError, ParameterError

COMMANDS = ("green", "attract", "measure", "census", "n0", "lyap", "entropy", "speedcheck",
            "trap", "dim", "grow", "scan", "verify")


class Failure(Exception):
    """A verification outcome that maps to exit code 1."""


class Run:
    """Output directory, metadata and format switches of one command."""

    def __init__(self, command, cfg, outdir, quiet=False):
        self.command = command
        self.cfg = cfg
        self.dir = outdir
        self.quiet = quiet
        self.formats = set(cfg["output"]["formats"])
        self.master = cfg["seeds"]["master"]
        self.meta = {"command": command, "config_hash": io.config_hash(cfg),
                     "seed": self.master, "version": io.VERSION}
        self.timing = {}

    def rng(self):
        index = COMMANDS.index(self.command)
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=(index,)))

    def path(self, name):
        return os.path.join(self.dir, name)

    def json(self, name, obj):
        if "json" in self.formats:
            io.write_json(self.path(name), {"meta": self.meta, "result": obj})

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            io.write_csv(self.path(name), header, rows, self.meta)

    def say(self, text):
        if not self.quiet:
            print(text)


def _seed_from(doc):
    """Seed from {"p", "q", "r_in", "r_out"} or {"ball": {"center", "radius"}}."""
    if "ball" in doc:
        b = doc["ball"]
        return at.Seed(ball=(np.array(cf.vec(b["center"])), float(b["radius"])),
                       atoms=int(b.get("atoms", 200)))
    cut = cu.Cutoff(float(doc.get("r_in", math.inf)), float(doc.get("r_out", math.inf)))
    return at.Seed(frame=(np.array(cf.vec(doc["p"])), np.array(cf.vec(doc["q"]))), cutoff=cut)


def _complex_rows(z):
    return [[v for c in row for v in (c.real, c.imag)] for row in z]


def _coord_header(prefix, k=2):
    return [f"{prefix}{i}_{part}" for i in range(k + 1) for part in ("re", "im")]


# ---------------------------------------------------------------------------
# commands


def cmd_green(run, f, region):
    p = run.cfg["pipeline"]["green"]
    rng = run.rng()
    z = rng.standard_normal((p["points"], f.k + 1)) + 1j * rng.standard_normal((p["points"], f.k + 1))
    g, tail = green.green_value(f, z, p["n"])
    run.csv("green.csv", _coord_header("z", f.k) + ["G"],
            [r + [v] for r, v in zip(_complex_rows(z), g)])
    out = {"points": p["points"], "n": p["n"], "tail_bound": tail}
    if p["line"] is not None:
        line = (np.array(cf.vec(p["line"]["p"])), np.array(cf.vec(p["line"]["q"])))
        sm = green.slice_measure(f, line, p["grid"])
        if "csv" in run.formats:
            sm.atoms.to_csv(run.path("slice_atoms.csv"), run.meta)
        out["slice_mass"] = sm.mass
    run.json("green.json", out)
    run.say(f"G evaluated at {p['points']} lifts, tail bound {tail:.3g}")


def cmd_attract(run, f, region):
    p = run.cfg["pipeline"]["attract"]
    seeds = [_seed_from(s) for s in p["seeds"]]
    ests, dist = at.estimate_attracting_current(f, region, seeds, p["N"], run.rng(),
                                                basin_steps=p["basin_steps"])
    run.csv("attract_fingerprints.csv", ["seed"] + cu.FP_NAMES,
            [[i] + list(e.fingerprint) for i, e in enumerate(ests)])
    run.json("attract.json", {"basis": cu.FP_VERSION, "N": p["N"], "distances": dist,
                              "estimates": [{"seed": e.seed, "c": e.c, "fingerprint": e.fingerprint,
                                             "cauchy_trace": e.trace, "capped": e.capped}
                                            for e in ests]})
    run.say(f"{len(ests)} seed(s); Cauchy gaps {[round(e.cauchy_gap, 6) for e in ests]}")


def _measure(run, f, region, N=None):
    p = run.cfg["pipeline"]["measure"]
    seed = _seed_from(p["line"])
    return at.estimate_equilibrium_measure(f, region, seed, p["N"] if N is None else N, p["grid"])


def cmd_measure(run, f, region):
    est = _measure(run, f, region)
    if "csv" in run.formats:
        est.atoms.to_csv(run.path("measure_atoms.csv"), run.meta)
    fp = cu.fingerprint_atoms(est.atoms.points, est.atoms.weights)
    run.json("measure.json", {"atoms": len(est.atoms), "c": est.c, "fingerprint": fp,
                              "cauchy_trace": est.trace})
    run.say(f"{len(est.atoms)} atoms, slice mass {est.c:.6g}")


def cmd_census(run, f, region):
    p = run.cfg["pipeline"]["census"]
    rep = at.census(f, region, p["seeds"], p["N"], p["tol"], run.rng(), kind=p["kind"])
    run.json("census.json", rep.to_json())
    run.csv("census.csv", ["seed", "label"] + cu.FP_NAMES,
            [[i, int(lab)] + list(fp) for i, (lab, fp) in enumerate(zip(rep.labels, rep.fingerprints))])
    run.say(f"census count {rep.count} (at 2*tol: {rep.count_2tol})")
    if isinstance(rep, at.UnstableCensus):
        raise Failure(f"UnstableCensus: {rep.count} clusters at tol, {rep.count_2tol} at 2*tol")


def cmd_n0(run, f, region):
    p = run.cfg["pipeline"]["n0"]
    seed = _seed_from(p["seed"] if p["seed"] is not None else run.cfg["pipeline"]["measure"]["line"])
    rep = at.detect_n0(f, region, seed, p["N"], p["max_period"], p["tol"], run.rng())
    if isinstance(rep, at.Undetermined):
        run.json("n0.json", {"n0": None, "gaps": {str(q): g for q, g in rep.gaps.items()}})
        raise Failure(f"Undetermined: no period up to {p['max_period']} below tol {p['tol']}")
    run.json("n0.json", {"n0": rep.n0, "residues": rep.residues, "gaps": rep.gaps})
    run.say(f"n0 = {rep.n0}")


def cmd_lyap(run, f, region):
    p = run.cfg["pipeline"]["lyap"]
    nu = _measure(run, f, region, p["measure_N"]).atoms
    rep = eg.lyapunov(f, nu, p["n"], p["samples"], run.rng(), region)
    run.json("lyap.json", rep.to_json())
    run.csv("lyap.csv", ["l", "lifted_exponent", "L", "L_stderr"],
            [[i + 1, rep.lifted[i], rep.sums[i], rep.sums_stderr[i]] for i in range(len(rep.sums))])
    run.say(f"exponents {np.round(rep.exponents, 6).tolist()}, sums {np.round(rep.sums, 6).tolist()}")


def cmd_entropy(run, f, region):
    p = run.cfg["pipeline"]["entropy"]
    rep = eg.entropy_estimate(f, region, p["n"], tuple(p["eps"]), p["budget"], run.rng())
    run.json("entropy.json", rep.to_json())
    run.say(f"entropy estimate {rep.value:.6g}")
    if isinstance(rep, eg.UnderResolved):
        raise Failure("UnderResolved: candidate budget exhausted")


def cmd_speedcheck(run, f, region):
    p = run.cfg["pipeline"]["speedcheck"]
    rng = run.rng()
    gauge = isinstance(region, tr.Gauge)
    v2 = tr.Gauge(p["contraction_rho"], region.split) if gauge else region
    vt = tr.Gauge(p["dloc_rho"], region.split) if gauge else region
    con = eg.contraction_check(f, v2, p["contraction_samples"], rng)
    dl = eg.dloc_estimate(f, vt, p["dloc_n"], p["dloc_samples"], rng)
    pts = [cf.vec(x) for x in p["topdeg_points"]]
    td = eg.small_topdeg_rate(f, region, pts, p["topdeg_n"], rng=rng)
    run.json("speedcheck.json", {
        "contraction": {"sup": con.sup, "passed": con.passed, "samples": con.samples,
                        "argmax": con.argmax},
        "dloc": {"mass": dl.mass, "stderr": dl.stderr, "normalized": dl.normalized,
                 "rate": dl.rate, "hyperbolic": dl.hyperbolic},
        "topdeg": {"counts": td.counts, "rates": td.rates, "limsup": td.limsup,
                   "flagged": td.flagged}})
    run.say(f"contraction sup {con.sup:.4g}; d_loc rate {dl.rate:.3g}; top-degree limsup {td.limsup:.3g}")


def cmd_trap(run, f, region):
    p = run.cfg["pipeline"]["trap"]
    rng = run.rng()
    rep = tr.verify_trap(f, region, p["samples"], rng)
    out = {"verified": rep.verified, "margin": rep.margin, "samples": rep.samples,
           "contraction": rep.contraction, "witness": rep.witness}
    if isinstance(rep, tr.NotTrapping):
        run.json("trap.json", out)
        raise Failure(f"NotTrapping: boundary image leaves the region (margin {rep.margin:.3g})")
    size = tr.estimate_rU(f, region, rng, p["rU_samples"])
    out.update({"r_U": size.r_U, "eta_U": size.eta_U, "inconsistent": size.inconsistent})
    run.json("trap.json", out)
    run.say(f"trapping verified, margin {rep.margin:.4g}, r_U {size.r_U:.4g}")


def cmd_dim(run, f, region):
    p = run.cfg["pipeline"]["dim"]
    rep = tr.dimension_detect(f, region, run.rng(), p["mass_threshold"], p["mu_threshold"],
                              p["mu_count"], lines=p["lines"])
    s = getattr(rep, "s", None)
    run.json("dim.json", {"s": s, "inconclusive": isinstance(rep, tr.Inconclusive),
                          "slice_mass": rep.slice_mass, "mu_fraction": rep.mu_fraction,
                          "details": rep.details})
    run.say(f"dimension {s if s is not None else 'inconclusive'}")


def cmd_grow(run, f, region):
    p = run.cfg["pipeline"]["grow"]
    rng = run.rng()
    r = p["r"]
    if r is None:
        r = tr.estimate_rU(f, region, rng).r_U / 2
    seeds = region.sample_interior(rng, p["seeds"], f.k)
    res = tr.grow_pseudo_region(f, seeds, r, rng, p["tol"], region, p["draws"], p["max_rounds"])
    if isinstance(res, tr.Escaped):
        run.json("grow.json", {"r": r, "escaped": True, "witness": res.witness, "rounds": res.rounds})
        raise Failure(f"Escaped: a pseudo-orbit left the region after {res.rounds} rounds")
    run.csv("grow_centers.csv", _coord_header("x", f.k), _complex_rows(res.centers))
    run.json("grow.json", {"r": r, "escaped": False, "balls": len(res.radii), "radius": p["tol"]})
    run.say(f"pseudo-orbit cover with {len(res.radii)} balls at r = {r:.4g}")


def _scan_config(p):
    keys = ("nu_N", "lyap_n", "lyap_samples", "census_seeds", "census_N", "census_tol",
            "trap_samples")
    return bf.PipelineConfig(**{k: p[k] for k in keys})


def cmd_scan(run, f, region):
    p = run.cfg["pipeline"]["scan"]
    spec = cf.family(run.cfg)
    grid = bf.ParamGrid(spec, complex(*p["center"]), p["re_max"], p["im_max"], p["n_re"], p["n_im"])
    try:
        scan = bf.sweep(grid, region, _scan_config(p), run.master, run.cfg["pipeline"]["workers"])
    except bf.TrapCornerError as exc:
        raise Failure(f"NotTrapping at corner {exc.lam}") from exc
    run.csv("scan.csv", scan.header(), scan.rows())
    values = scan.array(p["render"])
    if "heatmap" in run.formats:
        io.write_heatmap(run.path(f"scan_{p['render']}.grid"), values, grid.bounds, run.meta)
    if "ppm" in run.formats:
        io.write_ppm(run.path(f"scan_{p['render']}.ppm"), values, run.meta)
    h = max(grid.spacing)
    psh = bf.psh_test(scan.array("L2"), grid.bounds, p["psh_radius"] * h,
                      p["psh_tol_se"] * scan.stderr(2))
    out = {"nodes": len(scan.nodes), "excluded": int(scan.excluded.sum()),
           "errors": [[r.lam.real, r.lam.imag, r.error] for r in scan.nodes if r.error],
           "boundary": scan.boundary(),
           "psh_L2": {"violations": psh.violations, "tested": psh.tested, "skipped": psh.skipped,
                      "sentinel": psh.sentinel, "worst_excess": psh.worst_excess,
                      "locations": psh.locations}}
    try:
        table = bf.continuity_diagnostic(scan)
        out["continuity"] = {"spacing": table.spacing, "jumps": table.jumps,
                             "max_jump": table.max_jump}
    except ParameterError as exc:
        out["continuity"] = {"skipped": str(exc)}
    run.json("scan.json", out)
    run.say(f"{len(scan.nodes)} nodes, {out['excluded']} excluded, "
            f"{psh.violations}/{psh.tested} sub-mean-value violations")


def cmd_verify(run, f, region):
    p = run.cfg["pipeline"]
    v = p["verify"]
    numbers = v["criteria"]
    if numbers is None:
        numbers = list(acceptance.QUICK) if v["profile"] == "quick" else sorted(acceptance.CRITERIA)
    bad = [n for n in numbers if n not in acceptance.CRITERIA]
    if bad:
        raise ConfigError(f"unknown criteria {bad}")
    ctx = acceptance.Context(run.master, p["workers"], p["scan"])
    results = acceptance.run(numbers, ctx, report=lambda r: run.say(r.line()))
    lines = [r.line() for r in results]
    with open(run.path("acceptance.txt"), "w", newline="\n") as fh:
        fh.write(f"# config_hash={run.meta['config_hash']}, seed={run.master}, "
                 f"version={io.VERSION}\n" + "\n".join(lines) + "\n")
    run.json("acceptance.json", {"profile": v["profile"], "criteria": [r.to_json() for r in results]})
    run.timing["criteria"] = {str(r.number): r.seconds for r in results}
    missed = [r.number for r in results if not r.passed]
    if missed:
        raise Failure(f"acceptance miss: criteria {missed}")


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}
HELP = {
    "green": "Green function at random lifts, optional slice measure",
    "attract": "attracting-current fingerprints from the configured seeds",
    "measure": "equilibrium measure of the attracting current as weighted atoms",
    "census": "number of attracting currents from random seeds",
    "n0": "period after which plain iterates converge",
    "lyap": "Lyapunov exponents and sums of the equilibrium measure",
    "entropy": "entropy from Bowen-separated set growth",
    "speedcheck": "contraction, local degree and small topological degree checks",
    "trap": "trapping verification and perturbation radius",
    "dim": "dimension of the attracting set",
    "grow": "pseudo-orbit trapping region",
    "scan": "parameter sweep with sub-mean-value and continuity diagnostics",
    "verify": "acceptance suite",
}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="attractlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("config", help="JSON run configuration (schema v1)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. pipeline.census.N=20")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = cf.load(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = args.out or cfg["output"]["directory"]
    try:
        io.ensure_dir(outdir)
    except OSError as exc:
        print(f"cannot create output directory {outdir}: {exc}", file=sys.stderr)
        return 2
    run = Run(args.command, cfg, outdir, args.quiet)
    io.write_json(run.path("resolved_config.json"), cfg)
    marker = run.path("FAILED")
    if os.path.exists(marker):
        os.remove(marker)
    t = time.perf_counter()
    code, reason = 0, None
    try:
        HANDLERS[args.command](run, endo.instantiate_family(cf.family(cfg)), cf.region(cfg))
    except Failure as exc:
        code, reason = 1, str(exc)
    except (ConfigError, ParameterError) as exc:
        code, reason = 2, f"{type(exc).__name__}: {exc}"
    except AttractLabError as exc:
        code, reason = 1, f"{type(exc).__name__}: {exc}"
    run.timing.update({"command": args.command, "wall_seconds": time.perf_counter() - t})
    io.write_json(run.path("timing.json"), run.timing)
    if reason:
        with open(marker, "w", newline="\n") as fh:
            fh.write(reason + "\n")
        print(reason, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
