"""Command line driver: ``fockdpp <command> [options]``.

Settings come from an optional INI file (section ``[run]``, keys named like
the long options with dashes or underscores) and are overridden by flags.
Every output file records the hash of the resolved configuration and the
seed; identical configurations reproduce identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed ``--check``.
"""

import argparse
import configparser
from concurrent.futures import ThreadPoolExecutor
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__, _backend
from . import analysis as an
from .cells import CellPartition, Disk
from .errors import ConfigError, FockError, NumericError
from .kernel import build_kernel, save_basis, DEFAULT_RANK_CAP
from .samplers import (PointConfiguration, Window, ginibre_oracle, sample_dpp,
                       sample_poisson)
from .spectra import sweep_cells, write_cells_csv
from .weights import PowerAlpha, Process, RadiusField, classify_separation, load_weight_table

log = logging.getLogger("fockdpp")

COMMANDS = ("classify", "rho", "kernel-build", "spectra-sweep", "sample-dpp",
            "sample-poisson", "ginibre", "analyze", "full-run")

# resolved setting -> (type, default)
SETTINGS = {
    "alpha": (float, None),
    "weight_table": (str, None),
    "window": (float, 6.0),
    "rank": (int, None),
    "tol": (float, 1e-10),
    "rank_cap": (int, DEFAULT_RANK_CAP),
    "nmax": (int, 12),
    "scale": (float, 1.0),
    "samples": (int, 100),
    "seed": (int, 0),
    "out": (str, "fockdpp-out"),
    "metric": (str, "euclid"),
    "process": (str, "dpp"),
    "workers": (int, 1),
}
# settings that do not influence numeric output
_UNHASHED = ("out", "workers")


# --- configuration ----------------------------------------------------------

def _read_ini(path):
    cp = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    if not cp.has_section("run"):
        raise ConfigError("config %s has no [run] section" % path)
    out = {}
    for key, raw in cp.items("run"):
        name = key.replace("-", "_")
        if name not in SETTINGS:
            raise ConfigError("unknown config key %r" % key)
        out[name] = raw
    return out


def resolve_settings(args):
    """Merge defaults, config file and flags (flags win) into typed settings."""
    merged = {k: d for k, (_, d) in SETTINGS.items()}
    if args.config:
        merged.update(_read_ini(args.config))
    for k in SETTINGS:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    out = {}
    for k, (typ, _) in SETTINGS.items():
        v = merged[k]
        if v is None:
            out[k] = None
            continue
        try:
            out[k] = typ(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for %s: %r" % (k, v)) from exc
    _validate(out)
    return out


def _validate(s):
    if (s["alpha"] is None) == (s["weight_table"] is None):
        raise ConfigError("give exactly one of --alpha and --weight-table")
    if s["alpha"] is not None and not s["alpha"] > 0:
        raise ConfigError("alpha must be positive")
    for k in ("window", "tol", "scale"):
        if not s[k] > 0:
            raise ConfigError("%s must be positive" % k)
    for k in ("nmax", "samples", "workers", "rank_cap"):
        if s[k] < 1:
            raise ConfigError("%s must be at least 1" % k)
    if s["rank"] is not None and s["rank"] < 1:
        raise ConfigError("rank must be at least 1")
    if not 0 <= s["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if s["metric"] not in ("euclid", "dk"):
        raise ConfigError("metric must be euclid or dk")
    if s["process"] not in ("dpp", "poisson"):
        raise ConfigError("process must be dpp or poisson")


def config_hash(settings):
    """SHA-256 of the settings that determine numeric output."""
    keep = {k: v for k, v in settings.items() if k not in _UNHASHED}
    if keep.get("weight_table"):
        with open(keep["weight_table"], "rb") as fh:
            keep["weight_table"] = hashlib.sha256(fh.read()).hexdigest()
    blob = json.dumps(keep, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --- run context ------------------------------------------------------------

class Run:
    """Shared state of one invocation: settings, lazily built objects, manifest."""

    def __init__(self, settings, command, check=False):
        self.s = settings
        self.settings = dict(settings)
        self.command = command
        self.check = check
        self.hash = config_hash(settings)
        self.out = settings["out"]
        self.stages = []
        self.outputs = []
        self.skipped = []
        self.checks = {}
        self._weight = self._rf = None
        self._kernels = {}
        os.makedirs(self.out, exist_ok=True)

    @property
    def header(self):
        return {"config_hash": self.hash, "seed": self.s["seed"]}

    def path(self, *parts):
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        self.outputs.append(os.path.join(*parts))
        return p

    @property
    def weight(self):
        if self._weight is None:
            if self.s["alpha"] is not None:
                self._weight = PowerAlpha(self.s["alpha"])
            else:
                self._weight = load_weight_table(self.s["weight_table"])
        return self._weight

    @property
    def rf(self):
        if self._rf is None:
            self._rf = RadiusField(self.weight)
        return self._rf

    def kernel(self, radius):
        radius = float(radius)
        if radius not in self._kernels:
            self._kernels[radius] = build_kernel(self.weight, self.rf, radius, tol=self.s["tol"],
                                                 rank=self.s["rank"], cap=self.s["rank_cap"])
        return self._kernels[radius]

    def partition(self):
        sc = self.s["scale"]
        inv = 1.0 / sc
        if sc < 1 and abs(inv - round(inv)) < 1e-9:
            return CellPartition.refined(int(round(inv)), self.s["nmax"])
        return CellPartition.standard(self.s["nmax"], sc)

    def record_check(self, name, ok, detail=""):
        self.checks[name] = {"passed": bool(ok), "detail": detail}
        log.info("check %-28s %s %s", name, "PASS" if ok else "FAIL", detail)

    def manifest(self, complete, failed_stage=None, error=None):
        data = {
            "version": __version__,
            "command": self.command,
            "config": {k: v for k, v in self.settings.items() if k not in _UNHASHED},
            "config_hash": self.hash,
            "seed": self.s["seed"],
            "backend": _backend.NAME,
            "stages": self.stages,
            "outputs": sorted(set(self.outputs)),
            "skipped": self.skipped,
            "checks": self.checks,
            "complete": bool(complete),
        }
        if failed_stage is not None:
            data["failed_stage"] = failed_stage
            data["error"] = error
        with open(os.path.join(self.out, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")


# --- stages -----------------------------------------------------------------

def stage_classify(run):
    out = {}
    for proc in (Process.DETERMINANTAL, Process.POISSON):
        v = classify_separation(run.rf, proc)
        out[proc.value] = v
        closed = getattr(v.closed_form, "value", v.closed_form)
        run.record_check("classify_%s" % proc.value, not v.conflict,
                         "%s (closed form %s)" % (v.verdict.value, closed))
        print("%s: %s" % (proc.value, v.verdict.value))
    an.write_json(run.path("reports", "verdicts.json"), out, run.header)


def stage_rho(run):
    R = run.s["window"]
    r = np.linspace(0.0, R, 257)
    rho = run.rf.rho(r)
    with open(run.path("reports", "rho.csv"), "w", encoding="utf-8") as fh:
        for k, v in run.header.items():
            fh.write("# %s = %s\n" % (k, v))
        fh.write("# crossing_radius = %.17g\n" % run.rf.crossing_radius)
        fh.write("r,rho\n")
        for a, b in zip(r, rho):
            fh.write("%.17g,%.17g\n" % (a, b))


def stage_kernel(run, radius=None):
    R = run.s["window"] if radius is None else radius
    k = run.kernel(R)
    save_basis(run.path("basis.csv"), k.basis, extra=dict(run.header, window_radius=R,
                                                          diag_error_bound=k.diag_error_bound))
    an.write_json(run.path("reports", "kernel.json"),
                  {"rank": k.rank, "window_radius": R, "diag_error_bound": k.diag_error_bound},
                  run.header)
    print("rank %d on |z| <= %g (diagonal tail bound %.3g)" % (k.rank, R, k.diag_error_bound))
    return k


def stage_sweep(run):
    part = run.partition()
    k = run.kernel(part.radius)
    recs = sweep_cells(k, part.cells(), workers=run.s["workers"])
    write_cells_csv(run.path("cells.csv"), recs, dict(run.header, partition=_part_desc(part)))
    tables = {"determinantal": recs, "poisson": an.poisson_table(recs)}
    for name, tab in tables.items():
        try:
            rep = an.scaling_regression(tab, 6.0 if name == "determinantal" else 4.0)
        except FockError as exc:
            run.skipped.append({"stage": "scaling_%s" % name, "reason": str(exc)})
            continue
        an.write_json(run.path("reports", "scaling_%s.json" % name), rep, run.header)
        an.write_scatter(run.path("scatter", "scaling_%s.csv" % name), rep, run.header)
    if run.check:
        _check_sweep(run, recs)
    print("%d cells swept" % len(recs))
    return recs


def _part_desc(part):
    return "%s nmax=%d scale=%g sectors=%d*n" % (part.kind, part.nmax, part.scale,
                                                 part.sector_factor)


def _check_sweep(run, recs):
    wit = all(r.lambda1_lb * r.lambda2_lb <= r.p_geq2_exact * (1 + 1e-9) + 1e-300 for r in recs)
    run.record_check("witness_product", wit)
    small = [r for r in recs if r.trace <= 0.2]
    sec = all(abs(r.p_geq2_exact - r.p_geq2_second_order) <= 2 * r.trace ** 3 for r in small)
    run.record_check("second_order", sec, "%d cells with trace <= 0.2" % len(small))


def _seeds(run):
    return [(run.s["seed"], i) for i in range(run.s["samples"])]


def _map(run, fn, items):
    if run.s["workers"] > 1:
        with ThreadPoolExecutor(run.s["workers"]) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _write_samples(run, tag, configs):
    for i, c in enumerate(configs):
        c.to_csv(run.path("samples", "%s_%05d.csv" % (tag, i)), dict(run.header, stream=i))


def stage_sample(run, process):
    W = Window.disk(run.s["window"])
    if process == "dpp":
        k = run.kernel(W.r_out)
        cfgs = _map(run, lambda sd: sample_dpp(k, W, sd[0], stream=sd[1]), _seeds(run))
    else:
        cfgs = _map(run, lambda sd: sample_poisson(run.rf, W, sd[0], stream=sd[1]), _seeds(run))
    _write_samples(run, process, cfgs)
    counts = [len(c) for c in cfgs]
    print("%d %s samples, mean count %.4g" % (len(cfgs), process, float(np.mean(counts))))
    return cfgs


def stage_ginibre(run):
    N = run.s["rank"] or 256
    cfgs = _map(run, lambda sd: ginibre_oracle(N, sd[0], stream=sd[1]), _seeds(run))
    _write_samples(run, "ginibre", cfgs)
    print("%d Ginibre samples of size %d" % (len(cfgs), N))
    return cfgs


def _load_samples(run, tag):
    d = os.path.join(run.out, "samples")
    names = sorted(f for f in os.listdir(d) if f.startswith(tag + "_") and f.endswith(".csv")) \
        if os.path.isdir(d) else []
    if not names:
        raise ConfigError("no %s samples in %s; run sample-%s first" % (tag, d, tag))
    return [PointConfiguration.from_csv(os.path.join(d, f)) for f in names]


def stage_analyze(run, configs=None):
    proc = run.s["process"]
    cfgs = configs if configs is not None else _load_samples(run, proc)
    W = cfgs[0].window
    kernel = run.kernel(W.r_out) if run.s["metric"] == "dk" or proc == "dpp" else None
    reps = [an.min_gap(c, run.s["metric"], kernel if run.s["metric"] == "dk" else None)
            for c in cfgs]
    key = "min_gap_euclidean" if run.s["metric"] == "euclid" else "min_gap_dK"
    gaps = np.array([getattr(r, key) for r in reps])
    summary = {"process": proc, "metric": run.s["metric"], "n_samples": len(cfgs),
               "median_min_gap": float(np.median(gaps)), "min_gaps": gaps.tolist()}
    an.write_json(run.path("reports", "separation_%s.json" % proc), summary, run.header)
    radii = [r for r in (0.5, 1.0, 2.0, 4.0) if r < 0.5 * W.r_out]
    if radii:
        dens = [an.upper_density(c, radii) for c in cfgs]
        an.write_json(run.path("reports", "density_%s.json" % proc),
                      {"radii": radii, "mean_sup_counts_over_area":
                       np.mean([d.sup_counts_over_area for d in dens], axis=0).tolist()},
                      run.header)
    else:
        run.skipped.append({"stage": "density", "reason": "window too small"})
    for g in (6.0, 4.0):
        n_max = max(10, int(run.s["nmax"]))
        an.write_json(run.path("reports", "borel_cantelli_gamma%d.json" % g),
                      an.borel_cantelli_sum(run.rf, g, n_max), run.header)
    if proc == "dpp" and run.check:
        _check_first_intensity(run, cfgs, kernel)
    print("median min gap (%s): %.6g over %d samples"
          % (run.s["metric"], summary["median_min_gap"], len(cfgs)))


def _check_first_intensity(run, cfgs, kernel):
    from .spectra import restriction_matrix, spectrum
    R = cfgs[0].window.r_out
    cells = [Disk(0j, 0.25 * R), Disk(0.5 * R, 0.2 * R)]
    X = an.cell_count_matrix(cfgs, cells)
    ok = True
    for j, c in enumerate(cells):
        tr = spectrum(restriction_matrix(kernel, c)).trace
        m, se = X[:, j].mean(), X[:, j].std(ddof=1) / math.sqrt(len(cfgs))
        ok &= abs(m - tr) <= 3 * se + 1e-12
    run.record_check("first_intensity", ok)


def stage_full(run):
    stages = [("classify", stage_classify), ("kernel-build", stage_kernel),
              ("spectra-sweep", stage_sweep)]
    for name, fn in stages:
        _stage(run, name, fn)
    run.s = dict(run.s, process="dpp")
    dpp = _stage(run, "sample-dpp", lambda r: stage_sample(r, "dpp"))
    _stage(run, "analyze-dpp", lambda r: stage_analyze(r, dpp))
    run.s = dict(run.s, process="poisson")
    poi = _stage(run, "sample-poisson", lambda r: stage_sample(r, "poisson"))
    _stage(run, "analyze-poisson", lambda r: stage_analyze(r, poi))


def _stage(run, name, fn):
    run.current = name
    res = fn(run)
    run.stages.append({"name": name, "status": "done"})
    return res


DISPATCH = {
    "classify": stage_classify,
    "rho": stage_rho,
    "kernel-build": stage_kernel,
    "spectra-sweep": stage_sweep,
    "sample-dpp": lambda r: stage_sample(r, "dpp"),
    "sample-poisson": lambda r: stage_sample(r, "poisson"),
    "ginibre": stage_ginibre,
    "analyze": stage_analyze,
}


# --- entry point ------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fockdpp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [run] section")
    common.add_argument("--alpha", type=float, help="exponent of the weight |z|^alpha")
    common.add_argument("--weight-table", dest="weight_table", help="CSV table r,phi")
    common.add_argument("--window", type=float, help="window radius")
    g = common.add_mutually_exclusive_group()
    g.add_argument("--rank", type=int, help="kernel rank (Ginibre matrix size)")
    g.add_argument("--tol", type=float, help="diagonal truncation tolerance")
    common.add_argument("--rank-cap", dest="rank_cap", type=int, help="largest admissible rank")
    common.add_argument("--nmax", type=int, help="number of cell annuli")
    common.add_argument("--scale", type=float, help="ring width of the cell grid")
    common.add_argument("--samples", type=int, help="number of samples")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--metric", choices=("euclid", "dk"))
    common.add_argument("--process", choices=("dpp", "poisson"))
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("--check", action="store_true", help="exit 4 if a built-in check fails")
    common.add_argument("-v", "--verbose", action="store_true")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    run = None
    try:
        settings = resolve_settings(args)
        run = Run(settings, args.command, args.check)
        if args.command == "full-run":
            stage_full(run)
        else:
            _stage(run, args.command, DISPATCH[args.command])
    except (ConfigError, ValueError) as exc:
        return _fail(run, exc, 2)
    except (NumericError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(run, exc, 3)
    run.manifest(True)
    if args.check and not all(c["passed"] for c in run.checks.values()):
        failed = [k for k, c in run.checks.items() if not c["passed"]]
        print("check failed: %s" % ", ".join(failed), file=sys.stderr)
        return 4
    return 0


def _fail(run, exc, code):
    stage = getattr(run, "current", None) if run is not None else None
    print("error%s: %s" % (" in stage %s" % stage if stage else "", exc), file=sys.stderr)
    if run is not None:
        run.manifest(False, stage, "%s: %s" % (type(exc).__name__, exc))
    return code


if __name__ == "__main__":
    sys.exit(main())
