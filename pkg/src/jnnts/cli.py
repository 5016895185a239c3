"""Command-line entry point: ``jnnts simulate|fit|tune|evaluate|diagnose``.

Every command reads a JSON config (unknown keys are rejected), writes its
artifacts under ``--out`` and embeds the resolved config in each JSON
artifact.  On failure the artifacts created so far are removed and the
process exits with the code of the error class.
"""

import argparse
import copy
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .estimator import JNNTsRegressor
from .exceptions import ConfigurationError, ConvergenceError, InputError, JNNTsError
from .inference import DEFAULT_MONITORED, SelectionSummary, gelman_rubin
from .sampler import HyperPriors, MhTuning
from .simulation import (DEFAULT_CANDIDATE_R, GroundTruth, ScenarioSpec, default_spec,
                         generate_scenario, score, tune_rank)

log = logging.getLogger("jnnts")

COMMANDS = ("simulate", "fit", "tune", "evaluate", "diagnose")

DEFAULTS = {
    "command": None,
    "data": None,
    "train": None,
    "validation": None,
    "test": None,
    "truth": None,
    "summary": None,
    "fit_dir": None,
    "chain_files": None,
    "model": {"n_components": 2, "kernel": "squared-exponential", "pair_correlation": 0.2,
              "pairs": [], "coord_scale": 1.0, "ablation": "full", "delta": None},
    "candidate_R": list(DEFAULT_CANDIDATE_R),
    "hyperpriors": asdict(HyperPriors()),
    "tuning": asdict(MhTuning()),
    "chains": 1,
    "n_iter": 10_000,
    "n_burn": 5_000,
    "seed": 0,
    "cutoff": 0.5,
    "scenario": {"scenario": "S1-coupled"},
    "z_layout": "stacked",
    "gr_threshold": 1.1,
    "monitored": list(DEFAULT_MONITORED),
}
_NESTED = ("model", "hyperpriors", "tuning")


def resolve_config(raw, command, seed=None):
    """Merge ``raw`` over the defaults, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{key} must be an object")
            bad = set(value) - set(DEFAULTS[key])
            if bad:
                raise ConfigurationError(f"unknown keys in {key}: {sorted(bad)}")
            cfg[key].update(value)
        else:
            cfg[key] = value
    if cfg["command"] is not None and cfg["command"] != command:
        raise ConfigurationError(f"config is for {cfg['command']!r}, not {command!r}")
    cfg["command"] = command
    if seed is not None:
        cfg["seed"] = seed
    _check_run_fields(cfg)
    return cfg


def _check_run_fields(cfg):
    for key in ("chains", "n_iter", "n_burn", "seed"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ConfigurationError(f"{key} must be an integer")
    if cfg["chains"] < 1:
        raise ConfigurationError("chains must be at least 1")
    if cfg["n_iter"] < 1 or not 0 <= cfg["n_burn"] < cfg["n_iter"]:
        raise ConfigurationError("need n_iter >= 1 and 0 <= n_burn < n_iter")
    if cfg["z_layout"] not in io.Z_LAYOUTS:
        raise ConfigurationError(f"z_layout must be one of {io.Z_LAYOUTS}")
    cands = cfg["candidate_R"]
    if not isinstance(cands, list) or not cands or \
            not all(isinstance(r, int) and r >= 1 for r in cands):
        raise ConfigurationError("candidate_R must be a non-empty list of positive integers")
    try:
        HyperPriors(**cfg["hyperpriors"])
        MhTuning(**cfg["tuning"])
        _estimator(cfg).model_config()
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _estimator(cfg, **overrides):
    m = cfg["model"]
    params = dict(n_components=m["n_components"], kernel=m["kernel"],
                  pair_correlation=m["pair_correlation"],
                  pairs=tuple(tuple(p) for p in m["pairs"]), coord_scale=m["coord_scale"],
                  ablation=m["ablation"], delta=m["delta"],
                  hyperpriors=HyperPriors(**cfg["hyperpriors"]),
                  tuning=MhTuning(**cfg["tuning"]), n_iter=cfg["n_iter"],
                  n_burn=cfg["n_burn"], n_chains=cfg["chains"], random_state=cfg["seed"],
                  cutoff=cfg["cutoff"])
    params.update(overrides)
    return JNNTsRegressor(**params)


def _need(cfg, key):
    if cfg[key] is None:
        raise ConfigurationError(f"config key {key!r} is required for {cfg['command']}")
    return cfg[key]


class Artifacts:
    """Tracks files and directories created by a command so failures can clean up."""

    def __init__(self, root):
        self.root = Path(root)
        self.created = []
        self._mkdir(self.root)

    def _mkdir(self, path):
        missing = []
        p = Path(path)
        while not p.exists():
            missing.append(p)
            p = p.parent
        for d in reversed(missing):
            d.mkdir()
            self.created.append(d)

    def path(self, *parts):
        p = self.root.joinpath(*parts)
        self._mkdir(p.parent)
        if not p.exists():
            self.created.append(p)
        return p

    def json(self, name, obj, cfg):
        return io.write_json(self.path(name), {**obj, "config": cfg})

    def dataset(self, name, dataset, cfg):
        d = self.root / name
        self._mkdir(d)
        for f in ("y.csv", "W.csv", "X.csv", "Z.csv", "coords.csv", "manifest.json"):
            self.path(name, f)
        io.save_dataset(dataset, d, z_layout=cfg["z_layout"])
        io.write_json(d / "manifest.json", {"z_layout": cfg["z_layout"], "config": cfg})

    def cleanup(self):
        io.remove_quietly(self.created)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out):
    sc = dict(cfg["scenario"])
    name = sc.pop("scenario", "S1-coupled")
    sc["seed"] = cfg["seed"]
    try:
        spec = ScenarioSpec(scenario=name, **sc) if name == "custom" else \
            default_spec(name, **sc)
    except TypeError as exc:
        raise ConfigurationError(f"scenario: {exc}") from None
    train, validation, test, truth = generate_scenario(spec)
    out.dataset("train", train, cfg)
    if validation is not None:
        out.dataset("validation", validation, cfg)
    out.dataset("test", test, cfg)
    out.json("truth.json", truth.to_dict(), cfg)
    out.json("scenario.json", spec.to_dict(), cfg)
    log.info("simulated %s: %d train, %d validation, %d test subjects", name,
             train.n_subjects, 0 if validation is None else validation.n_subjects,
             test.n_subjects)
    return 0


def _write_fit(model, cfg, out):
    for k, chain in enumerate(model.chains_):
        path = out.path(f"chain_{k}.csv")
        out.path(f"chain_{k}.csv.json")
        io.write_chain(chain, path, config=cfg)
    summary = model.summary_
    out.json("summary.json", summary.to_dict(), cfg)
    io.write_matrix(out.path("node_mpp.csv"), summary.node_mpp[None, :], "node")
    R, P = summary.edge_mpp.shape[:2]
    io.write_matrix(out.path("edge_mpp.csv"), summary.edge_mpp.reshape(R * P, P), "node")
    io.write_matrix(out.path("union_edge_mpp.csv"), summary.union_edge_mpp, "node")
    io.write_matrix(out.path("A_hat.csv"), summary.A_hat, "node")


def _strict_check(report, cfg, strict):
    if strict and not report.converged(cfg["gr_threshold"]):
        bad = {k: v for k, v in report.gr_statistics.items()
               if not v < cfg["gr_threshold"]}
        raise ConvergenceError(f"Gelman-Rubin above {cfg['gr_threshold']}: {bad}")


def cmd_fit(cfg, out, strict=False):
    data = io.load_dataset(_need(cfg, "data"))
    model = _estimator(cfg).fit_dataset(data)
    _write_fit(model, cfg, out)
    if model.convergence_ is not None:
        out.json("convergence.json", model.convergence_.to_dict(), cfg)
        _strict_check(model.convergence_, cfg, strict)
    elif strict:
        raise ConfigurationError("--strict needs chains >= 2 for a Gelman-Rubin check")
    log.info("selected nodes %s", model.summary_.selected_nodes)
    return 0


def cmd_tune(cfg, out):
    train = io.load_dataset(_need(cfg, "train"))
    validation = io.load_dataset(_need(cfg, "validation"))
    result = tune_rank(train, validation, cfg["candidate_R"], _estimator(cfg),
                       keep_fits=False)
    out.json("tune.json", result.to_dict(), cfg)
    log.info("chosen R = %d", result.chosen_R)
    return 0


def cmd_evaluate(cfg, out):
    if cfg["summary"] is None and cfg["fit_dir"] is None:
        raise ConfigurationError("evaluate needs 'summary' or 'fit_dir'")
    summary_path = cfg["summary"] or Path(cfg["fit_dir"]) / "summary.json"
    summary = SelectionSummary.from_dict(io.read_json(summary_path))
    test = io.load_dataset(_need(cfg, "test"))
    truth = GroundTruth.from_dict(io.read_json(_need(cfg, "truth")))
    metrics = score(summary, test, truth)
    out.json("metrics.json", metrics.to_dict(), cfg)
    return 0


def cmd_diagnose(cfg, out, strict=False):
    files = cfg["chain_files"]
    if files is None:
        root = Path(_need(cfg, "fit_dir"))
        files = sorted(root.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise InputError("no chain files found")
    chains = [io.read_chain(f) for f in files]
    report = gelman_rubin(chains, cfg["monitored"])
    out.json("convergence.json", report.to_dict(), cfg)
    start = int(chains[0].meta.get("n_burn", 0))
    for name in cfg["monitored"]:
        io.write_trace(out.path(f"trace_{name}.csv"), name, chains, start=start)
    _strict_check(report, cfg, strict)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="jnnts", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--strict", action="store_true",
                        help="exit 5 when a Gelman-Rubin statistic exceeds gr_threshold")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _report(exc):
    msg = {"error": getattr(exc, "code", "error"), "message": str(exc)}
    print(json.dumps(msg), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = None
    try:
        raw = io.read_json(args.config)
        cfg = resolve_config(raw, args.command, seed=args.seed)
        out = Artifacts(args.out)
        run = {"simulate": lambda: cmd_simulate(cfg, out),
               "fit": lambda: cmd_fit(cfg, out, args.strict),
               "tune": lambda: cmd_tune(cfg, out),
               "evaluate": lambda: cmd_evaluate(cfg, out),
               "diagnose": lambda: cmd_diagnose(cfg, out, args.strict)}[args.command]
        return run()
    except ConvergenceError as exc:
        # the artifacts are complete and needed to inspect the failure; keep them
        _report(exc)
        return exc.exit_code
    except JNNTsError as exc:
        if out is not None:
            out.cleanup()
        _report(exc)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        if out is not None:
            out.cleanup()
        _report(exc)
        return 4
    except Exception:
        if out is not None:
            out.cleanup()
        raise


if __name__ == "__main__":
    sys.exit(main())
