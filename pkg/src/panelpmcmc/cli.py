"""Command-line driver.

Example::

    panelpmcmc --sim probit-sec3.6 --sampler pmwg --iters 1100 --burnin 100 --out run1

Exit status is 0 on success, 2 for a configuration error, 3 for a data error
and 4 for a numerical failure. On any failure the files written by the run
are removed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .analysis import ChainOutput, ape, iact_mean, summarize, summarize_series, tnv
from .dataio import ingest_csv, write_csv
from .models.copulas import kendall_tau, tail_dependence
from .models.data import DataError, Family
from .models.likelihood import NumericalError, PanelModel
from .models.priors import Priors
from .numeric import DomainError
from .samplers.da_gibbs import DAError
from .samplers.hmc import AdaptationError, HmcError
from .samplers.runner import SAMPLERS, SamplerFailure, default_hmc_config, run_chain
from .simgen import PRESETS, generate, preset

log = logging.getLogger("panelpmcmc")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    family: str = "probit"
    sampler: str = "pmwg"
    particles: int = 100
    iters: int = 11000
    burnin: int = 1000
    seed: int = 0
    chains: int = 1
    data: str | None = None
    sim: str | None = None
    sim_P: int = 1000
    sim_T: int = 4
    sim_seed: int | None = None
    v0: float = 6.0
    R0_scale: float = 400.0
    beta_var: float = 100.0
    hmc: dict = field(default_factory=dict)
    n_inner: int = 10
    out: str = "panelpmcmc_out"
    ape: list = field(default_factory=list)
    ape_thin: int | None = None
    ape_quad_nodes: int = 40
    workers: int = 1

    def validate(self) -> None:
        try:
            Family.parse(self.family)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {', '.join(SAMPLERS)}")
        if self.iters < 1 or not 0 <= self.burnin < self.iters:
            raise ConfigError("need 0 <= burnin < iters")
        if self.sampler == "pmwg" and self.particles < 2:
            raise ConfigError("pmwg needs at least 2 particles")
        if self.sampler == "pmmh" and self.particles < 1:
            raise ConfigError("pmmh needs at least 1 particle")
        if self.sampler == "da-gibbs" and Family.parse(self.family) is not Family.BIV_PROBIT:
            raise ConfigError("da-gibbs is available for the probit family only")
        if self.chains < 1 or self.n_inner < 1 or self.workers < 1:
            raise ConfigError("chains, n_inner and workers must be positive")
        if (self.data is None) == (self.sim is None):
            raise ConfigError("give exactly one of a data file and a simulation preset")
        if self.sim is not None and self.sim.lower() not in [p.lower() for p in PRESETS]:
            raise ConfigError(f"unknown preset {self.sim!r}; choose from {', '.join(PRESETS)}")
        if not (self.v0 > 1 and self.R0_scale > 0 and self.beta_var > 0):
            raise ConfigError("prior hyperparameters must be positive (v0 > 1)")
        if self.ape_thin is not None and self.ape_thin < 1:
            raise ConfigError("ape_thin must be positive")
        unknown = set(self.hmc) - {"target_accept", "max_depth", "dense_mass", "adapt_iters",
                                   "pilot_iters", "step_size", "algorithm", "n_leapfrog"}
        if unknown:
            raise ConfigError(f"unknown hmc setting(s): {', '.join(sorted(unknown))}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panelpmcmc",
                                description="Particle MCMC for bivariate panel models.")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--sim", help=f"simulation preset ({' | '.join(PRESETS)})")
    p.add_argument("--data", help="panel CSV file")
    p.add_argument("--family", help="probit, gaussian, clayton or gumbel")
    p.add_argument("--sampler", help=" | ".join(SAMPLERS))
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--particles", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--n-inner", dest="n_inner", type=int,
                   help="independence MH refreshes per sweep (mcmc-mh)")
    p.add_argument("--sim-P", dest="sim_P", type=int, help="individuals in the simulated panel")
    p.add_argument("--sim-T", dest="sim_T", type=int, help="periods in the simulated panel")
    p.add_argument("--out", help="output directory")
    p.add_argument("--ape", nargs="+", metavar="COVARIATE",
                   help="binary covariates for average partial effects")
    p.add_argument("--workers", type=int, help="threads for the per-individual kernels")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def load_config(args) -> RunConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    if isinstance(raw.get("sim"), dict):
        sim = raw.pop("sim")
        raw["sim"] = sim.get("preset")
        for k in ("P", "T", "seed"):
            if k in sim:
                raw[f"sim_{k}"] = sim[k]
    if isinstance(raw.get("priors"), dict):
        raw.update(raw.pop("priors"))
    names = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for k in names:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    if args.sim is not None and args.config and "data" in raw and args.data is None:
        raw["data"] = None
    if args.data is not None and args.config and "sim" in raw and args.sim is None:
        raw["sim"] = None
    try:
        cfg = RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def _sha1(path) -> str:
    h = hashlib.sha1()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_draws(chain: ChainOutput, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(chain.param_names) + "\n")
        for row in chain.draws:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(type(obj))


def _clean(obj):
    """Replace non-finite floats so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dependence_summaries(chains: list[ChainOutput], family: Family) -> dict:
    """Kendall tau and tail-dependence posteriors derived draw by draw."""
    name = "gaussian" if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN) else family.value
    dep = np.concatenate([c.column(family.dep_name) for c in chains])
    tau = np.array([kendall_tau(name, d) for d in dep])
    tails = np.array([tail_dependence(name, d) for d in dep])
    return {"kendall_tau": summarize_series(tau).to_dict(),
            "lower_tail": summarize_series(tails[:, 0]).to_dict(),
            "upper_tail": summarize_series(tails[:, 1]).to_dict()}


def _set_workers(n: int) -> int:
    import numba
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def execute(cfg: RunConfig, created: list) -> dict:
    """Run the configured chains and write all outputs. Returns the summary."""
    family = Family.parse(cfg.family)
    workers = _set_workers(cfg.workers)
    out = cfg.out
    data_path = os.path.join(out, "data.csv")
    if cfg.sim is not None:
        design = preset(cfg.sim, P=cfg.sim_P, T=cfg.sim_T,
                        seed=cfg.seed if cfg.sim_seed is None else cfg.sim_seed, family=family)
        data = generate(design)[0]
    else:
        data = ingest_csv(cfg.data)
    write_csv(data, data_path)
    created.append(data_path)

    priors = Priors(v0=cfg.v0, R0=cfg.R0_scale * np.eye(2), beta_var=cfg.beta_var)
    model = PanelModel(family, data, priors)
    hmc = default_hmc_config(cfg.burnin, **cfg.hmc)

    chains, chain_reports, files = [], [], {"data.csv": None}
    for k in range(cfg.chains):
        log.info("chain %d: %s, %d iterations", k, cfg.sampler, cfg.iters)
        ch = run_chain(model, cfg.sampler, cfg.iters, cfg.burnin, cfg.particles,
                       seed=cfg.seed + k, chain=k, hmc=hmc, n_inner=cfg.n_inner)
        path = os.path.join(out, f"draws_chain{k}.csv")
        _write_draws(ch, path)
        created.append(path)
        files[os.path.basename(path)] = None
        chains.append(ch)
        rep = {"chain": k, "seed": cfg.seed + k, "wall_time": ch.wall_time,
               "accept_rates": ch.accept_rates, "diagnostics": ch.diagnostics}
        if ch.M >= 10:
            im = iact_mean(ch.draws)
            rep["iact_mean"] = im
            rep["tnv"] = tnv(im, ch.wall_time) if ch.wall_time > 0 else None
        chain_reports.append(rep)

    pooled = np.concatenate([c.draws for c in chains])
    names = chains[0].param_names
    params = {}
    for j, n in enumerate(names):
        s = summarize_series(pooled[:, j]).to_dict()
        per_chain = [summarize(c, min_draws=1)[n].iact if c.M >= 10 else float("nan")
                     for c in chains]
        s["iact"] = float(np.mean(per_chain))
        if not s["ci_brackets_mean"]:
            log.warning("95%% interval of %s does not bracket its mean", n)
        params[n] = s

    summary = {
        "version": __version__, "family": family.value, "sampler": cfg.sampler,
        "param_names": names, "n_draws": int(pooled.shape[0]), "parameters": params,
        "dependence": dependence_summaries(chains, family), "chains": chain_reports,
        "iact_mean": float(np.mean([r.get("iact_mean", np.nan) for r in chain_reports])),
        "wall_time": float(sum(c.wall_time for c in chains)), "workers": workers,
    }
    summary["tnv"] = (summary["iact_mean"] * summary["wall_time"]
                      if summary["wall_time"] > 0 else None)
    if cfg.ape:
        merged = ChainOutput(pooled, names, family=family, k1=model.spec.k1)
        copula = family in (Family.MIXED_CLAYTON, Family.MIXED_GUMBEL)
        thin = cfg.ape_thin or (max(1, merged.M // 200) if copula else 1)
        summary["ape"] = {}
        for cov in cfg.ape:
            try:
                s, vals = ape(merged, model, data, cov, thin=thin, n_quad=cfg.ape_quad_nodes)
            except ValueError as exc:
                raise ConfigError(f"APE for {cov!r}: {exc}") from None
            entry = s.to_dict() if s is not None else {"mean": float(np.mean(vals))}
            entry.update(n_draws=int(vals.size), thin=thin,
                         method="gauss-hermite quadrature over random effects" if copula
                         else "closed-form bivariate normal")
            summary["ape"][cov] = entry

    summary_path = os.path.join(out, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, default=_json_default)
    created.append(summary_path)
    files["summary.json"] = None

    manifest = {"version": __version__, "config": cfg.to_dict(), "seed": cfg.seed,
                "chain_seeds": [cfg.seed + k for k in range(cfg.chains)],
                "files": {name: _sha1(os.path.join(out, name)) for name in files},
                "created": time.strftime("%Y-%m-%dT%H:%M:%S")}
    manifest_path = os.path.join(out, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    created.append(manifest_path)
    return summary


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, "config"
    if isinstance(exc, DataError):
        return EXIT_DATA, "data"
    if isinstance(exc, (SamplerFailure, NumericalError, HmcError, AdaptationError, DAError,
                        DomainError, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC, "numerical"
    if isinstance(exc, OSError):
        return EXIT_CONFIG, "i/o"
    return EXIT_NUMERIC, f"unexpected {type(exc).__name__}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    made_dir = not os.path.exists(cfg.out)
    created: list[str] = []
    try:
        os.makedirs(cfg.out, exist_ok=True)
        execute(cfg, created)
        return EXIT_OK
    except Exception as exc:  # every failure must clean up before exiting
        code, kind = _classify(exc)
        message = str(exc)
    for path in created:
        try:
            os.remove(path)
        except OSError:
            pass
    if made_dir:
        shutil.rmtree(cfg.out, ignore_errors=True)
    print(f"{kind} error: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
