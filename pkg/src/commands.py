"""Batch commands: check a model, run MCMC, MCEM or importance sampling into files."""

import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .datafile import load_values
from .definition import ModelDefinition, build_model_definition
from .diagnostics import summarize
from .errors import ConfigError
from .importance import ImportanceSampler, sample_prior
from .mcem import MCEM, McemControl
from .mcmc import MCMC, McmcConfiguration
from .model import Model
from .parser import parse_model
from .samplers import SamplerControl

logger = logging.getLogger(__name__)

SAMPLES_FILE = "samples.csv"
REPORT_FILE = "run_report.json"
STRUCTURE_FILE = "structure.json"
ESTIMATES_FILE = "estimates.csv"
TRACE_FILE = "mcem_trace.csv"
IMPORTANCE_FILE = "importance_estimate.json"


@dataclass
class McmcSettings:
    niter: int = 10000
    burnin: int = 1000
    thin: int = 1
    monitors: Optional[List[str]] = None
    control: Dict[str, Any] = field(default_factory=dict)
    remove_samplers: List[str] = field(default_factory=list)
    add_samplers: List[Dict[str, Any]] = field(default_factory=list)
    max_lag: int = 50


@dataclass
class McemSettings:
    tol: float = 0.005
    consecutive: int = 3
    m_initial: int = 1000
    growth: float = 1.5
    m_max: int = 25000
    burnin_fraction: float = 0.1
    max_iter: int = 50
    maxfev: int = 500
    latent_nodes: Optional[List[str]] = None
    param_nodes: Optional[List[str]] = None

    def control(self) -> McemControl:
        return McemControl(
            tol=self.tol,
            consecutive=self.consecutive,
            m_initial=self.m_initial,
            growth=self.growth,
            m_max=self.m_max,
            burnin_fraction=self.burnin_fraction,
            max_iter=self.max_iter,
            maxfev=self.maxfev,
        )


@dataclass
class ImportanceSettings:
    sample_nodes: List[str] = field(default_factory=list)
    m: int = 10000
    proposal: str = "prior"


def _section(cls, values: Optional[Dict[str, Any]], source: str):
    values = dict(values or {})
    unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} setting(s) {sorted(unknown)}", source)
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(str(exc), source) from exc


@dataclass
class RunConfig:
    """Everything one command needs; JSON keys match the field names.

    The importance-sampling block is read from the key ``"is"``. Relative
    paths in a config file are resolved against the file's directory.
    """

    model: Optional[str] = None
    constants: Optional[str] = None
    data: Optional[str] = None
    inits: Optional[str] = None
    seed: Optional[int] = None
    out: str = "."
    chains: int = 1
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    mcem: McemSettings = field(default_factory=McemSettings)
    importance: ImportanceSettings = field(default_factory=ImportanceSettings)

    @classmethod
    def from_dict(cls, document: Dict[str, Any], source: str = "<config>", base: Optional[Path] = None) -> "RunConfig":
        if not isinstance(document, dict):
            raise ConfigError("expected a JSON object", source)
        document = dict(document)
        sections = {
            "mcmc": _section(McmcSettings, document.pop("mcmc", None), source),
            "mcem": _section(McemSettings, document.pop("mcem", None), source),
            "importance": _section(ImportanceSettings, document.pop("is", None), source),
        }
        config = _section(cls, document, source)
        config = dataclasses.replace(config, **sections)
        if base is not None:
            for name in ("model", "constants", "data", "inits", "out"):
                value = getattr(config, name)
                if value is not None and not Path(value).is_absolute():
                    setattr(config, name, str(base / value))
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config ({exc.strerror})", str(path)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", str(path)) from exc
        return cls.from_dict(document, str(path), base=path.parent)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Copy with every non-None override applied."""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def read_model_text(path: Optional[str]) -> str:
    if not path:
        raise ConfigError("no model file given")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read model ({exc.strerror})", str(path)) from exc


def load_definition(model_path: Optional[str], constants_path: Optional[str]) -> ModelDefinition:
    ast = parse_model(read_model_text(model_path))
    return build_model_definition(ast, load_values(constants_path))


def load_model(config: RunConfig, seed: Optional[int] = None) -> Model:
    definition = load_definition(config.model, config.constants)
    return Model(
        definition,
        data=load_values(config.data),
        inits=load_values(config.inits),
        seed=config.seed if seed is None else seed,
    )


def _write_json(path: Path, document: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(document, indent=2, default=float) + "\n", encoding="utf-8")
    return path


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(
    model_path: str,
    constants_path: Optional[str] = None,
    data_path: Optional[str] = None,
    out: Optional[str] = None,
    inits_path: Optional[str] = None,
) -> Dict[str, Any]:
    """Structure report: node classes, topological order and lifted nodes.

    With a data file the model is also instantiated, so the data are checked
    against the graph; inits avoid initializing every node by simulation.
    """
    definition = load_definition(model_path, constants_path)
    data_nodes = frozenset()
    if data_path:
        data_nodes = Model(
            definition, data=load_values(data_path), inits=load_values(inits_path), seed=0
        ).data_nodes

    def names(filters):
        return [node.name for node in definition.classify_nodes(filters, data_nodes=data_nodes)]

    report = {
        "nodes": len(definition.nodes),
        "counts": {
            "top": len(names("top")),
            "latent": len(names("latent")),
            "end": len(names("end")),
            "data": len(data_nodes),
            "stochastic": len(names("stochastic")),
            "deterministic": len(names("deterministic")),
            "lifted": len(names("lifted")),
        },
        "top": names("top"),
        "latent": names("latent"),
        "end": names("end"),
        "topological_order": [node.name for node in definition.topological_order()],
        "lifted": [definition.describe(node) for node in definition.lifted_nodes()],
    }
    if out:
        directory = Path(out)
        directory.mkdir(parents=True, exist_ok=True)
        _write_json(directory / STRUCTURE_FILE, report)
    return report


def format_check_report(report: Dict[str, Any]) -> str:
    counts = ", ".join(f"{name}={count}" for name, count in report["counts"].items())
    lines = [
        f"{report['nodes']} nodes ({counts})",
        f"top: {', '.join(report['top']) or '-'}",
        f"latent: {', '.join(report['latent']) or '-'}",
        f"end: {', '.join(report['end']) or '-'}",
        "topological order:",
        *(f"  {name}" for name in report["topological_order"]),
    ]
    if report["lifted"]:
        lines.append("lifted nodes:")
        lines.extend(f"  {text}" for text in report["lifted"])
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# mcmc
# ---------------------------------------------------------------------------


def configure_from_settings(model: Model, settings: McmcSettings) -> McmcConfiguration:
    control = SamplerControl.from_dict(settings.control)
    config = McmcConfiguration(model, monitors=settings.monitors, control=control)
    for target in settings.remove_samplers:
        config.remove_samplers(target)
    for entry in settings.add_samplers:
        if "kind" not in entry or "targets" not in entry:
            raise ConfigError(f"sampler override {entry!r} needs 'kind' and 'targets'")
        config.add_sampler(entry["kind"], entry["targets"], entry.get("control"))
    return config


def _run_chain(config: RunConfig, seed: Optional[int], out: Path) -> Dict[str, Any]:
    model = load_model(config, seed=seed)
    mcmc = MCMC(configure_from_settings(model, config.mcmc))
    settings = config.mcmc
    samples = mcmc.run(settings.niter, thin=settings.thin, burnin=settings.burnin)
    out.mkdir(parents=True, exist_ok=True)
    samples.to_csv(out / SAMPLES_FILE)
    report = mcmc.report()
    report["seed"] = seed
    if len(samples):
        summary = summarize(samples, mcmc.wall_seconds, max_lag=settings.max_lag)
        summary.write(out)
        report["ess_per_second"] = {chain.name: chain.ess_per_second for chain in summary.chains}
    _write_json(out / REPORT_FILE, report)
    return report


def _chain_seeds(seed: Optional[int], chains: int) -> List[Optional[int]]:
    if chains == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(chains)
    return [int(child.generate_state(1)[0]) for child in children]


def cmd_mcmc(config: RunConfig) -> Dict[str, Any]:
    """Run MCMC and write samples, summaries and the run report."""
    if config.chains < 1:
        raise ConfigError(f"chains must be at least 1, got {config.chains}")
    out = _output_dir(config)
    seeds = _chain_seeds(config.seed, config.chains)
    if config.chains == 1:
        return _run_chain(config, seeds[0], out)
    directories = [out / f"chain_{k + 1}" for k in range(config.chains)]
    with ProcessPoolExecutor(max_workers=config.chains) as pool:
        reports = list(pool.map(_run_chain, [config] * config.chains, seeds, directories))
    combined = {"chains": [dict(report, directory=str(d)) for report, d in zip(reports, directories)]}
    _write_json(out / REPORT_FILE, combined)
    return combined


# ---------------------------------------------------------------------------
# mcem
# ---------------------------------------------------------------------------


def cmd_mcem(config: RunConfig) -> Dict[str, Any]:
    """Run MCEM and write the estimates, the iteration trace and a report."""
    out = _output_dir(config)
    model = load_model(config)
    settings = config.mcem
    mcem = MCEM(model, latent_nodes=settings.latent_nodes, param_nodes=settings.param_nodes, control=settings.control())
    started = time.perf_counter()
    estimates = mcem.run()
    wall_seconds = time.perf_counter() - started
    pd.DataFrame({"name": list(estimates), "value": list(estimates.values())}).to_csv(
        out / ESTIMATES_FILE, index=False, float_format="%.17g"
    )
    pd.DataFrame(mcem.trace).to_csv(out / TRACE_FILE, index=False)
    report = {
        "estimates": estimates,
        "converged": mcem.converged,
        "iterations": len(mcem.trace),
        "latent_nodes": [node.name for node in mcem.latent_nodes],
        "param_nodes": [node.name for node in mcem.param_nodes],
        "wall_seconds": wall_seconds,
        "seed": config.seed,
    }
    _write_json(out / REPORT_FILE, report)
    return report


# ---------------------------------------------------------------------------
# importance sampling
# ---------------------------------------------------------------------------


def cmd_importance_sample(config: RunConfig) -> Dict[str, Any]:
    """Importance-sampling estimate with the prior of the sample nodes as proposal."""
    settings = config.importance
    if not settings.sample_nodes:
        raise ConfigError("importance sampling needs at least one sample node")
    if settings.proposal != "prior":
        raise ConfigError(f"unsupported proposal '{settings.proposal}'; only 'prior' is available")
    out = _output_dir(config)
    model = load_model(config)
    started = time.perf_counter()
    draws, simulated = sample_prior(model, settings.sample_nodes, settings.m)
    sampler = ImportanceSampler(model, settings.sample_nodes)
    estimate = sampler.run(draws, simulated)
    result = {
        "estimate": estimate,
        "log_estimate": sampler.log_estimate(),
        "standard_error": sampler.standard_error(),
        "m": settings.m,
        "sample_nodes": [node.name for node in sampler.sample_nodes],
        "nan_rows": sampler.nan_rows,
        "wall_seconds": time.perf_counter() - started,
        "seed": config.seed,
    }
    _write_json(out / IMPORTANCE_FILE, result)
    return result


COMMANDS = {
    "mcmc": cmd_mcmc,
    "mcem": cmd_mcem,
    "is": cmd_importance_sample,
}
