"""Experiment configuration, orchestration, checkpoints and CSV export.

An experiment file is YAML with three optional top-level keys::

    layout:        # same grammar as environment layout files; omit for the built-in one
    experiment:    # ExperimentConfig fields (see below)
    hyperparams:   # HyperParams fields

Every run is a cell (experiment, algorithm, seed[, sweep value]).  Cells are
independent and single-threaded; with ``workers > 1`` they are fanned out to
processes and merged back in sorted cell-key order, so outputs do not depend
on the number of workers.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .channel import combined_channels
from .environment import (Layout, compute_adjacency, layout_from_dict, layout_to_dict,
                          verification_layout)
from .noma import objective_and_feasibility
from .rl.env import EnvConfig, StarNomaEnv, grid_for
from .rl.ppo import Agent, HyperParams
from .rl.train import ALGORITHMS, TrainResult, greedy_actions, train

CSV_COLUMNS = ("episode", "mean_reward", "min_rate", "sum_rate")
FLOAT_FMT = "%.9g"


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` maps field -> message."""

    def __init__(self, problems: dict):
        self.problems = dict(problems)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.problems.items()))


@dataclass(frozen=True)
class ExperimentConfig:
    layout_source: str = "fixture"      # "fixture" or "random" (seeded per episode)
    n_mus: int = 10
    n_clusters: int = 4
    n_surfaces: int = 2
    n_antennas: int = 4
    m_h: int = 5
    m_v: int = 2
    carrier_ghz: float = 6.0
    kappa: float = 3.0
    bandwidth_hz: float = 10e6
    noise_dbm_hz: float = -100.0
    p_max_dbm: float = 20.0
    r_min: float = 0.1
    per_step_fading: bool = False
    p_max_sweep_dbm: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0)
    element_sweep: tuple[int, ...] = (5, 10, 20)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    algorithms: tuple[str, ...] = ("mappo", "ppo", "a2c", "random")
    hp: HyperParams = field(default_factory=HyperParams)
    layout: Layout | None = None        # None -> built-in verification layout

    @property
    def n_elements(self) -> int:
        return self.m_h * self.m_v

    def resolved_layout(self) -> Layout:
        base = self.layout if self.layout is not None else verification_layout()
        return base.with_grid(self.m_h, self.m_v)

    def validate(self) -> "ExperimentConfig":
        p = {}
        if self.layout_source not in ("fixture", "random"):
            p["layout_source"] = f"must be 'fixture' or 'random', got {self.layout_source!r}"
        for name in ("n_mus", "n_clusters", "n_antennas", "m_h", "m_v"):
            if int(getattr(self, name)) < 1:
                p[name] = "must be a positive integer"
        if self.n_mus < self.n_clusters:
            p["n_clusters"] = f"K={self.n_clusters} exceeds U={self.n_mus}"
        if self.carrier_ghz <= 0:
            p["carrier_ghz"] = "must be positive"
        if self.kappa < 0:
            p["kappa"] = "must be non-negative"
        if self.bandwidth_hz <= 0:
            p["bandwidth_hz"] = "must be positive"
        if not self.p_max_sweep_dbm:
            p["p_max_sweep_dbm"] = "must be nonempty"
        if not self.element_sweep or any(int(m) < 1 for m in self.element_sweep):
            p["element_sweep"] = "must be a nonempty list of positive integers"
        if not self.seeds:
            p["seeds"] = "must be nonempty"
        elif len(set(self.seeds)) != len(self.seeds):
            p["seeds"] = "seeds must be distinct"
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if not self.algorithms or bad:
            p["algorithms"] = f"choose from {list(ALGORITHMS)}, got {list(self.algorithms)}"
        try:
            layout = self.resolved_layout()
            if layout.n_surfaces != self.n_surfaces:
                p["n_surfaces"] = f"layout has {layout.n_surfaces} surfaces, config says {self.n_surfaces}"
            if self.layout_source == "fixture" and layout.n_mus != self.n_mus:
                p["n_mus"] = f"fixture layout has {layout.n_mus} MUs, config says {self.n_mus}"
        except (ValueError, KeyError) as exc:
            p["layout"] = str(exc)
        if p:
            raise ConfigError(p)
        return self

    # ---- derived configs ------------------------------------------------------
    def cell(self, n_elements: int | None = None, p_max_dbm: float | None = None) -> "ExperimentConfig":
        """This config with one sweep value substituted."""
        cfg = self
        if n_elements is not None and int(n_elements) != self.n_elements:
            m_h, m_v = grid_for(int(n_elements))
            cfg = replace(cfg, m_h=m_h, m_v=m_v)
        if p_max_dbm is not None:
            cfg = replace(cfg, p_max_dbm=float(p_max_dbm))
        return cfg

    def env_config(self) -> EnvConfig:
        return EnvConfig(n_mus=self.n_mus, n_clusters=self.n_clusters, n_antennas=self.n_antennas,
                         n_elements=self.n_elements, grid=(self.m_h, self.m_v),
                         carrier_ghz=self.carrier_ghz, kappa=self.kappa,
                         bandwidth_hz=self.bandwidth_hz, noise_dbm_hz=self.noise_dbm_hz,
                         p_max_dbm=self.p_max_dbm, r_min=self.r_min,
                         layout_source=self.layout_source, per_step_fading=self.per_step_fading)

    # ---- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        exp = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("hp", "layout")}
        for key in ("p_max_sweep_dbm", "element_sweep", "seeds", "algorithms"):
            exp[key] = list(exp[key])
        doc = {"experiment": exp, "hyperparams": self.hp.to_dict()}
        if self.layout is not None:
            doc["layout"] = layout_to_dict(self.layout)
        return doc

    def semantic_hash(self) -> str:
        """Stable hash of everything that changes a run's outcome.

        Seeds and the algorithm list only select cells, so they are left out;
        each record carries its own seed and algorithm.
        """
        doc = self.to_dict()
        doc["experiment"] = {k: v for k, v in doc["experiment"].items()
                             if k not in ("seeds", "algorithms")}
        doc["layout"] = layout_to_dict(self.resolved_layout())
        blob = json.dumps(_canonical(doc), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _canonical(x):
    if isinstance(x, dict):
        return {str(k): _canonical(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_canonical(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x).hex()
    return x


_INT_FIELDS = {"n_mus", "n_clusters", "n_surfaces", "n_antennas", "m_h", "m_v"}
_FLOAT_FIELDS = {"carrier_ghz", "kappa", "bandwidth_hz", "noise_dbm_hz", "p_max_dbm", "r_min"}


def config_from_dict(doc: dict | None) -> ExperimentConfig:
    doc = doc or {}
    unknown = set(doc) - {"layout", "experiment", "hyperparams"}
    if unknown:
        raise ConfigError({k: "unknown top-level key" for k in sorted(unknown)})
    exp = dict(doc.get("experiment") or {})
    known = {f.name for f in fields(ExperimentConfig)} - {"hp", "layout"}
    problems = {k: "unknown field" for k in exp if k not in known}
    hp_doc = dict(doc.get("hyperparams") or {})
    hp_known = {f.name for f in fields(HyperParams)}
    problems.update({f"hyperparams.{k}": "unknown field" for k in hp_doc if k not in hp_known})
    if problems:
        raise ConfigError(problems)
    try:
        for k in _INT_FIELDS & exp.keys():
            exp[k] = int(exp[k])
        for k in _FLOAT_FIELDS & exp.keys():
            exp[k] = float(exp[k])
        if "p_max_sweep_dbm" in exp:
            exp["p_max_sweep_dbm"] = tuple(float(v) for v in exp["p_max_sweep_dbm"])
        if "element_sweep" in exp:
            exp["element_sweep"] = tuple(int(v) for v in exp["element_sweep"])
        if "seeds" in exp:
            exp["seeds"] = tuple(int(v) for v in exp["seeds"])
        if "algorithms" in exp:
            exp["algorithms"] = tuple(str(v) for v in exp["algorithms"])
        if "hidden" in hp_doc:
            hp_doc["hidden"] = tuple(int(v) for v in hp_doc["hidden"])
        hp = HyperParams(**hp_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError({"value": str(exc)}) from exc
    layout = None
    if doc.get("layout"):
        try:
            layout = layout_from_dict(doc["layout"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError({"layout": f"{type(exc).__name__}: {exc}"}) from exc
    return ExperimentConfig(**exp, hp=hp, layout=layout).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError({"config": str(exc)}) from exc
    except yaml.YAMLError as exc:
        raise ConfigError({"config": f"not valid YAML: {exc}"}) from exc
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError({"config": "top level must be a mapping"})
    return config_from_dict(doc)


def benchmark_config() -> ExperimentConfig:
    """The shipped desk-scale benchmark (``data/benchmark.yaml``)."""
    text = resources.files("starnoma").joinpath("data/benchmark.yaml").read_text()
    return config_from_dict(yaml.safe_load(text))


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


# ---- records ----------------------------------------------------------------------

@dataclass
class RunRecord:
    config_hash: str
    algorithm: str
    seed: int
    trace: list                       # EpisodeRecord list
    amplitudes: np.ndarray            # final-episode (L, M, 2) table of (beta_F, beta_B)
    cluster_powers: np.ndarray        # final-episode ||w_k||^2, shape (K,)
    wall_clock: float
    n_elements: int
    p_max_dbm: float
    n_mus: int
    agents: dict = field(default_factory=dict, repr=False)

    def final_mean(self, window: int = 50) -> float:
        return float(np.mean([r.mean_reward for r in self.trace[-window:]]))

    def final_throughput(self, window: int = 50) -> float:
        """Average per-MU rate over the last ``window`` episodes."""
        return float(np.mean([r.sum_rate for r in self.trace[-window:]]) / self.n_mus)

    @property
    def key(self) -> tuple:
        return (self.algorithm, self.n_elements, self.p_max_dbm, self.seed)


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def trace_rows(trace) -> list[list[str]]:
    return [[str(r.episode), _fmt(r.mean_reward), _fmt(r.min_rate), _fmt(r.sum_rate)] for r in trace]


def write_trace_csv(record: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(trace_rows(record.trace))


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _rates_match(logged: str, value: float, rtol: float = 1e-9) -> bool:
    # 9 significant digits cannot carry 1e-9 relative precision, so an exact
    # string match of the recomputed value also counts as agreement
    return _fmt(value) == logged or abs(float(logged) - value) <= rtol * max(abs(value), 1e-300)


def revalidate(rows, result: TrainResult, env: StarNomaEnv) -> list[int]:
    """Recompute each row's final-slot rates with the noma module.

    Returns the episodes whose logged min or sum rate does not match.
    """
    bad = []
    for row, snap in zip(rows, result.snapshots):
        adj = compute_adjacency(env.template.with_mus(snap.mus))
        hhat = combined_channels(snap.realization, adj, snap.state)
        ev = objective_and_feasibility(hhat, snap.w, snap.assignment, snap.state, env.params)
        if not (_rates_match(row[2], ev.min_rate) and _rates_match(row[3], ev.sum_rate)):
            bad.append(int(row[0]))
    return bad


class ValidationFailure(RuntimeError):
    pass


def run_cell(cfg: ExperimentConfig, algorithm: str, seed: int, n_elements: int | None = None,
             p_max_dbm: float | None = None) -> RunRecord:
    """Train one (algorithm, seed) cell and check its trace against the noma module."""
    cell = cfg.cell(n_elements, p_max_dbm)
    env_cfg = cell.env_config()
    res = train(algorithm, env_cfg, cell.hp, seed, keep_snapshots=True, base_layout=cell.layout)
    bad = revalidate(trace_rows(res.trace), res, StarNomaEnv(env_cfg, cell.layout))
    if bad:
        raise ValidationFailure(f"{algorithm} seed {seed}: rates of episodes {bad[:5]} do not recompute")
    last = res.snapshots[-1]
    amps = np.stack([last.state.beta_f, last.state.beta_b], axis=-1)
    powers = np.sum(np.abs(last.w) ** 2, axis=1)
    return RunRecord(cell.semantic_hash(), algorithm, seed, res.trace, amps, powers,
                     res.wall_clock, cell.n_elements, cell.p_max_dbm, cell.n_mus, agents=res.agents)


def _run_cell_args(args):
    rec = run_cell(*args)
    rec.agents = {name: agent_to_arrays(a) for name, a in rec.agents.items()}
    return rec


def with_episodes(cfg: ExperimentConfig, episodes: int | None) -> ExperimentConfig:
    return cfg if episodes is None else replace(cfg, hp=replace(cfg.hp, episodes=int(episodes)))


def run_cells(cells, workers: int = 1) -> list[RunRecord]:
    """Run cell argument tuples, sequentially or in worker processes."""
    cells = list(cells)
    if workers <= 1 or len(cells) <= 1:
        records = [run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_args, cells))
        for r in records:
            r.agents = {name: agent_from_arrays(name, arrays) for name, arrays in r.agents.items()}
    return sorted(records, key=lambda r: r.key)


def _trace_name(prefix: str, r: RunRecord) -> str:
    return f"{prefix}_{r.algorithm}_M{r.n_elements}_P{r.p_max_dbm:g}dBm_seed{r.seed}.csv"


def _write_summary(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_convergence(cfg: ExperimentConfig, out_dir=None, episodes: int | None = None,
                    workers: int = 1, save_checkpoints: bool = True) -> list[RunRecord]:
    """One record per (algorithm, seed); traces plus a summary CSV when ``out_dir`` is set."""
    cfg = with_episodes(cfg, episodes)
    cells = [(cfg, a, s) for a in cfg.algorithms for s in cfg.seeds]
    records = run_cells(cells, workers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.yaml")
        rows = []
        for r in records:
            write_trace_csv(r, out / _trace_name("converge", r))
            if save_checkpoints and r.agents:
                save_checkpoint(r.agents, out / f"{r.algorithm}_seed{r.seed}.ckpt",
                                r.config_hash, r.seed)
            rows.append([r.algorithm, r.seed, _fmt(r.final_mean()), r.config_hash,
                         _fmt(r.wall_clock)])
        _write_summary(out / "converge_summary.csv",
                       ["algorithm", "seed", "final_mean_reward", "config_hash", "wall_clock_s"], rows)
    return records


def run_element_sweep(cfg: ExperimentConfig, out_dir=None, episodes: int | None = None,
                      workers: int = 1, algorithm: str = "mappo") -> tuple[list[RunRecord], dict]:
    """Final reward per element count and seed, with the increments between counts."""
    cfg = with_episodes(cfg, episodes)
    ms = sorted(int(m) for m in cfg.element_sweep)
    cells = [(cfg, algorithm, s, m) for m in ms for s in cfg.seeds]
    records = run_cells(cells, workers)
    finals = {(r.n_elements, r.seed): r.final_mean() for r in records}
    increments = {s: [finals[(b, s)] - finals[(a, s)] for a, b in zip(ms, ms[1:])] for s in cfg.seeds}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for s in cfg.seeds:
            for i, m in enumerate(ms):
                inc = _fmt(increments[s][i - 1]) if i else ""
                rows.append([m, s, _fmt(finals[(m, s)]), inc])
        for r in records:
            write_trace_csv(r, out / _trace_name("elements", r))
        _write_summary(out / "element_sweep.csv",
                       ["n_elements", "seed", "final_mean_reward", "increment_from_previous"], rows)
    return records, increments


def run_power_sweep(cfg: ExperimentConfig, out_dir=None, episodes: int | None = None,
                    workers: int = 1) -> tuple[list[RunRecord], list[list]]:
    """Average per-MU throughput for every (power point, algorithm, seed)."""
    cfg = with_episodes(cfg, episodes)
    algs = [a for a in cfg.algorithms]
    cells = [(cfg, a, s, None, p) for p in cfg.p_max_sweep_dbm for a in algs for s in cfg.seeds]
    records = run_cells(cells, workers)
    rows = sorted([[r.p_max_dbm, r.algorithm, r.seed, r.final_throughput()] for r in records],
                  key=lambda row: (row[2], row[0], algs.index(row[1])))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in records:
            write_trace_csv(r, out / _trace_name("power", r))
        _write_summary(out / "power_sweep.csv", ["p_max_dbm", "algorithm", "seed", "avg_throughput"],
                       [[_fmt(p), a, s, _fmt(t)] for p, a, s, t in rows])
    return records, rows


# ---- checkpoints ---------------------------------------------------------------------
# Text format, one token group per line, floats as float.hex (bit-exact):
#   starnoma-checkpoint 1
#   meta <config_hash> <seed>
#   agent <name> <obs_dim> <act_dim> <hidden sizes...>
#   tensor <label> <dim0> [<dim1>]
#   <hex> <hex> ...            (one line per tensor, C order)

def agent_to_arrays(agent: Agent) -> dict:
    return {"sizes": list(agent.policy.mean_net.sizes),
            "policy": [p.copy() for p in agent.policy.mean_net.params],
            "log_std": agent.policy.log_std.copy(),
            "critic": [p.copy() for p in agent.critic.params]}


def agent_from_arrays(name: str, arrays: dict) -> Agent:
    sizes = arrays["sizes"]
    hp = HyperParams(hidden=tuple(sizes[1:-1]))
    agent = Agent(name, sizes[0], sizes[-1], hp, rng=None)
    agent.policy.mean_net.params[:] = [np.array(p) for p in arrays["policy"]]
    agent.policy.log_std[:] = arrays["log_std"]
    agent.critic.params[:] = [np.array(p) for p in arrays["critic"]]
    return agent


def save_checkpoint(agents: dict, path, config_hash: str = "-", seed: int = -1) -> None:
    lines = ["starnoma-checkpoint 1", f"meta {config_hash} {seed}"]
    for name in sorted(agents):
        a = agents[name]
        arrays = agent_to_arrays(a) if isinstance(a, Agent) else a
        sizes = arrays["sizes"]
        lines.append(f"agent {name} " + " ".join(map(str, sizes)))
        tensors = [(f"policy{i}", p) for i, p in enumerate(arrays["policy"])]
        tensors += [("log_std", arrays["log_std"])]
        tensors += [(f"critic{i}", p) for i, p in enumerate(arrays["critic"])]
        for label, t in tensors:
            t = np.asarray(t, dtype=float)
            lines.append(f"tensor {label} " + " ".join(map(str, t.shape)))
            lines.append(" ".join(float(v).hex() for v in t.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> tuple[dict, str, int]:
    """Returns (agents by name, config hash, seed)."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    if not lines or lines[0].split() != ["starnoma-checkpoint", "1"]:
        raise CheckpointError(f"{path}: not a checkpoint file")
    _, config_hash, seed = lines[1].split()
    agents, i = {}, 2
    try:
        while i < len(lines):
            head = lines[i].split()
            if head[0] != "agent":
                raise CheckpointError(f"line {i + 1}: expected an agent header")
            name, sizes = head[1], [int(v) for v in head[2:]]
            n_layers = len(sizes) - 1
            labels = ([f"policy{j}" for j in range(2 * n_layers)] + ["log_std"]
                      + [f"critic{j}" for j in range(2 * n_layers)])
            tensors = {}
            i += 1
            for label in labels:
                th = lines[i].split()
                if th[:2] != ["tensor", label]:
                    raise CheckpointError(f"line {i + 1}: expected tensor {label}")
                shape = tuple(int(v) for v in th[2:])
                vals = [float.fromhex(v) for v in lines[i + 1].split()]
                tensors[label] = np.array(vals).reshape(shape)
                i += 2
            arrays = {"sizes": sizes,
                      "policy": [tensors[f"policy{j}"] for j in range(2 * n_layers)],
                      "log_std": tensors["log_std"],
                      "critic": [tensors[f"critic{j}"] for j in range(2 * n_layers)]}
            agents[name] = agent_from_arrays(name, arrays)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc
    return agents, config_hash, int(seed)


# ---- optimal configuration report ---------------------------------------------------------

@dataclass
class OptimalReport:
    amplitudes: np.ndarray           # (draws, L, M, 2) of (beta_F, beta_B)
    cluster_powers: np.ndarray       # (draws, K)
    direct_clusters: np.ndarray      # (draws, K) bool: cluster has a directly visible member
    p_max: float

    def side_sums(self) -> np.ndarray:
        """Mean over draws of per-surface (sum beta_F, sum beta_B), shape (L, 2).

        Forward normals point out of the AP's room, so column 0 is the
        AP-opposite (transmission) side and column 1 the AP-facing side.
        """
        return self.amplitudes.sum(axis=2).mean(axis=0)

    def non_direct_power_ratio(self) -> float:
        """Mean power of clusters without a directly visible MU over the mean cluster power."""
        mask = ~self.direct_clusters
        if not mask.any():
            return float("nan")
        return float(self.cluster_powers[mask].mean() / self.cluster_powers.mean())

    def rows(self):
        """Per-element table rows: (surface, element, beta_F, beta_B) of the first draw."""
        a = self.amplitudes[0]
        return [(l, m, a[l, m, 0], a[l, m, 1]) for l in range(a.shape[0]) for m in range(a.shape[1])]


def dump_optimal_config(agents: dict, cfg: ExperimentConfig, draws: int = 20,
                        seed: int = 0) -> OptimalReport:
    """Greedy actions of trained agents on the fixture layout over seeded channel draws."""
    env_cfg = replace(cfg.env_config(), layout_source="fixture")
    env = StarNomaEnv(env_cfg, cfg.layout)
    amps, powers, direct = [], [], []
    for d in range(draws):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2, d])))
        obs = env.reset(rng, layout=cfg.resolved_layout())
        a_act, a_pas = greedy_actions(agents, env, obs)
        w, state = env.decode(a_act, a_pas)
        amps.append(np.stack([state.beta_f, state.beta_b], axis=-1))
        powers.append(np.sum(np.abs(w) ** 2, axis=1))
        direct.append(np.array([bool(env.adj.c_b_u[env.assignment.members(k)].any())
                                for k in range(env.K)]))
    return OptimalReport(np.array(amps), np.array(powers), np.array(direct), env.params.p_max)


def write_optimal_report(report: OptimalReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_summary(out / "optimal_amplitudes.csv", ["surface", "element", "beta_f", "beta_b"],
                   [[l, m, _fmt(bf), _fmt(bb)] for l, m, bf, bb in report.rows()])
    sums = report.side_sums()
    _write_summary(out / "optimal_side_sums.csv", ["surface", "sum_beta_ap_opposite", "sum_beta_ap_facing"],
                   [[l, _fmt(sums[l, 0]), _fmt(sums[l, 1])] for l in range(sums.shape[0])])
    P = report.cluster_powers.mean(axis=0)
    D = report.direct_clusters.mean(axis=0)
    _write_summary(out / "optimal_cluster_power.csv", ["cluster", "mean_power_w", "share_direct"],
                   [[k, _fmt(P[k]), _fmt(D[k])] for k in range(P.size)])


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
