"""Declarative experiment configuration: flat `key = value` text with
[section] headers, chosen for diff-friendliness. Parsing is strict and
errors carry the offending line number."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import dg_core, law as _law, losses, optim, problems
from .errors import ConfigError

ALLOWED_CELLS = (32, 64, 128, 256)
ALLOWED_TASKS = (1, 2, 3, 4)


@dataclass
class ExperimentConfig:
    problem: str
    n_cells: int = 256
    tasks: int = 2
    seed: int = 7
    outdir: str = "run"
    plan: losses.SamplePlan = field(default_factory=losses.SamplePlan)
    weights: losses.LossWeights = field(default_factory=losses.LossWeights)
    train: optim.TrainConfig = field(default_factory=optim.TrainConfig)
    jump_eps: float | None = None   # None: adaptive 5% of the sampled range
    probe_dx: float | None = None   # None: half a cell
    dg_dt: float | None = None      # None: 0.3 * h / alpha(initial data)
    cfl: float = 0.3                # DG baseline runs

    def __post_init__(self):
        if self.problem not in problems.PROBLEM_IDS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.n_cells not in ALLOWED_CELLS:
            raise ConfigError(f"n_cells must be one of {ALLOWED_CELLS}, got {self.n_cells}")
        if self.tasks not in ALLOWED_TASKS:
            raise ConfigError(f"tasks must be one of {ALLOWED_TASKS}, got {self.tasks}")
        self.plan = losses.SamplePlan(**self.plan) if isinstance(self.plan, dict) else self.plan
        if self.plan.seed != self.seed:
            self.plan = losses.SamplePlan(
                self.plan.n_dg, self.plan.n_bdy, self.plan.n_ic, self.plan.n_rh,
                self.plan.n_sup, self.plan.placement, self.seed,
            )

    def resolved_probe_dx(self, mesh: dg_core.Mesh1D) -> float:
        return self.probe_dx if self.probe_dx is not None else mesh.h / 2.0

    def resolved_dg_dt(self, problem, mesh: dg_core.Mesh1D) -> float:
        if self.dg_dt is not None:
            return self.dg_dt
        xs = mesh.centers()
        alpha = _law.max_wave_speed(problem.law, problem.ic_cons(xs))
        return 0.3 * mesh.h / max(alpha, 1e-12)


_SCHEMA = {
    ("experiment", "problem"): str,
    ("experiment", "n_cells"): int,
    ("experiment", "tasks"): int,
    ("experiment", "seed"): int,
    ("experiment", "outdir"): str,
    ("experiment", "jump_eps"): float,
    ("experiment", "probe_dx"): float,
    ("experiment", "dg_dt"): float,
    ("experiment", "cfl"): float,
    ("plan", "n_dg"): int,
    ("plan", "n_bdy"): int,
    ("plan", "n_ic"): int,
    ("plan", "n_rh"): int,
    ("plan", "n_sup"): int,
    ("plan", "placement"): str,
    ("weights", "w_ic"): float,
    ("weights", "w_bdy"): float,
    ("weights", "w_dg"): float,
    ("weights", "w_rh"): float,
    ("weights", "w_sup"): float,
    ("weights", "omega"): float,
    ("optim", "adam_iters"): int,
    ("optim", "adam_lr"): float,
    ("optim", "lbfgs_iters"): int,
    ("optim", "lbfgs_lr"): float,
}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("experiment", "plan", "weights", "optim"):
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`, got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{source}:{lineno}: key outside any [section]")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if (section, key) not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{section}]")
        caster = _SCHEMA[(section, key)]
        if val.lower() == "none":
            parsed = None
        else:
            try:
                parsed = caster(val)
            except ValueError:
                raise ConfigError(
                    f"{source}:{lineno}: cannot parse {val!r} as {caster.__name__}"
                ) from None
        values[(section, key)] = parsed

    def pick(section, key, default):
        return values.get((section, key), default)

    if ("experiment", "problem") not in values:
        raise ConfigError(f"{source}: missing required key problem in [experiment]")
    seed = pick("experiment", "seed", 7)
    plan = losses.SamplePlan(
        n_dg=pick("plan", "n_dg", 1024),
        n_bdy=pick("plan", "n_bdy", 128),
        n_ic=pick("plan", "n_ic", 256),
        n_rh=pick("plan", "n_rh", 512),
        n_sup=pick("plan", "n_sup", 512),
        placement=pick("plan", "placement", losses.AUTO),
        seed=seed,
    )
    weights = losses.LossWeights(
        w_ic=pick("weights", "w_ic", 10.0),
        w_bdy=pick("weights", "w_bdy", 1.0),
        w_dg=pick("weights", "w_dg", 1.0),
        w_rh=pick("weights", "w_rh", 1.0),
        w_sup=pick("weights", "w_sup", 1.0),
        omega=pick("weights", "omega", 0.5),
    )
    train = optim.TrainConfig(
        adam_iters=pick("optim", "adam_iters", 20000),
        adam_lr=pick("optim", "adam_lr", 1e-3),
        lbfgs_iters=pick("optim", "lbfgs_iters", 1000),
        lbfgs_lr=pick("optim", "lbfgs_lr", 1e-2),
    )
    try:
        return ExperimentConfig(
            problem=values[("experiment", "problem")],
            n_cells=pick("experiment", "n_cells", 256),
            tasks=pick("experiment", "tasks", 2),
            seed=seed,
            outdir=pick("experiment", "outdir", "run"),
            plan=plan,
            weights=weights,
            train=train,
            jump_eps=pick("experiment", "jump_eps", None),
            probe_dx=pick("experiment", "probe_dx", None),
            dg_dt=pick("experiment", "dg_dt", None),
            cfl=pick("experiment", "cfl", 0.3),
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full-form serialization; parse(serialize(c)) == c."""
    lines = [
        "[experiment]",
        f"problem = {cfg.problem}",
        f"n_cells = {cfg.n_cells}",
        f"tasks = {cfg.tasks}",
        f"seed = {cfg.seed}",
        f"outdir = {cfg.outdir}",
        f"jump_eps = {_fmt(cfg.jump_eps)}",
        f"probe_dx = {_fmt(cfg.probe_dx)}",
        f"dg_dt = {_fmt(cfg.dg_dt)}",
        f"cfl = {_fmt(cfg.cfl)}",
        "",
        "[plan]",
        f"n_dg = {cfg.plan.n_dg}",
        f"n_bdy = {cfg.plan.n_bdy}",
        f"n_ic = {cfg.plan.n_ic}",
        f"n_rh = {cfg.plan.n_rh}",
        f"n_sup = {cfg.plan.n_sup}",
        f"placement = {cfg.plan.placement}",
        "",
        "[weights]",
        f"w_ic = {_fmt(cfg.weights.w_ic)}",
        f"w_bdy = {_fmt(cfg.weights.w_bdy)}",
        f"w_dg = {_fmt(cfg.weights.w_dg)}",
        f"w_rh = {_fmt(cfg.weights.w_rh)}",
        f"w_sup = {_fmt(cfg.weights.w_sup)}",
        f"omega = {_fmt(cfg.weights.omega)}",
        "",
        "[optim]",
        f"adam_iters = {cfg.train.adam_iters}",
        f"adam_lr = {_fmt(cfg.train.adam_lr)}",
        f"lbfgs_iters = {cfg.train.lbfgs_iters}",
        f"lbfgs_lr = {_fmt(cfg.train.lbfgs_lr)}",
    ]
    return "\n".join(lines) + "\n"
