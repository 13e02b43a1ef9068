"""Dataclass configurations shared by the solver, driver and CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

VARIANTS = ("sq_l2", "l2")


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameters for graph-guided multi-task regression.

    ``xi``, ``eta`` and ``gamma`` weight the squared-l2, l1 and entropy
    penalties on the edge vector; ``lam`` is the graph smoothing strength of
    the inner problem and ``nu`` the outer step size.
    """

    xi: float = 0.0
    eta: float = 0.0
    gamma: float = 1.0
    lam: float = 1.0
    nu: float = 1e-3
    k: int = 5
    variant: str = "sq_l2"
    max_outer: int = 500
    tol_rel: float = 1e-4
    patience: int = 3
    backtrack: bool = True
    max_halvings: int = 20
    eps_log: float = 1e-8
    eps_guard: float = 1e-8
    l2_tol: float = 1e-5
    l2_max_rounds: int = 50
    solver_tol: float = 1e-10
    ridge: float = 0.0

    def __post_init__(self):
        for name in ("xi", "eta", "gamma", "nu", "ridge"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.max_outer < 0:
            raise ValueError("max_outer must be >= 0")

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SynthSpec:
    structure: str = "line"
    n_tasks: Optional[int] = None
    d: Optional[int] = None
    samples_per_task: int = 100
    noise_std: float = 1.0
    seed: int = 0

    DEFAULTS = {"line": (20, 30), "tree": (31, 30), "star": (11, 20)}

    def __post_init__(self):
        if self.structure not in self.DEFAULTS:
            raise ValueError(f"unknown structure {self.structure!r}")
        n, d = self.DEFAULTS[self.structure]
        if self.n_tasks is None:
            object.__setattr__(self, "n_tasks", n)
        if self.d is None:
            object.__setattr__(self, "d", d)
        if self.samples_per_task < 1:
            raise ValueError("samples_per_task must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class MultiTaskCsv:
    """Where and how to read a multi-task CSV dataset.

    ``layout`` is ``"per_task_files"`` (a directory of CSVs, one per task,
    sorted by file name) or ``"single_file"`` (one CSV with a task-id column).
    """

    path: str
    layout: str = "per_task_files"
    target_column: str = "y"
    feature_columns: Optional[tuple] = None
    task_column: Optional[str] = None
    add_intercept: bool = False

    def __post_init__(self):
        if self.layout not in ("per_task_files", "single_file"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "single_file" and not self.task_column:
            raise ValueError("single_file layout needs task_column")
        if self.feature_columns is not None:
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: data source, hyperparameters and evaluation protocol.

    ``dataset`` is either a :class:`MultiTaskCsv` or a :class:`SynthSpec`
    (synthetic data is regenerated per repeat with ``seed + repeat``).
    """

    dataset: object
    hyperparams: HyperParams = field(default_factory=HyperParams)
    split: SplitSpec = field(default_factory=SplitSpec)
    train_ratio: float = 0.5
    repeats: int = 1
    seed: int = 0
    chronological: bool = False
    standardize: Optional[bool] = None
    truth_graph: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.standardize is None:
            # real data scales vary wildly; synthetic data is already isotropic
            object.__setattr__(self, "standardize", isinstance(self.dataset, MultiTaskCsv))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        ds = dict(data.pop("dataset"))
        if "structure" in ds:
            dataset = SynthSpec(**ds)
        else:
            dataset = MultiTaskCsv(**ds)
        hp = HyperParams.from_dict(data.pop("hyperparams", {}))
        split = SplitSpec(**data.pop("split", {}))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(dataset=dataset, hyperparams=hp, split=split, **data)

    def to_dict(self) -> dict:
        ds = {k: v for k, v in asdict(self.dataset).items()}
        if isinstance(ds.get("feature_columns"), tuple):
            ds["feature_columns"] = list(ds["feature_columns"])
        return {
            "dataset": ds,
            "hyperparams": self.hyperparams.to_dict(),
            "split": asdict(self.split),
            "train_ratio": self.train_ratio,
            "repeats": self.repeats,
            "seed": self.seed,
            "chronological": self.chronological,
            "standardize": self.standardize,
            "truth_graph": self.truth_graph,
        }
