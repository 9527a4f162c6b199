"""Experiment configuration: ``key = value`` files with dotted sections.

A config file is a sequence of lines ``section.key = value``; ``#`` starts a
comment and blank lines are ignored.  Learner keys may be given globally
(``learner.alpha``) or per method (``polk.alpha``); the per-method value wins.
Precedence, lowest first: built-in method defaults, ``learner.*``,
``<method>.*``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .colk import LearnerConfig
from .errors import ConfigError, MissingFileError
from .kernel import GaussianKernel, PolynomialKernel

METHODS = ("colk", "colk-scgd-tracker", "polk", "bsgd", "rbf")
COMPOSITIONAL = ("colk", "colk-scgd-tracker", "rbf")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _int_list(s: str):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _str_list(s: str):
    return tuple(v.strip() for v in s.split(",") if v.strip())


RUN_KEYS = {
    "method": (str, "colk"),
    "methods": (_str_list, ("colk", "polk")),
    "n_iters": (int, 20000),
    "eval_every": (int, 100),
    "n_replicates": (int, 20),
    "seed": (int, 0),
    "out": (str, "out"),
}
DATA_KEYS = {
    "path": (str, ""),
    "x_cols": (_int_list, (0,)),
    "y_col": (int, 1),
    "has_header": (_bool, True),
    "n": (int, 6000),
    "sigma": (float, 0.5),
    "contam_prob": (float, 0.05),
    "contam_scale": (float, 3.0),
    "x_min": (float, -1.0),
    "x_max": (float, 1.0),
    "y_scale": (float, 0.25),
    "minmax": (_bool, False),
    "test_frac": (float, 0.2),
    "train_frac": (float, 0.5),
    "replicate": (int, 0),
    "seed": (int, 1),
}
EVAL_KEYS = {
    "eta": (float, 0.1),
    "moment_P": (int, 4),
}
LEARNER_KEYS = {
    "alpha": (float, None),
    "beta": (float, None),
    "lam": (float, None),
    "eps": (_opt_float, None),
    "parsimony": (float, None),
    "kernel": (str, None),
    "bandwidth": (float, None),
    "poly_offset": (float, None),
    "poly_degree": (int, None),
    "eta": (float, None),
    "moment_P": (int, None),
    "tau": (_opt_float, None),
    "w_max": (float, None),
    "max_order": (int, None),
    "n_centers": (int, None),
}
SECTIONS = {"run": RUN_KEYS, "data": DATA_KEYS, "eval": EVAL_KEYS, "learner": LEARNER_KEYS}
SECTIONS.update({m: LEARNER_KEYS for m in METHODS})
# sections searched when a key is given without one
BARE_ORDER = ("run", "learner", "data")
ALIASES = {"lambda": "lam", "P": "moment_P"}

_BASE = dict(alpha=0.02, beta=0.01, lam=1e-6, eps=None, parsimony=5.0, kernel="gaussian", bandwidth=0.06,
             poly_offset=1.0, poly_degree=2, eta=0.1, moment_P=4, tau=None, w_max=1e6, max_order=40, n_centers=50)
METHOD_DEFAULTS = {
    "colk": dict(_BASE),
    "colk-scgd-tracker": dict(_BASE),
    "polk": {**_BASE, "alpha": 0.5, "parsimony": 0.09, "eta": 0.0},
    "bsgd": {**_BASE, "alpha": 0.5, "eta": 0.0},
    "rbf": dict(_BASE),
}


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse config text into ``{dotted_key: raw_string}`` (keys canonicalised, not yet typed)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[resolve_key(key, f"{source}:{lineno}")] = value
    return out


def parse_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("config file not found", str(path))
    return parse_text(path.read_text(encoding="utf-8"), str(path))


def parse_override(item: str) -> tuple:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, value = (s.strip() for s in item.split("=", 1))
    return resolve_key(key, "--set"), value


def resolve_key(key: str, where: str = "") -> str:
    prefix = f"{where}: " if where else ""
    if "." in key:
        section, name = key.rsplit(".", 1)
        name = ALIASES.get(name, name)
        if section not in SECTIONS:
            raise ConfigError(f"{prefix}unknown section {section!r} in key {key!r}")
        if name not in SECTIONS[section]:
            raise ConfigError(f"{prefix}unknown key {key!r}")
        return f"{section}.{name}"
    name = ALIASES.get(key, key)
    hits = [s for s in BARE_ORDER if name in SECTIONS[s]]
    if not hits:
        raise ConfigError(f"{prefix}unknown key {key!r}")
    if len(hits) > 1:
        raise ConfigError(f"{prefix}key {key!r} is ambiguous; use one of " + ", ".join(f"{s}.{name}" for s in hits))
    return f"{hits[0]}.{name}"


def _convert(key: str, raw: str):
    section, name = key.rsplit(".", 1)
    conv = SECTIONS[section][name][0]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


@dataclass(frozen=True)
class DataConfig:
    path: str = ""
    x_cols: tuple = (0,)
    y_col: int = 1
    has_header: bool = True
    n: int = 6000
    sigma: float = 0.5
    contam_prob: float = 0.05
    contam_scale: float = 3.0
    x_min: float = -1.0
    x_max: float = 1.0
    y_scale: float = 0.25
    minmax: bool = False
    test_frac: float = 0.2
    train_frac: float = 0.5
    replicate: int = 0
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "colk"
    methods: tuple = ("colk", "polk")
    n_iters: int = 20000
    eval_every: int = 100
    n_replicates: int = 20
    seed: int = 0
    out: str = "out"
    data: DataConfig = field(default_factory=DataConfig)
    eval_eta: float = 0.1
    eval_P: int = 4
    learner: dict = field(default_factory=dict)
    per_method: dict = field(default_factory=dict)

    def method_params(self, method: str) -> dict:
        if method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {method!r}")
        params = dict(METHOD_DEFAULTS[method])
        params.update(self.learner)
        params.update(self.per_method.get(method, {}))
        return params

    def learner_config(self, method: str) -> LearnerConfig:
        p = self.method_params(method)
        if p["kernel"] == "gaussian":
            if not p["bandwidth"] > 0:
                raise ConfigError(f"bandwidth must be > 0, got {p['bandwidth']}")
            kern = GaussianKernel(p["bandwidth"])
        elif p["kernel"] == "polynomial":
            if p["poly_degree"] < 1 or p["poly_offset"] < 0:
                raise ConfigError("polynomial kernel needs poly_degree >= 1 and poly_offset >= 0")
            kern = PolynomialKernel(p["poly_offset"], p["poly_degree"])
        else:
            raise ConfigError(f"kernel must be 'gaussian' or 'polynomial', got {p['kernel']!r}")
        eps = p["eps"] if p["eps"] is not None else p["parsimony"] * p["alpha"] ** 2
        return LearnerConfig(alpha=p["alpha"], beta=p["beta"], lam=p["lam"], eps=eps, kernel=kern,
                             eta=p["eta"], moment_P=p["moment_P"], w_max=p["w_max"], seed=self.seed)

    def validate(self) -> "ExperimentConfig":
        for m in dict.fromkeys((self.method, *self.methods, *self.per_method)):
            self.learner_config(m)
            p = self.method_params(m)
            if p["tau"] is not None and not p["tau"] > 0:
                raise ConfigError(f"tau must be > 0, got {p['tau']}")
            if m == "bsgd" and p["max_order"] < 1:
                raise ConfigError(f"max_order must be >= 1, got {p['max_order']}")
            if m == "rbf" and p["n_centers"] < 1:
                raise ConfigError(f"n_centers must be >= 1, got {p['n_centers']}")
        if self.n_iters < 0:
            raise ConfigError(f"n_iters must be >= 0, got {self.n_iters}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.n_replicates < 1:
            raise ConfigError(f"n_replicates must be >= 1, got {self.n_replicates}")
        if self.eval_eta < 0 or self.eval_P not in (2, 3, 4):
            raise ConfigError("eval.eta must be >= 0 and eval.moment_P in {2, 3, 4}")
        d = self.data
        if not d.path:
            if d.n < 1:
                raise ConfigError(f"data.n must be >= 1, got {d.n}")
            if not d.sigma >= 0 or not 0 <= d.contam_prob < 1 or not d.contam_scale > 1:
                raise ConfigError("data noise needs sigma >= 0, 0 <= contam_prob < 1, contam_scale > 1")
            if not d.x_min < d.x_max:
                raise ConfigError(f"data.x_min must be < data.x_max, got {d.x_min}, {d.x_max}")
        if not (0 < d.test_frac < 1 and 0 < d.train_frac <= 1):
            raise ConfigError("data.test_frac must lie in (0, 1) and data.train_frac in (0, 1]")
        if d.replicate < 0:
            raise ConfigError(f"data.replicate must be >= 0, got {d.replicate}")
        if not d.y_scale > 0:
            raise ConfigError(f"data.y_scale must be > 0, got {d.y_scale}")
        return self


def build_config(values: dict | None = None) -> ExperimentConfig:
    """Typed, validated :class:`ExperimentConfig` from ``{dotted_key: raw_string}``."""
    values = values or {}
    run, data, ev, learner, per_method = {}, {}, {}, {}, {}
    for key, raw in values.items():
        key = resolve_key(key)
        section, name = key.rsplit(".", 1)
        val = _convert(key, raw)
        if section == "run":
            run[name] = val
        elif section == "data":
            data[name] = val
        elif section == "eval":
            ev[name] = val
        elif section == "learner":
            learner[name] = val
        else:
            per_method.setdefault(section, {})[name] = val
    cfg = ExperimentConfig(
        **run,
        data=DataConfig(**data),
        eval_eta=ev.get("eta", 0.1),
        eval_P=ev.get("moment_P", 4),
        learner=learner,
        per_method=per_method,
    )
    return cfg.validate()


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read ``path`` (optional), apply ``key=value`` overrides in order, validate."""
    values = parse_file(path) if path else {}
    for item in overrides:
        k, v = parse_override(item)
        values[k] = v
    return build_config(values)
