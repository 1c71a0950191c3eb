"""Scenario files: YAML documents validated against a JSON schema.

Unknown keys are rejected.  Every error carries the line of the offending
node.  Times are given in the unit named by the key suffix (``_ms``,
``_us``, ``_ns``) and converted to integer nanoseconds on load.
"""

import copy
import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field

import jsonschema
import yaml

from .engine import Engine, EngineConfig, ExternalLock
from .memguard import MemGuardConfig
from .memory import ContentionModel
from .regulator import MODES, RegulatorConfig
from .workload import GENERATORS

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


PARAMS = {
    "frame": _obj({"fps": _POS, "critical_ms": _POS, "critical_MB": _POS,
                   "compute_ms": _POS, "noncritical_MB": _NONNEG},
                  ["fps", "critical_ms", "critical_MB", "compute_ms"]),
    "stream": _obj({"rate_MBps": _POS}, ["rate_MBps"]),
    "latency": _obj({"accesses_per_batch": {"type": "integer", "minimum": 1}},
                    ["accesses_per_batch"]),
    "compute": _obj({"work_ms": _POS, "iterations": {"type": "integer", "minimum": 1}},
                    ["work_ms"]),
}

_TASK = _obj({
    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "kind": {"enum": sorted(PARAMS)},
    "core": {"type": "integer", "minimum": 0},
    "arrival_ms": _NONNEG,
    "lock": {"enum": ["none", "fine", "coarse"]},
    "group": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "jitter": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "params": {"type": "object"},
}, ["name", "kind", "core", "params"])
_TASK["allOf"] = [
    {"if": {"properties": {"kind": {"const": k}}},
     "then": {"properties": {"params": s}}}
    for k, s in sorted(PARAMS.items())
]

SCHEMA = _obj({
    "name": {"type": "string", "minLength": 1},
    "duration_ms": _POS,
    "seed": {"type": "integer", "minimum": 0},
    "normalize": {"type": "boolean"},
    "engine": _obj({
        "cores": {"type": "integer", "minimum": 1, "maximum": 64},
        "quantum_us": _POS,
        "freq_ghz": _POS,
        "timeslice_us": _POS,
        "syscall_ns": _NONNEG,
        "handler_ns": _NONNEG,
    }),
    "model": _obj({"peak_Bps": _POS, "L0_ns": _POS, "U0": _NONNEG,
                   "alpha": _NONNEG, "phi_max": _NUM}),
    "regulator": _obj({"mode": {"enum": list(MODES)}, "period_us": _POS,
                       "minperf_MBps": _POS}),
    "memguard": _obj({
        "reserve_MBps": {"type": "array", "items": _NONNEG, "minItems": 1},
        "reclaim": {"type": "boolean"},
        "ewma_alpha": _POS,
        "guaranteed_MBps": _POS,
    }, ["reserve_MBps"]),
    "tasks": {"type": "array", "items": _TASK, "minItems": 1},
    "lock_events": {"type": "array", "items": _obj({
        "at_ms": _NONNEG,
        "task": {"type": ["string", "integer"]},
        "val": {"type": "integer", "minimum": 0},
        "issuer": {"type": "string"},
    }, ["at_ms", "task", "val"])},
}, ["name", "duration_ms", "tasks"])


class ScenarioError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.message = message
        self.line = line
        self.source = source
        where = f"{source or '<scenario>'}:{line}: " if line else f"{source or '<scenario>'}: "
        super().__init__(where + message)


def _to_ns(value, unit):
    return int(round(value * unit))


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str
    core: int
    params: dict
    arrival_ns: int = 0
    lock: str = "none"
    group: str = None
    jitter: float = 0.0

    @property
    def baseline_group(self):
        return self.group or self.name

    def build(self, freq):
        p = dict(self.params)
        kw = dict(name=self.name, affinity=self.core, arrival=self.arrival_ns, group=self.group)
        if self.kind == "frame":
            t = GENERATORS["frame"](lock_mode=self.lock, freq=freq, jitter=self.jitter, **p, **kw)
        else:
            if self.kind in ("stream", "compute"):
                kw["freq"] = freq
            t = GENERATORS[self.kind](**p, **kw)
            if self.lock == "fine":
                raise ValueError(f"task {self.name!r}: fine locking needs a frame task")
            t = dataclasses.replace(t, coarse_lock=(self.lock == "coarse"), jitter=self.jitter)
        return t

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_ns: int
    tasks: tuple
    engine: EngineConfig = EngineConfig()
    model: ContentionModel = ContentionModel()
    regulator: RegulatorConfig = RegulatorConfig()
    memguard: MemGuardConfig = None
    lock_events: tuple = ()
    seed: int = 0
    normalize: bool = True
    source: str = field(default=None, compare=False)

    def with_overrides(self, period_us=None, minperf=None, quantum_us=None, seed=None):
        s = self
        if period_us is not None:
            s = dataclasses.replace(s, regulator=dataclasses.replace(
                s.regulator, period=_to_ns(period_us, 1_000)))
        if minperf is not None:
            s = dataclasses.replace(s, regulator=dataclasses.replace(s.regulator, minperf_MBps=minperf))
        if quantum_us is not None:
            s = dataclasses.replace(s, engine=dataclasses.replace(
                s.engine, quantum=_to_ns(quantum_us, 1_000)))
        if seed is not None:
            s = dataclasses.replace(s, seed=seed)
        return s

    def descriptors(self):
        return [t.build(self.engine.freq) for t in self.tasks]

    def build_engine(self, backend=None, tasks=None, regulator=None):
        specs = self.tasks if tasks is None else tasks
        descs = [t.build(self.engine.freq) for t in specs]
        return Engine(descs, config=self.engine, model=self.model,
                      regulator=regulator or self.regulator, memguard=self.memguard,
                      lock_events=self.lock_events if tasks is None else (),
                      seed=self.seed, backend=backend)

    def resolved(self):
        """Plain-data form of every parameter, as recorded in manifest.json."""
        out = {
            "name": self.name,
            "duration_ns": self.duration_ns,
            "seed": self.seed,
            "normalize": self.normalize,
            "engine": dataclasses.asdict(self.engine),
            "model": self.model.as_dict(),
            "regulator": dataclasses.asdict(self.regulator),
            "memguard": None,
            "tasks": [t.as_dict() for t in self.tasks],
            "lock_events": [dataclasses.asdict(e) for e in self.lock_events],
        }
        if self.memguard is not None:
            mg = dataclasses.asdict(self.memguard)
            mg["reserve_MBps"] = list(mg["reserve_MBps"])
            out["memguard"] = mg
        return out

    def content_hash(self, **extra):
        blob = json.dumps({"scenario": self.resolved(), **extra}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def baseline(self, group):
        """Same scenario with only ``group``'s tasks, unregulated, no lock events."""
        tasks = tuple(t for t in self.tasks if t.baseline_group == group)
        if not tasks:
            raise ValueError(f"no tasks in group {group!r}")
        return dataclasses.replace(
            self, name=f"baseline.{group}", tasks=tasks, lock_events=(),
            regulator=dataclasses.replace(self.regulator, mode="unregulated"),
            memguard=None, normalize=False)

    def groups(self):
        out = []
        for t in self.tasks:
            if t.baseline_group not in out:
                out.append(t.baseline_group)
        return out


# YAML handling with line tracking

class _Loader(yaml.SafeLoader):
    pass


def _no_duplicates(loader, node, deep=False):
    seen = {}
    for k, _ in node.value:
        key = loader.construct_object(k, deep=deep)
        if key in seen:
            raise ScenarioError(f"duplicate key {key!r}", k.start_mark.line + 1)
        seen[key] = True
    return loader.construct_mapping(node, deep=deep)


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _no_duplicates)
# YAML 1.1 reads 3.2e9 (no dot or exponent sign) as a string; accept 1.2 floats
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"))


def _line_index(node, path=(), out=None):
    """Map every path in the document to the 1-based line of its node."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,) + ("__key__",)] = k.start_mark.line + 1
            _line_index(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _line_for(lines, path, key=None):
    path = tuple(path)
    if key is not None and path + (key, "__key__") in lines:
        return lines[path + (key, "__key__")]
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def _best_error(errors):
    return max(errors, key=lambda e: (len(e.absolute_path), -len(e.context or ())))


def _schema_error(err, lines, source):
    path = list(err.absolute_path)
    key = None
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        key = extra[0] if extra else None
        msg = f"unknown key {key!r}" + (f" in {'.'.join(map(str, path))}" if path else "")
    else:
        where = ".".join(map(str, path)) or "document"
        msg = f"{where}: {err.message}"
    return ScenarioError(msg, _line_for(lines, path, key), source)


def loads(text, source=None):
    """Parse and validate scenario text; raises :class:`ScenarioError`."""
    try:
        node = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except ScenarioError as e:
        raise ScenarioError(e.message, e.line, source) from None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(e, 'problem', e)}",
                            mark.line + 1 if mark else None, source) from None
    if node is None:
        raise ScenarioError("empty scenario", 1, source)
    lines = _line_index(node)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = list(validator.iter_errors(data))
    if errors:
        errors.sort(key=lambda e: _line_for(lines, list(e.absolute_path)) or 0)
        first_line = _line_for(lines, list(errors[0].absolute_path))
        same = [e for e in errors if _line_for(lines, list(e.absolute_path)) == first_line]
        raise _schema_error(_best_error(same), lines, source)
    try:
        return _build(data, source)
    except ScenarioError:
        raise
    except (ValueError, TypeError) as e:
        raise ScenarioError(str(e), _semantic_line(e, lines), source) from None


def _semantic_line(err, lines):
    path = getattr(err, "scenario_path", None)
    return _line_for(lines, path) if path else None


def _at(path, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ValueError, TypeError) as e:
        e.scenario_path = path
        raise


def load(path):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return loads(text, source=str(path))


def _build(d, source):
    e = d.get("engine", {})
    eng = _at(("engine",), EngineConfig,
              cores=e.get("cores", 4),
              quantum=_to_ns(e.get("quantum_us", 10), 1_000),
              freq=float(e.get("freq_ghz", 2.8)),
              timeslice=_to_ns(e.get("timeslice_us", 1000), 1_000),
              syscall_ns=int(round(e.get("syscall_ns", 125))),
              handler_ns=int(round(e.get("handler_ns", 7000))))
    m = d.get("model", {})
    model = _at(("model",), ContentionModel,
                peak_Bps=float(m.get("peak_Bps", 2.4e9)), L0=float(m.get("L0_ns", 80.0)),
                U0=float(m.get("U0", 0.3)), alpha=float(m.get("alpha", 6.0)),
                phi_max=float(m.get("phi_max", 3.0)))
    r = d.get("regulator", {})
    reg = _at(("regulator",), RegulatorConfig,
              mode=r.get("mode", "bwlock"), period=_to_ns(r.get("period_us", 1000), 1_000),
              minperf_MBps=float(r.get("minperf_MBps", 100.0)))
    mg = None
    if "memguard" in d:
        g = d["memguard"]
        mg = _at(("memguard",), MemGuardConfig,
                 reserve_MBps=tuple(g["reserve_MBps"]), reclaim=g.get("reclaim", True),
                 ewma_alpha=float(g.get("ewma_alpha", 0.5)),
                 guaranteed_MBps=float(g.get("guaranteed_MBps", 1200.0)))
    elif reg.mode == "memguard":
        raise ScenarioError("memguard mode needs a memguard section",
                            None, source)
    tasks = []
    names = set()
    for i, t in enumerate(d["tasks"]):
        if t["name"] in names:
            e = ValueError(f"duplicate task name {t['name']!r}")
            e.scenario_path = ("tasks", i, "name")
            raise e
        names.add(t["name"])
        if t["core"] >= eng.cores:
            e = ValueError(f"task {t['name']!r}: core {t['core']} does not exist "
                           f"(cores 0..{eng.cores - 1})")
            e.scenario_path = ("tasks", i, "core")
            raise e
        spec = TaskSpec(name=t["name"], kind=t["kind"], core=t["core"],
                        params=copy.deepcopy(t["params"]),
                        arrival_ns=_to_ns(t.get("arrival_ms", 0), 1_000_000),
                        lock=t.get("lock", "none"), group=t.get("group"),
                        jitter=float(t.get("jitter", 0.0)))
        _at(("tasks", i), spec.build, eng.freq)
        tasks.append(spec)
    events = []
    for i, ev in enumerate(d.get("lock_events", [])):
        tgt = ev["task"]
        if isinstance(tgt, str) and tgt not in names:
            e = ValueError(f"lock event names unknown task {tgt!r}")
            e.scenario_path = ("lock_events", i, "task")
            raise e
        events.append(ExternalLock(at=_to_ns(ev["at_ms"], 1_000_000), target=tgt,
                                   val=ev["val"], issuer=ev.get("issuer")))
    scen = Scenario(name=d["name"], duration_ns=_to_ns(d["duration_ms"], 1_000_000),
                    tasks=tuple(tasks), engine=eng, model=model, regulator=reg,
                    memguard=mg, lock_events=tuple(events), seed=d.get("seed", 0),
                    normalize=d.get("normalize", True), source=source)
    _at(("regulator",), scen.build_engine)  # cross-field checks (period vs quantum etc.)
    return scen


def dumps(data):
    """Serialize a scenario mapping (as accepted by :func:`loads`) to YAML."""
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


def schema_json():
    return json.dumps(SCHEMA, indent=2, sort_keys=True)
