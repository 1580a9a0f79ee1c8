"""File formats for datasets, trajectory sets, checkpoints and metric reports.

Floats are written with Python's shortest round-trip ``repr`` so every file
reloads to identical values, and field order is fixed so identical inputs
give identical bytes.  See ``docs/formats.md`` for the schemas.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from trajset.core import FRAME_CONVENTION, AgentClass, ClassGroup
from trajset.metrics import MetricReport
from trajset.model import ClassifierModel, ModelConfig, SetBank
from trajset.setgen import TrajectorySet
from trajset.synth import Dataset, Scenario

DATASET_FORMAT = "trajset-dataset"
SET_FORMAT = "trajset-set"
CHECKPOINT_FORMAT = "trajset-checkpoint"
REPORT_FORMAT = "trajset-report"
VERSION = 1

DATASET_COLUMNS = ("scenario_id", "agent_id", "role", "class", "timestep", "x", "y", "observed")
ROLES = ("focal", "av", "other")


class FormatError(ValueError):
    """A file does not match its schema."""


def _f(v) -> str:
    return repr(float(v))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (AgentClass, ClassGroup)):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, default=_json_default, separators=(", ", ": "))


def _check_header(header: dict, fmt: str, where: str) -> None:
    if header.get("format") != fmt:
        raise FormatError(f"{where}: expected format {fmt!r}, got {header.get('format')!r}")
    if header.get("version") != VERSION:
        raise FormatError(f"{where}: unsupported {fmt} version {header.get('version')!r} (expected {VERSION})")


# --- datasets ---------------------------------------------------------------------

def dataset_rows(ds: Dataset):
    """Yield dataset rows in file order."""
    t_p = ds.t_past
    for sc in ds.scenarios:
        tracks = [(0, "focal", sc.focal_class, np.concatenate([sc.focal_past, sc.focal_future]))]
        if sc.av_past is not None:
            av = sc.av_past if sc.av_future is None else np.concatenate([sc.av_past, sc.av_future])
            tracks.append((1, "av", AgentClass.VEHICLE, av))
        for n, (cls, past) in enumerate(sc.others):
            tracks.append((2 + n, "other", cls, past))
        for agent_id, role, cls, pts in tracks:
            for t, (x, y) in enumerate(pts):
                yield (sc.scenario_id, agent_id, role, AgentClass(cls).value, t, float(x), float(y), int(t < t_p))


def _dataset_header(ds: Dataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": VERSION,
        "dt": ds.dt,
        "t_past": ds.t_past,
        "t_future": ds.t_future,
        "frame": FRAME_CONVENTION,
        "meta": ds.meta,
        "scenario_meta": {str(s.scenario_id): s.meta for s in ds.scenarios if s.meta},
    }


def write_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as CSV, or as a binary container when ``path`` ends in ``.npz``."""
    path = Path(path)
    header = _dataset_header(ds)
    if path.suffix == ".npz":
        rows = list(dataset_rows(ds))
        cols = list(zip(*rows)) if rows else [()] * len(DATASET_COLUMNS)
        np.savez(
            path,
            header=np.array(_dumps(header)),
            scenario_id=np.array(cols[0], dtype=np.int64),
            agent_id=np.array(cols[1], dtype=np.int64),
            role=np.array(cols[2], dtype="U8"),
            agent_class=np.array(cols[3], dtype="U16"),
            timestep=np.array(cols[4], dtype=np.int64),
            x=np.array(cols[5], dtype=np.float64),
            y=np.array(cols[6], dtype=np.float64),
            observed=np.array(cols[7], dtype=np.int8),
        )
        return
    with open(path, "w", newline="") as fh:
        fh.write("# " + _dumps(header) + "\n")
        fh.write(",".join(DATASET_COLUMNS) + "\n")
        for sid, aid, role, cls, t, x, y, obs in dataset_rows(ds):
            fh.write(f"{sid},{aid},{role},{cls},{t},{_f(x)},{_f(y)},{obs}\n")


def _parse_row(fields, line_no):
    if len(fields) != len(DATASET_COLUMNS):
        raise FormatError(f"row at line {line_no}: expected {len(DATASET_COLUMNS)} fields, got {len(fields)}")
    try:
        sid, aid, t, obs = int(fields[0]), int(fields[1]), int(fields[4]), int(fields[7])
        x, y = float(fields[5]), float(fields[6])
    except ValueError as exc:
        raise FormatError(f"row at line {line_no}: {exc}") from None
    role, cls = fields[2], fields[3]
    if role not in ROLES:
        raise FormatError(f"row at line {line_no}: unknown role {role!r}")
    try:
        AgentClass(cls)
    except ValueError:
        raise FormatError(f"row at line {line_no}: unknown class {cls!r}") from None
    if obs not in (0, 1):
        raise FormatError(f"row at line {line_no}: observed flag must be 0 or 1")
    if not (np.isfinite(x) and np.isfinite(y)):
        raise FormatError(f"row at line {line_no}: non-finite coordinate")
    return sid, aid, role, cls, t, x, y, obs


def _assemble(header: dict, rows, where: str) -> Dataset:
    _check_header(header, DATASET_FORMAT, where)
    t_p, t_f = int(header["t_past"]), int(header["t_future"])
    scenes: dict[int, dict[int, dict]] = {}
    for line_no, fields in rows:
        sid, aid, role, cls, t, x, y, obs = _parse_row(fields, line_no)
        agents = scenes.setdefault(sid, {})
        tr = agents.get(aid)
        if tr is None:
            if t != 0:
                raise FormatError(f"row at line {line_no}: agent {aid} of scenario {sid} starts at timestep {t}")
            tr = agents[aid] = {"role": role, "cls": cls, "pts": [], "obs": [], "line": line_no}
        elif t != len(tr["pts"]):
            raise FormatError(f"row at line {line_no}: timestep {t} not contiguous for agent {aid} "
                              f"of scenario {sid} (expected {len(tr['pts'])})")
        elif role != tr["role"] or cls != tr["cls"]:
            raise FormatError(f"row at line {line_no}: role/class changed within agent {aid}")
        tr["pts"].append((x, y))
        tr["obs"].append(obs)
        tr["line"] = line_no

    smeta = header.get("scenario_meta", {})
    scenarios = []
    for sid, by_id in scenes.items():
        agents = sorted(by_id.items())
        focal = [tr for _, tr in agents if tr["role"] == "focal"]
        avs = [tr for _, tr in agents if tr["role"] == "av"]
        if len(focal) != 1:
            raise FormatError(f"{where}: scenario {sid} has {len(focal)} focal agents")
        if len(avs) > 1:
            raise FormatError(f"{where}: scenario {sid} has {len(avs)} AV tracks")
        f = focal[0]
        n_obs = sum(f["obs"])
        if n_obs != t_p or len(f["pts"]) != t_p + t_f or any(f["obs"][t_p:]):
            raise FormatError(f"{where}: focal agent of scenario {sid} (last row at line {f['line']}) has "
                              f"{n_obs} observed + {len(f['pts']) - n_obs} future rows, expected {t_p} + {t_f}")
        pts = np.array(f["pts"])
        av_past = av_future = None
        if avs:
            a = np.array(avs[0]["pts"])
            av_past, av_future = a[:t_p], (a[t_p:] if len(a) > t_p else None)
        others = [(AgentClass(tr["cls"]), np.array(tr["pts"])) for _, tr in agents if tr["role"] == "other"]
        scenarios.append(Scenario(sid, AgentClass(f["cls"]), pts[:t_p], pts[t_p:], others,
                                  av_past, av_future, smeta.get(str(sid), {})))
    return Dataset(scenarios, float(header["dt"]), t_p, t_f, header.get("meta", {}))


def read_dataset(path) -> Dataset:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            cols = zip(z["scenario_id"].tolist(), z["agent_id"].tolist(), z["role"].tolist(),
                       z["agent_class"].tolist(), z["timestep"].tolist(), z["x"].tolist(),
                       z["y"].tolist(), z["observed"].tolist())
            rows = [(n + 1, [str(sid), str(aid), role, cls, str(t), repr(x), repr(y), str(obs)])
                    for n, (sid, aid, role, cls, t, x, y, obs) in enumerate(cols)]
        return _assemble(header, rows, str(path))
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise FormatError(f"{path}: line 1: missing header comment")
        try:
            header = json.loads(first[2:])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line 1: bad header ({exc})") from None
        columns = fh.readline().strip().split(",")
        if tuple(columns) != DATASET_COLUMNS:
            raise FormatError(f"{path}: line 2: expected columns {','.join(DATASET_COLUMNS)}")
        reader = csv.reader(fh)
        rows = ((n + 3, r) for n, r in enumerate(reader))
        return _assemble(header, rows, str(path))


# --- trajectory sets ----------------------------------------------------------------

def set_to_dict(tset: TrajectorySet) -> dict:
    return {
        "format": SET_FORMAT,
        "version": VERSION,
        "size": len(tset),
        "horizon": tset.horizon,
        "dt": tset.dt,
        "class_group": tset.class_group.value,
        "frame": tset.frame,
        "generation": tset.meta,
        "trajectories": tset.trajectories.tolist(),
    }


def set_from_dict(d: dict, where: str = "set") -> TrajectorySet:
    _check_header(d, SET_FORMAT, where)
    rows = d.get("trajectories", [])
    if len(rows) != d["size"]:
        raise FormatError(f"{where}: header size {d['size']} but {len(rows)} trajectory rows")
    for n, row in enumerate(rows):
        if len(row) != d["horizon"] or any(len(p) != 2 for p in row):
            raise FormatError(f"{where}: trajectory row {n} does not have {d['horizon']} (x, y) pairs")
    return TrajectorySet(np.array(rows, dtype=np.float64).reshape(d["size"], d["horizon"], 2),
                         dt=float(d["dt"]), class_group=ClassGroup(d["class_group"]),
                         frame=d["frame"], meta=d.get("generation", {}))


def _write_json_rows(fh, obj: dict, row_key: str, indent: str = "") -> None:
    """JSON object with one line per header field and one line per row of ``row_key``."""
    keys = list(obj)
    fh.write("{\n")
    for n, key in enumerate(keys):
        end = ",\n" if n < len(keys) - 1 else "\n"
        if key == row_key:
            rows = obj[key]
            fh.write(f'{indent}  "{key}": [\n')
            for r, row in enumerate(rows):
                fh.write(f"{indent}    " + _dumps(row) + (",\n" if r < len(rows) - 1 else "\n"))
            fh.write(f"{indent}  ]" + end)
        else:
            fh.write(f'{indent}  "{key}": ' + _dumps(obj[key]) + end)
    fh.write(indent + "}")


def write_set(tset: TrajectorySet, path) -> None:
    with open(path, "w") as fh:
        _write_json_rows(fh, set_to_dict(tset), "trajectories")
        fh.write("\n")


def read_set(path) -> TrajectorySet:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed set file ({exc})") from None
    return set_from_dict(d, str(path))


def write_curve(tset: TrajectorySet, path) -> None:
    """Achievable-metric curve (set size vs mean min error) as CSV."""
    with open(path, "w") as fh:
        fh.write("size,index,achievable\n")
        for n, (i, m) in enumerate(zip(tset.meta.get("selected", []), tset.meta.get("achievable", []))):
            fh.write(f"{n + 1},{i},{_f(m)}\n")


# --- checkpoints --------------------------------------------------------------------

def write_checkpoint(model: ClassifierModel, path, bank: SetBank | None = None, extra: dict | None = None) -> None:
    c = model.config
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": VERSION,
        "config": {"n_features": c.n_features, "n_outputs": c.n_outputs, "feature_size": c.feature_size,
                   "hidden": c.hidden, "n_av_features": c.n_av_features, "seed": c.seed},
        "extra": extra or {},
        "sets": [set_to_dict(s) for s in bank.sets] if bank is not None else [],
        "blocks": [{"name": name, "shape": list(shape), "stage": stage,
                    "data": model.params[name].ravel().tolist()}
                   for name, shape, stage in model.parameter_blocks()],
    }
    with open(path, "w") as fh:
        fh.write(_dumps(doc))
        fh.write("\n")


def read_checkpoint(path) -> tuple[ClassifierModel, SetBank | None, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
    _check_header(doc, CHECKPOINT_FORMAT, str(path))
    cfg = ModelConfig(**doc["config"])
    params = {}
    layout = ClassifierModel._layout(cfg)
    for n, blk in enumerate(doc["blocks"]):
        name = blk["name"]
        if name not in layout:
            raise FormatError(f"{path}: block {n} ({name!r}) not part of the model layout")
        if blk.get("stage") != layout[name][1]:
            raise FormatError(f"{path}: block {name!r} has stage {blk.get('stage')!r}, expected {layout[name][1]!r}")
        shape = tuple(blk["shape"])
        data = np.array(blk["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise FormatError(f"{path}: block {name!r} holds {data.size} values for shape {shape}")
        params[name] = data.reshape(shape)
    try:
        model = ClassifierModel(cfg, params)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    sets = [set_from_dict(s, f"{path}: set {n}") for n, s in enumerate(doc.get("sets", []))]
    return model, (SetBank(sets) if sets else None), doc.get("extra", {})


# --- reports --------------------------------------------------------------------------

def report_text(values: dict) -> str:
    """Flat ``key  value`` table, keys in insertion order."""
    width = max((len(k) for k in values), default=0)
    lines = []
    for k, v in values.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def write_report(report: MetricReport | dict, path, fmt: str | None = None) -> None:
    values = report.as_dict() if isinstance(report, MetricReport) else dict(report)
    fmt = fmt or ("json" if str(path).endswith(".json") else "text")
    with open(path, "w") as fh:
        if fmt == "json":
            fh.write(_dumps({"format": REPORT_FORMAT, "version": VERSION, **values}) + "\n")
        else:
            fh.write(report_text(values))


def read_report(path) -> dict:
    d = json.loads(Path(path).read_text())
    _check_header(d, REPORT_FORMAT, str(path))
    return {k: v for k, v in d.items() if k not in ("format", "version")}
