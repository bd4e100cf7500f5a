"""Parsing and cleaning of semi-structured cluster-trace files.

A trace file is a comma-separated table with a header row. Some cells hold
nested literals: resource requests and usage aggregates are object literals
such as ``{'cpus': 0.5, 'memory': 0.25}``, usage distributions are array
literals such as ``[0.01, 0.02, 0.05]``. This module turns those rows into
flat numeric records:

* metadata columns on the drop list are discarded,
* ``resource_request`` becomes ``resource_request_cpus`` / ``resource_request_memory``,
* each usage aggregate becomes ``<name>_cpu`` / ``<name>_memory``,
* each distribution array becomes seven summary statistics,
* low-cardinality categoricals are frequency-encoded, the rest dropped,
* missing values are filled with ``missing_fill``.
"""

from __future__ import annotations

import ast
import csv
import io
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError

DROP_COLUMNS = (
    "Unnamed:0",
    "time",
    "machine_id",
    "constraint",
    "user",
    "collection_name",
    "collection_logical_name",
    "start_after_collection",
)

USAGE_COLUMNS = ("average_usage", "maximum_usage", "random_sample_usage")
DISTRIBUTION_COLUMNS = ("cpu_usage_distribution", "tail_cpu_usage_distribution")
NESTED_COLUMNS = ("resource_request",) + USAGE_COLUMNS + DISTRIBUTION_COLUMNS

# Columns treated as categorical even when every value looks numeric.
DEFAULT_CATEGORICAL = (
    "collection_id",
    "alloc_collection_id",
    "instance_index",
    "event",
    "cluster",
    "scheduler",
    "vertical_scaling",
)

SUMMARY_FIELDS = ("mean", "std", "min", "max", "q25", "q50", "q75")

_CPU_KEYS = ("cpus", "cpu")
_MEMORY_KEYS = ("memory", "mem")
_NULL_TEXT = {"", "nan", "none", "null", "na"}


@dataclass
class PreprocessConfig:
    drop_columns: tuple = DROP_COLUMNS
    low_cardinality_threshold: int = 32
    missing_fill: float = 0.0
    categorical_columns: tuple = DEFAULT_CATEGORICAL

    def __post_init__(self):
        self.drop_columns = tuple(self.drop_columns)
        self.categorical_columns = tuple(self.categorical_columns)
        if self.low_cardinality_threshold < 1:
            raise ValueError("low_cardinality_threshold must be a positive integer")


@dataclass(frozen=True)
class RawJobRecord:
    """One trace row after the drop list has been applied.

    Nested fields are kept as their original text; numeric passthrough values
    are floats, with NaN standing for an empty cell.
    """

    resource_request_text: str = ""
    average_usage_text: str = ""
    maximum_usage_text: str = ""
    random_sample_usage_text: str = ""
    cpu_usage_distribution_text: str = ""
    tail_cpu_usage_distribution_text: str = ""
    categorical: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)

    def nested_text(self, column):
        return getattr(self, f"{column}_text")


@dataclass(frozen=True)
class DistSummary:
    mean: float
    std: float
    min: float
    max: float
    q25: float
    q50: float
    q75: float

    def as_features(self, prefix):
        return {f"{prefix}_{name}": float(getattr(self, name)) for name in SUMMARY_FIELDS}


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class ParsedTrace:
    """Records parsed from one file plus the rows that had to be skipped."""

    records: list
    skipped: list
    source: str = "<stream>"

    @property
    def skip_count(self):
        return len(self.skipped)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


@dataclass
class Preprocessed:
    """Flat numeric rows plus the frequency mappings fitted on them."""

    rows: list
    encoders: dict

    @property
    def feature_names(self):
        return sorted(self.rows[0]) if self.rows else []


# --------------------------------------------------------------------------
# nested literals


def _is_null(text):
    return text is None or text.strip().lower() in _NULL_TEXT


def parse_object_literal(text):
    """Parse ``{'key': number, ...}`` with either quote style into a dict."""
    if _is_null(text):
        return {}
    try:
        value = ast.literal_eval(text.strip())
    except (ValueError, SyntaxError) as exc:
        raise ParseError("malformed object literal", text) from exc
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ParseError("expected an object literal", text)
    return value


def _numeric_field(obj, keys, text, missing_fill):
    for key in keys:
        if key in obj:
            value = obj[key]
            if value is None:
                return missing_fill
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParseError(f"non-numeric value for {key!r}", text)
            value = float(value)
            return missing_fill if math.isnan(value) else value
    return missing_fill


def parse_resource_request(text, missing_fill=0.0):
    """Return ``(cpus, memory)`` from a resource-request literal."""
    obj = parse_object_literal(text)
    return (
        _numeric_field(obj, _CPU_KEYS, text, missing_fill),
        _numeric_field(obj, _MEMORY_KEYS, text, missing_fill),
    )


def decompose_usage(text, prefix, missing_fill=0.0):
    """Split a usage literal into ``{prefix}_cpu`` and ``{prefix}_memory``."""
    cpu, memory = parse_resource_request(text, missing_fill)
    return {f"{prefix}_cpu": cpu, f"{prefix}_memory": memory}


_ARRAY_SPLIT = re.compile(r"[,\s]+")


def parse_float_array(text):
    """Parse ``[a, b, c]`` (commas and/or whitespace) into a list of floats."""
    if _is_null(text):
        return []
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ParseError("expected a bracketed array literal", text)
    body = body[1:-1].strip()
    if not body:
        return []
    values = []
    for token in _ARRAY_SPLIT.split(body):
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError as exc:
            raise ParseError("non-numeric array element", text) from exc
    return values


def summarize_distribution(values, missing_fill=0.0):
    """Mean, sample std, extremes and linear-interpolation quartiles."""
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return DistSummary(*([float(missing_fill)] * len(SUMMARY_FIELDS)))
    lo, hi = float(arr.min()), float(arr.max())
    mean = min(max(float(arr.mean()), lo), hi)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    q25, q50, q75 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75], method="linear"))
    return DistSummary(mean=mean, std=std, min=lo, max=hi, q25=q25, q50=q50, q75=q75)


# --------------------------------------------------------------------------
# categoricals


def frequency_encode(column):
    """Replace each category by its relative frequency in ``column``.

    Returns the encoded values and the mapping used, so the same encoding can
    be applied to unseen data with :func:`apply_frequency_mapping`.
    """
    column = list(column)
    n = len(column)
    if n == 0:
        return [], {}
    counts = Counter(column)
    mapping = {category: count / n for category, count in counts.items()}
    return [mapping[value] for value in column], mapping


def apply_frequency_mapping(column, mapping):
    return [float(mapping.get(value, 0.0)) for value in column]


# --------------------------------------------------------------------------
# file parsing


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), os.fspath(source)
    name = getattr(source, "name", "<stream>")
    if isinstance(source, io.TextIOBase):
        return source, str(name)
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), str(name)


def _to_float(text):
    if _is_null(text):
        return math.nan
    return float(text)


def parse_trace_file(source, config=None):
    """Read a trace file into :class:`RawJobRecord` objects.

    ``source`` is a path or a binary/text stream. Rows with the wrong number of
    cells or an unparseable nested literal are skipped and listed in
    ``ParsedTrace.skipped`` together with their line number.
    """
    config = config or PreprocessConfig()
    stream, name = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{name}: missing header row") from None
        header = [h.strip() for h in header]
        if not any(col in header for col in NESTED_COLUMNS):
            raise SchemaError(
                f"{name}: header row names none of the expected trace columns "
                f"({', '.join(NESTED_COLUMNS)})"
            )
        rows, skipped = [], []
        for cells in reader:
            if not cells or (len(cells) == 1 and not cells[0].strip()):
                continue
            if len(cells) != len(header):
                skipped.append(
                    RowError(reader.line_num, f"expected {len(header)} cells, found {len(cells)}")
                )
                continue
            rows.append((reader.line_num, dict(zip(header, cells))))
    finally:
        if isinstance(source, (str, os.PathLike)):
            stream.close()
        elif not isinstance(source, io.TextIOBase):
            stream.detach()

    dropped = set(config.drop_columns)
    other = [c for c in header if c not in dropped and c not in NESTED_COLUMNS]
    numeric_cols = []
    for col in other:
        if col in config.categorical_columns:
            continue
        try:
            for _, row in rows:
                _to_float(row[col])
        except ValueError:
            continue
        numeric_cols.append(col)
    categorical_cols = [c for c in other if c not in numeric_cols]

    records = []
    for line, row in rows:
        texts = {col: row.get(col, "") for col in NESTED_COLUMNS}
        try:
            for col in ("resource_request",) + USAGE_COLUMNS:
                parse_resource_request(texts[col])
            for col in DISTRIBUTION_COLUMNS:
                parse_float_array(texts[col])
        except ParseError as exc:
            skipped.append(RowError(line, str(exc)))
            continue
        records.append(
            RawJobRecord(
                **{f"{col}_text": texts[col] for col in NESTED_COLUMNS},
                categorical={c: row[c].strip() for c in categorical_cols},
                numeric={c: _to_float(row[c]) for c in numeric_cols},
            )
        )
    skipped.sort(key=lambda e: e.line)
    return ParsedTrace(records=records, skipped=skipped, source=name)


# --------------------------------------------------------------------------
# record -> flat numeric features


def _fill(value, missing_fill):
    return missing_fill if value is None or math.isnan(value) else float(value)


def record_features(record, missing_fill=0.0):
    """All numeric features of one record except the categorical ones."""
    out = {}
    cpus, memory = parse_resource_request(record.resource_request_text, missing_fill)
    out["resource_request_cpus"] = cpus
    out["resource_request_memory"] = memory
    for col in USAGE_COLUMNS:
        out.update(decompose_usage(record.nested_text(col), col, missing_fill))
    for col in DISTRIBUTION_COLUMNS:
        values = parse_float_array(record.nested_text(col))
        out.update(summarize_distribution(values, missing_fill).as_features(col))
    for name, value in record.numeric.items():
        out[name] = _fill(value, missing_fill)
    return out


def preprocess(records, config=None, encoders=None):
    """Apply every cleaning step to ``records``.

    With ``encoders=None`` the frequency mappings are fitted on ``records``
    (categoricals above the cardinality threshold are dropped); pass the
    ``encoders`` of a previous call to encode new data consistently.
    """
    config = config or PreprocessConfig()
    records = list(records)
    rows = [record_features(r, config.missing_fill) for r in records]
    if encoders is None:
        encoders = {}
        columns = sorted({c for r in records for c in r.categorical})
        for col in columns:
            values = [r.categorical.get(col, "") for r in records]
            if len(set(values)) > config.low_cardinality_threshold:
                continue
            _, encoders[col] = frequency_encode(values)
    for col, mapping in sorted(encoders.items()):
        values = [r.categorical.get(col, "") for r in records]
        for row, encoded in zip(rows, apply_frequency_mapping(values, mapping)):
            row[f"{col}_freq"] = encoded
    return Preprocessed(rows=rows, encoders=encoders)


def preprocess_file(source, config=None):
    parsed = parse_trace_file(source, config)
    return parsed, preprocess(parsed.records, config)


# --------------------------------------------------------------------------
# intermediate format: JSON lines, one flat record per line


def write_records(rows, sink):
    """Write flat records as JSON lines; floats keep full precision."""
    lines = [json.dumps(row, sort_keys=True) + "\n" for row in rows]
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        sink.writelines(lines)


def read_records(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return read_records(fh)
    rows = []
    for n, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {n}: malformed record") from exc
        rows.append({k: float(v) for k, v in row.items()})
    return rows


def write_encoders(encoders, sink):
    with open(sink, "w", encoding="utf-8") as fh:
        json.dump(encoders, fh, sort_keys=True, indent=1)


def read_encoders(source):
    with open(source, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------------------
# synthetic traces

_EVENTS = ("FINISH", "KILL", "FAIL", "EVICT")
_EVENT_P = (0.6, 0.25, 0.1, 0.05)
_PRIORITIES = (0, 25, 100, 103, 200, 360)
_PRIORITY_P = (0.3, 0.2, 0.25, 0.1, 0.1, 0.05)
_CLUSTERS = tuple("abcdefgh")


def utilization_fraction(cpus, scheduling_class, priority, cycles_per_instruction):
    """Mean fraction of the CPU request a synthetic job actually uses.

    ``0.1 + 0.7 * sigmoid(1.2*(class - 1.5) + 0.01*(priority - 100))
    / (1 + 0.6*(cpi - 0.8)) * (1 - 0.25*tanh(cpus/20))``
    """
    z = 1.2 * (scheduling_class - 1.5) + 0.01 * (priority - 100.0)
    sig = 1.0 / (1.0 + np.exp(-z))
    stall = 1.0 + 0.6 * (cycles_per_instruction - 0.8)
    scale = 1.0 - 0.25 * np.tanh(cpus / 20.0)
    return 0.1 + 0.7 * sig / stall * scale


def _obj(cpu, memory):
    return "{" + f"'cpus': {cpu!r}, 'memory': {memory!r}" + "}"


def _arr(values):
    return "[" + ", ".join(repr(float(v)) for v in values) + "]"


def generate_synthetic_trace(n, seed, noise=0.08):
    """Generate ``n`` deterministic trace records.

    CPU requests are ``min(48, 0.5 * (1 + Pareto(1.1)))`` so roughly nine in ten
    jobs ask for fewer than 5 CPUs. The average CPU usage (the default target)
    is ``cpus * utilization_fraction(...) * (1 + u)`` with ``u`` uniform on
    ``[-noise, noise]``, so absolute noise grows with job size. The other usage
    fields and the two distribution arrays are noisy views of the same
    utilization fraction.
    """
    if n <= 0:
        return []
    rng = np.random.default_rng(seed)
    cpus = np.round(np.minimum(48.0, 0.5 * (1.0 + rng.pareto(1.1, n))), 4)
    memory = np.round(cpus * 0.004 * rng.uniform(0.5, 2.0, n), 7)
    sched = rng.choice(4, size=n, p=(0.4, 0.3, 0.2, 0.1))
    priority = rng.choice(_PRIORITIES, size=n, p=_PRIORITY_P)
    cpi = np.round(rng.uniform(0.8, 3.0, n), 4)
    assigned = np.round(memory * rng.uniform(0.6, 1.0, n), 7)
    page_cache = np.round(memory * rng.uniform(0.0, 0.2, n), 7)
    event = rng.choice(len(_EVENTS), size=n, p=_EVENT_P)
    cluster = rng.integers(0, len(_CLUSTERS), n)
    collection = rng.permutation(n) + 10_000
    instance = rng.integers(0, 5_000, n)

    frac = utilization_fraction(cpus, sched, priority, cpi)
    avg_cpu = cpus * frac * (1.0 + rng.uniform(-noise, noise, n))
    avg_mem = memory * rng.uniform(0.3, 0.9, n)
    max_cpu = cpus * rng.uniform(0.15, 1.0, n)
    max_mem = avg_mem * rng.uniform(1.0, 1.4, n)
    sample_cpu = cpus * frac * rng.uniform(0.2, 1.8, n)
    sample_mem = avg_mem * rng.uniform(0.7, 1.3, n)

    records = []
    for i in range(n):
        dist = np.sort(np.clip(frac[i] * (1.0 + 0.25 * rng.standard_normal(11)), 0.0, None))
        tail = np.sort(frac[i] * rng.uniform(1.2, 1.9, 9))
        records.append(
            RawJobRecord(
                resource_request_text=_obj(float(cpus[i]), float(memory[i])),
                average_usage_text=_obj(float(avg_cpu[i]), float(avg_mem[i])),
                maximum_usage_text=_obj(float(max_cpu[i]), float(max_mem[i])),
                random_sample_usage_text=_obj(float(sample_cpu[i]), float(sample_mem[i])),
                cpu_usage_distribution_text=_arr(dist),
                tail_cpu_usage_distribution_text=_arr(tail),
                categorical={
                    "collection_id": str(int(collection[i])),
                    "cluster": _CLUSTERS[cluster[i]],
                    "event": _EVENTS[event[i]],
                    "instance_index": str(int(instance[i])),
                },
                numeric={
                    "assigned_memory": float(assigned[i]),
                    "cycles_per_instruction": float(cpi[i]),
                    "page_cache_memory": float(page_cache[i]),
                    "priority": float(priority[i]),
                    "scheduling_class": float(sched[i]),
                },
            )
        )
    return records


def _fmt_cell(value):
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_trace_csv(records, sink):
    """Write records in the raw trace layout, drop-list columns included.

    Drop-list columns get deterministic placeholder values derived from the
    row index; they exist only so the written file looks like a raw trace.
    """
    records = list(records)
    categorical = sorted({c for r in records for c in r.categorical})
    numeric = sorted({c for r in records for c in r.numeric})
    header = list(DROP_COLUMNS) + list(NESTED_COLUMNS) + categorical + numeric

    def placeholder(col, i):
        return {
            "Unnamed:0": str(i),
            "time": str(600_000_000 + 300 * i),
            "machine_id": str(100_000 + (i * 7919) % 12_000),
            "constraint": "[]",
            "user": f"user{i % 97}",
            "collection_name": f"job-{i}",
            "collection_logical_name": f"logical-{i % 211}",
            "start_after_collection": "",
        }.get(col, "")

    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, r in enumerate(records):
            row = [placeholder(c, i) for c in DROP_COLUMNS]
            row += [r.nested_text(c) for c in NESTED_COLUMNS]
            row += [r.categorical.get(c, "") for c in categorical]
            row += [_fmt_cell(r.numeric.get(c, math.nan)) for c in numeric]
            writer.writerow(row)
    finally:
        if own:
            fh.close()
