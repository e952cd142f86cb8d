"""Result records shared by every CLI command, with CSV and JSON writers/readers.

Both formats carry the same field names in the same order; empty CSV cells
and JSON ``null`` both mean "not applicable".
"""
import csv
from dataclasses import asdict, dataclass, fields
import io
import json
import os
import platform


@dataclass
class ResultRecord:
    command: str
    seed: int
    machine: str
    layer: str = None
    n: int = None
    k: int = None
    d: int = None
    o: int = None
    b: int = None
    ratio: float = None
    strategy: str = None
    p: int = None
    threads: int = None
    repetitions: int = None
    lower_median: float = None
    lower_iqr: float = None
    multiply_median: float = None
    multiply_iqr: float = None
    lift_median: float = None
    lift_iqr: float = None
    total_median: float = None
    total_iqr: float = None
    throughput: float = None
    footprint_bytes: int = None
    est_lower_elements: int = None
    est_gemm_flops: int = None
    est_lift_adds: int = None
    est_score: float = None
    model_winner: str = None
    measured_winner: str = None
    max_rel_error: float = None
    tolerance: float = None
    passed: bool = None
    device: str = None
    fraction: float = None
    makespan: float = None
    gap: float = None
    note: str = None

    def set_layer(self, name, layer):
        self.layer = name
        self.n, self.k, self.d, self.o, self.b = layer.n, layer.k, layer.d, layer.o, layer.b
        self.ratio = layer.ratio
        return self

    def set_timing(self, lower, multiply, lift, total):
        """Each argument is a ``timing.Summary``."""
        self.repetitions = total.reps
        self.lower_median, self.lower_iqr = lower.median, lower.iqr
        self.multiply_median, self.multiply_iqr = multiply.median, multiply.iqr
        self.lift_median, self.lift_iqr = lift.median, lift.iqr
        self.total_median, self.total_iqr = total.median, total.iqr
        return self

    def set_estimate(self, est):
        self.est_lower_elements = est.lower_elements_written
        self.est_gemm_flops = est.gemm_flops
        self.est_lift_adds = est.lift_adds
        self.est_score = est.total_score
        return self


FIELDS = [f.name for f in fields(ResultRecord)]
_TYPES = {f.name: f.type for f in fields(ResultRecord)}


def machine_descriptor():
    return f"{platform.system()}-{platform.machine()}|cpus={os.cpu_count()}|py={platform.python_version()}"


def _to_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _from_cell(name, text):
    if text == "":
        return None
    kind = _TYPES[name]
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    if kind in (bool, "bool"):
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    return text


def to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for rec in records:
        writer.writerow([_to_cell(getattr(rec, name)) for name in FIELDS])
    return buf.getvalue()


def from_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != FIELDS:
        raise ValueError("CSV header does not match the result schema")
    return [ResultRecord(**{name: _from_cell(name, cell) for name, cell in zip(header, row)}) for row in reader]


def to_json(records):
    return json.dumps([asdict(rec) for rec in records], indent=1)


def from_json(text):
    return [ResultRecord(**{name: row[name] for name in FIELDS}) for row in json.loads(text)]


def dump(records, fmt="csv", path=None):
    text = to_csv(records) if fmt == "csv" else to_json(records)
    if path is None or str(path) == "-":
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return text
