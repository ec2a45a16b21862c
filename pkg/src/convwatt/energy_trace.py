"""Power traces, layer annotations and per-layer energy.

Energy over a window is the right-endpoint sum of power samples: the sample
at ``t[i+1]`` is charged for the interval ``(t[i], t[i+1]]``. Intervals that
straddle a window edge contribute only their overlapping part, so energies of
adjacent windows add up to the energy of their union.

Units: timestamps in microseconds, power in milliwatts, energy in millijoules.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import FeatureVector

log = logging.getLogger(__name__)

US_PER_S = 1_000_000.0
# mW * us -> mJ
_MW_US_TO_MJ = 1e-6

UNATTRIBUTED = "(unattributed)"


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class PowerTrace:
    timestamps_us: np.ndarray
    power_mw: np.ndarray
    nominal_rate: float = 1000.0

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps_us, dtype=float)
        p = np.asarray(self.power_mw, dtype=float)
        if t.ndim != 1 or t.shape != p.shape:
            raise TraceError("timestamps and power must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise TraceError("trace contains non-finite values")
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            raise TraceError(f"timestamps not strictly increasing at sample {bad[0] + 1}")
        if np.any(p < 0):
            raise TraceError(f"negative power at sample {int(np.flatnonzero(p < 0)[0])}")
        object.__setattr__(self, "timestamps_us", t)
        object.__setattr__(self, "power_mw", p)

    def __len__(self) -> int:
        return len(self.timestamps_us)

    @property
    def start(self) -> float:
        return float(self.timestamps_us[0])

    @property
    def end(self) -> float:
        return float(self.timestamps_us[-1])

    @property
    def duration_s(self) -> float:
        return (self.end - self.start) / US_PER_S


@dataclass(frozen=True)
class Annotation:
    layer_name: str
    layer_kind: str
    begin_us: float
    end_us: float
    run_id: int = 0

    @property
    def duration_s(self) -> float:
        return (self.end_us - self.begin_us) / US_PER_S


@dataclass(frozen=True)
class AnnotationLog:
    entries: tuple[Annotation, ...]

    def __post_init__(self) -> None:
        for i, entry in enumerate(self.entries):
            if not entry.begin_us < entry.end_us:
                raise TraceError(
                    f"annotation {i} ({entry.layer_name!r}): end {entry.end_us} <= begin {entry.begin_us}"
                )
        by_run: dict[int, list[Annotation]] = {}
        for entry in self.entries:
            by_run.setdefault(entry.run_id, []).append(entry)
        for run_id, entries in by_run.items():
            entries = sorted(entries, key=lambda e: e.begin_us)
            for a, b in zip(entries, entries[1:]):
                if b.begin_us < a.end_us:
                    raise TraceError(
                        f"run {run_id}: annotations {a.layer_name!r} and {b.layer_name!r} overlap"
                    )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def run_ids(self) -> list[int]:
        return sorted({e.run_id for e in self.entries})


@dataclass(frozen=True)
class EnergyRow:
    network: str
    layer_kind: str
    layer_name: str
    energy_mj: float
    features: FeatureVector | None = None


@dataclass
class EnergyDataset:
    """Feature/energy rows measured under one hardware-software combination."""

    rows: list[EnergyRow]
    provenance: str = ""
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.feature_names and self.rows and self.rows[0].features is not None:
            self.feature_names = self.rows[0].features.names
        for row in self.rows:
            names = row.features.names if row.features is not None else ()
            if names != self.feature_names:
                raise TraceError(f"row {row.network}/{row.layer_name} has a different feature schema")
            if not row.energy_mj > 0:
                raise TraceError(f"row {row.network}/{row.layer_name}: energy must be positive")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy_mj for r in self.rows], dtype=float)

    @property
    def networks(self) -> list[str]:
        return sorted({r.network for r in self.rows})

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = tuple(names) if names is not None else self.feature_names
        idx = [self.feature_names.index(n) for n in names]
        if not self.rows:
            return np.zeros((0, len(idx)))
        return np.array([[float(r.features.values[i]) for i in idx] for r in self.rows])  # type: ignore[union-attr]

    def subset(self, indices: Iterable[int]) -> EnergyDataset:
        return EnergyDataset([self.rows[i] for i in indices], self.provenance, self.feature_names)

    def of_kind(self, kind: str) -> EnergyDataset:
        return EnergyDataset(
            [r for r in self.rows if r.layer_kind == kind], self.provenance, self.feature_names
        )


# ---------------------------------------------------------------------------
# CSV ingestion


def _source_text(source) -> str:
    """Path, file object, or literal CSV text (anything containing a newline)."""
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, str):
        return source if "\n" in source else Path(source).read_text(encoding="utf-8")
    return source.read()


def _read_csv(source) -> tuple[list[str], list[tuple[int, list[str]]], dict[str, str]]:
    """Return header, ``(line_no, fields)`` rows and ``# key=value`` directives."""
    text = _source_text(source)
    directives: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    for line_no, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        if fields[0].lstrip().startswith("#"):
            body = ",".join(fields).lstrip("# ").strip()
            if "=" in body:
                key, value = body.split("=", 1)
                directives[key.strip()] = value.strip()
            continue
        if header is None:
            header = [f.strip() for f in fields]
            continue
        rows.append((line_no, [f.strip() for f in fields]))
    if header is None:
        raise TraceError("empty CSV")
    return header, rows, directives


def _time_scale(header: list[str], stem: str) -> tuple[int, float]:
    for suffix, scale in (("_us", 1.0), ("_s", US_PER_S)):
        if stem + suffix in header:
            return header.index(stem + suffix), scale
    raise TraceError(f"CSV header lacks a {stem}_us or {stem}_s column")


def _float(value: str, line_no: int, what: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise TraceError(f"line {line_no}: malformed {what} {value!r}") from None
    if not math.isfinite(out):
        raise TraceError(f"line {line_no}: non-finite {what}")
    return out


def load_power_trace(source) -> PowerTrace:
    """Read a ``timestamp_us,power_mw`` (or ``timestamp_s,...``) CSV.

    A ``# nominal_rate=<Hz>`` comment line overrides the default 1 kHz.
    """
    header, rows, directives = _read_csv(source)
    t_col, scale = _time_scale(header, "timestamp")
    if "power_mw" not in header:
        raise TraceError("CSV header lacks a power_mw column")
    p_col = header.index("power_mw")
    t = np.empty(len(rows))
    p = np.empty(len(rows))
    prev = -math.inf
    for k, (line_no, fields) in enumerate(rows):
        if len(fields) != len(header):
            raise TraceError(f"line {line_no}: expected {len(header)} fields, got {len(fields)}")
        t[k] = _float(fields[t_col], line_no, "timestamp") * scale
        p[k] = _float(fields[p_col], line_no, "power")
        if t[k] <= prev:
            raise TraceError(f"line {line_no}: non-monotonic timestamp {fields[t_col]}")
        if p[k] < 0:
            raise TraceError(f"line {line_no}: negative power {fields[p_col]}")
        prev = t[k]
    rate = float(directives.get("nominal_rate", 1000.0))
    return PowerTrace(t, p, nominal_rate=rate)


def load_annotations(source) -> AnnotationLog:
    """Read a ``layer_name,layer_kind,begin_us,end_us,run_id`` CSV."""
    header, rows, _ = _read_csv(source)
    for col in ("layer_name", "layer_kind"):
        if col not in header:
            raise TraceError(f"annotation header lacks {col}")
    b_col, b_scale = _time_scale(header, "begin")
    e_col, e_scale = _time_scale(header, "end")
    r_col = header.index("run_id") if "run_id" in header else None
    entries = []
    for line_no, fields in rows:
        if len(fields) != len(header):
            raise TraceError(f"line {line_no}: expected {len(header)} fields, got {len(fields)}")
        begin = _float(fields[b_col], line_no, "begin") * b_scale
        end = _float(fields[e_col], line_no, "end") * e_scale
        if not begin < end:
            raise TraceError(f"line {line_no}: end {fields[e_col]} <= begin {fields[b_col]}")
        run_id = 0
        if r_col is not None:
            try:
                run_id = int(fields[r_col])
            except ValueError:
                raise TraceError(f"line {line_no}: malformed run_id {fields[r_col]!r}") from None
        entries.append(
            Annotation(
                fields[header.index("layer_name")],
                fields[header.index("layer_kind")],
                begin,
                end,
                run_id,
            )
        )
    return AnnotationLog(tuple(entries))


def write_power_trace(trace: PowerTrace, fh) -> None:
    fh.write(f"# nominal_rate={trace.nominal_rate:g}\n")
    fh.write("timestamp_us,power_mw\n")
    for t, p in zip(trace.timestamps_us.tolist(), trace.power_mw.tolist()):
        fh.write(f"{t:.0f},{p!r}\n" if float(t).is_integer() else f"{t!r},{p!r}\n")


def write_annotations(log_: AnnotationLog, fh) -> None:
    fh.write("layer_name,layer_kind,begin_us,end_us,run_id\n")
    for e in log_:
        fh.write(f"{e.layer_name},{e.layer_kind},{e.begin_us:.0f},{e.end_us:.0f},{e.run_id}\n")


# ---------------------------------------------------------------------------
# Integration


def integrate_energy(trace: PowerTrace, begin_us: float, end_us: float) -> float:
    """Energy (mJ) drawn in ``[begin_us, end_us]``.

    Each sample interval ``(t[i], t[i+1]]`` is charged ``P[i+1]`` times the
    length of its overlap with the window.

    Raises
    ------
    TraceError
        For a degenerate window, a window outside the trace, or a trace of
        fewer than two samples.
    """
    if len(trace) < 2:
        raise TraceError("integration needs at least 2 samples")
    if not begin_us < end_us:
        raise TraceError(f"degenerate window [{begin_us}, {end_us}]")
    t = trace.timestamps_us
    if end_us <= t[0] or begin_us >= t[-1]:
        raise TraceError(
            f"window [{begin_us}, {end_us}] lies outside trace span [{t[0]}, {t[-1]}]"
        )
    lo = np.maximum(t[:-1], begin_us)
    hi = np.minimum(t[1:], end_us)
    dt = np.clip(hi - lo, 0.0, None)
    return float(np.dot(trace.power_mw[1:], dt)) * _MW_US_TO_MJ


def total_energy(trace: PowerTrace) -> float:
    return integrate_energy(trace, trace.start, trace.end)


@dataclass(frozen=True)
class LayerEnergy:
    layer_name: str
    layer_kind: str
    run_id: int
    begin_us: float
    end_us: float
    energy_mj: float

    @property
    def time_s(self) -> float:
        return (self.end_us - self.begin_us) / US_PER_S


@dataclass(frozen=True)
class LayerEnergySummary:
    layer_name: str
    layer_kind: str
    runs: int
    mean_energy_mj: float
    std_energy_mj: float
    mean_time_s: float
    std_time_s: float


@dataclass
class LayerEnergyResult:
    measurements: list[LayerEnergy]
    skipped: int = 0

    def summary(self) -> list[LayerEnergySummary]:
        """Mean and sample standard deviation over runs, per layer.

        A layer seen in a single run gets a standard deviation of 0.
        """
        groups: dict[tuple[str, str], list[LayerEnergy]] = {}
        for m in self.measurements:
            groups.setdefault((m.layer_name, m.layer_kind), []).append(m)
        out = []
        for (name, kind), ms in groups.items():
            e = np.array([m.energy_mj for m in ms])
            t = np.array([m.time_s for m in ms])
            out.append(
                LayerEnergySummary(
                    name,
                    kind,
                    len(ms),
                    float(e.mean()),
                    float(e.std(ddof=1)) if len(ms) > 1 else 0.0,
                    float(t.mean()),
                    float(t.std(ddof=1)) if len(ms) > 1 else 0.0,
                )
            )
        return out


def per_layer_energy(trace: PowerTrace, annotations: AnnotationLog) -> LayerEnergyResult:
    """Integrate the trace over every annotation window.

    Windows not fully inside the trace span are skipped with a warning; the
    number skipped is returned in the result.
    """
    out: list[LayerEnergy] = []
    skipped = 0
    for entry in annotations:
        if entry.begin_us < trace.start or entry.end_us > trace.end:
            skipped += 1
            log.warning(
                "annotation %r (run %d) [%g, %g] outside trace span [%g, %g]; skipped",
                entry.layer_name,
                entry.run_id,
                entry.begin_us,
                entry.end_us,
                trace.start,
                trace.end,
            )
            continue
        energy = integrate_energy(trace, entry.begin_us, entry.end_us)
        out.append(
            LayerEnergy(entry.layer_name, entry.layer_kind, entry.run_id, entry.begin_us, entry.end_us, energy)
        )
    if skipped:
        log.warning("%d of %d annotations skipped", skipped, len(annotations))
    return LayerEnergyResult(out, skipped)


# ---------------------------------------------------------------------------
# Layer-type breakdown


@dataclass(frozen=True)
class BreakdownRow:
    kind: str
    energy_mj: float
    time_s: float
    energy_pct: float
    time_pct: float


@dataclass(frozen=True)
class Breakdown:
    rows: tuple[BreakdownRow, ...]
    total_energy_mj: float
    total_time_s: float

    def __getitem__(self, kind: str) -> BreakdownRow:
        for row in self.rows:
            if row.kind == kind:
                return row
        raise KeyError(kind)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer_kind", "energy_mj", "time_s", "energy_pct", "time_pct"])
        for r in self.rows:
            w.writerow([r.kind, f"{r.energy_mj:.4f}", f"{r.time_s:.6f}", f"{r.energy_pct:.2f}", f"{r.time_pct:.2f}"])
        w.writerow(["Total", f"{self.total_energy_mj:.4f}", f"{self.total_time_s:.6f}", "100.00", "100.00"])
        return buf.getvalue()


def layer_type_breakdown(
    rows: Iterable[tuple[str, float, float]],
    total_energy_mj: float | None = None,
    total_time_s: float | None = None,
) -> Breakdown:
    """Summed energy and time per layer kind, with shares of the total.

    ``rows`` are ``(kind, energy_mj, time_s)`` triples. Kinds keep the order of
    first appearance. When a measured inference total larger than the summed
    rows is given (time between annotated layers), the remainder is reported
    as an ``(unattributed)`` row so that the shares still add up to 100.
    """
    energy: dict[str, float] = {}
    time: dict[str, float] = {}
    for kind, e, t in rows:
        energy[kind] = energy.get(kind, 0.0) + float(e)
        time[kind] = time.get(kind, 0.0) + float(t)
    if not energy:
        raise TraceError("breakdown needs at least one row")

    summed_e = math.fsum(energy.values())
    summed_t = math.fsum(time.values())
    total_e = summed_e if total_energy_mj is None else float(total_energy_mj)
    total_t = summed_t if total_time_s is None else float(total_time_s)
    tol_e = 1e-9 * max(abs(total_e), 1.0)
    tol_t = 1e-9 * max(abs(total_t), 1.0)
    if total_e < summed_e - tol_e or total_t < summed_t - tol_t:
        raise TraceError("declared total is smaller than the sum of the rows")
    rest_e, rest_t = total_e - summed_e, total_t - summed_t
    if rest_e > tol_e or rest_t > tol_t:
        energy[UNATTRIBUTED] = max(rest_e, 0.0)
        time[UNATTRIBUTED] = max(rest_t, 0.0)

    out = tuple(
        BreakdownRow(
            kind,
            energy[kind],
            time[kind],
            100.0 * energy[kind] / total_e if total_e > 0 else 0.0,
            100.0 * time[kind] / total_t if total_t > 0 else 0.0,
        )
        for kind in energy
    )
    return Breakdown(out, total_e, total_t)


def breakdown_from_trace(trace: PowerTrace, annotations: AnnotationLog) -> Breakdown:
    """Breakdown of one traced inference, averaged over runs.

    Per-kind energies and times are run-averaged; the total is the energy of
    the whole trace divided by the number of runs, so time spent outside any
    annotation appears as the unattributed share.
    """
    result = per_layer_energy(trace, annotations)
    runs = max(len({m.run_id for m in result.measurements}), 1)
    rows = [(m.layer_kind, m.energy_mj / runs, m.time_s / runs) for m in result.measurements]
    return layer_type_breakdown(
        rows,
        total_energy_mj=total_energy(trace) / runs,
        total_time_s=trace.duration_s / runs,
    )


# ---------------------------------------------------------------------------
# Energy dataset CSV

DATASET_COLUMNS = ("network", "layer_kind", "layer_name", "energy_mj")


def _number(value: str, line_no: int, what: str):
    try:
        return int(value)
    except ValueError:
        return _float(value, line_no, what)


def load_energy_dataset(source, provenance: str | None = None) -> EnergyDataset:
    """Read ``network,layer_kind,layer_name,energy_mj,<feature>...`` rows.

    Every column after ``energy_mj`` is a feature. A ``# provenance=<label>``
    comment line sets the dataset provenance unless ``provenance`` is given.
    """
    header, rows, directives = _read_csv(source)
    if tuple(header[:4]) != DATASET_COLUMNS:
        raise TraceError(f"dataset header must start with {','.join(DATASET_COLUMNS)}")
    names = tuple(header[4:])
    out = []
    for line_no, fields in rows:
        if len(fields) != len(header):
            raise TraceError(f"line {line_no}: expected {len(header)} fields, got {len(fields)}")
        energy = _float(fields[3], line_no, "energy")
        if energy <= 0:
            raise TraceError(f"line {line_no}: energy must be positive")
        values = tuple(_number(v, line_no, "feature") for v in fields[4:])
        out.append(
            EnergyRow(
                fields[0],
                fields[1],
                fields[2],
                energy,
                FeatureVector(names, values, label=fields[2]),  # type: ignore[arg-type]
            )
        )
    label = provenance if provenance is not None else directives.get("provenance", "")
    return EnergyDataset(out, label, names)


def write_energy_dataset(dataset: EnergyDataset, fh) -> None:
    if dataset.provenance:
        fh.write(f"# provenance={dataset.provenance}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(DATASET_COLUMNS) + list(dataset.feature_names))
    for r in dataset.rows:
        values = r.features.values if r.features is not None else ()
        w.writerow([r.network, r.layer_kind, r.layer_name, repr(float(r.energy_mj))] + [str(v) for v in values])
