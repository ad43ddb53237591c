"""Readers and writers for marker and force-plate TSV trials.

Marker files
    line 1: ``RATE<TAB><hz>``
    line 2: ``UNITS<TAB>mm`` or ``UNITS<TAB>m``
    line 3: ``MARKERS<TAB>name1<TAB>name2...``
    data  : one row per frame, ``time<TAB>x<TAB>y<TAB>z`` triplets per marker.
    An occluded sample is either a blank triplet (three empty fields) or an
    exact ``0<TAB>0<TAB>0`` triplet.  Positions are stored internally in
    metres; mm inputs are divided by 1000.

Force-plate files
    line 1: ``RATE<TAB><hz>``
    line 2: ``PLATES<TAB><n>``
    data  : ``time`` then ``Fx Fy Fz COPx COPy`` per plate (newtons, metres).

Both writers emit shortest round-trip float text (``repr``), so a
write/parse cycle reproduces the numeric payload bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "IngestConfig",
    "MarkerTrajectorySet",
    "ForcePlateSeries",
    "parse_marker_file",
    "write_marker_file",
    "parse_force_file",
    "write_force_file",
    "fill_gaps",
]

_UNIT_SCALES = {"m": 1.0, "mm": 1e-3}


@dataclass(frozen=True)
class IngestConfig:
    """Options shared by the file readers.

    expected_unit: require the marker file's UNITS tag to match ("m" or
        "mm"); None accepts either.
    noise_floor_n: vertical plate force below ``-noise_floor_n`` newtons is
        flagged as implausible but kept.
    max_gap_frames: largest interior occlusion run that ``fill_gaps`` will
        interpolate across.
    """

    expected_unit: str | None = None
    noise_floor_n: float = 5.0
    max_gap_frames: int = 10

    def __post_init__(self):
        if self.expected_unit is not None and self.expected_unit not in _UNIT_SCALES:
            raise InputError(
                f"expected_unit must be one of {sorted(_UNIT_SCALES)}, "
                f"got {self.expected_unit!r}"
            )
        if self.noise_floor_n < 0:
            raise InputError("noise_floor_n must be non-negative")
        if self.max_gap_frames < 0:
            raise InputError("max_gap_frames must be non-negative")


@dataclass
class MarkerTrajectorySet:
    """Uniformly sampled marker positions in metres.

    markers: mapping marker name -> (n_frames, 3) float array.
    missing: mapping marker name -> (n_frames,) bool; True marks occluded
        samples.  Positions are NaN exactly where missing, finite elsewhere.
    """

    sample_rate_hz: float
    markers: dict[str, np.ndarray]
    missing: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not self.markers:
            raise InputError("marker set is empty")
        if set(self.markers) != set(self.missing):
            raise InputError("markers and missing masks name different markers")
        n = None
        for name, pos in self.markers.items():
            pos = np.asarray(pos, dtype=float)
            if pos.ndim != 2 or pos.shape[1] != 3:
                raise InputError(f"marker {name!r}: positions must be (n_frames, 3)")
            mask = np.asarray(self.missing[name], dtype=bool)
            if mask.shape != (pos.shape[0],):
                raise InputError(f"marker {name!r}: missing mask length mismatch")
            if n is None:
                n = pos.shape[0]
            elif pos.shape[0] != n:
                raise InputError(f"marker {name!r}: frame count differs from others")
            if not np.all(np.isfinite(pos[~mask])):
                raise InputError(f"marker {name!r}: non-finite position in a present frame")
            self.markers[name] = pos
            self.missing[name] = mask
        if n == 0:
            raise InputError("marker trial has zero frames")

    @property
    def n_frames(self) -> int:
        return next(iter(self.markers.values())).shape[0]

    @property
    def marker_names(self) -> list[str]:
        return list(self.markers)

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.sample_rate_hz


@dataclass
class ForcePlateSeries:
    """Uniformly sampled per-plate forces (N) and centres of pressure (m).

    forces: (n_plates, n_frames, 3); cop: (n_plates, n_frames, 2).
    below_noise flags frames whose vertical force undershoots the noise
    floor; they are kept, not rejected.
    """

    sample_rate_hz: float
    forces: np.ndarray
    cop: np.ndarray
    noise_floor_n: float = 5.0
    below_noise: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.forces = np.asarray(self.forces, dtype=float)
        self.cop = np.asarray(self.cop, dtype=float)
        if self.forces.ndim != 3 or self.forces.shape[2] != 3:
            raise InputError("forces must be (n_plates, n_frames, 3)")
        if self.cop.shape != self.forces.shape[:2] + (2,):
            raise InputError("cop must be (n_plates, n_frames, 2)")
        if self.forces.shape[1] == 0:
            raise InputError("force trial has zero frames")
        if not (np.all(np.isfinite(self.forces)) and np.all(np.isfinite(self.cop))):
            raise InputError("force data contains non-finite values")
        if self.below_noise is None:
            self.below_noise = self.forces[:, :, 2] < -self.noise_floor_n
        self.below_noise = np.asarray(self.below_noise, dtype=bool)
        if self.below_noise.shape != self.forces.shape[:2]:
            raise InputError("below_noise mask shape mismatch")

    @property
    def n_plates(self) -> int:
        return self.forces.shape[0]

    @property
    def n_frames(self) -> int:
        return self.forces.shape[1]

    def total_force(self) -> np.ndarray:
        """Sum over plates, shape (n_frames, 3)."""
        return self.forces.sum(axis=0)

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.sample_rate_hz


def _read_lines(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    # tolerate a trailing newline; reject CRLF quietly by stripping \r
    return [ln.rstrip("\r") for ln in text.split("\n")]


def _header_value(lines: list[str], row: int, tag: str, path) -> str:
    if row >= len(lines):
        raise InputError(f"{path}: missing header line {row + 1} ({tag})")
    parts = lines[row].split("\t")
    if len(parts) < 2 or parts[0] != tag:
        raise InputError(
            f"{path}: header line {row + 1} must be '{tag}<TAB>value', got {lines[row]!r}"
        )
    return parts[1]


def _parse_rate(lines: list[str], path) -> float:
    raw = _header_value(lines, 0, "RATE", path)
    try:
        rate = float(raw)
    except ValueError as exc:
        raise InputError(f"{path}: RATE value {raw!r} is not a number") from exc
    if not rate > 0:
        raise InputError(f"{path}: RATE must be positive, got {rate}")
    return rate


def parse_marker_file(path, config: IngestConfig | None = None) -> MarkerTrajectorySet:
    """Parse a marker TSV file into a MarkerTrajectorySet (metres)."""
    config = config or IngestConfig()
    lines = _read_lines(path)
    rate = _parse_rate(lines, path)

    unit = _header_value(lines, 1, "UNITS", path)
    if unit not in _UNIT_SCALES:
        raise InputError(f"{path}: unknown unit tag {unit!r} (expected 'mm' or 'm')")
    if config.expected_unit is not None and unit != config.expected_unit:
        raise InputError(
            f"{path}: unit tag {unit!r} does not match expected {config.expected_unit!r}"
        )
    scale = _UNIT_SCALES[unit]

    if len(lines) < 3:
        raise InputError(f"{path}: missing header line 3 (MARKERS)")
    marker_parts = lines[2].split("\t")
    if marker_parts[0] != "MARKERS" or len(marker_parts) < 2:
        raise InputError(f"{path}: header line 3 must be 'MARKERS<TAB>name...'")
    names = marker_parts[1:]
    if len(set(names)) != len(names):
        raise InputError(f"{path}: duplicate marker names in header")

    n_cols = 1 + 3 * len(names)
    rows = [ln for ln in lines[3:] if ln != ""]
    if not rows:
        raise InputError(f"{path}: zero data frames")

    n = len(rows)
    pos = {name: np.empty((n, 3), dtype=float) for name in names}
    miss = {name: np.zeros(n, dtype=bool) for name in names}
    for r, ln in enumerate(rows):
        fields = ln.split("\t")
        if len(fields) != n_cols:
            raise InputError(
                f"{path}: data row {r + 1} has {len(fields)} columns, expected {n_cols}"
            )
        for m, name in enumerate(names):
            triplet = fields[1 + 3 * m : 4 + 3 * m]
            n_blank = sum(1 for f in triplet if f.strip() == "")
            if n_blank == 3:
                pos[name][r] = np.nan
                miss[name][r] = True
                continue
            if n_blank:
                raise InputError(
                    f"{path}: data row {r + 1}, marker {name!r}: "
                    "partially blank coordinate triplet"
                )
            try:
                x, y, z = (float(f) for f in triplet)
            except ValueError as exc:
                raise InputError(
                    f"{path}: data row {r + 1}, marker {name!r}: non-numeric value"
                ) from exc
            if x == 0.0 and y == 0.0 and z == 0.0:
                # all-zero triplet is the other occlusion convention
                pos[name][r] = np.nan
                miss[name][r] = True
            elif scale == 1.0:
                pos[name][r] = (x, y, z)
            else:
                # mm -> m, correctly-rounded division by 1000
                pos[name][r] = (x / 1000.0, y / 1000.0, z / 1000.0)
    return MarkerTrajectorySet(sample_rate_hz=rate, markers=pos, missing=miss)


def write_marker_file(path, traj: MarkerTrajectorySet) -> None:
    """Write a MarkerTrajectorySet as a TSV file in metres.

    Occluded frames become blank triplets, so parse(write(x)) restores the
    positions and the missing mask exactly.
    """
    names = traj.marker_names
    out = [f"RATE\t{traj.sample_rate_hz!r}", "UNITS\tm", "MARKERS\t" + "\t".join(names)]
    times = traj.times()
    for k in range(traj.n_frames):
        fields = [repr(float(times[k]))]
        for name in names:
            if traj.missing[name][k]:
                fields += ["", "", ""]
            else:
                fields += [repr(float(v)) for v in traj.markers[name][k]]
        out.append("\t".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def parse_force_file(path, config: IngestConfig | None = None) -> ForcePlateSeries:
    """Parse a force-plate TSV file (newtons / metres)."""
    config = config or IngestConfig()
    lines = _read_lines(path)
    rate = _parse_rate(lines, path)
    raw_plates = _header_value(lines, 1, "PLATES", path)
    try:
        n_plates = int(raw_plates)
    except ValueError as exc:
        raise InputError(f"{path}: PLATES value {raw_plates!r} is not an integer") from exc
    if n_plates < 1:
        raise InputError(f"{path}: PLATES must be >= 1, got {n_plates}")

    n_cols = 1 + 5 * n_plates
    rows = [ln for ln in lines[2:] if ln != ""]
    if not rows:
        raise InputError(f"{path}: zero data frames")

    n = len(rows)
    forces = np.empty((n_plates, n, 3), dtype=float)
    cop = np.empty((n_plates, n, 2), dtype=float)
    for r, ln in enumerate(rows):
        fields = ln.split("\t")
        if len(fields) != n_cols:
            raise InputError(
                f"{path}: data row {r + 1} has {len(fields)} columns, expected {n_cols}"
            )
        try:
            vals = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise InputError(f"{path}: data row {r + 1}: non-numeric value") from exc
        for p in range(n_plates):
            base = 5 * p
            forces[p, r] = vals[base : base + 3]
            cop[p, r] = vals[base + 3 : base + 5]
    return ForcePlateSeries(
        sample_rate_hz=rate,
        forces=forces,
        cop=cop,
        noise_floor_n=config.noise_floor_n,
    )


def write_force_file(path, series: ForcePlateSeries) -> None:
    """Write a ForcePlateSeries as a TSV file (bit-exact round trip)."""
    out = [f"RATE\t{series.sample_rate_hz!r}", f"PLATES\t{series.n_plates}"]
    times = series.times()
    for k in range(series.n_frames):
        fields = [repr(float(times[k]))]
        for p in range(series.n_plates):
            fields += [repr(float(v)) for v in series.forces[p, k]]
            fields += [repr(float(v)) for v in series.cop[p, k]]
        out.append("\t".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def fill_gaps(traj: MarkerTrajectorySet, max_gap_frames: int | None = None) -> MarkerTrajectorySet:
    """Linearly interpolate interior occlusion runs of <= max_gap_frames.

    Runs longer than the threshold, and runs touching the first or last
    frame (no bracketing sample on one side), are left missing.  Present
    frames are passed through untouched, so the output mask is a subset of
    the input mask.
    """
    if max_gap_frames is None:
        max_gap_frames = IngestConfig().max_gap_frames
    if max_gap_frames < 0:
        raise InputError("max_gap_frames must be non-negative")

    n = traj.n_frames
    new_pos = {}
    new_miss = {}
    for name in traj.marker_names:
        pos = traj.markers[name].copy()
        mask = traj.missing[name].copy()
        k = 0
        while k < n:
            if not mask[k]:
                k += 1
                continue
            start = k
            while k < n and mask[k]:
                k += 1
            end = k - 1  # inclusive run of missing frames
            length = end - start + 1
            if start == 0 or end == n - 1 or length > max_gap_frames:
                continue
            lo, hi = start - 1, end + 1
            span = hi - lo
            for j in range(start, end + 1):
                t = (j - lo) / span
                pos[j] = pos[lo] + (pos[hi] - pos[lo]) * t
            mask[start : end + 1] = False
        new_pos[name] = pos
        new_miss[name] = mask
    return MarkerTrajectorySet(
        sample_rate_hz=traj.sample_rate_hz, markers=new_pos, missing=new_miss
    )
