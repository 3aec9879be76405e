"""Configuration, stage runners and artifact bookkeeping for the CLI.

Every stage writes its outputs plus a ``<stage>.meta.json`` sidecar with
the settings, the master seed and SHA-256 hashes of inputs and outputs.
Downstream stages check the hash of each file they consume against the
producing stage's sidecar and refuse to run on a mismatch.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hhtshm.decomposition import EemdSettings, ImfSet, SiftSettings, eemd
from hhtshm.detection import LagSpec, OnsetReport, detect_onset, residual_traces, train_emulators
from hhtshm.exceptions import HHTError
from hhtshm.frame import (
    LINEAR,
    MaterialLaw,
    RayleighSpec,
    ShearFrameModel,
    calibrate,
    eigen_modes,
    equal_strength_yield_drifts,
    simulate,
)
from hhtshm.hilbert import hht
from hhtshm.identification import (
    StiffnessEstimate,
    generate_training_set,
    identify,
    train_identifier,
    write_training_set,
)
from hhtshm.modal import ModalEstimate, estimate_modal, frequency_histogram
from hhtshm.rbf import RBFNetwork, TrainConfig
from hhtshm.timeseries import GroundMotionSpec, NoiseSpec, TimeSeries, child_seed, ground_motion, write_columns

# exit codes; documented in the README
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ARTIFACT = 3
EXIT_STAGE = {"simulate": 10, "decompose": 11, "hht": 12, "modal": 13, "detect": 14, "identify": 15}

STAGES = ("simulate", "decompose", "hht", "modal", "detect", "identify")


class ConfigError(ValueError):
    pass


class ArtifactError(RuntimeError):
    """Missing upstream artifact or hash mismatch."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------- config


PRESETS = {
    "calibrated": """
[run]
seed = 3

[frame]
masses = 8000, 8000, 8000
target_f1 = 1.0696
target_shape = 0.2964, 0.7037, 1.0
zeta = 0.05
material = linear

[excitation]
dt = 0.01
duration = 60
segments = burst:0:1:1.0:0, burst:10:11:1.0:0, burst:20:21:1.0:0, burst:30:31:1.0:0, burst:40:41:1.0:0, burst:50:51:1.0:0
seed = 3

[eemd]
noise_level = 1.0
ensemble_n = 500
seed = 11
shape_iters = 0

[modal]
window = 0, 60
smooth = 2.0

[detect]
enabled = false

[identify]
enabled = false
""",
    "damage": """
[run]
seed = 3

[frame]
masses = 8000, 8000, 8000
target_f1 = 1.0696
target_shape = 0.2964, 0.7037, 1.0
zeta = 0.05
material = bilinear
first_story_yield_drift = 0.0
upper_strength_factor = 1.5
degradation_factor = 0.91

[excitation]
dt = 0.01
duration = 90
segments = noise:0:25:0.5:0, pulse:25:27:0.45:1.0, burst:30:31:0.5:0, burst:40:41:0.5:0, burst:50:51:0.5:0, burst:60:61:0.5:0, burst:70:71:0.5:0, burst:80:81:0.5:0
seed = 3

[eemd]
noise_level = 1.0
ensemble_n = 500
seed = 11
shape_iters = 0

[modal]
window = 30, 90
smooth = 2.0

[detect]
train_window = 0, 15
baseline_window = 15, 25

[identify]
count = 100
""",
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _segments(text: str) -> tuple:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 5:
            raise ConfigError(f"segment {item!r} must be kind:start:end:amplitude:freq")
        kind, *nums = parts
        if kind not in ("noise", "pulse", "burst"):
            raise ConfigError(f"unknown segment kind {kind!r}")
        out.append((kind, *(float(v) for v in nums)))
    return tuple(out)


@dataclass(frozen=True)
class FrameConfig:
    masses: tuple
    story_k: tuple | None = None
    target_f1: float | None = None
    target_shape: tuple | None = None
    zeta: float = 0.05
    material: str = "linear"
    first_story_yield_drift: float = 0.0
    upper_strength_factor: float = 1.0
    degradation_factor: float = 0.91
    post_yield_ratio: float = 0.0


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    frame: FrameConfig
    record: str | None
    ground: GroundMotionSpec | None
    eemd: EemdSettings
    edge_trim: float = 0.05
    modal_window: tuple | None = None
    bin_width: float = 0.01
    window_len: float = 6.0
    window_stride: float = 1.0
    smooth: float = 2.0
    significance: float = 0.05
    tolerance: float = 0.2
    min_energy: float = 0.05
    detect_enabled: bool = True
    lag: LagSpec = field(default_factory=lambda: LagSpec(4, 3, 0, 3))
    emulator: TrainConfig = field(default_factory=lambda: TrainConfig(1, 1e-6, 1.0, 0, True))
    jitter: float = 0.01
    train_window: tuple = (0.0, 15.0)
    baseline_window: tuple = (15.0, 25.0)
    k_sigma: float = 6.0
    horizon: float = 0.5
    identify_enabled: bool = True
    count: int = 100
    frac_range: tuple = (0.5, 1.0)
    identifier: TrainConfig = field(default_factory=lambda: TrainConfig("all", 1e-10, 1.0, 0))
    use_localization: bool = True
    source_text: str = ""

    def echo(self) -> str:
        return self.source_text


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def _get(sec, key, conv, default):
    if key not in sec:
        return default
    raw = sec[key]
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _window(text: str) -> tuple:
    v = _floats(text)
    if len(v) != 2 or not v[1] > v[0]:
        raise ValueError("expected 'start, end' with end > start")
    return v


def load_config(text: str, seed_override: int | None = None) -> PipelineConfig:
    """Parse and fully validate an INI configuration."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if seed_override is not None:
        if not cp.has_section("run"):
            cp.add_section("run")
        cp["run"]["seed"] = str(seed_override)
    run = _section(cp, "run")
    seed = _get(run, "seed", int, 0)

    fr = _section(cp, "frame")
    if "masses" not in fr:
        raise ConfigError("[frame] masses is required")
    frame = FrameConfig(
        masses=_get(fr, "masses", _floats, None),
        story_k=_get(fr, "story_k", _floats, None),
        target_f1=_get(fr, "target_f1", float, None),
        target_shape=_get(fr, "target_shape", _floats, None),
        zeta=_get(fr, "zeta", float, 0.05),
        material=fr.get("material", "linear").strip(),
        first_story_yield_drift=_get(fr, "first_story_yield_drift", float, 0.0),
        upper_strength_factor=_get(fr, "upper_strength_factor", float, 1.0),
        degradation_factor=_get(fr, "degradation_factor", float, 0.91),
        post_yield_ratio=_get(fr, "post_yield_ratio", float, 0.0),
    )
    if frame.story_k is None and (frame.target_f1 is None or frame.target_shape is None):
        raise ConfigError("[frame] needs story_k or target_f1 + target_shape")
    if frame.material not in ("linear", "bilinear"):
        raise ConfigError("[frame] material must be 'linear' or 'bilinear'")
    if frame.material == "bilinear" and frame.first_story_yield_drift < 0:
        raise ConfigError("[frame] first_story_yield_drift must be >= 0 (0 = derive from the record)")
    if not 0 < frame.degradation_factor <= 1:
        raise ConfigError("[frame] degradation_factor must lie in (0, 1]")
    if frame.upper_strength_factor <= 0:
        raise ConfigError("[frame] upper_strength_factor must be positive")

    ex = _section(cp, "excitation")
    inp = _section(cp, "input")
    record = inp.get("accel") if inp else None
    ground = None
    if record is None:
        if "dt" not in ex or "duration" not in ex:
            raise ConfigError("[excitation] dt and duration are required without an [input] record")
        ground = GroundMotionSpec(
            dt=_get(ex, "dt", float, None),
            duration=_get(ex, "duration", float, None),
            segments=_get(ex, "segments", _segments, ()),
            seed=_get(ex, "seed", int, seed),
            band=_get(ex, "band", _floats, (0.2, 20.0)),
        )
        if not ground.dt > 0 or not ground.duration > ground.dt:
            raise ConfigError("[excitation] needs dt > 0 and duration > dt")

    em = _section(cp, "eemd")
    try:
        sift = SiftSettings(
            _get(em, "sd_threshold", float, 0.2),
            _get(em, "max_sift_iters", int, 10),
            _get(em, "max_imfs", int, 12),
            # capped rule only: extra shape sifting flattens the envelopes the mode shape is read from
            shape_iters=_get(em, "shape_iters", int, 0),
        )
        eemd_settings = EemdSettings(
            _get(em, "noise_level", float, 1.0),
            _get(em, "ensemble_n", int, 200),
            _get(em, "seed", int, seed),
            sift,
        )
    except ValueError as exc:
        raise ConfigError(f"[eemd] {exc}") from None

    ht = _section(cp, "hht")
    md = _section(cp, "modal")
    de = _section(cp, "detect")
    idn = _section(cp, "identify")
    n = len(frame.masses)
    try:
        lag = LagSpec(_get(de, "m", int, 4), n, 0, _get(de, "stride", int, 3))
        emulator = TrainConfig(
            _get(de, "n_centers", lambda v: v if v == "all" else int(v), 1),
            _get(de, "ridge", float, 1e-6),
            _get(de, "width_rule", float, 1.0),
            seed,
            _get(de, "linear_tail", _bool, True),
        )
        identifier = TrainConfig(
            "all", _get(idn, "ridge", float, 1e-10), _get(idn, "width_rule", float, 1.0), seed
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = PipelineConfig(
        seed=seed,
        frame=frame,
        record=record,
        ground=ground,
        eemd=eemd_settings,
        edge_trim=_get(ht, "edge_trim", float, 0.05),
        modal_window=_get(md, "window", _window, None),
        bin_width=_get(md, "bin_width", float, 0.01),
        window_len=_get(md, "window_len", float, 6.0),
        window_stride=_get(md, "stride", float, 1.0),
        smooth=_get(md, "smooth", float, _get(ht, "smooth", float, 2.0)),
        significance=_get(md, "significance", float, 0.05),
        tolerance=_get(md, "tolerance", float, 0.2),
        min_energy=_get(md, "min_energy", float, 0.05),
        detect_enabled=_get(de, "enabled", _bool, True),
        lag=lag,
        emulator=emulator,
        jitter=_get(de, "jitter", float, 0.01),
        train_window=_get(de, "train_window", _window, (0.0, 15.0)),
        baseline_window=_get(de, "baseline_window", _window, (15.0, 25.0)),
        k_sigma=_get(de, "k_sigma", float, 6.0),
        horizon=_get(de, "horizon", float, 0.5),
        identify_enabled=_get(idn, "enabled", _bool, True),
        count=_get(idn, "count", int, 100),
        frac_range=_get(idn, "frac_range", _floats, (0.5, 1.0)),
        identifier=identifier,
        use_localization=_get(idn, "use_localization", _bool, True),
        source_text=_normalized(cp),
    )
    checks = [
        (0 <= cfg.edge_trim < 0.5, "[hht] edge_trim must lie in [0, 0.5)"),
        (cfg.bin_width > 0, "[modal] bin_width must be positive"),
        (cfg.window_len > 0 and cfg.window_stride > 0, "[modal] window_len and stride must be positive"),
        (cfg.smooth >= 0, "[modal] smooth must be >= 0"),
        (0 < cfg.significance < 1, "[modal] significance must lie in (0, 1)"),
        (cfg.tolerance > 0, "[modal] tolerance must be positive"),
        (cfg.jitter >= 0, "[detect] jitter must be >= 0"),
        (cfg.k_sigma > 0 and cfg.horizon > 0, "[detect] k_sigma and horizon must be positive"),
        (cfg.count >= 10, "[identify] count must be >= 10"),
        (len(cfg.frac_range) == 2 and 0 < cfg.frac_range[0] <= cfg.frac_range[1] <= 1,
         "[identify] frac_range must satisfy 0 < lo <= hi <= 1"),
        (all(m > 0 for m in frame.masses), "[frame] masses must be positive"),
        (frame.story_k is None or len(frame.story_k) == n, "[frame] story_k must match masses"),
        (frame.target_shape is None or len(frame.target_shape) == n, "[frame] target_shape must match masses"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    return cfg


def _normalized(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ----------------------------------------------------------- artifacts


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_meta(out: Path, stage: str, cfg: PipelineConfig, settings: dict, inputs, outputs) -> None:
    meta = {
        "stage": stage,
        "seed": cfg.seed,
        "settings": settings,
        "inputs": {Path(p).name: sha256(p) for p in inputs},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
    }
    (out / f"{stage}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def require(out: Path, stage: str, name: str) -> Path:
    """Path of an upstream artifact after checking it against its sidecar."""
    path = out / name
    meta_path = out / f"{stage}.meta.json"
    if not path.exists():
        raise ArtifactError(f"{path}: missing; run the '{stage}' stage first")
    if not meta_path.exists():
        raise ArtifactError(f"{meta_path}: missing metadata sidecar")
    meta = json.loads(meta_path.read_text())
    expected = meta.get("outputs", {}).get(name)
    if expected is None:
        raise ArtifactError(f"{meta_path}: does not list {name}")
    if sha256(path) != expected:
        raise ArtifactError(f"{path}: content hash differs from {meta_path}; rerun '{stage}'")
    return path


def read_table(path: Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ArtifactError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ArtifactError(f"{path}:{lineno}: non-numeric value") from None
        if len(rows[-1]) != len(header):
            raise ArtifactError(f"{path}:{lineno}: expected {len(header)} columns")
    return header, np.array(rows)


def _series_from_table(data: np.ndarray) -> tuple[list[TimeSeries], float, float]:
    t = data[:, 0]
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if not dt > 0 or np.any(np.abs(steps - dt) > 1e-6 * dt):
        raise ArtifactError("time column is not uniformly spaced")
    t0 = float(t[0])
    return [TimeSeries(data[:, j], dt, t0) for j in range(1, data.shape[1])], dt, t0


# --------------------------------------------------------------- stages


def build_model(cfg: PipelineConfig, ground: TimeSeries | None = None) -> ShearFrameModel:
    fr = cfg.frame
    if fr.story_k is not None:
        k = np.asarray(fr.story_k, dtype=float)
    else:
        k = calibrate(fr.target_f1, fr.target_shape, fr.masses)
    damping = RayleighSpec(fr.zeta)
    if fr.material == "linear":
        return ShearFrameModel(tuple(fr.masses), tuple(k), LINEAR, damping)
    yd1 = fr.first_story_yield_drift
    if yd1 == 0:
        if ground is None:
            raise ConfigError("first_story_yield_drift = 0 needs a simulated record to derive it")
        yd1 = derive_yield_drift(ShearFrameModel(tuple(fr.masses), tuple(k), LINEAR, damping), ground, cfg)
    yd = np.array(equal_strength_yield_drifts(k, yd1))
    yd[1:] *= fr.upper_strength_factor
    law = MaterialLaw(tuple(yd), fr.post_yield_ratio, fr.degradation_factor)
    return ShearFrameModel(tuple(fr.masses), tuple(k), law, damping)


def derive_yield_drift(linear: ShearFrameModel, ground: TimeSeries, cfg: PipelineConfig, margin: float = 0.8):
    """First-story yield drift such that the baseline stays elastic.

    The peak linear story-1 drift up to the end of the baseline window is
    ``margin`` times the returned value.
    """
    res = simulate(linear, ground)
    end = cfg.baseline_window[1]
    d = res.drift[0]
    mask = d.time < end
    return float(np.max(np.abs(d.samples[mask])) / margin)


def stage_simulate(cfg: PipelineConfig, out: Path) -> dict:
    if cfg.ground is None:
        raise ConfigError("simulate needs an [excitation] section")
    ag = ground_motion(cfg.ground)
    model = build_model(cfg, ag)
    res = simulate(model, ag)
    t = ag.time
    n = model.n_stories
    files = {
        "ground.csv": (["t", "ag"], [t, ag.samples]),
        "accel.csv": (["t"] + [f"a{j + 1}" for j in range(n)], [t] + [a.samples for a in res.accel]),
        "drift.csv": (["t"] + [f"d{j + 1}" for j in range(n)], [t] + [d.samples for d in res.drift]),
    }
    written = []
    for name, (header, cols) in files.items():
        write_columns(out / name, header, cols)
        written.append(out / name)
    modes = eigen_modes(model)
    with (out / "eigen.csv").open("w") as fh:
        fh.write("mode,f_hz," + ",".join(f"phi{j + 1}" for j in range(n)) + "\n")
        for i, (f, phi) in enumerate(modes, start=1):
            fh.write(f"{i},{f:.10g}," + ",".join(f"{v:.10g}" for v in phi) + "\n")
    with (out / "excursions.csv").open("w") as fh:
        fh.write("story,t,new_k\n")
        for s, tt, kk in res.excursion_log:
            fh.write(f"{s + 1},{tt:.10g},{kk:.10g}\n")
    with (out / "yields.csv").open("w") as fh:
        fh.write("story,t\n")
        for s, tt in res.yield_log:
            fh.write(f"{s + 1},{tt:.10g}\n")
    with (out / "frame.json").open("w") as fh:
        json.dump(
            {
                "masses": list(model.masses),
                "story_k": [float(v) for v in model.story_k],
                "final_k": [float(v) for v in res.final_k],
                "yield_drifts": [float(v) for v in model.yield_drifts()],
                "degradation_factor": model.material.degradation_factor,
                "excursion_counts": res.excursion_counts(),
                "first_yield_time": res.first_yield_time(),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    written += [out / "eigen.csv", out / "excursions.csv", out / "yields.csv", out / "frame.json"]
    write_meta(out, "simulate", cfg, {"ground": asdict(cfg.ground), "frame": asdict(cfg.frame)}, [], written)
    return {"excursions": res.excursion_counts(), "first_yield": res.first_yield_time()}


def _accel_source(cfg: PipelineConfig, out: Path) -> Path:
    if cfg.record is not None:
        path = Path(cfg.record)
        if not path.exists():
            raise ArtifactError(f"{path}: input record not found")
        return path
    return require(out, "simulate", "accel.csv")


def load_accels(cfg: PipelineConfig, out: Path) -> tuple[list[TimeSeries], Path]:
    path = _accel_source(cfg, out)
    _, data = read_table(path)
    accels, _, _ = _series_from_table(data)
    if len(accels) != len(cfg.frame.masses):
        raise ArtifactError(f"{path}: {len(accels)} story columns, frame has {len(cfg.frame.masses)}")
    return accels, path


def _modal_segment(cfg: PipelineConfig, accels):
    if cfg.modal_window is None:
        return accels
    a, b = cfg.modal_window
    return [x.slice_time(a, b) for x in accels]


def stage_decompose(cfg: PipelineConfig, out: Path, n_jobs: int = 1) -> dict:
    accels, src = load_accels(cfg, out)
    written = []
    for j, x in enumerate(_modal_segment(cfg, accels)):
        imfs = eemd(x, cfg.eemd, n_jobs=n_jobs)
        arr = imfs.as_array()
        header = ["t"] + [f"imf{i + 1}" for i in range(len(imfs))] + ["residue"]
        path = out / f"imfs_story{j + 1}.csv"
        write_columns(path, header, [x.time] + list(arr), fmt="%.17g")
        written.append(path)
    settings = {"eemd": asdict(cfg.eemd), "modal_window": cfg.modal_window}
    write_meta(out, "decompose", cfg, settings, [src], written)
    return {"n_imfs": [_count_imfs(p) for p in written]}


def _count_imfs(path: Path) -> int:
    return len(Path(path).read_text().splitlines()[0].split(",")) - 2


def load_imf_sets(cfg: PipelineConfig, out: Path) -> tuple[list[ImfSet], list[Path]]:
    sets, paths = [], []
    for j in range(len(cfg.frame.masses)):
        path = require(out, "decompose", f"imfs_story{j + 1}.csv")
        _, data = read_table(path)
        t = data[:, 0]
        dt = float(np.mean(np.diff(t)))
        series = [TimeSeries(data[:, i], dt, float(t[0])) for i in range(1, data.shape[1])]
        sets.append(ImfSet(tuple(series[:-1]), series[-1], data.shape[0]))
        paths.append(path)
    return sets, paths


def stage_hht(cfg: PipelineConfig, out: Path) -> dict:
    sets, srcs = load_imf_sets(cfg, out)
    written = []
    for j, s in enumerate(sets):
        traces = [hht(c, cfg.edge_trim, cfg.smooth) for c in s.imfs]
        t = s.residue.time
        header, cols = ["t"], [t]
        for i, tr in enumerate(traces, start=1):
            header += [f"amp{i}", f"freq{i}"]
            cols += [tr.amplitude.samples, tr.frequency.samples]
        path = out / f"hht_story{j + 1}.csv"
        write_columns(path, header, cols)
        written.append(path)
        hpath = out / f"histogram_story{j + 1}.csv"
        with hpath.open("w") as fh:
            fh.write("imf,center_hz,count\n")
            for i, tr in enumerate(traces, start=1):
                h = frequency_histogram(tr, cfg.bin_width)
                for c, n in h.bins:
                    fh.write(f"{i},{c:.10g},{n}\n")
        written.append(hpath)
    settings = {"edge_trim": cfg.edge_trim, "smooth": cfg.smooth, "bin_width": cfg.bin_width}
    write_meta(out, "hht", cfg, settings, srcs, written)
    return {}


def modal_text(est: ModalEstimate) -> str:
    lines = [
        f"f1 = {est.f1:.6g}",
        f"f1_interval = {est.f1_interval[0]:.6g}, {est.f1_interval[1]:.6g}",
        "shape = " + ", ".join(f"{v:.6f}" for v in est.shape),
        f"window = {est.window[0]:.6g}, {est.window[1]:.6g}",
        "selected_imfs = " + "; ".join(",".join(str(i + 1) for i in sel) for sel in est.selected_imfs),
    ]
    return "\n".join(lines) + "\n"


def read_modal(path: Path) -> ModalEstimate:
    kv = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise ArtifactError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        sel = tuple(tuple(int(i) - 1 for i in part.split(",") if i.strip()) for part in kv["selected_imfs"].split(";"))
        return ModalEstimate(
            float(kv["f1"]),
            _floats(kv["f1_interval"]),
            np.array(_floats(kv["shape"])),
            _floats(kv["window"]),
            sel,
        )
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed modal file ({exc})") from None


def stage_modal(cfg: PipelineConfig, out: Path) -> ModalEstimate:
    sets, srcs = load_imf_sets(cfg, out)
    est = estimate_modal(
        sets,
        bin_width=cfg.bin_width,
        window_len=cfg.window_len,
        stride=cfg.window_stride,
        significance=cfg.significance,
        tolerance=cfg.tolerance,
        edge_trim=cfg.edge_trim,
        smooth=cfg.smooth,
        min_energy=cfg.min_energy,
    )
    path = out / "modal.txt"
    path.write_text(modal_text(est))
    rpath = out / "ratio_traces.csv"
    t = est.ratio_traces[0].time
    write_columns(rpath, ["t"] + [f"ratio{j + 1}" for j in range(len(est.ratio_traces))],
                  [t] + [r.samples for r in est.ratio_traces])
    settings = {
        "bin_width": cfg.bin_width,
        "window_len": cfg.window_len,
        "stride": cfg.window_stride,
        "smooth": cfg.smooth,
        "significance": cfg.significance,
        "tolerance": cfg.tolerance,
        "min_energy": cfg.min_energy,
    }
    write_meta(out, "modal", cfg, settings, srcs, [path, rpath])
    return est


def read_onset(path: Path) -> OnsetReport:
    kv = dict(
        (k.strip(), v.strip())
        for k, v in (line.split("=", 1) for line in Path(path).read_text().splitlines() if "=" in line)
    )
    try:
        onset = None if kv["onset_time"] == "none" else float(kv["onset_time"])
        stories = tuple(int(s) - 1 for s in kv["damaged_stories"].split(",") if s.strip())
        triggers = _floats(kv["trigger_values"])
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed onset file ({exc})") from None
    return OnsetReport(onset, stories, triggers)


def stage_detect(cfg: PipelineConfig, out: Path) -> OnsetReport:
    accels, src = load_accels(cfg, out)
    lag = LagSpec(cfg.lag.m, len(accels), 0, cfg.lag.stride)
    nets = train_emulators(accels, lag, cfg.train_window, cfg.emulator, NoiseSpec(cfg.jitter, cfg.seed))
    traces = residual_traces(accels, nets, lag, cfg.baseline_window)
    report = detect_onset(traces, cfg.k_sigma, cfg.horizon)
    rpath = out / "residuals.csv"
    header, cols = ["t"], [accels[0].time]
    for j, tr in enumerate(traces, start=1):
        header += [f"abs{j}", f"cum{j}", f"detrended{j}"]
        cols += [tr.absolute.samples, tr.cumulative.samples, tr.detrended_cumulative.samples]
    write_columns(rpath, header, cols)
    opath = out / "onset.txt"
    opath.write_text(report.to_text())
    written = [rpath, opath]
    for j, net in enumerate(nets, start=1):
        p = out / f"emulator_story{j}.json"
        net.save(p)
        written.append(p)
    settings = {
        "lag": asdict(lag),
        "emulator": asdict(cfg.emulator),
        "jitter": cfg.jitter,
        "train_window": cfg.train_window,
        "baseline_window": cfg.baseline_window,
        "k_sigma": cfg.k_sigma,
        "horizon": cfg.horizon,
        "window_nrmse": [net.window_nrmse_ for net in nets],
    }
    write_meta(out, "detect", cfg, settings, [src], written)
    return report


def stage_identify(cfg: PipelineConfig, out: Path) -> StiffnessEstimate:
    mpath = require(out, "modal", "modal.txt")
    modal = read_modal(mpath)
    inputs = [mpath]
    restrict = None
    if cfg.use_localization and cfg.detect_enabled:
        opath = require(out, "detect", "onset.txt")
        inputs.append(opath)
        onset = read_onset(opath)
        if onset.damaged_stories:
            restrict = onset.damaged_stories
    reference = None
    frame_path = out / "frame.json"
    if cfg.record is None and frame_path.exists():
        require(out, "simulate", "frame.json")
        reference = json.loads(frame_path.read_text())["final_k"]
        inputs.append(frame_path)
    nominal = build_model(_as_linear(cfg))
    patterns = generate_training_set(nominal, cfg.count, cfg.frac_range, restrict, cfg.seed)
    tpath = out / "training_set.csv"
    write_training_set(tpath, patterns)
    net = train_identifier(patterns, cfg.identifier)
    npath = out / "identifier.json"
    net.save(npath)
    est = identify(net, modal, nominal, reference)
    spath = out / "stiffness.txt"
    spath.write_text(est.to_text())
    settings = {
        "count": cfg.count,
        "frac_range": cfg.frac_range,
        "restrict_to": restrict,
        "identifier": asdict(cfg.identifier),
    }
    write_meta(out, "identify", cfg, settings, inputs, [tpath, npath, spath])
    return est


def _as_linear(cfg: PipelineConfig) -> PipelineConfig:
    from dataclasses import replace

    return replace(cfg, frame=replace(cfg.frame, material="linear"))


# ------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class DamageReport:
    onset: OnsetReport | None
    modal: ModalEstimate
    stiffness: StiffnessEstimate | None
    config_echo: str

    def to_text(self) -> str:
        parts = ["# damage report", ""]
        parts.append("[detection]")
        if self.onset is None:
            parts.append("enabled = false")
        else:
            parts.append(self.onset.to_text().rstrip())
        parts += ["", "[modal]", modal_text(self.modal).rstrip(), "", "[stiffness]"]
        parts.append("enabled = false" if self.stiffness is None else self.stiffness.to_text().rstrip())
        parts += ["", "# configuration echo", self.config_echo.rstrip(), ""]
        return "\n".join(parts)


def run_stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ArtifactError, ConfigError):
        raise
    except (HHTError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, out: Path, n_jobs: int = 1) -> DamageReport:
    """All stages in order; writes ``report.txt`` and ``timings.txt``."""
    out.mkdir(parents=True, exist_ok=True)
    timings = {}

    def timed(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        result = run_stage(name, fn, *args, **kwargs)
        timings[name] = time.perf_counter() - t0
        return result

    if cfg.record is None:
        timed("simulate", stage_simulate, cfg, out)
    timed("decompose", stage_decompose, cfg, out, n_jobs)
    timed("hht", stage_hht, cfg, out)
    modal = timed("modal", stage_modal, cfg, out)
    onset = timed("detect", stage_detect, cfg, out) if cfg.detect_enabled else None
    stiffness = timed("identify", stage_identify, cfg, out) if cfg.identify_enabled else None
    report = DamageReport(onset, modal, stiffness, cfg.echo())
    (out / "report.txt").write_text(report.to_text())
    # timings vary between runs, so they live outside the reproducible report
    (out / "timings.txt").write_text("".join(f"{k} = {v:.3f}\n" for k, v in timings.items()))
    return report


def preset_text(name: str) -> str:
    try:
        return PRESETS[name].lstrip()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


def stage_seed(master: int, k: int) -> int:
    return int(child_seed(master, k).generate_state(1)[0])
