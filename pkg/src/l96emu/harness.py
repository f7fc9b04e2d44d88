"""End-to-end experiments: generate data, train, evaluate, climate runs, sweeps.

Every command works inside one output directory with fixed file names and
stamps each CSV with the config hash and seed. Emulators only ever receive
rows of the standardized X series.
"""
import csv
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ann, esn, lstm, metrics, storage
from ._accel import backend
from .config import ExperimentConfig
from .dataset import SplitSpec, delta_pairs, embed, make_splits, splits_from_starts
from .dynamics import ModelParams, generate_trajectory, random_initial_state
from .errors import (CapacityError, ConfigError, DegenerateDataError, DivergenceError,
                     FormatError, L96EmuError)

log = logging.getLogger("l96emu")

TRAJECTORY = "trajectory.bin"
SPLITS = "splits.json"
CHECKPOINT = "model.ckpt"
ERRORS = "errors.csv"
HORIZONS = "horizons.csv"
TRAIN_LOG = "train_log.csv"
LOG = "log.txt"


# ---------------------------------------------------------------------------
# plumbing


def _attach_log(out_dir):
    path = Path(out_dir) / LOG
    for h in log.handlers:
        if isinstance(h, logging.FileHandler) and Path(h.baseFilename) == path.resolve():
            return
    handler = logging.FileHandler(path)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)


def _prepare(cfg: ExperimentConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _attach_log(cfg.out_dir)


def provenance(cfg: ExperimentConfig):
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed}


def write_csv(path, columns, rows, cfg: ExperimentConfig):
    """CSV with a leading ``# config_hash=... seed=...`` comment line."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in provenance(cfg).items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
    return Path(path)


def read_csv(path):
    """Rows of a report CSV as dicts (the provenance comment is skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_provenance(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    return dict(item.split("=", 1) for item in first[1:].split())


def _map(fn, items, threads):
    # ordered results regardless of completion order
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def model_params(cfg: ExperimentConfig) -> ModelParams:
    try:
        return ModelParams(**dataclasses.asdict(cfg.dynamics))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# data


def generate(cfg: ExperimentConfig) -> Path:
    """Integrate, standardize and write the X trajectory in bounded memory.

    Rows are written chunk by chunk; per-component mean and standard deviation
    are then computed over the whole file in two passes and applied in place.
    """
    params = model_params(cfg)
    d = cfg.data
    path = cfg.trajectory_path
    path.parent.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    state = random_initial_state(params, rng)
    total = np.zeros(params.K)
    done = 0
    with open(path, "wb") as fh:
        storage.write_trajectory_header(fh, d.n_steps, params.K, params.J, params.I,
                                        d.dt, standardized=True)
        while done < d.n_steps:
            m = min(d.chunk, d.n_steps - done)
            try:
                traj = generate_trajectory(state, params, d.dt, m,
                                           d.spinup_steps if done == 0 else 0)
            except DivergenceError as exc:
                offset = d.spinup_steps + done
                raise DivergenceError(f"integration blew up at step {offset + exc.step}",
                                      step=offset + exc.step) from exc
            traj.X.astype("<f8").tofile(fh)
            total += traj.X.sum(axis=0)
            state = traj.final_state
            done += m
    head = storage.read_trajectory_header(path)
    x = np.memmap(path, dtype="<f8", mode="r+", offset=head["offset"],
                  shape=(d.n_steps, params.K))
    mean = total / d.n_steps
    sq = np.zeros(params.K)
    for lo in range(0, d.n_steps, d.chunk):
        sq += ((x[lo:lo + d.chunk] - mean) ** 2).sum(axis=0)
    std = np.sqrt(sq / d.n_steps)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DegenerateDataError(f"zero-variance X component(s) {bad.tolist()}")
    for lo in range(0, d.n_steps, d.chunk):
        x[lo:lo + d.chunk] = (x[lo:lo + d.chunk] - mean) / std
    x.flush()
    del x
    meta = {
        "config": cfg.to_dict(),
        **provenance(cfg),
        "params": params.to_dict(),
        "dt": d.dt,
        "n_steps": d.n_steps,
        "spinup_steps": d.spinup_steps,
        "initial_condition": "X=F+0.01*U(-1,1), Y,Z=0.01*U(-1,1), rng=default_rng(seed)",
        "standardization": "per-component over the full series, ddof=0",
        "mean": mean.tolist(),
        "std": std.tolist(),
    }
    storage.write_json(storage.sidecar_path(path), meta)
    log.info("wrote %s (%d rows, backend %s)", path, d.n_steps, backend())
    return path


def load_series(cfg: ExperimentConfig):
    path = cfg.trajectory_path
    if not path.is_file():
        raise FileNotFoundError(f"trajectory {path} not found; run `generate` first")
    series, head, _ = storage.read_trajectory(path, mmap=True)
    if head["K"] != cfg.dynamics.K:
        raise FormatError(f"{path} has K={head['K']}, config expects {cfg.dynamics.K}")
    if not head["standardized"]:
        raise FormatError(f"{path} is not standardized")
    return series


def build_splits(cfg: ExperimentConfig, series, n_train=None):
    s = cfg.splits
    spec = SplitSpec(n_train=int(n_train or s.n_train), n_test=s.n_test, n_sets=s.n_ics,
                     min_separation=s.min_separation, seed=cfg.seed)
    return make_splits(series, spec), spec


def write_splits(path, splits, spec: SplitSpec, cfg: ExperimentConfig):
    storage.write_json(path, {
        "starts": [sp.start for sp in splits],
        "n_train": spec.n_train,
        "n_test": spec.n_test,
        "n_sets": spec.n_sets,
        "min_separation": spec.min_separation,
        "seed": spec.seed,
        "trajectory": str(cfg.trajectory_path),
        **provenance(cfg),
    })


def load_splits(path, series):
    doc = storage.read_json(path)
    return splits_from_starts(series, doc["starts"], doc["n_train"], doc["n_test"]), doc


# ---------------------------------------------------------------------------
# models


def esn_config(cfg: ExperimentConfig, D=None):
    e = cfg.esn
    return esn.EsnConfig(D=int(D or e.D), rho=e.rho, degree=e.degree,
                         input_scale=e.input_scale, alpha=e.alpha,
                         transform=e.transform, seed=cfg.seed)


def sgd_config(cfg):
    a = cfg.ann
    return ann.SgdConfig(learning_rate=a.learning_rate, batch_size=a.batch_size,
                         loss=a.loss, epochs=a.epochs, seed=cfg.seed,
                         val_fraction=a.val_fraction, patience=a.patience,
                         min_delta=a.min_delta)


def adam_config(cfg):
    s = cfg.lstm
    return lstm.AdamConfig(learning_rate=s.learning_rate, beta1=s.beta1, beta2=s.beta2,
                           epsilon=s.epsilon, batch_size=s.batch_size, epochs=s.epochs,
                           seed=cfg.seed, val_fraction=s.val_fraction,
                           patience=s.patience, min_delta=s.min_delta)


@dataclass
class TrainResult:
    model: object
    method: str
    train_cfg: dict
    loss_trace: list = field(default_factory=list)


def train_model(cfg: ExperimentConfig, method, train, D=None) -> TrainResult:
    """Fit one emulator on a standardized training block ``(N, K)``."""
    train = np.ascontiguousarray(train, dtype=np.float64)
    K = train.shape[1]
    try:
        if method == "esn":
            ec = esn_config(cfg, D)
            model = esn.build(ec, K)
            esn.train(model, train)
            tail = min(cfg.splits.n_test, train.shape[0] - 1)
            warm = train[-tail - cfg.esn.warmup:-tail]
            rmse = esn.teacher_forced_error(model, train[-tail:], warmup=warm)
            return TrainResult(model, method, ec.to_dict(), [(0, rmse, float("nan"))])
        if method == "ann":
            sc = sgd_config(cfg)
            model = ann.init_mlp(K, tuple(cfg.ann.hidden), seed=cfg.seed)
            x, dx = delta_pairs(train)
            model, tl = ann.train(model, x, dx, sc)
            return TrainResult(model, method, sc.to_dict(), _trace(tl))
        if method == "lstm":
            ac = adam_config(cfg)
            model = lstm.init_lstm(K, cfg.lstm.d_h, cfg.lstm.q, seed=cfg.seed)
            w, y = embed(train, cfg.lstm.q)
            model, tl = lstm.train(model, w, y, ac)
            return TrainResult(model, method, ac.to_dict(), _trace(tl))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown method {method!r}")


def _trace(tl):
    val = tl.val_loss + [float("nan")] * (len(tl.train_loss) - len(tl.val_loss))
    return list(zip(range(len(tl.train_loss)), tl.train_loss, val))


def method_of(model):
    if isinstance(model, esn.EsnModel):
        return "esn"
    if isinstance(model, ann.MlpModel):
        return "ann"
    if isinstance(model, lstm.LstmModel):
        return "lstm"
    raise TypeError(f"not an emulator: {type(model).__name__}")


def make_forecaster(model, warmup=100):
    """``f(split, steps)`` forecasting ``split.test`` from the end of ``split.train``.

    The initial condition is the last training row. ESN reservoirs are first
    synchronised on the ``warmup`` rows ending there; the LSTM seed window is
    the last ``q`` rows; the ANN starts from the last row alone.
    """
    method = method_of(model)
    if method == "esn":
        return lambda split, steps: esn.forecast(model, split.train[-warmup:], steps)
    if method == "ann":
        return lambda split, steps: ann.rollout(model, split.train[-1], steps)
    return lambda split, steps: lstm.rollout(model, split.train[-model.q:], steps)


# ---------------------------------------------------------------------------
# evaluation


def run_error(true, pred, cap):
    """Relative L2 error of one run; rows missing after a divergence get ``cap``."""
    true = np.asarray(true, dtype=np.float64)
    den = np.linalg.norm(true, axis=1).mean()
    if not den > 0:
        raise DegenerateDataError("true trajectory has zero mean norm")
    e = np.full(true.shape[0], float(cap))
    m = min(len(pred), true.shape[0])
    if m:
        err = np.linalg.norm(true[:m] - np.asarray(pred)[:m], axis=1) / den
        e[:m] = np.minimum(np.where(np.isfinite(err), err, cap), cap)
    return e


@dataclass
class EvalReport:
    method: str
    label: str
    run_errors: np.ndarray
    starts: list
    diverged: list
    threshold: float = metrics.DEFAULT_THRESHOLD
    cap: float = 10.0

    @property
    def times(self):
        return metrics.step_times(self.run_errors.shape[1])

    @property
    def n_ics(self):
        return self.run_errors.shape[0]

    @property
    def curve(self):
        return metrics.ErrorCurve(self.times, self.run_errors.mean(axis=0), self.n_ics)

    @property
    def horizons(self):
        return [metrics.prediction_horizon(metrics.ErrorCurve(self.times, e), self.threshold)
                for e in self.run_errors]

    @property
    def run_E(self):
        return [metrics.windowed_error(metrics.ErrorCurve(self.times, e))
                for e in self.run_errors]

    @property
    def mean_horizon(self):
        return float(np.mean([h.time for h in self.horizons]))

    @property
    def median_horizon(self):
        return float(np.median([h.time for h in self.horizons]))

    @property
    def best_horizon(self):
        return float(np.max([h.time for h in self.horizons]))

    @property
    def curve_horizon(self):
        return metrics.prediction_horizon(self.curve, self.threshold)

    @property
    def E(self):
        return metrics.windowed_error(self.curve)


def evaluate_forecaster(forecaster, splits, steps, method="", label="", threshold=0.3,
                        cap=10.0, threads=1) -> EvalReport:
    """Forecast every split's test block and score it; divergence is not fatal."""
    def one(split):
        try:
            pred = forecaster(split, steps)
            bad = 0
        except DivergenceError as exc:
            pred = exc.partial if exc.partial is not None else np.empty((0, split.test.shape[1]))
            bad = int(exc.step or 1)
        return run_error(split.test[:steps], pred, cap), bad

    results = _map(one, list(splits), threads)
    errors = np.array([r[0] for r in results])
    diverged = [r[1] for r in results]
    for split, bad in zip(splits, diverged):
        if bad:
            log.warning("%s %s: split %d diverged at step %d (e capped at %g)",
                        method, label, split.index, bad, cap)
    return EvalReport(method, label, errors, [s.start for s in splits], diverged,
                      threshold, cap)


def write_eval_report(report: EvalReport, out_dir, cfg):
    out_dir = Path(out_dir)
    c = report.curve
    write_csv(out_dir / ERRORS, ["time_mtu", "e", "method", "n_ics"],
              [(float(t), float(e), report.method, c.n_ics) for t, e in zip(c.times, c.e)],
              cfg)
    rows = []
    for i, (h, E, start, bad) in enumerate(zip(report.horizons, report.run_E,
                                               report.starts, report.diverged)):
        rows.append((report.method, report.label, i, start, h.time, int(h.censored), E, bad))
    ch = report.curve_horizon
    rows.append((report.method, report.label, "mean_curve", -1, ch.time, int(ch.censored),
                 report.E, sum(1 for b in report.diverged if b)))
    write_csv(out_dir / HORIZONS, ["method", "label", "ic", "split_start", "horizon_mtu",
                                   "censored", "E", "diverged_step"], rows, cfg)


# ---------------------------------------------------------------------------
# climate


@dataclass
class ClimateReport:
    method: str
    truth: metrics.PdfEstimate
    pred: metrics.PdfEstimate
    quartiles: list
    distance: float
    baseline: float
    quartile_distances: list
    quartile_baseline: float
    n_pred: int
    diverged_step: int = 0

    @property
    def ratio(self):
        return self.distance / self.baseline

    @property
    def quartile_ratios(self):
        return [d / self.quartile_baseline for d in self.quartile_distances]


def truth_chunks(n_rows, length, exclude, count):
    """Starts of up to ``count`` disjoint ``length``-row blocks avoiding ``exclude``."""
    lo, hi = exclude
    starts = []
    s = 0
    while s + length <= n_rows and len(starts) < count:
        if s + length <= lo or s >= hi:
            starts.append(s)
            s += length
        else:
            s = hi
    return starts


def climate_compare(pred, truth_x, exclude, n_quartiles=4, grid_points=401,
                    baseline_chunks=8, method=""):
    """Pooled and per-quartile PDFs of ``pred`` against solver data.

    The reference PDF comes from the first ``len(pred)``-row block of
    ``truth_x`` outside ``exclude``. Baselines are medians, over further
    disjoint truth blocks of matching size, of their distance to the reference.
    """
    pred = np.asarray(pred, dtype=np.float64)
    L = pred.shape[0]
    if L < 4 * n_quartiles:
        raise CapacityError(f"climate run of {L} steps is too short for "
                            f"{n_quartiles} quartiles (need >= {4 * n_quartiles})")
    starts = truth_chunks(truth_x.shape[0], L, exclude, 1 + baseline_chunks)
    if len(starts) < 2:
        raise CapacityError(f"series of {truth_x.shape[0]} rows holds fewer than two "
                            f"disjoint {L}-row truth blocks outside the training data")
    ref = np.asarray(truth_x[starts[0]:starts[0] + L]).ravel()
    h = metrics.silverman_bandwidth(ref)
    grid = metrics.default_grid(ref, h, grid_points)
    truth_pdf = metrics.kde_pdf(ref, grid, h)
    pred_pdf = metrics.kde_pdf(pred.ravel(), grid)
    base = [metrics.sup_distance(metrics.kde_pdf(
        np.asarray(truth_x[s:s + L]).ravel(), grid), truth_pdf) for s in starts[1:]]
    q_len = L // n_quartiles
    q_base = [metrics.sup_distance(metrics.kde_pdf(
        np.asarray(truth_x[s:s + q_len]).ravel(), grid), truth_pdf) for s in starts[1:]]
    quarts = metrics.quartile_pdfs(pred.reshape(L, -1), n_quartiles, grid)
    return ClimateReport(
        method, truth_pdf, pred_pdf, quarts,
        metrics.sup_distance(pred_pdf, truth_pdf), float(np.median(base)),
        [metrics.sup_distance(q, truth_pdf) for q in quarts], float(np.median(q_base)), L)


def write_climate_report(rep: ClimateReport, out_dir, cfg):
    out_dir = Path(out_dir)
    cols = ["grid", "density", "quartile", "method"]
    write_csv(out_dir / "pdf_truth.csv", cols,
              [(float(g), float(d), 0, "truth") for g, d in zip(rep.truth.grid, rep.truth.density)],
              cfg)
    write_csv(out_dir / "pdf_pred.csv", cols,
              [(float(g), float(d), 0, rep.method) for g, d in zip(rep.pred.grid, rep.pred.density)],
              cfg)
    rows = []
    for q, pdf in enumerate(rep.quartiles, 1):
        rows += [(float(g), float(d), q, rep.method) for g, d in zip(pdf.grid, pdf.density)]
    write_csv(out_dir / "pdf_quartiles.csv", cols, rows, cfg)
    summary = [("pooled", rep.method, rep.pred.n_samples, rep.pred.bandwidth, rep.distance,
                rep.baseline, rep.ratio, rep.diverged_step)]
    for q, (pdf, dist) in enumerate(zip(rep.quartiles, rep.quartile_distances), 1):
        summary.append((f"Q{q}", rep.method, pdf.n_samples, pdf.bandwidth, dist,
                        rep.quartile_baseline, dist / rep.quartile_baseline,
                        rep.diverged_step))
    summary.append(("truth", "truth", rep.truth.n_samples, rep.truth.bandwidth, 0.0,
                    rep.baseline, 0.0, 0))
    write_csv(out_dir / "climate.csv", ["sample", "method", "n_samples", "bandwidth",
                                        "sup_distance", "baseline", "ratio",
                                        "diverged_step"], summary, cfg)


def climate_run(model, split, series_x, length, warmup=100, **kw) -> ClimateReport:
    """Free run of ``length`` steps from the end of ``split.train``."""
    f = make_forecaster(model, warmup)
    bad = 0
    try:
        pred = f(split, length)
    except DivergenceError as exc:
        bad = int(exc.step or 1)
        pred = exc.partial if exc.partial is not None else np.empty((0, split.train.shape[1]))
        log.warning("climate run diverged at step %d; %d rows kept", bad, len(pred))
        if len(pred) < 4 * kw.get("n_quartiles", 4):
            raise
    rep = climate_compare(pred, series_x, split.train_range, method=method_of(model), **kw)
    rep.diverged_step = bad
    return rep


# ---------------------------------------------------------------------------
# commands


def _splits_for(cfg, series):
    path = cfg.out_dir / SPLITS
    splits, spec = build_splits(cfg, series)
    if path.is_file():
        doc = storage.read_json(path)
        if doc.get("starts") != [s.start for s in splits] or doc.get("n_train") != spec.n_train:
            log.info("splits manifest %s is stale; rewriting", path)
            write_splits(path, splits, spec, cfg)
    else:
        write_splits(path, splits, spec, cfg)
    return splits


def _checkpoint(cfg, checkpoint):
    path = Path(checkpoint) if checkpoint else cfg.out_dir / CHECKPOINT
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found; run `train` first")
    model, _ = storage.load_checkpoint(path)
    return model


def cmd_generate(cfg: ExperimentConfig) -> Path:
    _prepare(cfg)
    log.info("generate %s", provenance(cfg))
    return generate(cfg)


def cmd_train(cfg: ExperimentConfig, method=None) -> Path:
    _prepare(cfg)
    method = method or cfg.method
    series = load_series(cfg)
    splits = _splits_for(cfg, series)
    split = splits[cfg.splits.train_split]
    log.info("train %s on split %d (start %d, N=%d) %s", method, split.index, split.start,
             split.n_train, provenance(cfg))
    res = train_model(cfg, method, split.train)
    path = storage.save_checkpoint(cfg.out_dir / CHECKPOINT, res.model, res.train_cfg)
    storage.write_json(storage.sidecar_path(path), {
        "method": method, "train_split": split.index, "split_start": split.start,
        "n_train": split.n_train, "train_cfg": res.train_cfg, **provenance(cfg)})
    write_csv(cfg.out_dir / TRAIN_LOG, ["epoch", "train_loss", "val_loss"],
              res.loss_trace, cfg)
    log.info("wrote %s", path)
    return path


def cmd_evaluate(cfg: ExperimentConfig, checkpoint=None) -> EvalReport:
    _prepare(cfg)
    model = _checkpoint(cfg, checkpoint)
    series = load_series(cfg)
    splits = _splits_for(cfg, series)
    method = method_of(model)
    report = evaluate_forecaster(make_forecaster(model, cfg.esn.warmup), splits,
                                 cfg.evaluate.pred_steps, method, _label(cfg, model),
                                 cfg.evaluate.threshold, cfg.evaluate.error_cap,
                                 cfg.threads)
    write_eval_report(report, cfg.out_dir, cfg)
    log.info("evaluate %s: mean horizon %.4f MTU, median %.4f, E %.4f over %d ICs",
             method, report.mean_horizon, report.median_horizon, report.E, report.n_ics)
    return report


def cmd_climate(cfg: ExperimentConfig, checkpoint=None) -> ClimateReport:
    _prepare(cfg)
    c = cfg.climate
    if c.length < 4 * c.n_quartiles:
        raise CapacityError(f"climate.length {c.length} < 4 * n_quartiles")
    model = _checkpoint(cfg, checkpoint)
    series = load_series(cfg)
    split = _splits_for(cfg, series)[cfg.splits.train_split]
    rep = climate_run(model, split, series.samples, c.length, cfg.esn.warmup,
                      n_quartiles=c.n_quartiles, grid_points=c.grid_points,
                      baseline_chunks=c.baseline_chunks)
    write_climate_report(rep, cfg.out_dir, cfg)
    log.info("climate %s: sup distance %.4g vs baseline %.4g (ratio %.2f); quartile "
             "ratios %s", rep.method, rep.distance, rep.baseline, rep.ratio,
             [round(r, 2) for r in rep.quartile_ratios])
    if rep.diverged_step:
        raise DivergenceError(f"climate run diverged at step {rep.diverged_step}; "
                              "partial PDFs written", step=rep.diverged_step)
    return rep


def _label(cfg, model, n_train=None):
    n = n_train or cfg.splits.n_train
    if isinstance(model, esn.EsnModel):
        return f"N={n} D={model.D} {model.config.transform}"
    return f"N={n}"


SWEEP_COLUMNS = ["sweep", "method", "N", "D", "mean_horizon", "median_horizon",
                 "curve_horizon", "E", "n_diverged", "status", "message"]


def sweep_point(cfg, series, method, n_train, D, splits=None):
    """Train and evaluate one grid point; returns ``(row, report or None)``.

    With ``splits`` given, the model trains on the last ``n_train`` rows of the
    chosen split's training block, so every grid point shares its test ICs.
    """
    try:
        if splits is None:
            splits, _ = build_splits(cfg, series, n_train)
        block = splits[cfg.splits.train_split].train
        if n_train > block.shape[0]:
            raise CapacityError(f"N={n_train} exceeds the {block.shape[0]}-row training block")
        res = train_model(cfg, method, block[block.shape[0] - n_train:], D)
        rep = evaluate_forecaster(make_forecaster(res.model, cfg.esn.warmup), splits,
                                  cfg.evaluate.pred_steps, method,
                                  _label(cfg, res.model, n_train), cfg.evaluate.threshold,
                                  cfg.evaluate.error_cap)
    except L96EmuError as exc:
        log.error("sweep point %s N=%s D=%s failed: %s", method, n_train, D, exc)
        return [cfg.sweep.kind, method, n_train, D, "", "", "", "", "", "failed",
                str(exc)], None
    row = [cfg.sweep.kind, method, n_train, D if method == "esn" else "",
           rep.mean_horizon, rep.median_horizon, rep.curve_horizon.time, rep.E,
           sum(1 for b in rep.diverged if b), "ok", ""]
    return row, rep


def sweep_grid(cfg):
    s = cfg.sweep
    if s.kind == "N":
        return [(m, int(n), cfg.esn.D) for m in s.methods for n in s.n_grid]
    return [("esn", cfg.splits.n_train, int(d)) for d in s.d_grid]


def cmd_sweep(cfg: ExperimentConfig):
    """Run the grid; all points share the splits built for the largest N."""
    _prepare(cfg)
    series = load_series(cfg)
    points = sweep_grid(cfg)
    log.info("sweep %s over %d points %s", cfg.sweep.kind, len(points), provenance(cfg))
    n_max = max(n for _, n, _ in points)
    try:
        splits, _ = build_splits(cfg, series, n_max)
    except CapacityError as exc:
        raise CapacityError(f"sweep needs splits with N={n_max}: {exc}") from exc
    results = _map(lambda p: sweep_point(cfg, series, *p, splits=splits), points,
                   cfg.threads)
    rows = [r for r, _ in results]
    write_csv(cfg.out_dir / "sweep.csv", SWEEP_COLUMNS, rows, cfg)
    return rows
