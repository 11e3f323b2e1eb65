"""Benchmark harness: reproducible fill, churn, insertion-cost, scaling
and parameter-sweep experiments over the dictionary, emitted as
deterministic CSV.

Every run is seeded from the master seed through a documented counter
mix (see derive_seed), so re-running an experiment reproduces its CSV
byte for byte.  Experiments run on the compiled engine by default; the
pure Python dictionary can be selected to cross-check that both
implementations produce identical records.
"""

from dataclasses import dataclass
import sys

import numpy as np

from .dictionary import CuckooDict, EmomaConfig, EmomaDict
from .engine import Engine, make_stream
from .hashing import GOLDEN, MASK64, SplitMix64, fmix64
from .store import Placement, Side

LOAD_GRID = (0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.925, 0.95)
DEFAULT_SIZES = (1 << 15, 1 << 16, 1 << 17, 1 << 18, 1 << 19)
CHURN_WINDOWS = 16

# window of fresh insertions, as a fraction of capacity, over which the
# per-load mean insertion cost is measured; narrow enough that the cost
# at the endpoint load dominates the average
ITERTIME_WINDOW_DIVISOR = 128

EXPERIMENT_TAGS = {
    "fill": 1,
    "churn": 2,
    "itertime": 3,
    "scaling": 4,
    "sweep_p": 5,
    "sweep_k": 6,
}

BASE_COLUMNS = (
    "experiment", "mode", "capacity", "seed", "p", "k", "t", "bpe", "run",
    "max_stash", "final_stash", "h1_frac", "h2_frac", "avg_iterations",
    "failed",
)
EXTRA_COLUMNS = {
    "churn": ("window", "window_max_stash"),
    "itertime": ("load", "mean_iterations"),
}


class HarnessError(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    """One experiment request; list fields select sweep axes."""

    experiment: str
    mode: str = "single"  # single | double | baseline
    capacity: int = 1 << 15
    bpe: int = 4
    k: int = 0  # 0 keeps the per-mode default
    p: float = 0.99
    t: int = 100
    stash_capacity: int = 64
    load: float = 0.95
    runs: int = 1
    replacements: int = 0
    sizes: tuple = ()
    t_list: tuple = ()
    p_list: tuple = ()
    k_list: tuple = ()
    seed: int = 1
    impl: str = "fast"  # fast | reference

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_TAGS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.mode not in ("single", "double", "baseline"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.impl not in ("fast", "reference"):
            raise ValueError(f"unknown impl {self.impl!r}")
        if not 0.0 < self.load <= 1.0:
            raise ValueError("load must be in (0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


@dataclass
class RunRecord:
    experiment: str
    mode: str
    capacity: int
    seed: int
    p: float
    k: int
    t: int
    bpe: int
    run: int
    max_stash: int
    final_stash: int
    h1_frac: float
    h2_frac: float
    avg_iterations: float
    failed: bool
    window: int = -1
    window_max_stash: int = -1
    load: float = -1.0
    mean_iterations: float = -1.0


def derive_seed(master: int, tag: int, counter: int) -> int:
    """Per-run seed: an affine jump from the master seed keyed by the
    experiment tag and a running counter, finalized with fmix64.  The
    mix is a bijection of the counter for any fixed master and tag."""
    x = (master ^ fmix64((tag * GOLDEN) & MASK64)) & MASK64
    return fmix64((x + counter * GOLDEN) & MASK64)


# -- drivers ---------------------------------------------------------------


class _FastDriver:
    """Experiment-facing facade over the compiled engine."""

    def __init__(self, config: EmomaConfig, baseline: bool):
        self.engine = Engine(config, baseline=baseline)
        capacity = config.total_buckets * 4
        self.live = np.zeros(capacity + config.stash_capacity + 16,
                             dtype=np.uint64)
        self.live_size = np.zeros(1, dtype=np.int64)

    def make_stream(self, seed: int):
        return make_stream(seed)

    def fill(self, target: int, stream) -> int:
        return self.engine.fill(target, stream, self.live, self.live_size)

    def churn(self, replacements: int, stream, victims):
        return self.engine.churn(replacements, stream, victims,
                                 self.live, self.live_size)

    def itertime(self, ops: int, stream, victims):
        return self.engine.itertime(ops, stream, victims,
                                    self.live, self.live_size)

    @property
    def failed(self):
        return self.engine.failed

    @property
    def stash_size(self):
        return self.engine.stash_size

    @property
    def watermark(self):
        return self.engine.stash_watermark

    @property
    def iterations_total(self):
        return self.engine.iterations_total

    @property
    def inserts_total(self):
        return self.engine.inserts_total

    def placement_fractions(self):
        return self.engine.placement_fractions()

    def verify_clean(self) -> bool:
        return self.engine.verify_violations() == 0


class _ReferenceDriver:
    """Same facade over the pure Python dictionary; every random draw
    mirrors the engine kernels so records come out identical."""

    def __init__(self, config: EmomaConfig, baseline: bool):
        self.d = CuckooDict(config) if baseline else EmomaDict(config)
        self.live: list = []

    def make_stream(self, seed: int):
        return SplitMix64(seed)

    def fill(self, target: int, stream) -> int:
        inserts = 0
        while self.d.store.occupied_count < target:
            key = stream.next_u64()
            value = stream.next_u64()
            outcome = self.d.insert(key, value)
            inserts += 1
            self.live.append(key)
            if outcome.failed:
                break
        return inserts

    def churn(self, replacements: int, stream, victims):
        window_max = len(self.d.stash)
        iter_sum = 0
        done = 0
        for _ in range(replacements):
            vic = victims.next_below(len(self.live))
            vkey = self.live[vic]
            self.live[vic] = self.live[-1]
            self.live.pop()
            self.d.remove(vkey)
            key = stream.next_u64()
            value = stream.next_u64()
            outcome = self.d.insert(key, value)
            self.live.append(key)
            iter_sum += outcome.iterations_used
            done += 1
            window_max = max(window_max, len(self.d.stash))
            if outcome.failed:
                break
        return done, window_max, iter_sum

    def itertime(self, ops: int, stream, victims):
        window_max = len(self.d.stash)
        iter_sum = 0
        done = 0
        for _ in range(ops):
            key = stream.next_u64()
            value = stream.next_u64()
            outcome = self.d.insert(key, value)
            iter_sum += outcome.iterations_used
            done += 1
            window_max = max(window_max, len(self.d.stash))
            if outcome.failed:
                break
            vic = victims.next_below(len(self.live))
            vkey = self.live[vic]
            self.live[vic] = self.live[-1]
            self.live[-1] = key
            self.d.remove(vkey)
        return done, window_max, iter_sum

    @property
    def failed(self):
        return self.d.failed

    @property
    def stash_size(self):
        return len(self.d.stash)

    @property
    def watermark(self):
        return self.d.stash.watermark

    @property
    def iterations_total(self):
        return self.d.iterations_total

    @property
    def inserts_total(self):
        return self.d.inserts_total

    def placement_fractions(self):
        via1 = 0
        total = 0
        store = self.d.store
        plain = isinstance(self.d, CuckooDict)
        for flat, bucket in store.scan():
            side, index = store.side_of_flat(flat)
            for cell in bucket:
                if cell is None:
                    continue
                total += 1
                if plain:
                    b1 = self.d.hashers.bucket_hashes(cell[0])[0]
                    if flat == store.flat_index(Side.FIRST, b1):
                        via1 += 1
                elif store.placement_of(cell[0], side,
                                        index) == Placement.VIA_H1:
                    via1 += 1
        if total == 0:
            return 0.0, 0.0
        return via1 / total, (total - via1) / total

    def verify_clean(self) -> bool:
        if isinstance(self.d, CuckooDict):
            return True
        return self.d.verify_invariants().ok


def _make_driver(spec: ExperimentSpec, capacity: int, seed: int,
                 p=None, k=None, t=None):
    config = EmomaConfig(
        mode="single" if spec.mode == "baseline" else spec.mode,
        total_buckets=capacity // 4,
        k=spec.k if k is None else k,
        p=spec.p if p is None else p,
        t=spec.t if t is None else t,
        bpe=spec.bpe,
        stash_capacity=spec.stash_capacity,
        seed=seed,
    )
    baseline = spec.mode == "baseline"
    if spec.impl == "reference":
        return _ReferenceDriver(config, baseline)
    return _FastDriver(config, baseline)


# -- experiment runners ----------------------------------------------------


def _driver_k(driver) -> int:
    if isinstance(driver, _FastDriver):
        return driver.engine.config.k
    return driver.d.config.k


def _base_record(spec, driver, capacity, seed, run, p=None,
                 t=None) -> RunRecord:
    h1_frac, h2_frac = driver.placement_fractions()
    inserts = max(1, driver.inserts_total)
    return RunRecord(
        experiment=spec.experiment,
        mode=spec.mode,
        capacity=capacity,
        seed=seed,
        p=spec.p if p is None else p,
        k=_driver_k(driver),
        t=spec.t if t is None else t,
        bpe=spec.bpe,
        run=run,
        max_stash=driver.watermark,
        final_stash=driver.stash_size,
        h1_frac=h1_frac,
        h2_frac=h2_frac,
        avg_iterations=driver.iterations_total / inserts,
        failed=driver.failed,
    )


def _check_run(driver, seed):
    if not driver.failed and not driver.verify_clean():
        raise HarnessError(f"invariant violation in run seeded {seed}")


def run_fill(spec: ExperimentSpec):
    tag = EXPERIMENT_TAGS[spec.experiment]
    records = []
    for run in range(spec.runs):
        seed = derive_seed(spec.seed, tag, 3 * run)
        driver = _make_driver(spec, spec.capacity, seed)
        stream = driver.make_stream(derive_seed(spec.seed, tag, 3 * run + 1))
        driver.fill(int(spec.load * spec.capacity), stream)
        _check_run(driver, seed)
        records.append(_base_record(spec, driver, spec.capacity, seed, run))
    return records, []


def run_churn(spec: ExperimentSpec):
    """Fill to the target load, then delete-then-insert pairs split into
    sixteen equal windows; one record per window plus the fill record at
    window 0."""
    tag = EXPERIMENT_TAGS[spec.experiment]
    records = []
    for run in range(spec.runs):
        seed = derive_seed(spec.seed, tag, 4 * run)
        driver = _make_driver(spec, spec.capacity, seed)
        stream = driver.make_stream(derive_seed(spec.seed, tag, 4 * run + 1))
        victims = driver.make_stream(derive_seed(spec.seed, tag, 4 * run + 2))
        driver.fill(int(spec.load * spec.capacity), stream)
        fill_row = _base_record(spec, driver, spec.capacity, seed, run)
        fill_row.window = 0
        fill_row.window_max_stash = driver.watermark
        records.append(fill_row)
        if driver.failed:
            continue
        base = spec.replacements // CHURN_WINDOWS
        sizes = [base] * CHURN_WINDOWS
        sizes[-1] += spec.replacements - base * CHURN_WINDOWS
        for window, count in enumerate(sizes, start=1):
            if count == 0:
                continue
            done, window_max, iter_sum = driver.churn(count, stream, victims)
            row = _base_record(spec, driver, spec.capacity, seed, run)
            row.window = window
            row.window_max_stash = window_max
            row.avg_iterations = iter_sum / max(1, done)
            records.append(row)
            if driver.failed:
                break
        _check_run(driver, seed)
    return records, []


def run_itertime(spec: ExperimentSpec):
    """Mean insertion cost at each load grid point, per t value.  Each
    point uses a fresh instance filled to the load; the mean covers the
    final capacity/128 insertions so the endpoint cost dominates."""
    tag = EXPERIMENT_TAGS[spec.experiment]
    t_values = spec.t_list or (spec.t,)
    loads = [g for g in LOAD_GRID if g < spec.load] + [spec.load]
    window = max(1, spec.capacity // ITERTIME_WINDOW_DIVISOR)
    records = []
    counter = 0
    for t in t_values:
        for load in loads:
            for run in range(spec.runs):
                seed = derive_seed(spec.seed, tag, 2 * counter)
                driver = _make_driver(spec, spec.capacity, seed, t=t)
                stream = driver.make_stream(
                    derive_seed(spec.seed, tag, 2 * counter + 1))
                counter += 1
                target = int(load * spec.capacity)
                driver.fill(max(1, target - window), stream)
                it0 = driver.iterations_total
                n0 = driver.inserts_total
                driver.fill(target, stream)
                _check_run(driver, seed)
                fresh = max(1, driver.inserts_total - n0)
                row = _base_record(spec, driver, spec.capacity, seed, run,
                                   t=t)
                row.load = load
                row.mean_iterations = (driver.iterations_total - it0) / fresh
                records.append(row)
    metadata = [
        "itertime: mean_iterations covers the final capacity/%d fresh "
        "insertions approaching each load point" % ITERTIME_WINDOW_DIVISOR,
    ]
    return records, metadata


def run_scaling(spec: ExperimentSpec):
    tag = EXPERIMENT_TAGS[spec.experiment]
    sizes = spec.sizes or DEFAULT_SIZES
    records = []
    counter = 0
    for size in sizes:
        for run in range(spec.runs):
            seed = derive_seed(spec.seed, tag, 2 * counter)
            driver = _make_driver(spec, size, seed)
            stream = driver.make_stream(
                derive_seed(spec.seed, tag, 2 * counter + 1))
            counter += 1
            driver.fill(int(spec.load * size), stream)
            _check_run(driver, seed)
            records.append(_base_record(spec, driver, size, seed, run))
    return records, []


def run_sweeps(spec: ExperimentSpec):
    tag = EXPERIMENT_TAGS[spec.experiment]
    if spec.experiment == "sweep_p":
        axis = [("p", value) for value in spec.p_list]
    else:
        axis = [("k", value) for value in spec.k_list]
    if not axis:
        raise ValueError("sweep needs a p_list or k_list")
    records = []
    counter = 0
    for name, value in axis:
        for run in range(spec.runs):
            seed = derive_seed(spec.seed, tag, 2 * counter)
            driver = _make_driver(spec, spec.capacity, seed, **{name: value})
            stream = driver.make_stream(
                derive_seed(spec.seed, tag, 2 * counter + 1))
            counter += 1
            driver.fill(int(spec.load * spec.capacity), stream)
            _check_run(driver, seed)
            records.append(_base_record(
                spec, driver, spec.capacity, seed, run,
                p=value if name == "p" else None))
    return records, []


RUNNERS = {
    "fill": run_fill,
    "churn": run_churn,
    "itertime": run_itertime,
    "scaling": run_scaling,
    "sweep_p": run_sweeps,
    "sweep_k": run_sweeps,
}


def run_experiment(spec: ExperimentSpec):
    """Dispatch to the runner; returns (records, metadata lines).

    Runners generate sweep-point-major so seed derivation follows the
    counter order; rows are then stable-sorted by run index, leaving the
    sweep position as the secondary order within each run.
    """
    records, metadata = RUNNERS[spec.experiment](spec)
    records.sort(key=lambda rec: rec.run)
    return records, metadata


# -- CSV -------------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "%.6f" % value
    return str(value)


def emit_csv(records, out_path, metadata=()) -> None:
    """Write metadata comments, a header and one row per record; floats
    use six decimals so reruns are byte-identical."""
    columns = list(BASE_COLUMNS)
    if records:
        columns += list(EXTRA_COLUMNS.get(records[0].experiment, ()))
    lines = ["# " + line for line in metadata]
    lines.append(",".join(columns))
    for record in records:
        lines.append(",".join(_format_value(getattr(record, column))
                              for column in columns))
    text = "\n".join(lines) + "\n"
    if out_path == "-":
        sys.stdout.write(text)
        return
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
