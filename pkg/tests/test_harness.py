"""Harness runners, CSV output and the CLI."""

import pytest

from emoma.cli import build_parser, main, spec_from_args
from emoma.harness import (BASE_COLUMNS, ExperimentSpec, LOAD_GRID,
                           RunRecord, derive_seed, emit_csv, run_experiment)


def read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def test_derive_seed_distinct_and_stable():
    seen = {derive_seed(1, tag, counter)
            for tag in range(1, 7) for counter in range(200)}
    assert len(seen) == 6 * 200
    assert derive_seed(1, 1, 0) == derive_seed(1, 1, 0)
    assert derive_seed(1, 1, 0) != derive_seed(2, 1, 0)


def test_fill_records_and_schema(tmp_path):
    spec = ExperimentSpec(experiment="fill", capacity=2048, runs=2, seed=5)
    records, metadata = run_experiment(spec)
    assert len(records) == 2
    assert [r.run for r in records] == [0, 1]
    for r in records:
        assert r.experiment == "fill"
        assert r.capacity == 2048
        assert not r.failed
        assert 0.0 < r.h1_frac < 1.0
        assert abs(r.h1_frac + r.h2_frac - 1.0) < 1e-9
        assert r.avg_iterations >= 1.0
    out = tmp_path / "fill.csv"
    emit_csv(records, str(out), metadata)
    lines = read_lines(str(out))
    assert lines[0] == ",".join(BASE_COLUMNS)
    assert len(lines) == 3
    assert lines[1].startswith("fill,single,2048,")


def test_csv_determinism(tmp_path):
    spec = ExperimentSpec(experiment="scaling", sizes=(1024, 2048),
                          runs=2, seed=9)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    records, metadata = run_experiment(spec)
    emit_csv(records, str(a), metadata)
    records2, metadata2 = run_experiment(spec)
    emit_csv(records2, str(b), metadata2)
    assert a.read_bytes() == b.read_bytes()


def test_churn_windows(tmp_path):
    spec = ExperimentSpec(experiment="churn", capacity=2048, runs=1,
                          seed=3, replacements=1600)
    records, _ = run_experiment(spec)
    assert [r.window for r in records] == list(range(17))
    sizes = 1600 // 16
    assert records[0].window_max_stash == records[0].max_stash
    for r in records[1:]:
        assert r.window_max_stash >= 0
        assert r.avg_iterations >= 1.0
    out = tmp_path / "churn.csv"
    emit_csv(records, str(out))
    header = read_lines(str(out))[0]
    assert header.endswith(",window,window_max_stash")
    assert sizes == 100


def test_churn_zero_replacements():
    spec = ExperimentSpec(experiment="churn", capacity=1024, runs=1, seed=3)
    records, _ = run_experiment(spec)
    assert len(records) == 1
    assert records[0].window == 0


def test_itertime_grid_and_metadata():
    spec = ExperimentSpec(experiment="itertime", capacity=2048, runs=1,
                          seed=11, load=0.95, t_list=(10, 100))
    records, metadata = run_experiment(spec)
    loads = [g for g in LOAD_GRID if g < 0.95] + [0.95]
    assert [r.load for r in records] == loads * 2
    assert [r.t for r in records] == [10] * len(loads) + [100] * len(loads)
    assert metadata and "capacity/128" in metadata[0]
    low = records[0]
    assert low.load == 0.5
    assert low.mean_iterations < 2.0


def test_sweep_rows_ordered():
    spec = ExperimentSpec(experiment="sweep_p", mode="double",
                          capacity=2048, runs=2, seed=21,
                          p_list=(0.5, 0.99))
    records, _ = run_experiment(spec)
    # run index is the primary order, sweep position the secondary
    assert [(r.p, r.run) for r in records] == [
        (0.5, 0), (0.99, 0), (0.5, 1), (0.99, 1)]
    spec = ExperimentSpec(experiment="sweep_k", capacity=2048, runs=1,
                          seed=21, k_list=(1, 3))
    records, _ = run_experiment(spec)
    assert [r.k for r in records] == [1, 3]


def test_sweep_without_axis_rejected():
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec(experiment="sweep_p", capacity=1024))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="nope")
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="fill", mode="triple")
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="fill", load=0.0)
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="fill", impl="gpu")


def test_empty_records_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    emit_csv([], str(out))
    assert read_lines(str(out)) == [",".join(BASE_COLUMNS)]


def test_cli_spec_defaults():
    args = build_parser().parse_args(["fill"])
    spec = spec_from_args(args)
    assert spec.mode == "single"
    assert spec.capacity == 1 << 15
    args = build_parser().parse_args(["sweep-p"])
    spec = spec_from_args(args)
    assert spec.mode == "double"
    assert spec.capacity == 1 << 16
    assert spec.p_list == (0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 1.0)
    args = build_parser().parse_args(["sweep-k", "--mode", "single"])
    spec = spec_from_args(args)
    assert spec.mode == "single"
    assert spec.k_list == (1, 2, 3, 4, 8)
    args = build_parser().parse_args(["fill", "--extended"])
    assert spec_from_args(args).capacity == 1 << 23
    args = build_parser().parse_args(["scaling", "--extended"])
    assert spec_from_args(args).sizes[-1] == 1 << 23


def test_cli_end_to_end(tmp_path):
    out = tmp_path / "cli.csv"
    code = main(["fill", "--capacity", "2048", "--runs", "2",
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    lines = read_lines(str(out))
    assert len(lines) == 3
    spec = ExperimentSpec(experiment="fill", capacity=2048, runs=2, seed=5)
    records, metadata = run_experiment(spec)
    direct = tmp_path / "direct.csv"
    emit_csv(records, str(direct), metadata)
    assert out.read_bytes() == direct.read_bytes()


def test_cli_stdout(capsys):
    main(["fill", "--capacity", "1024", "--out", "-"])
    captured = capsys.readouterr()
    assert captured.out.startswith(",".join(BASE_COLUMNS[:3]))
    assert captured.out.count("\n") == 2


def test_record_float_formatting(tmp_path):
    record = RunRecord(experiment="fill", mode="single", capacity=64,
                       seed=1, p=0.5, k=3, t=10, bpe=4, run=0, max_stash=1,
                       final_stash=0, h1_frac=1 / 3, h2_frac=2 / 3,
                       avg_iterations=1.25, failed=True)
    out = tmp_path / "one.csv"
    emit_csv([record], str(out))
    line = read_lines(str(out))[1]
    assert line == ("fill,single,64,1,0.500000,3,10,4,0,1,0,"
                    "0.333333,0.666667,1.250000,1")
