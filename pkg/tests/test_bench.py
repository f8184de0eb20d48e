import importlib.util
import pathlib

BENCH = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs_and_backends_agree(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    names, rows = mod.run([20, 35], repeat=1)
    assert "python" in names
    assert all(r["identical"] for r in rows)
    mod.main(["--sizes", "15", "--repeat", "1"])
    assert "default backend" in capsys.readouterr().out
