import importlib.util
from pathlib import Path

import pytest

from deepgraph import _accel

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_kernels.py"


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="needs numba")
def test_benchmark_runs_both_backends(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    before = _accel.USE_NUMBA
    results = bench.main(["--nodes", "200", "--repeat", "1"])
    assert set(results) == {(k, b) for k in ("spmm", "diameter", "hamming") for b in (False, True)}
    assert _accel.USE_NUMBA == before
    assert "speedup" in capsys.readouterr().out
