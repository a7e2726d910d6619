import pytest

from services.bench_service import bench_contingency, bench_scalability
from utils.scenario_loader import get_default_scenario


@pytest.mark.slow
def test_distributed_solver_scales_better_than_centralized():
    table = bench_scalability(get_default_scenario("intersection"), samples_per_mode=(1, 6), repetitions=3, workers=4)
    smallest, largest = min(table.columns), max(table.columns)
    assert (smallest, largest) == (5, 25)
    growth = table[largest] / table[smallest]
    assert growth["distributed-4"] < growth["centralized"]
    assert growth["distributed-4"] <= 8.0


@pytest.mark.slow
def test_contingency_time_grows_slowly_with_hypotheses():
    timings = bench_contingency(get_default_scenario("overtaking"), hypothesis_counts=(2, 10), repetitions=5)
    assert list(timings["hypotheses"]) == [2, 10]
    median = timings.set_index("hypotheses")["median_s"]
    assert median[10] <= 4.0 * median[2]
