import pytest

from workers import chunked_sum, exact_sum, ordered_map


@pytest.mark.parametrize("threads", [1, 3])
def test_ordered_map_keeps_order(threads):
    assert ordered_map(lambda x: x * x, (i for i in range(50)), threads) == [i * i for i in range(50)]


def test_sum_is_independent_of_order():
    values = [1e16, 1.0, -1e16, 1j, 0.5]
    assert exact_sum(values) == complex(1.5, 1.0)
    assert exact_sum(reversed(values)) == exact_sum(values)


def test_chunked_sum_is_independent_of_thread_count():
    chunks = [(i, i + 10) for i in range(0, 1000, 10)]

    def block(rng):
        return complex(sum(1.0 / (k + 1) for k in range(*rng)), 0.0)

    assert chunked_sum(block, chunks, 1) == chunked_sum(block, chunks, 4)
