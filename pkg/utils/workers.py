"""Chunked thread fan-out with worker-count independent reductions."""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from typing import Callable, Iterable, Iterator, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def _batches(items: Iterable[T], size: int) -> Iterator[List[T]]:
    iterator = iter(items)
    while True:
        batch = list(islice(iterator, size))
        if not batch:
            return
        yield batch


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply func to every item, returning results in input order.

    Submission is bounded to a few waves per worker so lazily generated
    chunk streams are never materialized all at once.
    """
    threads = max(1, int(threads))
    if threads == 1:
        return [func(item) for item in items]

    results: List[R] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for batch in _batches(items, 4 * threads):
            results.extend(pool.map(func, batch))
    return results


def exact_sum(values: Iterable[complex]) -> complex:
    """Correctly rounded sum of complex partials; independent of summation order."""
    values = list(values)
    real = math.fsum(v.real for v in values)
    imag = math.fsum(v.imag for v in values)
    return complex(real, imag)


def chunked_sum(func: Callable[[T], complex], chunks: Iterable[T], threads: int = 1) -> complex:
    """Sum func(chunk) over all chunks with a deterministic reduction."""
    return exact_sum(ordered_map(func, chunks, threads))
