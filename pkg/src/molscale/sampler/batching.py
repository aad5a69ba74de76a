"""Dynamic batching by padded-token budget."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from molscale.errors import MoleculeTooLargeError


@dataclass(frozen=True)
class BatchPlan:
    """Batches of molecule indices whose padded size fits the token budget."""

    batches: list[list[int]]
    token_budget: int
    max_len: list[int]

    def __len__(self) -> int:
        return len(self.batches)


def plan_batches(
    lengths: Sequence[int],
    token_budget: int,
    seed: int = 0,
    bucket_width: int = 8,
) -> BatchPlan:
    """Greedily fill batches over a length-bucketed, shuffled order.

    A batch costs (molecule count x longest molecule), which must stay within
    ``token_budget``. Batch order is shuffled with the same seed.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size and int(lengths.max()) > token_budget:
        index = int(np.argmax(lengths))
        raise MoleculeTooLargeError(
            f"molecule {index} has {int(lengths[index])} atoms, above the token budget {token_budget}"
        )

    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(lengths.size)
    buckets = lengths[shuffled] // max(1, bucket_width)
    order = shuffled[np.argsort(buckets, kind="stable")]

    batches: list[list[int]] = []
    max_len: list[int] = []
    current: list[int] = []
    current_max = 0
    for index in order:
        length = int(lengths[index])
        longest = max(current_max, length)
        if current and (len(current) + 1) * longest > token_budget:
            batches.append(current)
            max_len.append(current_max)
            current, longest = [], length
        current.append(int(index))
        current_max = longest
    if current:
        batches.append(current)
        max_len.append(current_max)

    batch_order = rng.permutation(len(batches))
    return BatchPlan(
        batches=[batches[i] for i in batch_order],
        token_budget=int(token_budget),
        max_len=[max_len[i] for i in batch_order],
    )
