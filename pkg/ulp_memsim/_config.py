from dataclasses import dataclass


@dataclass
class RunLimits:
    """
    Limits applied when experiment points run concurrently.

    Attributes:
    max_concurrency: The maximum number of simulation instances in flight at once.
        ``1`` runs every point sequentially.
    """

    max_concurrency: int = 1


DEFAULT_RUN_LIMITS = RunLimits(max_concurrency=4)
