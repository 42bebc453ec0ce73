import numpy as np

from queuesec.sim import JobTrace


def make_trace(rows, k=1, labeled=False):
    """Build a JobTrace from (arrival, wait, service, job_class) tuples."""
    arrival, wait, service, job_class = (np.asarray(col, dtype=float)
                                         for col in zip(*rows))
    n = arrival.size
    return JobTrace(k, arrival, wait, service, job_class.astype(np.uint8),
                    np.zeros(n, dtype=bool), np.zeros(n, dtype=bool),
                    labeled=labeled)
