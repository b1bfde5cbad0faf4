"""A session-typed concurrent functional language with buffered channels,
an asynchronous process-calculus backend, a typed translation between the
two, and a priority-based deadlock-freedom certifier."""

__version__ = "0.1.0"
