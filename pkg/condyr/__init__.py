"""condyr package."""

__all__ = [
    "algebra",
    "cli",
    "config",
    "constants",
    "dictionary",
    "exceptions",
    "executor",
    "models",
    "nquads",
    "oracle",
    "planner",
    "postgres",
    "sample",
    "sparql",
    "sql",
    "store",
    "utils",
    "workload",
]
