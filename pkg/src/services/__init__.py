"""Services: cosets, moves, pipelines, invariants and searches."""
