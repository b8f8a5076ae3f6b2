"""Exact ReLU network constructions and query-learning experiments.

Modules:
  mlp         -- network representation, evaluation, composition, serialization
  gadgets     -- exact piecewise-linear building blocks and Mult_eps
  tasks       -- cubical-path, pointed-value, and address-spike task families
  assemble    -- realizable query maps and predictors as assembled networks
  learners    -- in-context and agentic protocols, well-known agents
  harness     -- worst-case sweeps, witness pairs, audits, reports
  transformer -- attention layers and the exact MLP embedding
  cli         -- reproducible file-backed experiment runner
"""

__version__ = "0.1.0"
