"""Desk-scale verification lab for training-time self-iteration mechanisms.

Subpackages:
  cycle     -- exact ERM over k-fold iterates of finite endomorphisms on a cycle,
               plus the number theory (totients, primorials, prime search) that
               predicts which exponents force a unique minimizer.
  icl       -- linear self-attention simulated along three equivalent paths
               (attention rollout, moment recursion, closed form), with exact
               in/out-of-distribution losses and distance to the GD family.
  shortcut  -- regularized ERM with a structured channel and a delta-kernel
               shortcut channel, solved exactly and checked against sandwich
               bounds.
  phop      -- multi-hop backtracking task generator with a reference oracle
               and a parity-based ID/OOD split, plus dataset (de)serialization.
  cli       -- one entry point exposing the above as subcommands.
"""

__version__ = "0.1.0"
