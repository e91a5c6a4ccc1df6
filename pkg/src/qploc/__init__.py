"""Exact branch-and-cut for the quadratic capacitated p-location problem with single assignments.

Main entry points:

* :class:`~qploc.instance.Instance`, :func:`~qploc.instance.evaluate` and the
  instance readers/generators;
* :func:`~qploc.bnc.solve` for exact solutions;
* :func:`~qploc.rlt.lp_bound` for linearized relaxation bounds;
* :func:`~qploc.oracle.enumerate_optimal` for brute-force ground truth.
"""
from .bnc import SolveParams, solve
from .errors import QplocError
from .fileio import load_instance, read_ap, save_instance
from .generators import generate_set1, random_instance
from .instance import Instance, Solution, apply_variant, evaluate
from .rlt import lp_bound

__version__ = "0.1.0"

__all__ = ["Instance", "QplocError", "Solution", "SolveParams", "apply_variant", "evaluate",
           "generate_set1", "load_instance", "lp_bound", "random_instance", "read_ap",
           "save_instance", "solve"]
