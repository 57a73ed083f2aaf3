"""Attack planning for simulated penetration tests.

Pipeline: a :class:`~attackplan.netmodel.Workspace` and an exploit
catalog are turned into PDDL by :mod:`attackplan.transform`, solved by
:mod:`attackplan.planner`, and the plan is replayed against a generated
ground-truth network by :mod:`attackplan.executor`.
"""

from __future__ import annotations

__version__ = "0.1.0"
