from datatrove.data import Document
from datatrove.pipeline.filters.base_filter import BaseFilter
from datatrove.pipeline.writers.disk_base import DiskWriter

from bioopt.problems import FEASIBILITY_TOL


class FeasibilityFilter(BaseFilter):
    """Keeps runs whose reported best satisfies every constraint ``g_i <= tolerance``.

    Feasibility is re-read from the stored constraint values rather than the
    run's own flag, so a looser or tighter tolerance can be applied afterwards.
    Unconstrained runs always pass.

    Args:
        exclusion_writer: optionally pass in a writer that will save the dropped runs
        tolerance: largest constraint value still counted as satisfied
    """

    name = "⚖️ Feasibility"

    def __init__(self, exclusion_writer: DiskWriter = None, tolerance: float = FEASIBILITY_TOL):
        super().__init__(exclusion_writer)
        self.tolerance = tolerance

    def filter(self, doc: Document) -> bool | tuple[bool, str]:
        g = doc.metadata.get("constraint_values", [])
        if any(v != v for v in g):
            self.stat_update("infeasible")
            return False, "constraint_nan"
        if any(v > self.tolerance for v in g):
            self.stat_update("infeasible")
            return False, "infeasible"
        self.stat_update("feasible")
        return True
