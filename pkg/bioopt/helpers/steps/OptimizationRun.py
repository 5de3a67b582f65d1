from datatrove.data import Document, DocumentsPipeline
from datatrove.pipeline.base import PipelineStep

from bioopt.runs import execute_run


class OptimizationRun(PipelineStep):
    """Runs one seeded optimisation per pipeline task and emits its summary as a document.

    Task ``rank`` runs seed ``config["seed"] + rank``, so ``tasks=k`` covers k
    consecutive seeds. The run's files land in ``out`` for a single run and in
    ``out/seed_<seed>`` when repeating.

    Args:
        config: a resolved run configuration in its ``RunConfig.to_dict`` form
    """

    name = "🧬 Optimization Run"
    type = "⚙️ - PROCESS"

    def __init__(self, config: dict):
        super().__init__()
        self.config = config

    def run(self, data: DocumentsPipeline = None, rank: int = 0, world_size: int = 1) -> DocumentsPipeline:
        from bioopt.cli import RunConfig

        if data:
            yield from data
        cfg = RunConfig.from_dict(self.config)
        seed = cfg.seed + rank
        with self.track_time():
            outcome = execute_run(cfg, seed, cfg.run_dir(seed))
        self.stat_update("runs")
        self.stat_update("evaluations", value=outcome.trace.evaluations)
        if outcome.trace.invalid_evaluations:
            self.stat_update("invalid_evaluations", value=outcome.trace.invalid_evaluations)
        if outcome.trace.degenerate_generations:
            self.stat_update("degenerate_generations", value=outcome.trace.degenerate_generations)
        summary = (cfg.run_dir(seed) / "summary.txt").read_text(encoding="utf-8")
        yield Document(text=summary, id=f"{cfg.subcommand}-seed-{seed}", metadata=outcome.metadata(cfg))
