import os
from pathlib import Path

from loguru import logger


def validate_inputs(output_dir: Path, target_kappa: Path | None = None):
    if target_kappa is not None and not Path(target_kappa).is_file():
        raise FileNotFoundError(f"Target diffusivity file not found: {target_kappa}")

    # Validate output directories can be created
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(output_dir, os.W_OK | os.X_OK):
        raise PermissionError(f"Output directory is not writable: {output_dir}")

    logger.info(f"Writing run outputs to {output_dir}")
