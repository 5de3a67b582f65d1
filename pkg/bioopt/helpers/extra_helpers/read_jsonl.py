import gzip
import json
from pathlib import Path


def read_jsonl(folder: Path) -> list[dict]:
    """Every document in the ``*.jsonl.gz`` shards a JsonlWriter left in ``folder``, shard by shard."""
    docs = []
    for path in sorted(Path(folder).glob("*.jsonl.gz")):
        with gzip.open(path, "rt", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    docs.append(json.loads(line))
    return docs
