import json
import sys
from pathlib import Path

from weylwalk.hypergroup import DiscreteMeasure

TWO_ATOMS = [(1.0, 0.3), (2.0, 1.0)]


def two_atom(chamber: str) -> DiscreteMeasure:
    return DiscreteMeasure.from_lists(chamber, TWO_ATOMS, [0.5, 0.5])


def dump(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
