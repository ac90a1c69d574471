"""Assemble a bundled map in both dock regimes and draw the runs as SVG.

    python3 demos/assemble.py [map1|map2|map3|map4] [seed]
"""

import sys
from pathlib import Path

from usv_assembly.mapgen import bundled
from usv_assembly.pipeline import run_pipeline
from usv_assembly.render import render_log


def main() -> None:
    name = sys.argv[1] if len(sys.argv) > 1 else "map1"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    out = Path("out") / "demos"
    out.mkdir(parents=True, exist_ok=True)
    for regime in ("genderless", "gendered"):
        sc = bundled(f"{name}-{regime}").with_seed(seed)
        res = run_pipeline(sc, out_dir=out / sc.name)
        svg = out / f"{sc.name}.svg"
        svg.write_text(render_log(res.log))
        print(
            f"{sc.name}: {res.outcome} in {res.log.total_steps} steps, "
            f"{res.dispatch.feasible_solution_count} feasible dispatches, tree height {res.tree.height} -> {svg}"
        )


if __name__ == "__main__":
    main()
