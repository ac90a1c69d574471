"""Twenty seeded runs per bundled map and regime, printed as a results table."""

from usv_assembly.mapgen import bundled
from usv_assembly.pipeline import batch


def fmt(stats) -> str:
    return "-" if stats["mean"] is None else f"{stats['mean']:.1f} ± {stats['std']:.1f}"


print(f"{'scenario':18s} {'success':>8s} {'feasible solutions':>20s} {'steps':>16s}")
for i in range(1, 5):
    for regime in ("genderless", "gendered"):
        sc = bundled(f"map{i}-{regime}")
        agg = batch(sc, 20).aggregates
        print(
            f"{sc.name:18s} {agg['success']:>5d}/20 {fmt(agg['feasible_solution_count']):>20s} {fmt(agg['total_steps']):>16s}"
        )
