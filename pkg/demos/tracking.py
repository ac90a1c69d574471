"""Compare ADRC and PID on both reference paths under the default disturbance."""

from pathlib import Path

from usv_assembly.dynamics import TrackConfig, track
from usv_assembly.render import render_file

out = Path("out") / "demos"
out.mkdir(parents=True, exist_ok=True)
for kind in ("circle", "eight"):
    mae = {}
    for controller in ("adrc", "pid"):
        res = track(kind, controller, TrackConfig())
        text = res.to_jsonl()
        (out / f"track-{kind}-{controller}.svg").write_text(render_file(text))
        mae[controller] = res.mae_position
        print(f"{kind:6s} {controller:4s} position MAE {res.mae_position:.5f} m, heading MAE {res.mae_heading:.5f} rad")
    print(f"{kind:6s} ADRC error is {1 - mae['adrc'] / mae['pid']:.1%} lower than PID")
