"""Render a gallery of camera frames from both rigs into demos/out/.

Writes binary PGMs you can open with any image viewer: the screen image in
and out of focus, the side schematic before and after a platform move, and the
rod rig raised versus fully dipped (watch the oil-side rod disappear).
"""

from pathlib import Path

from remotelab.physics import LensBenchState, RodRigState, encode_pgm, render_frame

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)


def save(name: str, state, camera: str, seed: int) -> None:
    frame = render_frame(state, camera, seed=seed)
    (out / f"{name}.pgm").write_bytes(encode_pgm(frame))
    print(f"wrote {out / f'{name}.pgm'}")


# focal-length bench: screen camera, in focus and 2 cm defocused
save("fl_screen_sharp", LensBenchState(u_steps=20000, v_steps=20000), "screen", seed=1)
save("fl_screen_defocused", LensBenchState(u_steps=20000, v_steps=22000), "screen", seed=2)

# side schematic: home, then the screen platform moved +500 steps (5 mm)
save("fl_side_home", LensBenchState(), "side", seed=3)
save("fl_side_moved", LensBenchState(v_steps=20500), "side", seed=4)

# vanishing rod: raised, half, fully dipped
save("vr_raised", RodRigState(rod_height_steps=0), "rod", seed=5)
save("vr_half", RodRigState(rod_height_steps=1024), "rod", seed=6)
save("vr_dipped", RodRigState(rod_height_steps=2048), "rod", seed=7)

dipped = RodRigState(rod_height_steps=2048)
print(
    f"\nfully dipped: submerged fraction = {dipped.submerged_fraction:.2f}; "
    "in vr_dipped.pgm the oil-side rod has nearly vanished while the "
    "water-side rod stays dark and visible."
)
