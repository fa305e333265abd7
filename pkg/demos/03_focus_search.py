"""Find the sharp image the way a student does: sweep the screen platform.

Coarse 1 mm sweep across the bench, then a fine 100-step pass around the
winner. The Laplacian-variance score peaks where the lens equation says the
image plane sits.
"""

import numpy as np

from remotelab.physics import (
    LensBenchState,
    ideal_image_distance,
    render_frame,
    sharpness_metric,
)

U_STEPS = 20000  # object platform at 20 cm


def score(v_steps: int) -> float:
    state = LensBenchState(u_steps=U_STEPS, v_steps=v_steps)
    return sharpness_metric(render_frame(state, "screen", seed=42))


coarse = list(range(12000, 30001, 1000))
coarse_scores = [score(v) for v in coarse]
best_coarse = coarse[int(np.argmax(coarse_scores))]

print("coarse sweep (1 mm pitch):")
for v, s in zip(coarse, coarse_scores):
    bar = "#" * int(min(s, 400) / 8)
    print(f"  v = {v / 1000:5.1f} cm  score {s:8.2f} {bar}")

fine = list(range(best_coarse - 1000, best_coarse + 1001, 100))
best_fine = fine[int(np.argmax([score(v) for v in fine]))]

v_ideal = ideal_image_distance(20.0, 10.0)
print(f"\ncoarse winner: {best_coarse / 1000:.2f} cm")
print(f"fine winner:   {best_fine / 1000:.3f} cm")
print(f"lens equation: {v_ideal:.3f} cm for u=20, f=10")
print(f"focal length from the sweep: 1/(1/20 + 1/{best_fine / 1000:.2f}) = "
      f"{1.0 / (1.0 / 20.0 + 1000.0 / best_fine):.3f} cm")
