"""How far does the recovered coefficient move when the data move?

Measurements are shifted by delta times a random unit field; the change in
the reconstruction grows linearly in delta, with a stable ratio.
"""

from boussinesq_inverse import stability_probe

res = stability_probe()
for d, diff, ratio in zip(res["deltas"], res["differences"], res["ratio"]):
    print(f"delta {d:.0e}: |c_delta - c| = {diff:.3e}  (ratio {ratio:.3f})")
print(f"fitted exponent {res['exponent']:.3f}")
