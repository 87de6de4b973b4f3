"""Calibrate three wave conditions and look at what they do to a static beam.

For each target ASCR the wave amplitude is tuned, then the screen record a
fixed beam would leave is characterised: mean slope-changing rate, how often
it exceeds 1 and 2 rad/s, and how fast the spot moves on the receiver plane.

    python demos/wave_characterization.py
"""
import numpy as np

from beamtrack.waves import ascr_from_offsets, calibrate_wave, simulate_offsets, spot_speeds

TARGETS = (0.0963, 0.2344, 0.5155)


def main():
    print(f"{'target':>8} {'amp':>8} {'ascr':>8} {'>1':>6} {'>2':>6} "
          f"{'rms d':>8} {'v95':>7} {'vmax':>7}")
    for target in TARGETS:
        p = calibrate_wave(target)
        t, dx, dy = simulate_offsets(p)
        rep = ascr_from_offsets(dx, dy, t[1] - t[0])
        v = spot_speeds(p)
        print(f"{target:8.4f} {p.amplitude:8.5f} {rep.ascr:8.4f} {rep.frac_above_1:6.3f} "
              f"{rep.frac_above_2:6.3f} {np.std(np.hypot(dx, dy)) * 1e3:6.2f}mm "
              f"{np.percentile(v, 95):7.3f} {v.max():7.3f}")
    print("speeds in m/s; rms d is the spread of the wandering spot")


if __name__ == "__main__":
    main()
