"""Build the synthetic wind-up reference set and look at what it contains.

Each clip is a human-style strike: the hammer head first rises and drifts
back, then accelerates down onto the nail. The script writes the clips as
CSV, retargets them onto the arm and prints, per clip, how high the head
rises above its start and how long the strike lasts.

    python demos/01_reference_motions.py --out reference
"""

import argparse
import os

import numpy as np

from hmamp.motion import interior_maxima, load_dataset, retarget, windup_clips, write_clip
from hmamp.sim import SimConfig
from hmamp.sim.kinematics import chain_points


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="reference")
    args = parser.parse_args()

    cfg = SimConfig()
    os.makedirs(args.out, exist_ok=True)
    for clip in windup_clips(cfg):
        write_clip(os.path.join(args.out, f"{clip.name}.csv"), clip)

    # read them back the way training does
    print(f"{'clip':<10} {'frames':>6} {'robot steps':>11} {'rise [m]':>9} {'peak at [s]':>11}")
    for clip in load_dataset(args.out):
        motion = retarget(clip, config=cfg)
        y = chain_points(motion.q, cfg)["head"][:, 1]
        peaks = interior_maxima(y, above=y[0])
        peak = peaks[0] if peaks else int(np.argmax(y))
        print(f"{clip.name:<10} {len(clip):>6} {len(motion.q):>11} {y[peak] - y[0]:>9.3f} "
              f"{motion.t[peak]:>11.2f}")


if __name__ == "__main__":
    main()
