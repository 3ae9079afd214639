"""Why a backswing helps: direct strike versus a tracked wind-up.

Both strikes are open-loop joint targets fed to the same PD controller on
the same nail. The direct strike is the straight-line planned baseline; the
wind-up replays a retargeted reference clip. The nail force grows with the
head speed at impact, and the wind-up builds that speed over a longer path.

    python demos/02_why_wind_up.py
"""

from dataclasses import replace

import numpy as np

from hmamp.baselines import plan_dppcp
from hmamp.motion import retarget, windup_clips
from hmamp.sim import SimConfig, reset, step


def strike(cfg, nail, targets):
    """Run ``targets`` (held at the last row) until the episode ends."""
    state, _ = reset(cfg, 0)
    state.nail_pos = np.array(nail)
    state.randomized_friction = 1.0
    state.randomized_gain_scale = 1.0
    for k in range(cfg.max_steps):
        state, _, contact, kind = step(state, targets[min(k, len(targets) - 1)], cfg)
        if kind.done:
            force = contact.force_norm if contact is not None else 0.0
            return kind.value, k + 1, force
    return "timeout", cfg.max_steps, 0.0


def main():
    cfg = replace(SimConfig(), observation_noise=False)
    print(f"desired force F_d = {cfg.desired_force:.0f} N\n")
    print(f"{'strike':<22} {'outcome':<10} {'steps':>5} {'force [N]':>10}")
    for clip in windup_clips(cfg):
        nail = clip.points["xf"][-1] + [0.0, 0.01]  # clip ends 1 cm below the nail head
        for duration in (0.3, 0.5):
            plan = plan_dppcp(cfg, nail, duration)
            print(f"{'direct ' + format(duration, '.1f') + ' s':<22} "
                  "{:<10} {:>5} {:>10.1f}".format(*strike(cfg, nail, plan.targets)))
        motion = retarget(clip, config=cfg)
        print(f"{clip.name + ' (tracked)':<22} "
              "{:<10} {:>5} {:>10.1f}".format(*strike(cfg, nail, motion.q[1:])))
        print()


if __name__ == "__main__":
    main()
