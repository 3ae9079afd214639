"""Train the style-guided policy and its goal-only ablation, then compare.

Both learners share every setting except the style term: the ablation sets
its weight to zero and never trains a discriminator. After training, each
policy and the planned straight-line baseline strike ten nails without
observation noise, and the script prints the metric table together with
how often each method raised the hammer before striking.

    python demos/03_train_and_compare.py --episodes 200 --seed 0

A few hundred episodes per method take several minutes on one core.
"""

import argparse
import time
from dataclasses import replace

from hmamp.config import ExperimentConfig
from hmamp.evaluation import evaluate_dppcp, evaluate_policy
from hmamp.metrics import format_report
from hmamp.motion import ReferenceSet, windup_clips
from hmamp.ppo import Trainer


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    base = ExperimentConfig()
    reference = ReferenceSet.from_clips(windup_clips(base.env), base.env)
    table, lines = {}, []
    for method, column in (("hmamp", "HMAMP"), ("rl-noamp", "RL-noAMP")):
        cfg = base.for_method(method)
        training = replace(cfg.training, seed=args.seed)
        trainer = Trainer(cfg.env, training, cfg.rewards, cfg.discriminator, reference)
        t0 = time.perf_counter()
        trainer.train(episodes=args.episodes)
        print(f"{column}: trained {args.episodes} episodes in {time.perf_counter() - t0:.0f} s")
        ev = evaluate_policy(trainer.policy, cfg.env, 10, 1000 + args.seed, reference.head_paths)
        table[column] = ev.summary()
        lines.append((column, ev))

    ev = evaluate_dppcp(base.env, 10, 1000 + args.seed, reference.head_paths)
    table["DPPCP"] = ev.summary()
    lines.append(("DPPCP", ev))

    print()
    print(format_report(table))
    print()
    for column, ev in lines:
        print(f"{column:<9} success {ev.success_rate:.0%}  backswing {ev.backswing_rate:.0%}")


if __name__ == "__main__":
    main()
