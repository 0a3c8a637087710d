"""A short PPO run for bit-communicating villagers.

120 iterations take about a minute and a half on one core; the acceptance
suite uses 300.
"""
from werewolf_rl.env import CommSpec, EnvConfig
from werewolf_rl.game import GameConfig
from werewolf_rl.learner.ppo import PPOConfig
from werewolf_rl.learner.train import evaluate, train

env = EnvConfig(GameConfig(9, 3), CommSpec(signal_length=1, signal_range=2))
ppo = PPOConfig()


def show(stats, _params):
    if stats.iteration % 10 == 0:
        m = stats.metrics
        print(f"iter {stats.iteration:3d}  win {m.villager_win_rate.mean:.3f}  "
              f"accord {m.mean_accord.mean:.3f}  entropy {stats.entropy:.3f}")


result = train(env, ppo, iterations=120, seed=0, on_iteration=show)
ev = evaluate(env, result.params, "random", episodes=1000, seed=99)
print(f"evaluation win rate {ev.villager_win_rate.mean:.3f} +/- {ev.villager_win_rate.se:.3f}"
      f"  (random play: 0.031)")
