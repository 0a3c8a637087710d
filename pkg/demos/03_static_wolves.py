"""Three scripted wolf behaviours against random villagers."""
from werewolf_rl.env import EnvConfig
from werewolf_rl.game import GameConfig
from werewolf_rl.policies import RandomPolicy, make_wolf_policy
from werewolf_rl.simulation import run_episodes

cfg = EnvConfig(GameConfig(9, 3))
print(f"{'wolves':>8} {'win rate':>9} {'accord':>7} {'days':>5} {'suicides':>9}")
for kind in ("random", "unite", "revenge"):
    agg = run_episodes(cfg, make_wolf_policy(kind), RandomPolicy(), 10_000, seed=1)
    print(f"{kind:>8} {agg.villager_win_rate.mean:9.4f} {agg.mean_accord.mean:7.3f} "
          f"{agg.mean_days.mean:5.2f} {agg.mean_suicide_rate.mean:9.3f}")

# unite wolves vote as a block, so executions agree more and games end sooner.
# revenge wolves kill whoever voted against one of them at the last day
# vote, which removes exactly the villagers that happened to find a wolf.
