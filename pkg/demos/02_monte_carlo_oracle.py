"""Play the real engine with random agents and compare against the exact value."""
import time

from werewolf_rl.baseline import exact_win_prob, monte_carlo_win_prob
from werewolf_rl.game import GameConfig
from werewolf_rl.policies import RandomPolicy, make_wolf_policy

exact = float(exact_win_prob(3, 6))
t0 = time.perf_counter()
mc = monte_carlo_win_prob(GameConfig(9, 3), make_wolf_policy("random"), RandomPolicy(), 20_000, seed=7)
print(f"exact     {exact:.5f}")
print(f"simulated {mc.estimate:.5f}  95% CI [{mc.ci_low:.5f}, {mc.ci_high:.5f}]"
      f"  ({time.perf_counter() - t0:.1f} s for {mc.episodes} games)")
print("within 3 standard errors:", mc.agrees_with(exact))

# the same check on a few other table sizes
for w, v in [(1, 4), (2, 6), (2, 14)]:
    p = float(exact_win_prob(w, v))
    est = monte_carlo_win_prob(GameConfig(w + v, w), make_wolf_policy("random"), RandomPolicy(), 5_000, seed=w * 100 + v)
    print(f"W={w} V={v:2d}: exact {p:.4f}, simulated {est.estimate:.4f}, agree={est.agrees_with(p)}")
