"""How often do villagers win when everyone plays at random?

The answer is a small Markov chain on (wolves, villagers), solved here with
exact fractions.
"""
from werewolf_rl.baseline import exact_win_prob

# nine players, three of them wolves
p = exact_win_prob(3, 6)
print("9 players, 3 wolves:", p, f"= {float(p):.2%}")

# the table grows quickly with more seats; villagers do better in big games
for n in (9, 12, 16, 21):
    row = []
    for w in range(1, 6):
        if n - w > w + 1:
            row.append(f"W={w}: {float(exact_win_prob(w, n - w)):7.4f}")
    print(f"N={n:2d}  " + "  ".join(row))

# which wolf count puts a 21-seat game at 11.62%?
hits = [w for w in range(1, 10) if round(float(exact_win_prob(w, 21 - w)) * 100, 2) == 11.62]
print("21 players at 11.62% needs W =", hits)
