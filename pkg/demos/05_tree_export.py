"""Print the full random-play outcome tree for a small game."""
from werewolf_rl.baseline import enumerate_tree

tree = enumerate_tree(1, 4)
print(tree.to_text())
print()
print("leaves:", len(tree.leaves), " villager win probability:", tree.win_probability())

# the machine-readable outline has one node per line
print()
print("\n".join(enumerate_tree(2, 5).to_outline().splitlines()[:12]))
