"""Walk through the smallest interesting case: four points on a line.

Plain Ward merges the two tight pairs first and then joins them. A-Ward
reaches the same two clusters after anomalous-pattern initialisation finds
them directly, so its agglomeration has nothing left to do at k = 2.
"""
import numpy as np

from award import a_ward, adjusted_rand, silhouette, ward
from award.io import to_newick

y = np.array([[0.0], [1.0], [10.0], [11.0]])
names = ["a", "b", "c", "d"]

full = ward(y, 1)
print("Ward merges (left, right, cost, size):")
for m in full.dendrogram.merges:
    print(f"  {m.left:>2} {m.right:>2} {m.cost:8.2f} {m.size}")
print("Newick:", to_newick(full.dendrogram, names))

two = ward(y, 2).partition
fast = a_ward(y, 2)
print("\nA-Ward K* =", fast.k_star)
print("ARI(Ward, A-Ward) =", adjusted_rand(two, fast.partition))
print("Manhattan Silhouette of the two clusters: %.5f" % silhouette(y, two, "manhattan"))
