"""Which domains let the process get from x to y?

The process moves one coordinate at a time, so two balls touching only
diagonally are disconnected for it even though their union is connected.

Run:  python3 demos/03_rook_connectivity.py
"""

from cylstable import check_hgamma_domain, paper_domain, rook_components, same_class

for name in ("disc", "parallel_balls", "four_squares", "nested_channel_6_1", "tilted_rect_6_2",
             "diagonal_balls_6_3"):
    dom = paper_domain(name)
    grid = rook_components(dom)
    line = f"{name:20s} components={grid.n_components} (h={grid.h:.4g})"
    if "x" in dom.marked:
        line += f"  x~y: {same_class(grid, dom.marked['x'], dom.marked['y'])}"
    print(line)

rep = check_hgamma_domain(paper_domain("four_squares"), gamma=1.0, n_pairs=500, seed=0)
print("four_squares (H_1) holds:", rep.hgamma_holds, " counterexample:", rep.counterexample)
