"""
Success rate against circuit depth
==================================

Optimize the register-swap circuit with Adam from many random starts and
count how often the most likely tour is a shortest one. A small sweep runs in
seconds; `qtsp sweep-depth --paper-scale` runs the full protocol.
"""

from qtsp.ansatz import OptConfig, SweepConfig, depth_sweep, run_vqe
from qtsp.encoding import ReducedEncoding
from qtsp.instances import generate_instance, solve_exact

# %% a single run
inst = generate_instance(5, 3)
enc = ReducedEncoding(5)
res = run_vqe(inst, enc, L=10, seed=1)
print("final energy", round(res.final_energy, 3), "optimum", round(solve_exact(inst).optimal_length, 3))
print("most likely tour", res.best_tour.to_full_tour(), "success", res.success)

# %% a reduced sweep: 2 instances x 5 starts, 1000 Adam steps
cfg = SweepConfig(n=5, depths=(2, 6, 10), num_instances=2, num_inits=5, opt=OptConfig(iterations=1000))
_, table = depth_sweep(cfg)
for row in table:
    print(f"L={row['L']:>2}  mean {row['mean']:.2f}  min {row['min']:.2f}  max {row['max']:.2f}")
