#!/usr/bin/env python3
# A two-equation system whose dependent variables are polar coordinates:
#
#     y^2 = (x - 1)^-2          (a circle whose radius depends on the input)
#     y cos z - y sin z = 0     (the point lies on the diagonal)
#
# Solving for the radius y is sensitive to x; solving for the angle z is
# not.  The radius has the analytic solution map y(x) = 1 / (1 - x), so at
# x0 = 0 the condition numbers are exactly (1, 0, 1).

import numpy as np

from crepcond import (
    condition_numbers,
    constrained_nearest_solution,
    evaluate_blocks,
    polar_problem,
    solution_map_derivative,
)

problem, point = polar_problem(x0=0.0)
print(f"problem: {problem.name}")
print(f"reference solution: x0={point.x[0]:g}, y0={point.y[0]:g}, z0={point.z[0]:.6f}")

blocks = evaluate_blocks(problem, point)
print("\nJacobian blocks in chart coordinates:")
print("  d/dx:", blocks.j_x.ravel())
print("  d/dy:", blocks.j_y.ravel())
print("  d/dz:", blocks.j_z.ravel())

dh = solution_map_derivative(blocks)
print(f"\nsolution-map derivative DH = {dh.ravel()}  (analytic value: 1)")

report = condition_numbers(problem, point, n_samples=5, seed=0)
cert = report.certificate
print(f"\nrank certificate: passed={cert.passed}, r={cert.r}, k={cert.k}, "
      f"checked at {cert.samples_checked} nearby solutions")
print(f"kappa_y  = {report.kappa_y:.12f}   (radius:   sensitive, kappa = 1)")
print(f"kappa_z  = {report.kappa_z:.3e}   (angle:    insensitive)")
print(f"kappa_yz = {report.kappa_yz:.12f}   (both:     dominated by the radius)")

# Perturb the input and re-solve: the radius moves like the condition
# number predicts, the angle stays put.
print("\nperturb-and-resolve:")
for dx in (1e-2, 1e-3, 1e-4):
    res = constrained_nearest_solution(problem, point, np.array([dx]))
    print(f"  x = {dx:7.0e}: y = {res.y[0]:.10f} (analytic {1/(1-dx):.10f}), "
          f"|z - z0| = {abs(res.z[0] - point.z[0]):.2e}, ratio = {abs(res.y[0]-point.y[0])/dx:.6f}")
print("the ratio tends to kappa_y = 1 as the perturbation shrinks")
