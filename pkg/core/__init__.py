# Core package: stable law, walk kernels, lattice, Monte Carlo and diagnostics
