DEFAULTS = {
    # Fourier inversion / generic quadrature
    "quad_abs_tol": 1e-8,
    "quad_limit": 200,
    # kernel truncation targets
    "lattice_tail_tol": 1e-8,  # Grunwald-Letnikov, globally binomial
    "gw_tail_tol": 1e-6,  # Gillis-Weiss tails are heavier
    "max_radius": 65536,
    # lattice
    "window_loss_tol": 1e-6,
    "max_half_width": 1_000_000,
    # Monte Carlo
    "mc_block_size": 4096,
    "mc_step_chunk": 256,
    "threads": None,  # None -> executor default
    # diagnostics
    "ks_cache_threshold": 10_000,
    "cdf_cache_points": 1024,
    "converge_tol": 0.02,
    # CLI fallbacks
    "h": 0.05,
    "t": 1.0,
    "samples": 10_000,
    "seed": 0,
}
