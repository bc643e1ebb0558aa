"""Noisy measurements and the value of regularisation.

Gaussian noise with standard deviation 0.04 is added on [-15, 30]. The
unregularised fit chases the noise; the deviation-from-one penalties damp
it, the L1 form most. One seed, 100 iterations each; a few minutes.
"""

from boussinesq_inverse import ExperimentConfig, run_experiment

for variant, alpha in (("L2_DEV1", 0.0), ("L2_DEV1", 0.01), ("L1_DEV1", 0.01)):
    cfg = ExperimentConfig.preset("exp5", variant=variant, alpha=alpha, seed=0,
                                  optim={"max_iters": 100, "ftol": 1e-15})
    rep = run_experiment(cfg)
    print(f"{variant} alpha={alpha:<5}: error {rep.l2_error:.3f}")
